# %% [markdown]
# # Acoustic features
#
# 25 ms Hamming frames every 10 ms, a 512-point power spectrum, 40 mel
# filters, log, an orthonormal DCT keeping 13 cepstra, plus first and
# second differences. The 39 values are zero-padded to a 512-wide row.

# %%
import numpy as np

from mmsumm.audio import MfccConfig, frame_and_window, mel_centers, mel_filterbank_energies, mfcc

cfg = MfccConfig()
sr = 16000
t = np.arange(sr // 2) / sr

out = mfcc(np.sin(2 * np.pi * 1000 * t))
print("frames x width", out.frames.shape, "first frame times", out.frame_times[:3])

# %% [markdown]
# A pure tone puts its energy in the mel filter whose centre is nearest.

# %%
for freq in (500, 1000, 2000, 4000):
    frames = frame_and_window(np.sin(2 * np.pi * freq * t), cfg)
    band = int(np.argmax(mel_filterbank_energies(frames, cfg)[0]))
    print(f"{freq:5d} Hz -> filter {band:2d} centred at {mel_centers(cfg)[band]:7.1f} Hz")

# %% [markdown]
# Silence: every log energy is the same floor, so only the DC cepstrum is non-zero.

# %%
quiet = mfcc(np.zeros(8000)).frames
print("c0", quiet[0, 0], "largest other |value|", np.abs(quiet[:, 1:]).max())
