# %% [markdown]
# # Guided ASR/OCR fusion
#
# Each slide (OCR) token attends over the transcript (ASR) tokens. The
# attended context is compared with the OCR token itself: the more alike
# they are, the smaller the gate, so slide text that merely repeats the
# transcript is damped before the two streams are concatenated.

# %%
import numpy as np

from mmsumm.fusion import fuse

rng = np.random.default_rng(1)
d = 6
asr = rng.normal(size=(5, d))
novel = rng.normal(size=(1, d))
ocr = np.vstack([asr[2:3], 0.5 * asr[4:5], novel])  # copy, scaled copy, new token
w_b = np.eye(d)

res = fuse(asr, ocr, w_b)
print("attention (ASR x OCR)\n", res.alpha.data.round(3))
print("gates", res.gates.data.round(3))

# %% [markdown]
# The copies get the smallest gates and the novel token keeps a gate of
# about one or more. The affinity passes through tanh, so attention never
# puts all its weight on one transcript token and a copy is damped rather
# than removed. With a single transcript token the context is that token,
# and an exact copy is suppressed completely.

# %%
one = asr[:1]
print("single-token gates", fuse(one, np.vstack([one, novel]), w_b).gates.data.round(6))

# %% [markdown]
# Disabling gating sets every gate to 1 and the fused stream is a plain
# concatenation.

# %%
plain = fuse(asr, ocr, w_b, gating=False)
print("ungated equals concatenation:", np.array_equal(plain.fused.data, np.vstack([asr, ocr])))
print("fused shape", res.fused.shape)
