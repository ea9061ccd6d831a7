"""MFCC acoustic features: Hamming-windowed frames, mel filterbank, log, DCT, deltas."""

from __future__ import annotations

import wave
from dataclasses import dataclass

import numpy as np
from scipy.fft import dct

from mmsumm.errors import ConfigError, FormatError, InputError


@dataclass(frozen=True)
class MfccConfig:
    sample_rate: int = 16000
    win_ms: float = 25.0
    hop_ms: float = 10.0
    n_mels: int = 40
    n_ceps: int = 13
    deltas: tuple[bool, bool] = (True, True)
    out_width: int = 512
    log_floor: float = 1e-10
    f_min: float = 0.0
    f_max: float = 8000.0

    @property
    def win_len(self):
        return int(round(self.sample_rate * self.win_ms / 1000))

    @property
    def hop_len(self):
        return int(round(self.sample_rate * self.hop_ms / 1000))

    @property
    def n_fft(self):
        return 1 << (self.win_len - 1).bit_length()

    @property
    def feature_width(self):
        return self.n_ceps * (1 + sum(bool(d) for d in self.deltas))

    def validate(self):
        if not self.win_ms > self.hop_ms > 0:
            raise ConfigError("need win_ms > hop_ms > 0")
        if self.n_ceps > self.n_mels:
            raise ConfigError("n_ceps cannot exceed n_mels")
        if self.out_width < self.feature_width:
            raise ConfigError(f"out_width {self.out_width} < {self.feature_width} feature values")
        if not 0 <= self.f_min < self.f_max <= self.sample_rate / 2:
            raise ConfigError("mel band must lie within [0, Nyquist]")
        return self


@dataclass
class AcousticFeatures:
    frames: np.ndarray  # d_w x out_width
    frame_times: np.ndarray  # start time of each frame, seconds


def frame_count(n_samples, config: MfccConfig) -> int:
    if n_samples < config.win_len:
        return 0
    return (n_samples - config.win_len) // config.hop_len + 1


def frame_and_window(signal, config: MfccConfig) -> np.ndarray:
    signal = np.asarray(signal, dtype=np.float64).reshape(-1)
    n = frame_count(signal.size, config)
    if n == 0:
        raise InputError(
            f"signal has {signal.size} samples; need at least {config.win_len} for one frame"
        )
    starts = np.arange(n) * config.hop_len
    frames = signal[starts[:, None] + np.arange(config.win_len)]
    return frames * np.hamming(config.win_len)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_edges(config: MfccConfig) -> np.ndarray:
    """``n_mels + 2`` band edges in Hz, equally spaced on the mel scale."""
    mels = np.linspace(hz_to_mel(config.f_min), hz_to_mel(config.f_max), config.n_mels + 2)
    return mel_to_hz(mels)


def mel_centers(config: MfccConfig) -> np.ndarray:
    return mel_edges(config)[1:-1]


def mel_filterbank(config: MfccConfig) -> np.ndarray:
    """Triangular filters, ``n_mels x (n_fft//2 + 1)``, unit peak at each center."""
    freqs = np.arange(config.n_fft // 2 + 1) * config.sample_rate / config.n_fft
    edges = mel_edges(config)
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lo) / (mid - lo)
    falling = (hi - freqs) / (hi - mid)
    return np.maximum(0.0, np.minimum(rising, falling))


def power_spectrum(frames, config: MfccConfig) -> np.ndarray:
    spec = np.fft.rfft(frames, n=config.n_fft, axis=-1)
    return np.abs(spec) ** 2


def mel_filterbank_energies(frames, config: MfccConfig) -> np.ndarray:
    return power_spectrum(frames, config) @ mel_filterbank(config).T


def deltas(feats: np.ndarray) -> np.ndarray:
    """Symmetric two-frame difference along time with edge replication."""
    padded = np.concatenate([feats[:1], feats, feats[-1:]], axis=0)
    return (padded[2:] - padded[:-2]) / 2.0


def mfcc(signal, config: MfccConfig | None = None) -> AcousticFeatures:
    config = (config or MfccConfig()).validate()
    frames = frame_and_window(signal, config)
    energies = mel_filterbank_energies(frames, config)
    logmel = np.log(energies + config.log_floor)
    ceps = dct(logmel, type=2, norm="ortho", axis=-1)[:, : config.n_ceps]
    parts = [ceps]
    d1 = deltas(ceps)
    if config.deltas[0]:
        parts.append(d1)
    if config.deltas[1]:
        parts.append(deltas(d1))
    feats = np.concatenate(parts, axis=1)
    out = np.zeros((feats.shape[0], config.out_width))
    out[:, : feats.shape[1]] = feats
    times = np.arange(feats.shape[0]) * config.hop_len / config.sample_rate
    return AcousticFeatures(out, times)


def read_wav(path, sample_rate=16000) -> np.ndarray:
    """Read 16-bit signed mono PCM at ``sample_rate``; returns floats in [-1, 1)."""
    try:
        with wave.open(str(path), "rb") as wf:
            channels, width, rate = wf.getnchannels(), wf.getsampwidth(), wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except (wave.Error, EOFError) as exc:
        raise FormatError(f"{path}: not a PCM WAV file ({exc})") from None
    if channels != 1 or width != 2:
        raise FormatError(f"{path}: need 16-bit mono, got {channels} channel(s) of {8 * width} bits")
    if rate != sample_rate:
        raise FormatError(f"{path}: sample rate {rate} Hz, expected {sample_rate} Hz")
    return np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0


def write_wav(path, signal, sample_rate=16000):
    pcm = np.clip(np.round(np.asarray(signal) * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(sample_rate)
        wf.writeframes(pcm.tobytes())
