"""Mel-frequency cepstral features for the throat channel.

A fragment becomes a fixed 20x20 matrix: 20 cepstral coefficients by 20 time
frames, truncating longer fragments at the onset side and zero-padding
shorter ones. The filterbank uses triangular filters with centers snapped to
FFT bins, so each filter peaks at weight 1.0 on its center bin.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np
from scipy.fft import dct

from .signal_io import AudioSegment

#: floor inside the log so silence stays finite; multiplicative gain changes
#: cancel exactly as long as filter energies stay above it.
LOG_FLOOR = 1e-30


@dataclass(frozen=True)
class MfccConfig:
    sample_rate: int = 16000
    frame_ms: float = 25.0
    hop_ms: float = 10.0
    n_fft: int = 512
    n_filters: int = 26
    n_coeffs: int = 20
    n_frames: int = 20
    preemphasis: float = 0.97
    fmin: float = 0.0
    fmax: float | None = None  # None -> Nyquist

    @property
    def frame_len(self) -> int:
        return int(round(self.frame_ms * 1e-3 * self.sample_rate))

    @property
    def hop(self) -> int:
        return int(round(self.hop_ms * 1e-3 * self.sample_rate))

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, text) -> "MfccConfig":
        return cls(**json.loads(text))


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=float) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=float) / 2595.0) - 1.0)


def mel_filterbank(n_filters, n_fft, rate, fmin=0.0, fmax=None):
    """(n_filters, n_fft//2 + 1) triangular filters equally spaced in mel.

    Band edges are snapped to FFT bins; every filter peaks at exactly 1.0 on
    its center bin and overlaps its neighbors at their centers.
    """
    if fmax is None:
        fmax = rate / 2.0
    if not 0 <= fmin < fmax <= rate / 2.0:
        raise ValueError(f"need 0 <= fmin < fmax <= rate/2, got fmin={fmin} fmax={fmax}")
    mels = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_filters + 2)
    bins = np.floor((n_fft + 1) * mel_to_hz(mels) / rate).astype(int)
    if np.any(np.diff(bins) < 1):
        raise ValueError(
            f"{n_filters} filters do not fit {n_fft}-point FFT at {rate} Hz: "
            "adjacent band edges collapse onto the same bin"
        )
    fb = np.zeros((n_filters, n_fft // 2 + 1))
    for m in range(n_filters):
        lo, center, hi = bins[m], bins[m + 1], bins[m + 2]
        for k in range(lo, center):
            fb[m, k] = (k - lo) / (center - lo)
        for k in range(center, hi):
            fb[m, k] = (hi - k) / (hi - center)
    return fb


def filter_center_bins(n_filters, n_fft, rate, fmin=0.0, fmax=None):
    if fmax is None:
        fmax = rate / 2.0
    mels = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_filters + 2)
    return np.floor((n_fft + 1) * mel_to_hz(mels) / rate).astype(int)[1:-1]


def frame_count(n_samples, cfg: MfccConfig) -> int:
    return (n_samples - cfg.frame_len) // cfg.hop + 1


def power_spectrum(fragment: AudioSegment, cfg: MfccConfig):
    """(n_fft//2+1, T) windowed power spectrogram after pre-emphasis."""
    x = fragment.as_float()
    if len(x) < cfg.frame_len:
        raise ValueError(
            f"fragment of {len(x)} samples is shorter than one {cfg.frame_len}-sample frame"
        )
    y = np.empty_like(x)
    y[0] = x[0]
    y[1:] = x[1:] - cfg.preemphasis * x[:-1]
    n = frame_count(len(y), cfg)
    idx = np.arange(cfg.frame_len)[None, :] + cfg.hop * np.arange(n)[:, None]
    frames = y[idx] * np.hanning(cfg.frame_len)[None, :]
    spec = np.fft.rfft(frames, n=cfg.n_fft, axis=1)
    return (np.abs(spec) ** 2 / cfg.n_fft).T


def filterbank_energies(fragment: AudioSegment, cfg: MfccConfig):
    """(n_filters, T) linear mel-band energies (pre-log), for inspection."""
    fb = mel_filterbank(cfg.n_filters, cfg.n_fft, cfg.sample_rate, cfg.fmin, cfg.fmax)
    return fb @ power_spectrum(fragment, cfg)


def mfcc(fragment: AudioSegment, cfg: MfccConfig | None = None):
    """Raw MFCC matrix (n_coeffs, T): log mel energies decorrelated by DCT-II."""
    cfg = cfg or MfccConfig()
    energies = filterbank_energies(fragment, cfg)
    log_e = np.log(np.maximum(energies, LOG_FLOOR))
    coeffs = dct(log_e, type=2, norm="ortho", axis=0)
    return coeffs[: cfg.n_coeffs]


def fix_time_dim(raw, n_frames=20):
    """Cut or zero-pad the time axis to exactly n_frames columns."""
    raw = np.asarray(raw, dtype=float)
    n_coeffs, t = raw.shape
    if t >= n_frames:
        return raw[:, :n_frames].copy()
    out = np.zeros((n_coeffs, n_frames))
    out[:, :t] = raw
    return out


def mfcc_matrix(fragment: AudioSegment, cfg: MfccConfig | None = None):
    """The classifier input: mfcc() fixed to (n_coeffs, n_frames)."""
    cfg = cfg or MfccConfig()
    return fix_time_dim(mfcc(fragment, cfg), cfg.n_frames)
