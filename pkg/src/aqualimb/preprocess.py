"""Front-end conditioning for both modalities.

Low-pass smoothing of the head-motion channels, adaptive-threshold endpoint
detection (shared hysteresis core for motion energy and audio energy),
spectral-subtraction noise reduction, and the 64 ms running amplitude
tracker that scales the continuous throat commands.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import butter, lfilter, lfilter_zi

from .signal_io import AudioSegment, FULL_SCALE, samples_to_arrays

#: RMS of a full-scale sinusoid; the reference for amplitude A in [0, 1].
FULL_SCALE_RMS = FULL_SCALE / math.sqrt(2.0)


@dataclass
class SegmenterConfig:
    """Knobs for endpoint detection on both channels.

    The adaptive threshold is median + k_sigma * MAD of the activity
    statistic over a trailing quiet window; onset fires above the threshold,
    offset below offset_factor times the onset threshold.
    """

    # Energy statistics are chi-squared-like (heavy right tail), so the MAD
    # multiplier must sit well above the textbook Gaussian 3-4 range; the
    # floor ratio keeps the offset level (0.5 x threshold) above the noise
    # median when the energy distribution is concentrated (audio frames).
    k_sigma: float = 12.0
    thr_floor_ratio: float = 4.0
    quiet_window_s: float = 2.0
    warmup_s: float = 0.4       # audio frames are independent; short warmup is fine
    imu_warmup_s: float = 1.0   # low-passed motion energy is correlated over ~10 frames
    offset_factor: float = 0.5
    min_seg_s: float = 0.150
    max_seg_s: float = 3.0
    min_gap_s: float = 0.200
    frame_ms: float = 32.0      # audio analysis frame
    hop_ms: float = 16.0
    lowpass_hz: float = 5.0     # IMU smoothing cutoff at the classification rate
    accel_hp_hz: float = 0.5    # removes gravity/bias before motion energy
    zcr_k: float = 4.0          # ZCR deviation gate for boundary extension
    zcr_extend_max: int = 8     # frames


@dataclass
class MotionSegment:
    """A contiguous run of IMU samples judged to carry an instruction."""

    samples: list
    start_idx: int
    end_idx: int  # exclusive

    def __post_init__(self):
        if self.end_idx <= self.start_idx:
            raise ValueError("segment must have end_idx > start_idx")

    @property
    def t_start(self):
        return self.samples[0].t

    @property
    def t_end(self):
        return self.samples[-1].t

    @property
    def duration(self):
        return self.t_end - self.t_start


@dataclass
class EnergyEnvelope:
    """Per-frame short-time energy (mean square) of a scalar signal."""

    values: np.ndarray
    frame_len: int
    hop: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if np.any(self.values < 0):
            raise ValueError("energy values must be nonnegative")


def low_pass(x, cutoff, rate):
    """Second-order Butterworth low-pass; unity DC gain, same length as input."""
    if not 0 < cutoff < rate / 2:
        raise ValueError(f"cutoff must lie in (0, {rate / 2}), got {cutoff}")
    b, a = butter(2, cutoff, fs=rate)
    return lfilter(b, a, np.asarray(x, dtype=float))


class StreamingLowPass:
    """Per-channel low-pass with carried filter state for chunked streams.

    Chunked output is bit-identical to filtering the concatenated signal.
    """

    def __init__(self, cutoff, rate, n_channels=1):
        if not 0 < cutoff < rate / 2:
            raise ValueError(f"cutoff must lie in (0, {rate / 2}), got {cutoff}")
        self._b, self._a = butter(2, cutoff, fs=rate)
        self._zi = [np.zeros(max(len(self._a), len(self._b)) - 1) for _ in range(n_channels)]

    def push(self, chunk):
        """chunk: (n,) or (n, n_channels); returns filtered array of same shape."""
        x = np.asarray(chunk, dtype=float)
        if x.ndim == 1:
            y, self._zi[0] = lfilter(self._b, self._a, x, zi=self._zi[0])
            return y
        out = np.empty_like(x)
        for c in range(x.shape[1]):
            out[:, c], self._zi[c] = lfilter(self._b, self._a, x[:, c], zi=self._zi[c])
        return out


def frame_signal(x, frame_len, hop):
    """Frame a 1-D signal; returns (n_frames, frame_len). No padding."""
    x = np.asarray(x)
    n = (len(x) - frame_len) // hop + 1
    if n < 1:
        return np.empty((0, frame_len), dtype=x.dtype)
    idx = np.arange(frame_len)[None, :] + hop * np.arange(n)[:, None]
    return x[idx]


def short_time_energy(x, frame_len, hop) -> EnergyEnvelope:
    frames = frame_signal(np.asarray(x, dtype=float), frame_len, hop)
    return EnergyEnvelope(values=np.mean(frames ** 2, axis=1) if len(frames) else np.zeros(0),
                          frame_len=frame_len, hop=hop)


def zero_crossing_rate(x, frame_len, hop):
    """Fraction of adjacent-sample sign changes per frame."""
    frames = frame_signal(np.asarray(x, dtype=float), frame_len, hop)
    if not len(frames):
        return np.zeros(0)
    signs = np.signbit(frames)
    return np.mean(signs[:, 1:] != signs[:, :-1], axis=1)


def adaptive_threshold(values, k_sigma):
    """median + k_sigma * MAD; positively homogeneous in the input scale."""
    v = np.asarray(values, dtype=float)
    med = float(np.median(v))
    mad = float(np.median(np.abs(v - med)))
    return med + k_sigma * mad


@dataclass
class Region:
    """Active region in frame indices; decision marks when it became final."""

    start: int
    end: int       # exclusive
    decision: int  # frame index at which the region was finalized


class ActivitySegmenter:
    """Hysteresis segmentation with a self-adapting noise-floor threshold.

    Feed one activity value per frame via :meth:`push`; finalized regions come
    back as they are confirmed (after the inter-segment gap has elapsed with
    no re-onset). The threshold tracks median + k_sigma * MAD over a trailing
    buffer of quiet frames, so it scales with the noise floor. The onset
    threshold is frozen for the lifetime of each region.
    """

    def __init__(self, fps, cfg: SegmenterConfig, warmup_s=None):
        self.fps = float(fps)
        self.cfg = cfg
        self._quiet = deque(maxlen=max(4, int(round(cfg.quiet_window_s * fps))))
        self._warmup = max(2, int(round((warmup_s if warmup_s is not None else cfg.warmup_s) * fps)))
        self._min_seg = max(1, int(round(cfg.min_seg_s * fps)))
        self._max_seg = max(self._min_seg, int(round(cfg.max_seg_s * fps)))
        self._min_gap = max(1, int(round(cfg.min_gap_s * fps)))
        self._i = 0
        self._active = False
        self._start = 0
        self._thr = math.inf
        self._pending = None  # (start, end) closed region awaiting the gap

    def current_threshold(self):
        if len(self._quiet) < self._warmup:
            return None
        quiet = np.asarray(self._quiet)
        base = adaptive_threshold(quiet, self.cfg.k_sigma)
        return max(base, self.cfg.thr_floor_ratio * float(np.median(quiet)))

    def _finalize(self, region, decision):
        start, end = region
        if end - start < self._min_seg:
            return []
        end = min(end, start + self._max_seg)
        return [Region(start, end, decision)]

    def push(self, value) -> list:
        out = []
        i = self._i
        self._i += 1
        value = float(value)

        if self._active:
            if value < self.cfg.offset_factor * self._thr:
                self._active = False
                self._pending = (self._start, i)
                self._quiet.append(value)
            elif i - self._start + 1 >= self._max_seg:
                out += self._finalize((self._start, i + 1), i)
                self._active = False
                self._pending = None
            return out

        thr = self.current_threshold()
        if thr is not None and value > thr:
            if self._pending is not None:
                if i - self._pending[1] < self._min_gap:
                    # re-onset inside the gap: resume the closed region
                    self._start = self._pending[0]
                else:
                    out += self._finalize(self._pending, i)
                    self._start = i
                self._pending = None
            else:
                self._start = i
            self._active = True
            self._thr = thr
            return out

        self._quiet.append(value)
        if self._pending is not None and i - self._pending[1] >= self._min_gap:
            out += self._finalize(self._pending, i)
            self._pending = None
        return out

    def finish(self) -> list:
        """Flush at end of stream; open regions close at the final frame."""
        out = []
        n = self._i
        if self._active:
            out += self._finalize((self._start, n), n)
            self._active = False
        elif self._pending is not None:
            out += self._finalize(self._pending, n)
            self._pending = None
        return out

    def run(self, values) -> list:
        regions = []
        for v in values:
            regions += self.push(v)
        return regions + self.finish()


def motion_energy(stream_or_arrays, rate, cfg: SegmenterConfig):
    """Per-sample activity statistic: ||high-passed accel||^2 + ||d(euler)/dt||^2.

    Expects an already low-pass-smoothed stream; the residual accel high-pass
    here only strips gravity/bias so rest sits near zero energy.
    """
    if isinstance(stream_or_arrays, tuple):
        _, accel, euler = stream_or_arrays
    else:
        _, accel, euler = samples_to_arrays(stream_or_arrays)
    if len(accel) < 3:
        return np.zeros(len(accel))
    accel_lp = np.column_stack([low_pass(accel[:, c], cfg.accel_hp_hz, rate) for c in range(3)])
    accel_hp = accel - accel_lp
    d = np.diff(euler, axis=0)
    d = (d + 180.0) % 360.0 - 180.0  # wrap-aware angle difference
    rates = np.vstack([np.zeros((1, 3)), d * rate])
    return np.sum(accel_hp ** 2, axis=1) + np.sum(rates ** 2, axis=1)


def detect_endpoints_imu(stream, cfg: SegmenterConfig, rate=None, with_regions=False):
    """Segment a smoothed IMU stream into instruction-bearing motion segments.

    With ``with_regions``, also returns the frame-level regions whose
    ``decision`` index marks when each segment became final (for latency
    accounting downstream).
    """
    stream = list(stream)
    if len(stream) < 3:
        return ([], []) if with_regions else []
    t, accel, euler = samples_to_arrays(stream)
    if rate is None:
        rate = 1.0 / float(np.median(np.diff(t)))
    energy = motion_energy((t, accel, euler), rate, cfg)
    regions = ActivitySegmenter(rate, cfg, warmup_s=cfg.imu_warmup_s).run(energy)
    segments = [MotionSegment(stream[r.start:r.end], r.start, r.end) for r in regions]
    return (segments, regions) if with_regions else segments


def _extend_by_zcr(region, energy, zcr, thr, cfg: SegmenterConfig):
    """Rabiner-style boundary extension: pull in adjacent frames whose ZCR
    deviates from the quiet ZCR statistics while retaining some energy."""
    n = len(energy)
    quiet = np.concatenate([zcr[: region.start], zcr[region.end:]])
    if quiet.size < 4:
        return region.start, region.end
    med = np.median(quiet)
    mad = np.median(np.abs(quiet - med))
    if mad <= 0:
        return region.start, region.end
    lo = med - cfg.zcr_k * mad
    hi = med + cfg.zcr_k * mad
    start, end = region.start, region.end
    floor = 0.05 * thr if thr > 0 else 0.0
    for _ in range(cfg.zcr_extend_max):
        if start > 0 and not (lo <= zcr[start - 1] <= hi) and energy[start - 1] > floor:
            start -= 1
        else:
            break
    for _ in range(cfg.zcr_extend_max):
        if end < n and not (lo <= zcr[end] <= hi) and energy[end] > floor:
            end += 1
        else:
            break
    return start, end


def detect_endpoints_audio(audio: AudioSegment, cfg: SegmenterConfig, with_regions=False):
    """Extract significant fragments via short-time energy + ZCR endpointing.

    With ``with_regions``, also returns frame-level regions (post ZCR
    extension) carrying the decision frame index.
    """
    x = audio.as_float()
    frame_len = int(round(cfg.frame_ms * 1e-3 * audio.sample_rate))
    hop = int(round(cfg.hop_ms * 1e-3 * audio.sample_rate))
    env = short_time_energy(x, frame_len, hop)
    if not len(env.values):
        return ([], []) if with_regions else []
    zcr = zero_crossing_rate(x, frame_len, hop)
    fps = audio.sample_rate / hop
    seg = ActivitySegmenter(fps, cfg)
    regions = []
    thr_at_onset = {}
    for v in env.values:
        thr = seg.current_threshold()
        new = seg.push(v)
        for r in new:
            thr_at_onset.setdefault(id(r), thr)
        regions += new
    regions += seg.finish()

    out = []
    extended = []
    for r in regions:
        thr = thr_at_onset.get(id(r)) or 0.0
        start, end = _extend_by_zcr(r, env.values, zcr, thr, cfg)
        extended.append(Region(start, end, r.decision))
        s0 = start * hop
        s1 = min(len(x), (end - 1) * hop + frame_len)
        out.append(AudioSegment(
            sample_rate=audio.sample_rate,
            samples=audio.samples[s0:s1],
            t0=audio.t0 + s0 / audio.sample_rate,
        ))
    return (out, extended) if with_regions else out


def estimate_noise_envelope(audio: AudioSegment, leading_s=0.5, cfg: SegmenterConfig | None = None):
    """Energy envelope of the leading non-speech interval, for noise_reduce."""
    cfg = cfg or SegmenterConfig()
    n = max(1, min(len(audio.samples), int(round(leading_s * audio.sample_rate))))
    frame_len = int(round(cfg.frame_ms * 1e-3 * audio.sample_rate))
    hop = int(round(cfg.hop_ms * 1e-3 * audio.sample_rate))
    head = audio.as_float()[:n]
    if len(head) < frame_len:
        return EnergyEnvelope(values=np.array([np.mean(head ** 2)]), frame_len=len(head), hop=len(head))
    return short_time_energy(head, frame_len, hop)


def noise_reduce(audio: AudioSegment, noise_profile: EnergyEnvelope,
                 n_fft=512, oversubtract=1.0, spectral_floor=0.05) -> AudioSegment:
    """Magnitude spectral subtraction against a white-noise profile.

    The profile's mean energy sets the per-bin expected noise magnitude
    (Rayleigh mean under the analysis window); magnitudes below the floor are
    clamped to spectral_floor times the noise magnitude. Output length equals
    input length.
    """
    x = audio.as_float()
    hop = n_fft // 2
    window = np.hanning(n_fft + 1)[:-1]  # periodic Hann: exact COLA at 50%

    sigma2 = float(np.mean(noise_profile.values))
    noise_mag = math.sqrt(max(sigma2, 0.0) * np.sum(window ** 2)) * math.sqrt(math.pi) / 2.0
    sub = oversubtract * noise_mag

    padded = np.concatenate([np.zeros(hop), x, np.zeros(n_fft)])
    out = np.zeros_like(padded)
    wsum = np.zeros_like(padded)
    for start in range(0, len(padded) - n_fft + 1, hop):
        frame = padded[start:start + n_fft] * window
        spec = np.fft.rfft(frame)
        mag = np.abs(spec)
        new_mag = np.maximum(mag - sub, spectral_floor * noise_mag)
        scale = np.where(mag > 0, new_mag / np.maximum(mag, 1e-300), 0.0)
        rec = np.fft.irfft(spec * scale, n=n_fft)
        out[start:start + n_fft] += rec * window
        wsum[start:start + n_fft] += window ** 2
    y = out[hop:hop + len(x)] / np.maximum(wsum[hop:hop + len(x)], 1e-12)
    samples = np.clip(np.rint(y * 32768.0), -32768, 32767).astype(np.int16)
    return AudioSegment(sample_rate=audio.sample_rate, samples=samples, t0=audio.t0)


class AmplitudeTracker:
    """Running RMS over a trailing 64 ms window as a fraction of full scale.

    A = rms(window) / (32767 / sqrt(2)), clamped to [0, 1]. Single-consumer
    stateful object; feed raw int16 chunks in stream order.
    """

    WINDOW_S = 0.064

    def __init__(self, sample_rate):
        self._n = max(1, int(round(self.WINDOW_S * sample_rate)))
        self._buf = np.zeros(0)

    def process(self, chunk) -> np.ndarray:
        """Consume a chunk; returns the per-sample amplitude A for the chunk."""
        x = np.asarray(chunk, dtype=float)
        joined = np.concatenate([self._buf, x])
        sq = np.concatenate([[0.0], np.cumsum(joined ** 2)])
        offset = len(self._buf)
        ends = np.arange(offset + 1, offset + len(x) + 1)
        starts = np.maximum(0, ends - self._n)
        rms = np.sqrt((sq[ends] - sq[starts]) / (ends - starts))
        self._buf = joined[-self._n:]
        return np.clip(rms / FULL_SCALE_RMS, 0.0, 1.0)

    @property
    def amplitude(self) -> float:
        if not len(self._buf):
            return 0.0
        rms = math.sqrt(float(np.mean(self._buf ** 2)))
        return min(1.0, rms / FULL_SCALE_RMS)


def amplitude_64ms(segment: AudioSegment) -> np.ndarray:
    """Per-sample trailing-window amplitude for a whole segment."""
    return AmplitudeTracker(segment.sample_rate).process(segment.samples)


def fragment_amplitude(segment: AudioSegment) -> float:
    """Peak trailing-window amplitude over a fragment (the Table II coefficient)."""
    a = amplitude_64ms(segment)
    return float(np.max(a)) if len(a) else 0.0
