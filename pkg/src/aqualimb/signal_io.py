"""File and stream ingestion for the two sensing channels.

Head-motion samples are timestamped accelerations plus Euler angles (CSV or
a live pull source); throat audio is 16-bit mono PCM (WAV). Both modalities
share the sliding-window plumbing used by the downstream detectors.
"""

from __future__ import annotations

import csv
import time
import wave
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, ParseError, ValidationError

IMU_CSV_HEADER = ("t", "ax", "ay", "az", "roll", "pitch", "yaw")

#: int16 full-scale amplitude.
FULL_SCALE = 32767


def wrap_degrees(angle):
    """Map angles to [-180, 180]; values already in range pass through exactly."""
    a = np.asarray(angle, dtype=float)
    wrapped = (a + 180.0) % 360.0 - 180.0
    return np.where((a >= -180.0) & (a <= 180.0), a, wrapped)


@dataclass
class ImuSample:
    """One head-motion sample: time, 3-axis acceleration, 3 Euler angles.

    Euler order is (roll, pitch, yaw) in degrees; pitch governs
    extension/flexion, roll governs bending, yaw governs rotation.
    """

    t: float
    accel: np.ndarray  # (3,) m/s^2
    euler: np.ndarray  # (3,) degrees

    def __post_init__(self):
        self.accel = np.asarray(self.accel, dtype=float).reshape(3)
        self.euler = wrap_degrees(np.asarray(self.euler, dtype=float).reshape(3))


@dataclass
class AudioSegment:
    """A run of PCM16 samples with rate metadata and stream-relative start."""

    sample_rate: int
    samples: np.ndarray  # int16
    t0: float = 0.0

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValidationError(f"sample_rate must be positive, got {self.sample_rate}")
        self.samples = np.asarray(self.samples)
        if self.samples.size == 0:
            raise ValidationError("audio segment must contain at least one sample")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    @property
    def duration_ms(self) -> float:
        return 1000.0 * self.duration

    def as_float(self) -> np.ndarray:
        """Samples scaled to [-1, 1)."""
        return self.samples.astype(np.float64) / 32768.0


def samples_to_arrays(stream):
    """Stack a sample sequence into (t, accel Nx3, euler Nx3) arrays."""
    t = np.array([s.t for s in stream], dtype=float)
    accel = np.array([s.accel for s in stream], dtype=float).reshape(-1, 3)
    euler = np.array([s.euler for s in stream], dtype=float).reshape(-1, 3)
    return t, accel, euler


def arrays_to_samples(t, accel, euler):
    return [ImuSample(float(ti), a, e) for ti, a, e in zip(t, accel, euler)]


def read_imu_csv(path):
    """Read an IMU stream from CSV with header ``t,ax,ay,az,roll,pitch,yaw``.

    Timestamps must be strictly increasing; any malformed row aborts with the
    offending line number.
    """
    samples = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", path=path) from None
        if tuple(h.strip() for h in header) != IMU_CSV_HEADER:
            raise ParseError(
                f"expected header {','.join(IMU_CSV_HEADER)}, got {','.join(header)}",
                path=path, line=1,
            )
        prev_t = None
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 7:
                raise ParseError(f"expected 7 fields, got {len(row)}", path=path, line=lineno)
            try:
                values = [float(v) for v in row]
            except ValueError as exc:
                raise ParseError(str(exc), path=path, line=lineno) from None
            t = values[0]
            if prev_t is not None and t <= prev_t:
                raise ValidationError(
                    f"{path}:{lineno}: timestamps not strictly increasing ({t} after {prev_t})"
                )
            prev_t = t
            samples.append(ImuSample(t, values[1:4], values[4:7]))
    return samples


def write_imu_csv(path, stream):
    """Inverse of :func:`read_imu_csv`; floats written with round-trip repr."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(IMU_CSV_HEADER)
        for s in stream:
            writer.writerow([repr(float(s.t))]
                            + [repr(float(v)) for v in s.accel]
                            + [repr(float(v)) for v in s.euler])


def read_wav(path) -> AudioSegment:
    """Read a mono PCM16 WAV file exactly as stored."""
    try:
        with wave.open(str(path), "rb") as wf:
            if wf.getcomptype() != "NONE":
                raise FormatError(f"{path}: compressed WAV not supported ({wf.getcomptype()})")
            if wf.getsampwidth() != 2:
                raise FormatError(f"{path}: only 16-bit PCM supported, got {8 * wf.getsampwidth()}-bit")
            if wf.getnchannels() != 1:
                raise FormatError(f"{path}: only mono supported, got {wf.getnchannels()} channels")
            rate = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except wave.Error as exc:
        raise FormatError(f"{path}: not a RIFF/WAVE file ({exc})") from None
    samples = np.frombuffer(raw, dtype="<i2")
    return AudioSegment(sample_rate=rate, samples=samples)


def write_wav(path, segment: AudioSegment):
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(segment.sample_rate)
        wf.writeframes(np.asarray(segment.samples, dtype="<i2").tobytes())


def decimate_imu(stream, factor):
    """Keep every ``factor``-th sample (factor 1 is the identity)."""
    if int(factor) != factor or factor < 1:
        raise ValueError(f"decimation factor must be a positive integer, got {factor}")
    return list(stream[:: int(factor)])


class SlidingWindow:
    """Bounded FIFO over stream items; pushes drop the oldest first."""

    def __init__(self, capacity):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self._buf = deque(maxlen=int(capacity))

    def push(self, item):
        self._buf.append(item)

    def extend(self, items):
        self._buf.extend(items)

    @property
    def capacity(self):
        return self._buf.maxlen

    def items(self):
        return list(self._buf)

    def __len__(self):
        return len(self._buf)


class ReplaySource:
    """Pull-based sample source replaying a recorded stream.

    With ``realtime=True``, ``next_sample`` paces delivery at the stream's own
    timestamps divided by ``speed`` (1.0 = real time). Otherwise samples are
    returned immediately. Returns ``None`` once exhausted, or on timeout in
    realtime mode.
    """

    def __init__(self, samples, speed=1.0, realtime=False, timestamp=lambda s: s.t):
        if speed <= 0:
            raise ValueError("speed must be positive")
        self._samples = list(samples)
        self._speed = speed
        self._realtime = realtime
        self._timestamp = timestamp
        self._idx = 0
        self._wall0 = None
        self._t0 = None

    def next_sample(self, timeout=None):
        if self._idx >= len(self._samples):
            return None
        sample = self._samples[self._idx]
        if self._realtime:
            t = self._timestamp(sample)
            now = time.monotonic()
            if self._wall0 is None:
                self._wall0, self._t0 = now, t
            due = self._wall0 + (t - self._t0) / self._speed
            wait = due - now
            if wait > 0:
                if timeout is not None and wait > timeout:
                    time.sleep(timeout)
                    return None
                time.sleep(wait)
        self._idx += 1
        return sample

    def __iter__(self):
        while True:
            s = self.next_sample()
            if s is None:
                return
            yield s
