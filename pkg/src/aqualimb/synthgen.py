"""Parametric generators of labeled head-motion and musical-scale data.

Ground truth (peak angle, timing, scale, duration) is exact by construction,
which is what lets the segmentation, classification, and latency contracts be
tested without a human-subject corpus.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .head_dtw import HeadMotionClass
from .nn import ScaleClass
from .signal_io import AudioSegment, ImuSample, write_imu_csv, write_wav

#: Euler excursion ranges (degrees) reported for the six motion types.
PEAK_RANGES = {
    HeadMotionClass.FLEXION: (45.0, 50.0),
    HeadMotionClass.EXTENSION: (70.0, 80.0),
    HeadMotionClass.BEND_LEFT: (35.0, 45.0),
    HeadMotionClass.BEND_RIGHT: (35.0, 45.0),
    HeadMotionClass.ROTATE_LEFT: (65.0, 75.0),
    HeadMotionClass.ROTATE_RIGHT: (65.0, 75.0),
}

#: sign of the governing-channel excursion for each motion
MOTION_SIGN = {
    HeadMotionClass.FLEXION: -1.0,
    HeadMotionClass.EXTENSION: 1.0,
    HeadMotionClass.BEND_LEFT: 1.0,
    HeadMotionClass.BEND_RIGHT: -1.0,
    HeadMotionClass.ROTATE_LEFT: 1.0,
    HeadMotionClass.ROTATE_RIGHT: -1.0,
}

#: C-major solfège around middle C (equal temperament, MIDI 60/62/64/65/67)
SCALE_FREQS = {
    ScaleClass.DO: 261.63,
    ScaleClass.RE: 293.66,
    ScaleClass.MI: 329.63,
    ScaleClass.FA: 349.23,
    ScaleClass.SO: 392.00,
}

HEAD_RADIUS_M = 0.09  # nominal lever arm mapping angular accel to linear accel


@dataclass
class SynthMotionSpec:
    motion: HeadMotionClass
    peak: float              # degrees on the governing Euler channel
    duration: float = 1.0    # s of actual motion
    noise_std: float = 0.0   # degrees, per Euler channel per sample
    rate: float = 100.0      # Hz
    lead: float = 2.0        # s of rest before the motion
    tail: float = 0.8        # s of rest after
    seed: int = 0


def gen_head_motion(spec: SynthMotionSpec):
    """Raised-cosine excursion on the motion's governing channel.

    The angle profile is peak * 0.5 * (1 - cos(2*pi*tau/T)); acceleration on
    the matching axis is the second derivative through a nominal head radius.
    With zero noise the sampled maximum equals `peak` exactly (the grid hits
    the midpoint).
    """
    rng = np.random.default_rng(spec.seed)
    n_lead = int(round(spec.lead * spec.rate))
    n_tail = int(round(spec.tail * spec.rate))
    n_motion = int(round(spec.duration * spec.rate)) + 1
    n = n_lead + n_motion + n_tail

    euler = np.zeros((n, 3))
    accel = np.zeros((n, 3))
    tau = np.arange(n_motion) / (n_motion - 1)  # 0..1 inclusive, midpoint exact
    profile = spec.peak * 0.5 * (1.0 - np.cos(2.0 * np.pi * tau))
    omega = 2.0 * np.pi / spec.duration
    ddot_deg = spec.peak * 0.5 * omega ** 2 * np.cos(2.0 * np.pi * tau)
    ch = spec.motion.euler_channel
    sign = MOTION_SIGN[spec.motion]
    sl = slice(n_lead, n_lead + n_motion)
    euler[sl, ch] = sign * profile
    accel[sl, ch] = sign * HEAD_RADIUS_M * np.deg2rad(ddot_deg)

    if spec.noise_std > 0:
        euler += rng.normal(0.0, spec.noise_std, euler.shape)
        accel += rng.normal(0.0, 0.05 * spec.noise_std, accel.shape)

    t = np.arange(n) / spec.rate
    return [ImuSample(float(t[i]), accel[i], euler[i]) for i in range(n)]


def motion_window(spec: SynthMotionSpec):
    """Ground-truth (start, end) seconds of the motion within the stream."""
    return spec.lead, spec.lead + spec.duration


@dataclass
class SynthToneSpec:
    scale: ScaleClass
    duration: float = 0.3       # s of tone (decides short/long downstream)
    amplitude: float = 1.0      # peak as a fraction of int16 full scale
    f0: float | None = None     # default: the scale's solfège pitch
    vibrato_hz: float = 5.0
    vibrato_depth: float = 0.01
    snr_db: float | None = 20.0  # None -> noiseless
    rate: int = 16000
    lead: float = 0.5           # s of noise-floor padding before the tone
    tail: float = 0.3
    seed: int = 0


def gen_scale_tone(spec: SynthToneSpec) -> AudioSegment:
    """Harmonic hum: f0 plus 3 harmonics at 1/h amplitude, slight vibrato,
    50 ms raised-cosine attack/release, white noise at the requested SNR."""
    rng = np.random.default_rng(spec.seed)
    n_lead = int(round(spec.lead * spec.rate))
    n_tail = int(round(spec.tail * spec.rate))
    n_tone = int(round(spec.duration * spec.rate))
    n = n_lead + n_tone + n_tail
    if spec.amplitude <= 0.0:
        return AudioSegment(sample_rate=spec.rate, samples=np.zeros(max(n, 1), dtype=np.int16))

    f0 = spec.f0 if spec.f0 is not None else SCALE_FREQS[spec.scale]
    tt = np.arange(n_tone) / spec.rate
    inst_f = f0 * (1.0 + spec.vibrato_depth * np.sin(2.0 * np.pi * spec.vibrato_hz * tt))
    phase = 2.0 * np.pi * np.cumsum(inst_f) / spec.rate
    wave = np.zeros(n_tone)
    for h in range(1, 5):
        wave += np.sin(h * phase) / h
    wave /= np.max(np.abs(wave))

    ramp = min(int(round(0.050 * spec.rate)), n_tone // 2)
    env = np.ones(n_tone)
    if ramp > 0:
        r = 0.5 * (1.0 - np.cos(np.pi * np.arange(ramp) / ramp))
        env[:ramp] = r
        env[n_tone - ramp:] = r[::-1]
    tone = spec.amplitude * wave * env

    signal = np.zeros(n)
    signal[n_lead:n_lead + n_tone] = tone
    if spec.snr_db is not None:
        p_sig = float(np.mean(tone ** 2))
        sigma = math.sqrt(p_sig / (10.0 ** (spec.snr_db / 10.0)))
        signal = signal + rng.normal(0.0, sigma, n)
    samples = np.clip(np.rint(signal * 32767.0), -32768, 32767).astype(np.int16)
    return AudioSegment(sample_rate=spec.rate, samples=samples)


def gen_head_corpus(per_class, seed=0, noise_std_max=2.0, rate=100.0):
    """Labeled corpus: peaks drawn from the per-class ranges, durations and
    noise levels varied per item. Returns [(samples, motion, spec)]."""
    rng = np.random.default_rng(seed)
    items = []
    for motion in HeadMotionClass:
        lo, hi = PEAK_RANGES[motion]
        for k in range(per_class):
            spec = SynthMotionSpec(
                motion=motion,
                peak=float(rng.uniform(lo, hi)),
                duration=float(rng.uniform(0.8, 1.4)),
                noise_std=float(rng.uniform(0.3, noise_std_max)),
                rate=rate,
                seed=int(rng.integers(0, 2 ** 31)),
            )
            items.append((gen_head_motion(spec), motion, spec))
    return items


def gen_tone_corpus(per_class, seed=0, snr_db=20.0, rate=16000):
    """Labeled corpus of tones; durations mix the short and long classes."""
    rng = np.random.default_rng(seed)
    items = []
    for scale in ScaleClass:
        for k in range(per_class):
            spec = SynthToneSpec(
                scale=scale,
                duration=float(rng.choice([rng.uniform(0.25, 0.42), rng.uniform(0.58, 0.85)])),
                amplitude=float(rng.uniform(0.4, 1.0)),
                snr_db=snr_db,
                rate=rate,
                seed=int(rng.integers(0, 2 ** 31)),
            )
            items.append((gen_scale_tone(spec), scale, spec))
    return items


def write_head_corpus(out_dir, items):
    os.makedirs(out_dir, exist_ok=True)
    manifest = {"version": 1, "kind": "head", "items": []}
    for k, (samples, motion, spec) in enumerate(items):
        name = f"imu_{k:04d}_{motion.value}.csv"
        write_imu_csv(os.path.join(out_dir, name), samples)
        manifest["items"].append({
            "path": name,
            "label": motion.value,
            "peak": spec.peak,
            "duration": spec.duration,
            "noise_std": spec.noise_std,
            "seed": spec.seed,
        })
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1)
    return path


def write_tone_corpus(out_dir, items):
    os.makedirs(out_dir, exist_ok=True)
    manifest = {"version": 1, "kind": "throat", "items": []}
    for k, (segment, scale, spec) in enumerate(items):
        name = f"tone_{k:04d}_{scale.value}.wav"
        write_wav(os.path.join(out_dir, name), segment)
        manifest["items"].append({
            "path": name,
            "label": scale.value,
            "duration": spec.duration,
            "amplitude": spec.amplitude,
            "snr_db": spec.snr_db,
            "seed": spec.seed,
        })
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1)
    return path


def _concat_motions(events, rate, total_duration, noise_std, seed):
    """One continuous IMU stream with motions inserted at event times.

    events: [(t_start, SynthMotionSpec)] with lead/tail ignored (rest fills
    the gaps). Returns (samples, [(t_start, t_end, motion)]).
    """
    rng = np.random.default_rng(seed)
    n = int(round(total_duration * rate)) + 1
    euler = rng.normal(0.0, noise_std, (n, 3)) if noise_std > 0 else np.zeros((n, 3))
    accel = rng.normal(0.0, 0.05 * noise_std, (n, 3)) if noise_std > 0 else np.zeros((n, 3))
    truth = []
    for t_start, spec in events:
        n_motion = int(round(spec.duration * rate)) + 1
        i0 = int(round(t_start * rate))
        if i0 + n_motion > n:
            raise ValueError("motion event extends past the stream end")
        tau = np.arange(n_motion) / (n_motion - 1)
        profile = spec.peak * 0.5 * (1.0 - np.cos(2.0 * np.pi * tau))
        omega = 2.0 * np.pi / spec.duration
        ddot = spec.peak * 0.5 * omega ** 2 * np.cos(2.0 * np.pi * tau)
        ch = spec.motion.euler_channel
        sign = MOTION_SIGN[spec.motion]
        euler[i0:i0 + n_motion, ch] += sign * profile
        accel[i0:i0 + n_motion, ch] += sign * HEAD_RADIUS_M * np.deg2rad(ddot)
        truth.append((t_start, t_start + spec.duration, spec.motion))
    t = np.arange(n) / rate
    samples = [ImuSample(float(t[i]), accel[i], euler[i]) for i in range(n)]
    return samples, truth


#: four actions in each of the three rotational DoFs
TWELVE_ACTION_ORDER = (
    [HeadMotionClass.BEND_LEFT, HeadMotionClass.BEND_RIGHT] * 2
    + [HeadMotionClass.EXTENSION, HeadMotionClass.FLEXION] * 2
    + [HeadMotionClass.ROTATE_LEFT, HeadMotionClass.ROTATE_RIGHT] * 2
)


def build_head_scenario(out_dir, seed=0, rate=100.0, noise_std=0.5,
                        gap=2.5, motion_duration=1.0):
    """The 12-head-action replay scenario: one IMU stream, known token order."""
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    events = []
    t = 2.0
    for motion in TWELVE_ACTION_ORDER:
        lo, hi = PEAK_RANGES[motion]
        spec = SynthMotionSpec(motion=motion, peak=float(rng.uniform(lo, hi)),
                               duration=motion_duration, rate=rate)
        events.append((t, spec))
        t += motion_duration + gap
    total = t + 1.0
    samples, truth = _concat_motions(events, rate, total, noise_std, seed)
    write_imu_csv(os.path.join(out_dir, "imu.csv"), samples)
    scenario = {
        "version": 1,
        "scheme": "head",
        "duration": total,
        "imu": [{"path": "imu.csv", "t": 0.0}],
        "audio": [],
        "expected": [
            {"kind": "head", "label": m.value, "start": s, "end": e}
            for s, e, m in truth
        ],
    }
    path = os.path.join(out_dir, "scenario.json")
    with open(path, "w") as fh:
        json.dump(scenario, fh, indent=1)
    return path


def build_multimodal_scenario(out_dir, seed=0, rate=100.0, audio_rate=16000,
                              inject_misrecognition=False):
    """Mixed head + throat scenario exercising the Table III mode machine.

    Storyline (mode starts at servo-angle control):
      extension (servos to -90) -> so short (to thruster mode) -> do short
      (left +k) -> re long (right -k; the injectable token) -> so short
      (toggle) -> re long -> flexion.

    With `inject_misrecognition`, replay is told to misread the first
    (re,long) as (so,long), which wrongly toggles the mode; the following
    so token then restores it.
    """
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    short, long_ = 0.3, 0.75

    audio_events = [
        (4.0, ScaleClass.SO, short),
        (7.0, ScaleClass.DO, short),
        (10.0, ScaleClass.RE, long_),
        (13.0, ScaleClass.SO, short),
        (16.0, ScaleClass.RE, long_),
    ]
    head_events = [
        (1.0, HeadMotionClass.EXTENSION),
        (19.0, HeadMotionClass.FLEXION),
    ]
    total = 22.0

    audio_entries = []
    expected = []
    for k, (t0, scale, dur) in enumerate(audio_events):
        spec = SynthToneSpec(scale=scale, duration=dur, amplitude=0.9,
                             snr_db=25.0, lead=0.3, tail=0.25,
                             seed=int(rng.integers(0, 2 ** 31)))
        name = f"tone_{k}_{scale.value}.wav"
        write_wav(os.path.join(out_dir, name), gen_scale_tone(spec))
        audio_entries.append({"path": name, "t": t0})
        expected.append({
            "kind": "scale", "label": scale.value,
            "duration": "short" if dur < 0.5 else "long",
            "start": t0 + spec.lead, "end": t0 + spec.lead + dur,
        })

    motion_events = []
    for t0, motion in head_events:
        lo, hi = PEAK_RANGES[motion]
        motion_events.append((t0, SynthMotionSpec(
            motion=motion, peak=float(rng.uniform(lo, hi)), duration=1.0, rate=rate)))
        expected.append({"kind": "head", "label": motion.value,
                         "start": t0, "end": t0 + 1.0})
    samples, _ = _concat_motions(motion_events, rate, total, 0.5, seed)
    write_imu_csv(os.path.join(out_dir, "imu.csv"), samples)

    expected.sort(key=lambda e: e["start"])
    scenario = {
        "version": 1,
        "scheme": "multimodal",
        "duration": total,
        "imu": [{"path": "imu.csv", "t": 0.0}],
        "audio": audio_entries,
        "expected": expected,
    }
    if inject_misrecognition:
        scenario["inject"] = [{
            "match": {"kind": "scale", "label": "re", "duration": "long"},
            "replace": {"label": "so", "duration": "long"},
            "occurrence": 1,
        }]
    path = os.path.join(out_dir, "scenario.json")
    with open(path, "w") as fh:
        json.dump(scenario, fh, indent=1)
    return path
