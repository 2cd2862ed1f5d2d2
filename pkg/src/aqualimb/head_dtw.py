"""Head-motion classification by elastic template matching.

Dynamic time warping with the symmetric step pattern, barycenter averaging
to learn one multichannel template per motion class (with median-length
resampling as the time-normalization step), and a nearest-template
classifier that also reports the peak excursion of the class's governing
Euler channel for proportional control.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import TrainingError
from .preprocess import MotionSegment
from .signal_io import samples_to_arrays

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a hard dep, but keep a fallback
    njit = None


class HeadMotionClass(Enum):
    BEND_RIGHT = "bend_right"
    BEND_LEFT = "bend_left"
    EXTENSION = "extension"
    FLEXION = "flexion"
    ROTATE_LEFT = "rotate_left"
    ROTATE_RIGHT = "rotate_right"

    @property
    def command_index(self) -> int:
        return _COMMAND_INDEX[self]

    @property
    def euler_channel(self) -> int:
        """Governing Euler channel: 0 roll (bend), 1 pitch (ext/flex), 2 yaw (rotate)."""
        return _GOVERNING_CHANNEL[self]


_COMMAND_INDEX = {
    HeadMotionClass.BEND_RIGHT: 1,
    HeadMotionClass.BEND_LEFT: 2,
    HeadMotionClass.EXTENSION: 3,
    HeadMotionClass.FLEXION: 4,
    HeadMotionClass.ROTATE_LEFT: 5,
    HeadMotionClass.ROTATE_RIGHT: 6,
}

_GOVERNING_CHANNEL = {
    HeadMotionClass.BEND_RIGHT: 0,
    HeadMotionClass.BEND_LEFT: 0,
    HeadMotionClass.EXTENSION: 1,
    HeadMotionClass.FLEXION: 1,
    HeadMotionClass.ROTATE_LEFT: 2,
    HeadMotionClass.ROTATE_RIGHT: 2,
}

#: feature layout: columns 0..2 accel xyz, columns 3..5 euler roll/pitch/yaw
N_CHANNELS = 6


@dataclass
class DtwResult:
    distance: float
    path: list  # [(i, j)] from (0, 0) to (n-1, m-1)


def _as_series(a):
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("series must be a non-empty 1-D or 2-D array")
    return arr


def local_cost_matrix(a, b, cost="euclidean"):
    diff = a[:, None, :] - b[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    if cost == "sqeuclidean":
        return sq
    if cost == "euclidean":
        return np.sqrt(sq)
    raise ValueError(f"unknown local cost {cost!r}")


def _accumulate_py(c):
    n, m = c.shape
    alpha = np.empty((n, m))
    alpha[0, 0] = c[0, 0]
    for j in range(1, m):
        alpha[0, j] = c[0, j] + alpha[0, j - 1]
    for i in range(1, n):
        alpha[i, 0] = c[i, 0] + alpha[i - 1, 0]
        for j in range(1, m):
            best = alpha[i - 1, j - 1]
            if alpha[i - 1, j] < best:
                best = alpha[i - 1, j]
            if alpha[i, j - 1] < best:
                best = alpha[i, j - 1]
            alpha[i, j] = c[i, j] + best
    return alpha


if njit is not None:
    _accumulate = njit(cache=True)(_accumulate_py)
else:  # pragma: no cover
    _accumulate = _accumulate_py


def _traceback(alpha):
    i, j = alpha.shape[0] - 1, alpha.shape[1] - 1
    path = [(i, j)]
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            # prefer the diagonal on ties so identical series align frame-to-frame
            d, u, l = alpha[i - 1, j - 1], alpha[i - 1, j], alpha[i, j - 1]
            if d <= u and d <= l:
                i, j = i - 1, j - 1
            elif u <= l:
                i -= 1
            else:
                j -= 1
        path.append((i, j))
    path.reverse()
    return path


def dtw(a, b, cost="euclidean") -> DtwResult:
    """Minimum-cost monotone alignment of two multichannel series.

    Step pattern {(1,0),(0,1),(1,1)}, no band or slope constraint; the local
    cost between frames is the (squared) Euclidean distance across channels.
    """
    a, b = _as_series(a), _as_series(b)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"channel counts differ: {a.shape[1]} vs {b.shape[1]}")
    c = local_cost_matrix(a, b, cost)
    alpha = _accumulate(c)
    return DtwResult(distance=float(alpha[-1, -1]), path=_traceback(alpha))


def dtw_distance(a, b, cost="euclidean") -> float:
    """Distance only (skips the traceback)."""
    a, b = _as_series(a), _as_series(b)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"channel counts differ: {a.shape[1]} vs {b.shape[1]}")
    return float(_accumulate(local_cost_matrix(a, b, cost))[-1, -1])


def resample_series(series, length):
    """Linear-interpolation resample of an (n, C) series to `length` frames."""
    s = _as_series(series)
    n = s.shape[0]
    if n == length:
        return s.copy()
    if n == 1:
        return np.repeat(s, length, axis=0)
    src = np.linspace(0.0, 1.0, n)
    dst = np.linspace(0.0, 1.0, int(length))
    return np.column_stack([np.interp(dst, src, s[:, c]) for c in range(s.shape[1])])


def dtw_medoid(sequences, cost="sqeuclidean"):
    """Index of the sequence minimizing total DTW cost to the others."""
    k = len(sequences)
    totals = np.zeros(k)
    for i in range(k):
        for j in range(i + 1, k):
            d = dtw_distance(sequences[i], sequences[j], cost)
            totals[i] += d
            totals[j] += d
    return int(np.argmin(totals))


def dba_average(sequences, init=None, iters=10, tol=1e-6, return_costs=False):
    """Barycenter averaging under DTW alignment.

    Each iteration aligns every sequence to the current average (squared
    Euclidean local cost, for which the frame-mean update provably does not
    increase the total cost), then replaces each average frame with the mean
    of all frames aligned to it. Stops after `iters` iterations or when the
    relative cost improvement falls below `tol`.
    """
    seqs = [_as_series(s) for s in sequences]
    if not seqs:
        raise ValueError("need at least one sequence to average")
    channels = {s.shape[1] for s in seqs}
    if len(channels) != 1:
        raise ValueError(f"inconsistent channel counts: {sorted(channels)}")
    if init is None:
        avg = seqs[dtw_medoid(seqs)].copy()
    else:
        avg = _as_series(init).copy()
        if avg.shape[1] != seqs[0].shape[1]:
            raise ValueError("init channel count does not match sequences")

    costs = []
    for _ in range(int(iters)):
        assoc_sum = np.zeros_like(avg)
        assoc_cnt = np.zeros(len(avg))
        total = 0.0
        for s in seqs:
            r = dtw(avg, s, cost="sqeuclidean")
            total += r.distance
            for i, j in r.path:
                assoc_sum[i] += s[j]
                assoc_cnt[i] += 1
        if costs and total > costs[-1] * (1 + 1e-12) + 1e-12:
            raise AssertionError("DBA cost increased; alignment/update invariant broken")
        converged = bool(costs) and (costs[-1] - total) < tol * max(abs(costs[-1]), 1e-30)
        costs.append(total)
        if converged:
            break
        avg = assoc_sum / assoc_cnt[:, None]
    return (avg, costs) if return_costs else avg


@dataclass
class MotionTemplate:
    motion: HeadMotionClass
    sequence: np.ndarray  # (frames, 6), z-scored channels
    support_count: int


@dataclass
class TemplateSet:
    """Trained classifier artifact: templates plus normalization and rejection."""

    templates: dict  # HeadMotionClass -> MotionTemplate
    rate: float
    channel_mean: np.ndarray  # (6,)
    channel_std: np.ndarray   # (6,)
    reject_thresholds: dict   # HeadMotionClass -> float
    version: int = 1

    def normalize(self, features):
        return (features - self.channel_mean) / self.channel_std


@dataclass
class HeadClassification:
    motion: HeadMotionClass | None  # None = below-confidence rejection
    distance: float
    peak_angle: float
    best_motion: HeadMotionClass


def segment_features(segment) -> np.ndarray:
    """(frames, 6) feature matrix [ax ay az roll pitch yaw] from a segment."""
    samples = segment.samples if isinstance(segment, MotionSegment) else segment
    _, accel, euler = samples_to_arrays(samples)
    return np.hstack([accel, euler])


def build_templates(labeled, rate=100.0, iters=10, reject_quantile=0.95,
                    reject_margin=3.0) -> TemplateSet:
    """One DBA template per motion class from (series, HeadMotionClass) pairs.

    Sequences are z-scored with training-set channel statistics and resampled
    to the class-median length before averaging. The per-class rejection
    threshold is the reject_quantile of within-class training distances,
    widened by reject_margin so clean held-out motions are not clipped off.
    """
    groups = {m: [] for m in HeadMotionClass}
    for series, motion in labeled:
        groups[motion].append(_as_series(series))
    missing = [m.value for m in HeadMotionClass if not groups[m]]
    if missing:
        raise TrainingError(f"no training sequences for: {', '.join(missing)}")

    stacked = np.vstack([s for seqs in groups.values() for s in seqs])
    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0)
    std = np.where(std > 1e-12, std, 1.0)

    templates = {}
    rejects = {}
    for motion, seqs in groups.items():
        z = [(s - mean) / std for s in seqs]
        med_len = max(2, int(round(float(np.median([len(s) for s in z])))))
        rs = [resample_series(s, med_len) for s in z]
        avg = dba_average(rs, init=rs[dtw_medoid(rs)], iters=iters)
        templates[motion] = MotionTemplate(motion=motion, sequence=avg, support_count=len(seqs))
        within = np.array([dtw_distance(avg, s) for s in z])
        rejects[motion] = float(np.quantile(within, reject_quantile) * reject_margin)
    return TemplateSet(templates=templates, rate=rate, channel_mean=mean,
                       channel_std=std, reject_thresholds=rejects)


def classify_head(segment, template_set: TemplateSet) -> HeadClassification:
    """Nearest-template classification plus governing-channel peak excursion.

    Rejection (motion=None) fires when the best distance exceeds the winning
    class's trained threshold; peak_angle is measured on the raw Euler data
    relative to the segment's initial baseline.
    """
    feats = segment_features(segment) if not isinstance(segment, np.ndarray) else segment
    z = template_set.normalize(feats)
    best_motion, best_dist = None, np.inf
    for motion, tpl in template_set.templates.items():
        d = dtw_distance(tpl.sequence, z)
        if d < best_dist:
            best_motion, best_dist = motion, d
    ch = 3 + best_motion.euler_channel
    angles = feats[:, ch]
    baseline = float(np.mean(angles[: min(5, len(angles))]))
    peak = float(np.max(np.abs(angles - baseline)))
    accepted = best_dist <= template_set.reject_thresholds[best_motion]
    return HeadClassification(
        motion=best_motion if accepted else None,
        distance=float(best_dist),
        peak_angle=peak,
        best_motion=best_motion,
    )


def save_templates(path, ts: TemplateSet):
    doc = {
        "version": ts.version,
        "rate": ts.rate,
        "channels": N_CHANNELS,
        "channel_mean": list(ts.channel_mean),
        "channel_std": list(ts.channel_std),
        "reject_thresholds": {m.value: v for m, v in ts.reject_thresholds.items()},
        "templates": [
            {
                "class": m.value,
                "support_count": tpl.support_count,
                "frames": tpl.sequence.tolist(),
            }
            for m, tpl in ts.templates.items()
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_templates(path) -> TemplateSet:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("version") != 1:
        raise ValueError(f"unsupported template container version {doc.get('version')}")
    templates = {}
    for entry in doc["templates"]:
        motion = HeadMotionClass(entry["class"])
        templates[motion] = MotionTemplate(
            motion=motion,
            sequence=np.asarray(entry["frames"], dtype=float),
            support_count=int(entry["support_count"]),
        )
    return TemplateSet(
        templates=templates,
        rate=float(doc["rate"]),
        channel_mean=np.asarray(doc["channel_mean"], dtype=float),
        channel_std=np.asarray(doc["channel_std"], dtype=float),
        reject_thresholds={HeadMotionClass(k): float(v) for k, v in doc["reject_thresholds"].items()},
        version=doc["version"],
    )
