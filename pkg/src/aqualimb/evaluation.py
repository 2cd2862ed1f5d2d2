"""Training/evaluation protocols and confusion-matrix reporting.

Head: half the corpus builds the templates, the other half is scored.
Throat: 70/30 split, LSTM trained on MFCC matrices of detected fragments.
Both report a row-normalized confusion matrix alongside raw counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .head_dtw import (
    HeadMotionClass, TemplateSet, build_templates, classify_head, segment_features,
)
from .mfcc import MfccConfig, mfcc_matrix
from .nn import (
    SCALE_ORDER, ScaleClass, ThroatModel, TrainConfig, forward_batch, train,
)
from .preprocess import (
    SegmenterConfig, detect_endpoints_audio, detect_endpoints_imu, low_pass,
    motion_energy,
)
from .signal_io import arrays_to_samples, samples_to_arrays


def confusion_matrix(true_idx, pred_idx, n_classes):
    counts = np.zeros((n_classes, n_classes), dtype=int)
    for t, p in zip(true_idx, pred_idx):
        if p >= 0:
            counts[t, p] += 1
    return counts


def row_normalize(counts):
    counts = np.asarray(counts, dtype=float)
    sums = counts.sum(axis=1, keepdims=True)
    return np.divide(counts, sums, out=np.zeros_like(counts), where=sums > 0)


def format_confusion(counts, labels, normalized=True):
    """Printable matrix in the row-normalized true-by-predicted layout."""
    mat = row_normalize(counts) if normalized else np.asarray(counts, dtype=float)
    width = max(len(l) for l in labels) + 2
    lines = [" " * width + "".join(f"{l:>{width}}" for l in labels)]
    for i, l in enumerate(labels):
        cells = "".join(f"{mat[i, j]:>{width}.2f}" for j in range(len(labels)))
        lines.append(f"{l:>{width}}" + cells)
    return "\n".join(lines)


def smooth_stream(stream, cfg: SegmenterConfig, rate=None):
    """The pipeline's low-pass over all six channels of an IMU stream."""
    t, accel, euler = samples_to_arrays(stream)
    if rate is None:
        rate = 1.0 / float(np.median(np.diff(t)))
    accel = np.column_stack([low_pass(accel[:, c], cfg.lowpass_hz, rate) for c in range(3)])
    euler = np.column_stack([low_pass(euler[:, c], cfg.lowpass_hz, rate) for c in range(3)])
    return arrays_to_samples(t, accel, euler), rate


def extract_motion_segment(stream, cfg: SegmenterConfig, rate=None):
    """Low-pass, segment, and return the highest-energy motion segment."""
    smoothed, rate = smooth_stream(stream, cfg, rate)
    segments = detect_endpoints_imu(smoothed, cfg, rate=rate)
    if not segments:
        return None
    arrays = samples_to_arrays(smoothed)
    energy = motion_energy(arrays, rate, cfg)
    return max(segments, key=lambda s: float(energy[s.start_idx:s.end_idx].max()))


def extract_audio_fragment(audio, cfg: SegmenterConfig):
    """Endpoint-detect and return the longest fragment (whole take if none)."""
    frags = detect_endpoints_audio(audio, cfg)
    if not frags:
        return audio
    return max(frags, key=lambda f: len(f.samples))


@dataclass
class EvalReport:
    accuracy: float
    counts: np.ndarray
    labels: tuple
    n_rejected: int = 0

    @property
    def normalized(self):
        return row_normalize(self.counts)

    def __str__(self):
        return (f"accuracy {self.accuracy:.3f} ({self.n_rejected} rejected)\n"
                + format_confusion(self.counts, self.labels))


def split_per_class(items, frac, seed=0):
    """Deterministic stratified split: items are (payload, label) pairs."""
    rng = np.random.default_rng(seed)
    by_label = {}
    for payload, label in items:
        by_label.setdefault(label, []).append(payload)
    first, second = [], []
    for label in sorted(by_label, key=lambda l: l.value):
        group = by_label[label]
        order = rng.permutation(len(group))
        k = int(round(frac * len(group)))
        first += [(group[i], label) for i in order[:k]]
        second += [(group[i], label) for i in order[k:]]
    return first, second


def train_eval_head(corpus, seg_cfg: SegmenterConfig | None = None, seed=0,
                    train_frac=0.5, rate=100.0):
    """Half/half protocol over (stream, HeadMotionClass) pairs.

    Returns (TemplateSet, EvalReport). Streams with no detected segment count
    as errors on the evaluation side and are skipped on the training side.
    """
    seg_cfg = seg_cfg or SegmenterConfig()
    feats = []
    for stream, motion in corpus:
        seg = extract_motion_segment(stream, seg_cfg, rate=rate)
        feats.append((segment_features(seg) if seg is not None else None, motion))
    train_items, test_items = split_per_class(feats, train_frac, seed=seed)

    template_set = build_templates(
        [(f, m) for f, m in train_items if f is not None], rate=rate)

    motions = list(HeadMotionClass)
    true_idx, pred_idx = [], []
    n_rejected = 0
    for f, motion in test_items:
        true_idx.append(motions.index(motion))
        if f is None:
            pred_idx.append(-1)
            continue
        out = classify_head(f, template_set)
        if out.motion is None:
            n_rejected += 1
            pred_idx.append(-1)
        else:
            pred_idx.append(motions.index(out.motion))
    counts = confusion_matrix(true_idx, pred_idx, len(motions))
    correct = sum(int(t == p) for t, p in zip(true_idx, pred_idx))
    report = EvalReport(
        accuracy=correct / len(test_items),
        counts=counts,
        labels=tuple(m.value for m in motions),
        n_rejected=n_rejected,
    )
    return template_set, report


def train_eval_throat(corpus, seg_cfg: SegmenterConfig | None = None,
                      mfcc_cfg: MfccConfig | None = None,
                      train_cfg: TrainConfig | None = None, seed=0,
                      train_frac=0.7):
    """70/30 protocol over (AudioSegment, ScaleClass) pairs.

    Fragments come from endpoint detection; accuracy is argmax over the
    softmax (the reject path belongs to streaming, not evaluation).
    Returns (ThroatModel, EvalReport, TrainReport).
    """
    seg_cfg = seg_cfg or SegmenterConfig()
    mfcc_cfg = mfcc_cfg or MfccConfig()
    train_cfg = train_cfg or TrainConfig(seed=seed)

    mats = []
    for audio, scale in corpus:
        frag = extract_audio_fragment(audio, seg_cfg)
        mats.append((mfcc_matrix(frag, mfcc_cfg), scale))
    train_items, test_items = split_per_class(mats, train_frac, seed=seed)

    params, norm, train_report = train(train_items, train_cfg, eval_set=test_items)
    model = ThroatModel(params=params, norm=norm, mfcc_cfg=mfcc_cfg,
                        reject_confidence=train_cfg.reject_confidence)

    scales = list(SCALE_ORDER)
    batch = np.stack([norm.apply(m) for m, _ in test_items])
    probs, _ = forward_batch(params, batch)
    pred = np.argmax(probs, axis=1)
    true_idx = [scales.index(s) for _, s in test_items]
    counts = confusion_matrix(true_idx, pred, len(scales))
    accuracy = float(np.mean(pred == np.array(true_idx)))
    report = EvalReport(accuracy=accuracy, counts=counts,
                        labels=tuple(s.value for s in scales))
    return model, report, train_report
