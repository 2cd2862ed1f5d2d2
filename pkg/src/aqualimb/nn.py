"""Minimal LSTM sequence classifier for the five musical scales.

Single-layer unidirectional LSTM over the 20 time frames of an MFCC matrix
(each frame a 20-dim coefficient vector), softmax readout on the final
hidden state. Training is mini-batch Adam with gradient-norm clipping;
everything is plain numpy so gradients can be checked against central
finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import TrainingError
from .mfcc import MfccConfig

GATES = ("input", "forget", "cell", "output")


class ScaleClass(Enum):
    DO = "do"
    RE = "re"
    MI = "mi"
    FA = "fa"
    SO = "so"

    @property
    def index(self) -> int:
        return _SCALE_INDEX[self]


_SCALE_INDEX = {s: i for i, s in enumerate(ScaleClass)}
SCALE_ORDER = tuple(ScaleClass)
N_CLASSES = len(SCALE_ORDER)


@dataclass
class LstmParams:
    wx: dict  # gate -> (hidden, input_dim)
    wh: dict  # gate -> (hidden, hidden)
    b: dict   # gate -> (hidden,)
    w_out: np.ndarray  # (n_classes, hidden)
    b_out: np.ndarray  # (n_classes,)

    @property
    def hidden_dim(self) -> int:
        return self.wx["input"].shape[0]

    @property
    def input_dim(self) -> int:
        return self.wx["input"].shape[1]

    def blocks(self):
        """Named parameter blocks, for optimizers and gradient checks."""
        out = {}
        for g in GATES:
            out[f"wx_{g}"] = self.wx[g]
            out[f"wh_{g}"] = self.wh[g]
            out[f"b_{g}"] = self.b[g]
        out["w_out"] = self.w_out
        out["b_out"] = self.b_out
        return out

    def copy(self) -> "LstmParams":
        return LstmParams(
            wx={g: self.wx[g].copy() for g in GATES},
            wh={g: self.wh[g].copy() for g in GATES},
            b={g: self.b[g].copy() for g in GATES},
            w_out=self.w_out.copy(),
            b_out=self.b_out.copy(),
        )


def init_params(input_dim=20, hidden_dim=64, n_classes=N_CLASSES, seed=0) -> LstmParams:
    """Uniform +-1/sqrt(hidden) weights; zero biases except forget gate at 1.0."""
    rng = np.random.default_rng(seed)
    lim = 1.0 / np.sqrt(hidden_dim)
    wx = {g: rng.uniform(-lim, lim, (hidden_dim, input_dim)) for g in GATES}
    wh = {g: rng.uniform(-lim, lim, (hidden_dim, hidden_dim)) for g in GATES}
    b = {g: np.zeros(hidden_dim) for g in GATES}
    b["forget"] = np.ones(hidden_dim)
    w_out = rng.uniform(-lim, lim, (n_classes, hidden_dim))
    b_out = np.zeros(n_classes)
    return LstmParams(wx=wx, wh=wh, b=b, w_out=w_out, b_out=b_out)


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def softmax(z):
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def _check_finite(params: LstmParams):
    for name, arr in params.blocks().items():
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError(f"non-finite values in parameter block {name}")


@dataclass
class ForwardCache:
    xs: np.ndarray        # (T, B, D)
    gates: list           # per t: dict gate -> (B, H)
    cs: np.ndarray        # (T+1, B, H), cs[0] = c0
    hs: np.ndarray        # (T+1, B, H)
    tanh_c: np.ndarray    # (T, B, H)
    probs: np.ndarray     # (B, K)
    params_ref: object


def forward_batch(params: LstmParams, batch) -> tuple:
    """batch: (B, D, T) matrices, columns as timesteps. Returns (probs, cache)."""
    _check_finite(params)
    x = np.asarray(batch, dtype=float)
    if x.ndim == 2:
        x = x[None]
    bsz, d, steps = x.shape
    h = params.hidden_dim
    if d != params.input_dim:
        raise ValueError(f"input dim {d} does not match params ({params.input_dim})")
    xs = np.transpose(x, (2, 0, 1))  # (T, B, D)
    hs = np.zeros((steps + 1, bsz, h))
    cs = np.zeros((steps + 1, bsz, h))
    tanh_c = np.zeros((steps, bsz, h))
    gates = []
    for t in range(steps):
        xt = xs[t]
        hp = hs[t]
        g = {}
        for name in GATES:
            z = xt @ params.wx[name].T + hp @ params.wh[name].T + params.b[name]
            g[name] = np.tanh(z) if name == "cell" else _sigmoid(z)
        cs[t + 1] = g["forget"] * cs[t] + g["input"] * g["cell"]
        tanh_c[t] = np.tanh(cs[t + 1])
        hs[t + 1] = g["output"] * tanh_c[t]
        gates.append(g)
    logits = hs[-1] @ params.w_out.T + params.b_out
    probs = softmax(logits)
    cache = ForwardCache(xs=xs, gates=gates, cs=cs, hs=hs, tanh_c=tanh_c,
                         probs=probs, params_ref=params)
    return probs, cache


def lstm_forward(params: LstmParams, matrix) -> tuple:
    """Single-matrix forward pass: returns (probabilities (K,), cache)."""
    probs, cache = forward_batch(params, np.asarray(matrix, dtype=float)[None])
    return probs[0], cache


def cross_entropy(probs, target_idx) -> float:
    idx = np.atleast_1d(target_idx)
    p = np.atleast_2d(probs)
    return float(-np.mean(np.log(np.maximum(p[np.arange(len(idx)), idx], 1e-300))))


def lstm_backward(params: LstmParams, cache: ForwardCache, targets) -> dict:
    """Gradients of mean cross-entropy over the batch, via BPTT.

    Raises if the cache was produced by a different params object.
    """
    if cache.params_ref is not params:
        raise ValueError("stale cache: forward pass was run with different params")
    if isinstance(targets, ScaleClass):
        targets = [targets.index]
    idx = np.array([t.index if isinstance(t, ScaleClass) else int(t) for t in np.atleast_1d(targets)])
    steps, bsz, _ = cache.tanh_c.shape
    probs = cache.probs

    dlogits = probs.copy()
    dlogits[np.arange(bsz), idx] -= 1.0
    dlogits /= bsz

    grads = {
        "wx": {g: np.zeros_like(params.wx[g]) for g in GATES},
        "wh": {g: np.zeros_like(params.wh[g]) for g in GATES},
        "b": {g: np.zeros_like(params.b[g]) for g in GATES},
        "w_out": dlogits.T @ cache.hs[-1],
        "b_out": dlogits.sum(axis=0),
    }
    dh = dlogits @ params.w_out
    dc = np.zeros((bsz, params.hidden_dim))
    for t in range(steps - 1, -1, -1):
        g = cache.gates[t]
        do = dh * cache.tanh_c[t]
        dc = dc + dh * g["output"] * (1.0 - cache.tanh_c[t] ** 2)
        di = dc * g["cell"]
        dg = dc * g["input"]
        df = dc * cache.cs[t]
        dc_prev = dc * g["forget"]

        dz = {
            "input": di * g["input"] * (1.0 - g["input"]),
            "forget": df * g["forget"] * (1.0 - g["forget"]),
            "cell": dg * (1.0 - g["cell"] ** 2),
            "output": do * g["output"] * (1.0 - g["output"]),
        }
        xt = cache.xs[t]
        hp = cache.hs[t]
        dh = np.zeros_like(dh)
        for name in GATES:
            grads["wx"][name] += dz[name].T @ xt
            grads["wh"][name] += dz[name].T @ hp
            grads["b"][name] += dz[name].sum(axis=0)
            dh += dz[name] @ params.wh[name]
        dc = dc_prev
    return grads


def grad_blocks(grads) -> dict:
    out = {}
    for g in GATES:
        out[f"wx_{g}"] = grads["wx"][g]
        out[f"wh_{g}"] = grads["wh"][g]
        out[f"b_{g}"] = grads["b"][g]
    out["w_out"] = grads["w_out"]
    out["b_out"] = grads["b_out"]
    return out


def clip_gradients(grads, max_norm) -> float:
    """Global-norm clipping in place; returns the pre-clip norm."""
    blocks = grad_blocks(grads)
    total = np.sqrt(sum(float(np.sum(b ** 2)) for b in blocks.values()))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / total
        for b in blocks.values():
            b *= scale
    return total


class Adam:
    def __init__(self, params: LstmParams, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.blocks().items()}
        self.v = {k: np.zeros_like(v) for k, v in params.blocks().items()}

    def step(self, params: LstmParams, grads):
        self.t += 1
        pb = params.blocks()
        gb = grad_blocks(grads)
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k, p in pb.items():
            g = gb[k]
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g ** 2
            p -= self.lr * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + self.eps)


@dataclass
class TrainConfig:
    hidden_dim: int = 64
    epochs: int = 30
    lr: float = 1e-3
    batch_size: int = 32
    clip_norm: float = 5.0
    seed: int = 0
    reject_confidence: float = 0.5


@dataclass
class TrainReport:
    epoch_loss: list
    epoch_eval_acc: list
    final_train_acc: float
    classes: tuple = tuple(s.value for s in SCALE_ORDER)


@dataclass
class FeatureNorm:
    """Per-coefficient standardization fitted on the training matrices."""

    mean: np.ndarray  # (n_coeffs, 1)
    std: np.ndarray

    @classmethod
    def fit(cls, matrices) -> "FeatureNorm":
        stacked = np.concatenate([np.asarray(m, dtype=float) for m in matrices], axis=1)
        mean = stacked.mean(axis=1, keepdims=True)
        std = stacked.std(axis=1, keepdims=True)
        return cls(mean=mean, std=np.where(std > 1e-12, std, 1.0))

    def apply(self, matrix):
        return (np.asarray(matrix, dtype=float) - self.mean) / self.std


def _accuracy(params, norm, items) -> float:
    if not items:
        return float("nan")
    mats = np.stack([norm.apply(m) for m, _ in items])
    probs, _ = forward_batch(params, mats)
    pred = np.argmax(probs, axis=1)
    truth = np.array([label.index for _, label in items])
    return float(np.mean(pred == truth))


def train(dataset, cfg: TrainConfig | None = None, eval_set=None):
    """Train on (matrix, ScaleClass) pairs; deterministic under cfg.seed.

    Returns (params, FeatureNorm, TrainReport). The eval_set, if given, is
    scored (argmax accuracy) after every epoch.
    """
    cfg = cfg or TrainConfig()
    dataset = list(dataset)
    present = {label for _, label in dataset}
    missing = [s.value for s in SCALE_ORDER if s not in present]
    if missing:
        raise TrainingError(f"no training examples for: {', '.join(missing)}")

    norm = FeatureNorm.fit([m for m, _ in dataset])
    mats = np.stack([norm.apply(m) for m, _ in dataset])
    labels = np.array([label.index for _, label in dataset])

    params = init_params(input_dim=mats.shape[1], hidden_dim=cfg.hidden_dim, seed=cfg.seed)
    opt = Adam(params, lr=cfg.lr)
    rng = np.random.default_rng(cfg.seed)

    epoch_loss, epoch_acc = [], []
    for _ in range(cfg.epochs):
        order = rng.permutation(len(dataset))
        losses = []
        for s0 in range(0, len(order), cfg.batch_size):
            sel = order[s0:s0 + cfg.batch_size]
            probs, cache = forward_batch(params, mats[sel])
            losses.append(cross_entropy(probs, labels[sel]))
            grads = lstm_backward(params, cache, labels[sel])
            clip_gradients(grads, cfg.clip_norm)
            opt.step(params, grads)
        epoch_loss.append(float(np.mean(losses)))
        epoch_acc.append(_accuracy(params, norm, eval_set) if eval_set else float("nan"))

    report = TrainReport(
        epoch_loss=epoch_loss,
        epoch_eval_acc=epoch_acc,
        final_train_acc=_accuracy(params, norm, dataset),
    )
    return params, norm, report


@dataclass
class ThroatModel:
    """Inference artifact: weights + feature normalization + MFCC recipe."""

    params: LstmParams
    norm: FeatureNorm
    mfcc_cfg: MfccConfig
    reject_confidence: float = 0.5
    version: int = 1


def predict(model: ThroatModel, matrix) -> tuple:
    """(ScaleClass | None, confidence); None when below the reject threshold."""
    probs, _ = lstm_forward(model.params, model.norm.apply(matrix))
    k = int(np.argmax(probs))
    conf = float(probs[k])
    label = SCALE_ORDER[k] if conf >= model.reject_confidence else None
    return label, conf


def save_model(path, model: ThroatModel):
    arrays = {}
    for name, arr in model.params.blocks().items():
        arrays[f"param_{name}"] = arr
    arrays["norm_mean"] = model.norm.mean
    arrays["norm_std"] = model.norm.std
    meta = {
        "version": model.version,
        "reject_confidence": model.reject_confidence,
        "mfcc": json.loads(model.mfcc_cfg.to_json()),
        "classes": [s.value for s in SCALE_ORDER],
    }
    np.savez(path, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)


def load_model(path) -> ThroatModel:
    data = np.load(path)
    meta = json.loads(bytes(data["meta"]).decode())
    if meta.get("version") != 1:
        raise ValueError(f"unsupported model version {meta.get('version')}")
    wx, wh, b = {}, {}, {}
    for g in GATES:
        wx[g] = data[f"param_wx_{g}"]
        wh[g] = data[f"param_wh_{g}"]
        b[g] = data[f"param_b_{g}"]
    params = LstmParams(wx=wx, wh=wh, b=b, w_out=data["param_w_out"], b_out=data["param_b_out"])
    norm = FeatureNorm(mean=data["norm_mean"], std=data["norm_std"])
    return ThroatModel(
        params=params,
        norm=norm,
        mfcc_cfg=MfccConfig(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in meta["mfcc"].items()}),
        reject_confidence=float(meta["reject_confidence"]),
        version=meta["version"],
    )
