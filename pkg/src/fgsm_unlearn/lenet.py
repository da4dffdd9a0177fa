"""LeNet-5 parameterization, forward/backward passes, and training.

The canonical stack is conv(5x5,6) -> avgpool -> conv(5x5,16) -> avgpool ->
conv(5x5,120) -> flatten -> dense(84) -> dense(10), relu after every
trainable layer except the output, which emits raw logits. Layer widths are
read off the parameter tensors, so narrower variants of the same stack (used
by the gradient checker) run through the identical code path.
"""

import time
from dataclasses import dataclass, fields

import numpy as np

from . import ops
from .data import LabeledDataset
from .errors import DimensionError, ValidationError
from .ops import AdamState

PARAM_NAMES = ("c1_w", "c1_b", "c3_w", "c3_b", "c5_w", "c5_b", "f6_w", "f6_b", "out_w", "out_b")

CANONICAL_SHAPES = {
    "c1_w": (5, 5, 1, 6),
    "c1_b": (6,),
    "c3_w": (5, 5, 6, 16),
    "c3_b": (16,),
    "c5_w": (5, 5, 16, 120),
    "c5_b": (120,),
    "f6_w": (84, 120),
    "f6_b": (84,),
    "out_w": (10, 84),
    "out_b": (10,),
}


@dataclass
class LeNetParams:
    """The ten weight/bias tensors of the stack."""

    c1_w: np.ndarray
    c1_b: np.ndarray
    c3_w: np.ndarray
    c3_b: np.ndarray
    c5_w: np.ndarray
    c5_b: np.ndarray
    f6_w: np.ndarray
    f6_b: np.ndarray
    out_w: np.ndarray
    out_b: np.ndarray

    def as_dict(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict[str, np.ndarray]) -> "LeNetParams":
        return cls(**{name: d[name] for name in PARAM_NAMES})

    def num_scalars(self) -> int:
        return sum(t.size for t in self.as_dict().values())


@dataclass
class EpochRecord:
    epoch: int
    mean_loss: float
    accuracy: float
    wall_time_s: float


TrainHistory = list[EpochRecord]


def _glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


def init_params(seed: int) -> LeNetParams:
    """Glorot-uniform weights from a seeded PRNG; biases exactly zero."""
    rng = np.random.default_rng(seed)
    d: dict[str, np.ndarray] = {}
    for name in ("c1_w", "c3_w", "c5_w"):
        kh, kw, cin, cout = CANONICAL_SHAPES[name]
        d[name] = _glorot_uniform(rng, (kh, kw, cin, cout), kh * kw * cin, kh * kw * cout)
    for name in ("f6_w", "out_w"):
        dout, din = CANONICAL_SHAPES[name]
        d[name] = _glorot_uniform(rng, (dout, din), din, dout)
    for name in ("c1_b", "c3_b", "c5_b", "f6_b", "out_b"):
        d[name] = np.zeros(CANONICAL_SHAPES[name], dtype=np.float32)
    return LeNetParams.from_dict(d)


def _forward(params: LeNetParams, batch: np.ndarray) -> tuple[np.ndarray, dict]:
    """Run the stack, returning logits and the activations the backward
    pass needs."""
    x = ops.as_f32(batch)
    if x.ndim != 4 or x.shape[3] != params.c1_w.shape[2]:
        raise DimensionError(
            f"expected input [B,H,W,{params.c1_w.shape[2]}], got {x.shape}"
        )
    cache: dict = {"x": x}
    cache["c1_pre"] = ops.conv2d_forward(x, params.c1_w, params.c1_b)
    cache["c1"] = ops.relu(cache["c1_pre"])
    cache["s2"] = ops.avgpool2d_forward(cache["c1"])
    cache["c3_pre"] = ops.conv2d_forward(cache["s2"], params.c3_w, params.c3_b)
    cache["c3"] = ops.relu(cache["c3_pre"])
    cache["s4"] = ops.avgpool2d_forward(cache["c3"])
    cache["c5_pre"] = ops.conv2d_forward(cache["s4"], params.c5_w, params.c5_b)
    cache["c5"] = ops.relu(cache["c5_pre"])
    b = x.shape[0]
    cache["flat"] = cache["c5"].reshape(b, -1)
    cache["f6_pre"] = ops.dense_forward(cache["flat"], params.f6_w, params.f6_b)
    cache["f6"] = ops.relu(cache["f6_pre"])
    logits = ops.dense_forward(cache["f6"], params.out_w, params.out_b)
    return logits, cache


def forward_logits(params: LeNetParams, batch: np.ndarray) -> np.ndarray:
    """Logits for a batch of [B, 32, 32, 1] images (no softmax)."""
    logits, _ = _forward(params, batch)
    return logits


@dataclass
class GradientBundle:
    """Gradients of the mean batch loss w.r.t. parameters and the input."""

    param_grads: dict[str, np.ndarray]
    input_grad: np.ndarray
    loss: float
    probs: np.ndarray


def backward_pass(params: LeNetParams, batch_x: np.ndarray, batch_y: np.ndarray) -> GradientBundle:
    """Mean cross-entropy loss and its exact reverse-mode gradients with
    respect to every parameter and the input batch."""
    logits, cache = _forward(params, batch_x)
    probs, loss = ops.softmax_cross_entropy(logits, batch_y)
    b = logits.shape[0]
    dlogits = (probs - ops.as_f32(batch_y)) / np.float32(b)

    grads: dict[str, np.ndarray] = {}
    d_f6, grads["out_w"], grads["out_b"] = ops.dense_backward(cache["f6"], params.out_w, dlogits)
    d_f6_pre = ops.relu_backward(cache["f6_pre"], d_f6)
    d_flat, grads["f6_w"], grads["f6_b"] = ops.dense_backward(cache["flat"], params.f6_w, d_f6_pre)
    d_c5 = d_flat.reshape(cache["c5"].shape)
    d_c5_pre = ops.relu_backward(cache["c5_pre"], d_c5)
    d_s4, grads["c5_w"], grads["c5_b"] = ops.conv2d_backward(cache["s4"], params.c5_w, d_c5_pre)
    d_c3 = ops.avgpool2d_backward(d_s4)
    d_c3_pre = ops.relu_backward(cache["c3_pre"], d_c3)
    d_s2, grads["c3_w"], grads["c3_b"] = ops.conv2d_backward(cache["s2"], params.c3_w, d_c3_pre)
    d_c1 = ops.avgpool2d_backward(d_s2)
    d_c1_pre = ops.relu_backward(cache["c1_pre"], d_c1)
    d_x, grads["c1_w"], grads["c1_b"] = ops.conv2d_backward(cache["x"], params.c1_w, d_c1_pre)
    return GradientBundle(param_grads=grads, input_grad=d_x, loss=loss, probs=probs)


def train_epochs(
    params: LeNetParams,
    adam: AdamState,
    train: LabeledDataset,
    epochs: int,
    batch_size: int = 128,
    lr: float = 1e-3,
    seed: int = 42,
) -> tuple[LeNetParams, AdamState, TrainHistory]:
    """Minibatch training. Each epoch reshuffles with a PRNG seeded from
    (seed, epoch); the final partial batch is trained on. Adam state carries
    across epochs so repeated calls warm-start."""
    if len(train) == 0:
        raise ValidationError("training dataset is empty")
    if batch_size < 1:
        raise ValidationError(f"batch_size must be >= 1, got {batch_size}")
    p = params.as_dict()
    history: TrainHistory = []
    n = len(train)
    for epoch in range(epochs):
        t0 = time.monotonic()
        perm = np.random.default_rng([seed, epoch]).permutation(n)
        loss_sum = 0.0
        correct = 0
        cur = LeNetParams.from_dict(p)
        for start in range(0, n, batch_size):
            idx = perm[start : start + batch_size]
            bx, by = train.images[idx], train.labels[idx]
            bundle = backward_pass(cur, bx, by)
            loss_sum += bundle.loss * len(idx)
            correct += int(
                (bundle.probs.argmax(axis=1) == by.argmax(axis=1)).sum()
            )
            p, adam = ops.adam_step(p, bundle.param_grads, adam, lr)
            cur = LeNetParams.from_dict(p)
        history.append(
            EpochRecord(
                epoch=epoch,
                mean_loss=loss_sum / n,
                accuracy=correct / n,
                wall_time_s=time.monotonic() - t0,
            )
        )
    return LeNetParams.from_dict(p), adam, history


def evaluate(
    params: LeNetParams, ds: LabeledDataset, batch_size: int = 256
) -> tuple[float, float]:
    """Mean accuracy and cross-entropy loss over a dataset."""
    if len(ds) == 0:
        raise ValidationError("cannot evaluate on an empty dataset")
    correct = 0
    loss_sum = 0.0
    for start in range(0, len(ds), batch_size):
        bx = ds.images[start : start + batch_size]
        by = ds.labels[start : start + batch_size]
        logits = forward_logits(params, bx)
        losses = ops.per_example_cross_entropy(logits, by)
        loss_sum += float(losses.sum(dtype=np.float64))
        correct += int((logits.argmax(axis=1) == by.argmax(axis=1)).sum())
    return correct / len(ds), loss_sum / len(ds)


class LeNetClassifier:
    """sklearn-style wrapper: fit on images + integer labels, predict digits.

    Parameters mirror the training defaults (epochs=15, batch_size=128,
    lr=1e-3). Images are [N, 32, 32, 1] float arrays in [0, 1].
    """

    def __init__(self, epochs: int = 15, batch_size: int = 128, lr: float = 1e-3, seed: int = 42):
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.seed = seed

    def get_params(self, deep: bool = True) -> dict:
        return {"epochs": self.epochs, "batch_size": self.batch_size, "lr": self.lr, "seed": self.seed}

    def set_params(self, **kwargs) -> "LeNetClassifier":
        for key, value in kwargs.items():
            if key not in self.get_params():
                raise ValueError(f"unknown parameter {key!r}")
            setattr(self, key, value)
        return self

    def fit(self, X, y) -> "LeNetClassifier":
        X = ops.as_f32(X)
        y = np.asarray(y)
        if y.ndim == 2:  # accept one-hot as well as integer labels
            y = y.argmax(axis=1)
        onehot = np.zeros((len(y), 10), dtype=np.float32)
        onehot[np.arange(len(y)), y] = 1.0
        ds = LabeledDataset(images=X, labels=onehot, ids=np.arange(len(y), dtype=np.uint64))
        params = init_params(self.seed)
        adam = AdamState.zeros_like(params.as_dict())
        self.params_, self.adam_, self.history_ = train_epochs(
            params, adam, ds, self.epochs, self.batch_size, self.lr, self.seed
        )
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "params_"):
            raise ValidationError("classifier is not fitted; call fit first")

    def decision_function(self, X) -> np.ndarray:
        self._check_fitted()
        return forward_logits(self.params_, X)

    def predict_proba(self, X) -> np.ndarray:
        logits = self.decision_function(X)
        shifted = logits - logits.max(axis=1, keepdims=True)
        exp = np.exp(shifted)
        return exp / exp.sum(axis=1, keepdims=True)

    def predict(self, X) -> np.ndarray:
        return self.decision_function(X).argmax(axis=1)

    def score(self, X, y) -> float:
        y = np.asarray(y)
        if y.ndim == 2:
            y = y.argmax(axis=1)
        return float((self.predict(X) == y).mean())
