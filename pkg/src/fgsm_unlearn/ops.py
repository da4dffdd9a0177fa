"""Dense float32 layer kernels: forward and backward passes plus Adam.

Everything here is a pure function of its arguments. Convolutions are
stride-1 "valid" cross-correlations; pooling is 2x2 average with stride 2.
All arrays are float32 and reductions run in a fixed order, so identical
inputs give bit-identical outputs.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ValidationError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def as_f32(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=np.float32)


def conv2d_forward(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Valid cross-correlation.

    x: [B, H, W, Cin], kernel: [Kh, Kw, Cin, Cout], bias: [Cout]
    returns [B, H-Kh+1, W-Kw+1, Cout].
    """
    x, kernel, bias = as_f32(x), as_f32(kernel), as_f32(bias)
    if x.ndim != 4 or kernel.ndim != 4:
        raise DimensionError(
            f"conv2d expects 4-d input and kernel, got {x.shape} and {kernel.shape}"
        )
    kh, kw, cin, cout = kernel.shape
    if x.shape[3] != cin:
        raise DimensionError(
            f"conv2d channel mismatch: input axis 3 is {x.shape[3]}, kernel axis 2 is {cin}"
        )
    if bias.shape != (cout,):
        raise DimensionError(f"conv2d bias shape {bias.shape} != ({cout},)")
    b, h, w, _ = x.shape
    if h < kh or w < kw:
        raise DimensionError(
            f"conv2d input {h}x{w} smaller than kernel {kh}x{kw} (axes 1, 2)"
        )
    oh, ow = h - kh + 1, w - kw + 1
    out = np.tile(bias, (b, oh, ow, 1)).astype(np.float32)
    # One small GEMM per kernel offset keeps memory flat and the reduction
    # order fixed.
    for di in range(kh):
        for dj in range(kw):
            out += x[:, di : di + oh, dj : dj + ow, :] @ kernel[di, dj]
    return out


def conv2d_backward(
    x: np.ndarray, kernel: np.ndarray, dout: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of conv2d_forward: returns (dx, dkernel, dbias)."""
    x, kernel, dout = as_f32(x), as_f32(kernel), as_f32(dout)
    kh, kw, cin, cout = kernel.shape
    b, h, w, _ = x.shape
    oh, ow = h - kh + 1, w - kw + 1
    if dout.shape != (b, oh, ow, cout):
        raise DimensionError(f"conv2d_backward dout shape {dout.shape} != {(b, oh, ow, cout)}")
    dx = np.zeros_like(x)
    dk = np.empty_like(kernel)
    for di in range(kh):
        for dj in range(kw):
            xs = x[:, di : di + oh, dj : dj + ow, :]
            dk[di, dj] = np.tensordot(xs, dout, axes=([0, 1, 2], [0, 1, 2]))
            dx[:, di : di + oh, dj : dj + ow, :] += dout @ kernel[di, dj].T
    db = dout.sum(axis=(0, 1, 2))
    return dx, dk, db


def avgpool2d_forward(x: np.ndarray) -> np.ndarray:
    """2x2 average pooling, stride 2. Requires even spatial extents."""
    x = as_f32(x)
    if x.ndim != 4:
        raise DimensionError(f"avgpool2d expects 4-d input, got {x.shape}")
    b, h, w, c = x.shape
    if h % 2 or w % 2:
        raise DimensionError(f"avgpool2d needs even H and W (axes 1, 2), got {h}x{w}")
    return x.reshape(b, h // 2, 2, w // 2, 2, c).mean(axis=(2, 4), dtype=np.float32)


def avgpool2d_backward(dout: np.ndarray) -> np.ndarray:
    """Spread each output gradient evenly over its 2x2 window."""
    dout = as_f32(dout)
    b, oh, ow, c = dout.shape
    dx = np.empty((b, oh, 2, ow, 2, c), dtype=np.float32)
    dx[:] = (dout / 4.0)[:, :, None, :, None, :]
    return dx.reshape(b, oh * 2, ow * 2, c)


def dense_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Affine map. x: [B, Din], weight: [Dout, Din], bias: [Dout]."""
    x, weight, bias = as_f32(x), as_f32(weight), as_f32(bias)
    if x.ndim != 2 or weight.ndim != 2:
        raise DimensionError(f"dense expects 2-d input and weight, got {x.shape} and {weight.shape}")
    if x.shape[1] != weight.shape[1]:
        raise DimensionError(
            f"dense input axis 1 is {x.shape[1]}, weight axis 1 is {weight.shape[1]}"
        )
    if bias.shape != (weight.shape[0],):
        raise DimensionError(f"dense bias shape {bias.shape} != ({weight.shape[0]},)")
    return x @ weight.T + bias


def dense_backward(
    x: np.ndarray, weight: np.ndarray, dout: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of dense_forward: returns (dx, dweight, dbias)."""
    x, weight, dout = as_f32(x), as_f32(weight), as_f32(dout)
    return dout @ weight, dout.T @ x, dout.sum(axis=0)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(as_f32(x), np.float32(0.0))


def relu_backward(x: np.ndarray, dout: np.ndarray) -> np.ndarray:
    """Pass gradient only where the pre-activation was positive."""
    return np.where(x > 0, as_f32(dout), np.float32(0.0))


def softmax_cross_entropy(
    logits: np.ndarray, onehot: np.ndarray
) -> tuple[np.ndarray, float]:
    """Fused softmax + categorical cross-entropy over a batch.

    Uses max-subtraction so large logits cannot overflow. Returns the
    row-wise probabilities and the mean loss.
    """
    logits, onehot = as_f32(logits), as_f32(onehot)
    if logits.shape != onehot.shape or logits.ndim != 2:
        raise DimensionError(f"logits {logits.shape} vs onehot {onehot.shape} mismatch")
    _check_onehot(onehot)
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    denom = exp.sum(axis=1, keepdims=True)
    probs = exp / denom
    # loss_b = log(sum exp) - true logit, both on the shifted scale
    true_logit = (shifted * onehot).sum(axis=1)
    losses = np.log(denom[:, 0]) - true_logit
    return probs, float(losses.mean(dtype=np.float32))


def per_example_cross_entropy(logits: np.ndarray, onehot: np.ndarray) -> np.ndarray:
    """Per-row cross-entropy, same stabilized computation as the fused op."""
    logits, onehot = as_f32(logits), as_f32(onehot)
    if logits.shape != onehot.shape:
        raise DimensionError(f"logits {logits.shape} vs onehot {onehot.shape} mismatch")
    _check_onehot(onehot)
    shifted = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    return (lse - (shifted * onehot).sum(axis=1)).astype(np.float32)


def _check_onehot(onehot: np.ndarray) -> None:
    one = np.isclose(onehot, 1.0)
    zero = onehot == 0.0
    if not np.all(one | zero) or not np.all(one.sum(axis=1) == 1):
        raise ValidationError("label rows must be one-hot: a single 1, rest 0")


@dataclass
class AdamState:
    """First and second moment estimates, one array per parameter name."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0

    @classmethod
    def zeros_like(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
            t=0,
        )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = ADAM_BETA1,
    beta2: float = ADAM_BETA2,
    eps: float = ADAM_EPS,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One Adam update with bias correction. Returns new params and state."""
    for name, p in params.items():
        if grads[name].shape != p.shape:
            raise DimensionError(
                f"gradient for {name} has shape {grads[name].shape}, parameter is {p.shape}"
            )
    t = state.t + 1
    b1, b2 = np.float32(beta1), np.float32(beta2)
    c1 = np.float32(1.0 / (1.0 - beta1**t))
    c2 = np.float32(1.0 / (1.0 - beta2**t))
    lr32, eps32 = np.float32(lr), np.float32(eps)
    new_params: dict[str, np.ndarray] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    for name, p in params.items():
        g = as_f32(grads[name])
        m = b1 * state.m[name] + (np.float32(1.0) - b1) * g
        v = b2 * state.v[name] + (np.float32(1.0) - b2) * g * g
        new_params[name] = p - lr32 * (m * c1) / (np.sqrt(v * c2) + eps32)
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(m=new_m, v=new_v, t=t)
