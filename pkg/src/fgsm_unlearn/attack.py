"""Fast gradient sign attack against a fixed model snapshot.

x_adv = clip(x + epsilon * sign(dL/dx), 0, 1), with the gradient taken
against the true labels. sign(0) is 0, so untouched coordinates stay
bit-identical; clipping keeps adversarial pixels valid images.
"""

import os
from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset
from .errors import ValidationError
from .lenet import LeNetParams, backward_pass


@dataclass
class AttackConfig:
    epsilon: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValidationError(f"epsilon must be in [0, 1], got {self.epsilon}")


def fgsm_perturb(
    params: LeNetParams, x: np.ndarray, y: np.ndarray, cfg: AttackConfig
) -> np.ndarray:
    """Perturb one batch. Returns images the same shape as x."""
    x = np.ascontiguousarray(x, dtype=np.float32)
    if cfg.epsilon == 0.0:
        return x.copy()
    bundle = backward_pass(params, x, y)
    step = np.float32(cfg.epsilon) * np.sign(bundle.input_grad)
    return np.clip(x + step, 0.0, 1.0)


def fgsm_dataset(
    params: LeNetParams, ds: LabeledDataset, cfg: AttackConfig, batch_size: int = 256
) -> LabeledDataset:
    """Adversarial counterpart of a whole dataset.

    Labels and ids are carried over unchanged: id i in the result is the
    perturbed version of clean example with id i.
    """
    chunks = []
    for start in range(0, len(ds), batch_size):
        bx = ds.images[start : start + batch_size]
        by = ds.labels[start : start + batch_size]
        chunks.append(fgsm_perturb(params, bx, by, cfg))
    images = np.concatenate(chunks) if chunks else ds.images.copy()
    return LabeledDataset(images=images, labels=ds.labels.copy(), ids=ds.ids.copy())


def dump_pgm(ds: LabeledDataset, out_dir: str, limit: int | None = None) -> list[str]:
    """Write examples as 8-bit grayscale PGM (P5) files named <id>.pgm."""
    os.makedirs(out_dir, exist_ok=True)
    n = len(ds) if limit is None else min(limit, len(ds))
    paths = []
    for i in range(n):
        img = np.clip(np.rint(ds.images[i, :, :, 0] * 255.0), 0, 255).astype(np.uint8)
        path = os.path.join(out_dir, f"{int(ds.ids[i])}.pgm")
        with open(path, "wb") as f:
            f.write(b"P5\n%d %d\n255\n" % (img.shape[1], img.shape[0]))
            f.write(img.tobytes())
        paths.append(path)
    return paths
