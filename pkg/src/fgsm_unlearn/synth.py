"""Deterministic synthetic digit corpus in MNIST's IDX container format.

This environment ships no MNIST files and has no way to fetch them, so this
module renders a stand-in corpus: digits 0-9 drawn with the system DejaVu
fonts under random rotation, shift, scale, thickness, and pixel noise, then
written as the four canonical IDX files. The rest of the pipeline cannot
tell the difference; point it at real MNIST files whenever you have them.
"""

import os

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from . import data

FONT_DIR = "/usr/share/fonts/truetype/dejavu"
FONTS = [
    "DejaVuSans.ttf",
    "DejaVuSans-Bold.ttf",
    "DejaVuSansMono.ttf",
    "DejaVuSansMono-Bold.ttf",
    "DejaVuSerif.ttf",
    "DejaVuSerif-Bold.ttf",
]

_font_cache: dict[tuple[str, int], ImageFont.FreeTypeFont] = {}


def _font(name: str, size: int) -> ImageFont.FreeTypeFont:
    key = (name, size)
    if key not in _font_cache:
        _font_cache[key] = ImageFont.truetype(os.path.join(FONT_DIR, name), size)
    return _font_cache[key]


def render_digit(digit: int, rng: np.random.Generator) -> np.ndarray:
    """One 28x28 uint8 image of a digit with randomized appearance."""
    font = _font(FONTS[rng.integers(len(FONTS))], int(rng.integers(34, 40)))
    canvas = Image.new("L", (64, 64), 0)
    draw = ImageDraw.Draw(canvas)
    left, top, right, bottom = draw.textbbox((0, 0), str(digit), font=font)
    draw.text(
        ((64 - (right - left)) / 2 - left, (64 - (bottom - top)) / 2 - top),
        str(digit),
        fill=255,
        font=font,
    )
    canvas = canvas.rotate(
        float(rng.uniform(-8, 8)),
        resample=Image.BILINEAR,
        translate=(float(rng.uniform(-2, 2)), float(rng.uniform(-2, 2))),
    )
    small = canvas.resize((22, 22), resample=Image.BILINEAR)
    img = np.zeros((28, 28), dtype=np.float32)
    dx, dy = rng.integers(-2, 3, size=2)
    img[3 + dy : 25 + dy, 3 + dx : 25 + dx] = np.asarray(small, dtype=np.float32)
    img += rng.normal(0.0, 3.0, size=img.shape)
    return np.clip(img, 0, 255).astype(np.uint8)


def render_corpus(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """n images and labels; class sequence and appearances are seed-determined."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 10, size=n).astype(np.uint8)
    images = np.stack([render_digit(int(d), rng) for d in labels])
    return images, labels


def generate_dataset_files(
    out_dir: str, n_train: int = 12000, n_test: int = 2000, seed: int = 123
) -> None:
    """Write the four canonical IDX files into out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    train_images, train_labels = render_corpus(n_train, seed)
    test_images, test_labels = render_corpus(n_test, seed + 1)
    data.write_idx_images(os.path.join(out_dir, data.TRAIN_IMAGES), train_images)
    data.write_idx_labels(os.path.join(out_dir, data.TRAIN_LABELS), train_labels)
    data.write_idx_images(os.path.join(out_dir, data.TEST_IMAGES), test_images)
    data.write_idx_labels(os.path.join(out_dir, data.TEST_LABELS), test_labels)
