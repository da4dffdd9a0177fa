"""Shared fixtures.

The data directory defaults to a generated synthetic digit corpus. Set
FGSM_UNLEARN_MNIST to a directory holding the four canonical MNIST IDX
files to run everything against the real dataset instead.
"""

import os

import numpy as np
import pytest

from fgsm_unlearn import data, synth
from fgsm_unlearn.checkpoint import save_checkpoint
from fgsm_unlearn.lenet import LeNetParams, init_params, train_epochs
from fgsm_unlearn.ops import AdamState

MNIST_ENV = "FGSM_UNLEARN_MNIST"


def real_mnist_dir() -> str | None:
    d = os.environ.get(MNIST_ENV)
    if d and all(
        os.path.exists(os.path.join(d, f))
        for f in (data.TRAIN_IMAGES, data.TRAIN_LABELS, data.TEST_IMAGES, data.TEST_LABELS)
    ):
        return d
    return None


@pytest.fixture(scope="session")
def data_dir(tmp_path_factory) -> str:
    real = real_mnist_dir()
    if real:
        return real
    d = tmp_path_factory.mktemp("corpus")
    synth.generate_dataset_files(str(d), n_train=12000, n_test=2000, seed=123)
    return str(d)


@pytest.fixture(scope="session")
def dataset(data_dir):
    return data.load_mnist(data_dir)


@pytest.fixture(scope="session")
def train_subset_10k(dataset):
    train, _ = dataset
    return data.subset(train, 10000, seed=42)


@pytest.fixture(scope="session")
def trained(tmp_path_factory, train_subset_10k):
    """The headline model: fresh init, 15 epochs on the 10k subset.

    Returns (params, adam, checkpoint_path)."""
    params = init_params(42)
    adam = AdamState.zeros_like(params.as_dict())
    params, adam, _ = train_epochs(
        params, adam, train_subset_10k, epochs=15, batch_size=128, lr=1e-3, seed=42
    )
    path = str(tmp_path_factory.mktemp("model") / "model.ulrn")
    save_checkpoint(params, adam, {"seed": "42", "epochs": "15"}, path)
    return params, adam, path


def tiny_params(seed: int = 7, scale: float = 0.3) -> LeNetParams:
    """A width-reduced stack (2/4/8 conv maps, 10-wide dense) with random
    weights; runs through the same forward/backward code."""
    rng = np.random.default_rng(seed)

    def g(shape):
        return rng.uniform(-scale, scale, shape).astype(np.float32)

    return LeNetParams(
        c1_w=g((5, 5, 1, 2)), c1_b=g((2,)),
        c3_w=g((5, 5, 2, 4)), c3_b=g((4,)),
        c5_w=g((5, 5, 4, 8)), c5_b=g((8,)),
        f6_w=g((10, 8)), f6_b=g((10,)),
        out_w=g((10, 10)), out_b=g((10,)),
    )


def random_batch(n: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 1, (n, 32, 32, 1)).astype(np.float32)
    y = np.zeros((n, 10), dtype=np.float32)
    y[np.arange(n), rng.integers(0, 10, n)] = 1.0
    return x, y
