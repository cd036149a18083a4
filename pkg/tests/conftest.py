import os
from pathlib import Path

import numpy as np
import pytest

MNIST_DIR = Path(os.environ.get("HULLGAP_MNIST_DIR", "/root/data/mnist"))
MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}

CRITERIA = []


def mnist_paths():
    paths = {k: MNIST_DIR / v for k, v in MNIST_FILES.items()}
    for k, p in list(paths.items()):
        if not p.exists() and p.with_name(p.name + ".gz").exists():
            paths[k] = p.with_name(p.name + ".gz")
    return paths if all(p.exists() for p in paths.values()) else None


@pytest.fixture(scope="session")
def mnist():
    paths = mnist_paths()
    if paths is None:
        pytest.skip(f"MNIST IDX files not found in {MNIST_DIR} (set HULLGAP_MNIST_DIR)")
    from hullgap.datasets import load_mnist_idx
    return (load_mnist_idx(paths["train_images"], paths["train_labels"]),
            load_mnist_idx(paths["test_images"], paths["test_labels"]))


@pytest.fixture
def triangle():
    return np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)
