from pathlib import Path

import numpy as np
import pytest

from charrnn.corpus import build_vocab, load_corpus

REPO_ROOT = Path(__file__).resolve().parents[1]
FIXTURE_CORPUS = REPO_ROOT / "data" / "tiny_script.txt"


@pytest.fixture(scope="session")
def fixture_path() -> Path:
    return FIXTURE_CORPUS


@pytest.fixture(scope="session")
def fixture_text() -> str:
    return load_corpus(FIXTURE_CORPUS)


@pytest.fixture(scope="session")
def fixture_vocab(fixture_text):
    return build_vocab(fixture_text)


def rel_err(a: np.ndarray, b: np.ndarray, floor: float = 1e-6) -> float:
    """Max elementwise relative error with a denominator floor."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.abs(a) + np.abs(b), floor)
    return float(np.max(np.abs(a - b) / denom))


def finite_difference(loss_fn, arrays, h: float = 1e-5):
    """Central-difference gradients of loss_fn with respect to each array.

    loss_fn takes no arguments and reads the arrays in place; every element
    is perturbed by +-h. Returns one gradient array per input array.
    """
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn()
            flat[i] = orig - h
            down = loss_fn()
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * h)
        grads.append(g)
    return grads
