import numpy as np
import pytest


def random_hermitian(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (a + a.conj().T) / 2.0


def random_state(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_povm(rng, d, n_outcomes):
    """Random POVM via normalizing a family of random PSD operators."""
    parts = []
    for _ in range(n_outcomes):
        a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        parts.append(a @ a.conj().T)
    total = sum(parts)
    w, v = np.linalg.eigh(total)
    inv_sqrt = (v / np.sqrt(w)) @ v.conj().T
    return [inv_sqrt @ p @ inv_sqrt for p in parts]


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
