import numpy as np
import pytest

from qctrl import models, spectra


@pytest.fixture
def ex4():
    return models.example_4x4()


@pytest.fixture
def ex4_chain(ex4):
    return spectra.check_nonresonant(ex4, spectra.find_chain(ex4))


@pytest.fixture
def well6():
    return models.infinite_well(models.WellParams(N=6))


@pytest.fixture
def well6_chain(well6):
    chain = spectra.chain_from_edges(well6, [(k, k + 1) for k in range(1, 6)])
    return spectra.check_nonresonant(well6, chain)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_connected_spec(rng, n, p_extra=0.4, diag_imag=False):
    """Random spec with distinct eigenvalues and a connected coupling graph."""
    lam = np.sort(rng.uniform(0.5, 10.0, size=n))
    while np.min(np.diff(lam)) < 1e-3:
        lam = np.sort(rng.uniform(0.5, 10.0, size=n))
    b = np.zeros((n, n), dtype=complex)
    for j in range(n - 1):
        z = rng.normal() + 1j * rng.normal()
        b[j, j + 1] = z
        b[j + 1, j] = -np.conj(z)
    for j in range(n):
        for k in range(j + 2, n):
            if rng.random() < p_extra:
                z = rng.normal() + 1j * rng.normal()
                b[j, k] = z
                b[k, j] = -np.conj(z)
    if diag_imag:
        for j in range(n):
            b[j, j] = 1j * rng.normal()
    return spectra.SystemSpec(lam=lam, b=b, delta=2.0)
