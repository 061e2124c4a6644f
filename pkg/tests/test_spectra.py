import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qctrl import models, spectra
from qctrl.errors import NotConnected, SpecValidationError
from conftest import random_connected_spec


def unordered(pairs):
    return {tuple(sorted(p)) for p in pairs}


class TestCoupledPairs:
    def test_ex4(self, ex4):
        pairs = spectra.coupled_pairs(ex4)
        assert unordered(pairs) == {(1, 2), (1, 3), (2, 4)}
        # symmetric as an ordered set
        assert all((k, j) in pairs for j, k in pairs)

    def test_zero_matrix(self):
        spec = spectra.SystemSpec(lam=np.array([1.0, 2.0, 3.0]),
                                  b=np.zeros((3, 3), dtype=complex))
        assert spectra.coupled_pairs(spec) == set()

    def test_well_parity_pattern(self, well6):
        pairs = unordered(spectra.coupled_pairs(well6))
        expected = {(j, k) for j in range(1, 7) for k in range(j + 1, 7)
                    if (j + k) % 2 == 1}
        assert pairs == expected

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_invariant_under_diagonal_phases(self, seed):
        rng = np.random.default_rng(seed)
        spec = random_connected_spec(rng, 5)
        phases = np.exp(1j * rng.uniform(0, 2 * np.pi, size=5))
        d = np.diag(phases)
        conj = spectra.SystemSpec(lam=spec.lam, b=d @ spec.b @ d.conj().T,
                                  delta=spec.delta)
        assert spectra.coupled_pairs(conj) == spectra.coupled_pairs(spec)


class TestDegenerateDecoupling:
    def test_ex4_clean(self, ex4):
        assert spectra.check_degenerate_decoupling(ex4) == []

    def test_direct_violation(self):
        spec = spectra.SystemSpec(lam=np.array([1.0, 1.0]),
                                  b=np.array([[0, 1], [-1, 0]], dtype=complex))
        assert spectra.check_degenerate_decoupling(spec) == [(1, 2)]

    def test_well_simple_spectrum(self, well6):
        assert spectra.check_degenerate_decoupling(well6) == []

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_monotone_lambda_always_clean(self, seed):
        rng = np.random.default_rng(seed)
        spec = random_connected_spec(rng, 5)
        assert spectra.check_degenerate_decoupling(spec) == []


class TestFindChain:
    def test_ex4_edges(self, ex4):
        chain = spectra.find_chain(ex4)
        assert set(chain.edges) == {(1, 2), (2, 1), (1, 3), (3, 1),
                                    (2, 4), (4, 2)}
        assert chain.certified_connected

    def test_molecule_even_nearest_neighbour(self):
        spec = models.planar_molecule(models.MoleculeParams(N=4))
        chain = spectra.find_chain(spec)
        assert chain.unordered_edges() == [(k, k + 1) for k in range(1, 5)]

    def test_disconnected(self):
        b = np.zeros((4, 4), dtype=complex)
        b[0, 1], b[1, 0] = 1, -1
        b[2, 3], b[3, 2] = 1, -1
        spec = spectra.SystemSpec(lam=np.array([1.0, 2.0, 3.0, 4.0]), b=b)
        with pytest.raises(NotConnected) as exc:
            spectra.find_chain(spec)
        assert len(exc.value.components) == 2


class TestNonResonance:
    def test_ex4_certified(self, ex4, ex4_chain):
        assert ex4_chain.certified_nonresonant
        gaps = {abs(ex4.lam[j - 1] - ex4.lam[k - 1])
                for j, k in ex4_chain.unordered_edges()}
        assert gaps == {1.0, 3.0, 2.0}

    def test_well8_collision(self):
        well8 = models.infinite_well(models.WellParams(N=8))
        chain = spectra.chain_from_edges(well8,
                                         [(k, k + 1) for k in range(1, 8)])
        chain = spectra.check_nonresonant(well8, chain)
        assert not chain.certified_nonresonant
        assert ((7, 8), (1, 4)) in chain.violations

    def test_well8_truncated_chain_passes(self):
        well8 = models.infinite_well(models.WellParams(N=8))
        chain = spectra.chain_from_edges(well8,
                                         [(k, k + 1) for k in range(1, 6)])
        chain = spectra.check_nonresonant(well8, chain)
        assert chain.certified_nonresonant

    def test_symmetric_under_edge_reversal(self, rng):
        spec = random_connected_spec(rng, 5)
        chain = spectra.find_chain(spec)
        fwd = spectra.check_nonresonant(spec, chain)
        rev = spectra.Chain(edges=tuple((k, j) for j, k in chain.edges),
                            certified_connected=True)
        back = spectra.check_nonresonant(spec, rev)
        assert fwd.certified_nonresonant == back.certified_nonresonant
        assert unordered(a for a, _ in fwd.violations) == \
            unordered(a for a, _ in back.violations)


class TestReorderBasis:
    def test_ex4_identity(self, ex4, ex4_chain):
        assert spectra.reorder_basis(ex4, ex4_chain) == (1, 2, 3, 4)

    def test_star_graph(self):
        b = np.zeros((3, 3), dtype=complex)
        b[2, 0], b[0, 2] = 1, -1
        b[2, 1], b[1, 2] = 1, -1
        spec = spectra.SystemSpec(lam=np.array([1.0, 2.0, 3.0]), b=b)
        chain = spectra.find_chain(spec)
        sigma = spectra.reorder_basis(spec, chain)
        assert sigma[0] == 1
        new_spec, new_chain = spectra.apply_reorder(spec, chain, sigma)
        for m in range(1, 4):
            assert spectra.couples_prefix(new_chain, m)

    def test_path_identity(self):
        b = np.zeros((3, 3), dtype=complex)
        b[0, 1], b[1, 0] = 1, -1
        b[1, 2], b[2, 1] = 1, -1
        spec = spectra.SystemSpec(lam=np.array([1.0, 2.0, 3.0]), b=b)
        chain = spectra.find_chain(spec)
        assert spectra.reorder_basis(spec, chain) == (1, 2, 3)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_prefix_connectivity_random(self, seed):
        rng = np.random.default_rng(seed)
        spec = random_connected_spec(rng, 6)
        chain = spectra.find_chain(spec)
        sigma = spectra.reorder_basis(spec, chain)
        _, new_chain = spectra.apply_reorder(spec, chain, sigma)
        for m in range(1, 7):
            assert spectra.couples_prefix(new_chain, m)


class TestSpecValidation:
    def test_skewness_enforced(self):
        with pytest.raises(SpecValidationError):
            spectra.SystemSpec(lam=np.array([1.0, 2.0]),
                               b=np.array([[0, 1], [1, 0]], dtype=complex))

    def test_positive_delta(self):
        with pytest.raises(SpecValidationError):
            spectra.SystemSpec(lam=np.array([1.0]), b=np.zeros((1, 1)),
                               delta=0.0)

    def test_json_round_trip_exact(self, well6):
        again = spectra.SystemSpec.from_json(well6.to_json())
        assert np.array_equal(again.lam, well6.lam)
        assert np.array_equal(again.b, well6.b)
        assert again.delta == well6.delta
        assert again.zero_tol == well6.zero_tol
