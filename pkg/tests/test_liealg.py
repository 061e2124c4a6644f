import numpy as np
import pytest

from qctrl import liealg, spectra
from qctrl import propagate as prop
from qctrl.errors import CommutatorOverflow, DecoupledEdge, ResonantGap
from conftest import random_connected_spec


def e(n, j, k):
    m = np.zeros((n, n), dtype=complex)
    m[j - 1, k - 1] = 1.0
    return m


class TestAdPower:
    def test_order_zero_is_bmat(self, ex4):
        pair = prop.galerkin(ex4, 4)
        assert np.array_equal(liealg.ad_power(pair, 0), pair.bmat)

    def test_ex4_order_two_entry(self, ex4):
        pair = prop.galerkin(ex4, 4)
        # (a_11 - a_22)^2 b_12 = (i - 2i)^2 = -1
        assert liealg.ad_power(pair, 2)[0, 1] == pytest.approx(-1.0)

    def test_commuting_diagonals_vanish(self):
        pair = liealg.SkewPair(a=np.diag([1j, 2j, 3j]),
                               bmat=np.diag([1j, 2j, 5j]))
        for order in (1, 2, 5):
            assert np.max(np.abs(liealg.ad_power(pair, order))) == 0.0

    def test_overflow_guard(self):
        pair = liealg.SkewPair(a=np.diag([1e80j, 0j]),
                               bmat=np.array([[0, 1], [-1, 0]], dtype=complex))
        with pytest.raises(CommutatorOverflow):
            liealg.ad_power(pair, 4)

    def test_order_cap(self, ex4):
        pair = prop.galerkin(ex4, 4)
        with pytest.raises(ValueError):
            liealg.ad_power(pair, 65)


class TestExtractElementary:
    def test_ex4_edge_12(self, ex4):
        pair = prop.galerkin(ex4, 4)
        even, odd = liealg.extract_elementary(pair, (1, 2))
        assert np.allclose(even, e(4, 1, 2) - e(4, 2, 1), atol=1e-10)
        assert np.allclose(odd, 1j * (e(4, 1, 2) + e(4, 2, 1)), atol=1e-10)

    def test_decoupled_edge(self, ex4):
        pair = prop.galerkin(ex4, 4)
        with pytest.raises(DecoupledEdge):
            liealg.extract_elementary(pair, (3, 4))

    def test_two_level_trivial_polynomial(self):
        pair = liealg.SkewPair(a=np.diag([1j, 2j]),
                               bmat=np.array([[0, 1], [-1, 0]], dtype=complex))
        even, _ = liealg.extract_elementary(pair, (1, 2))
        assert np.allclose(even, pair.bmat, atol=1e-12)

    def test_resonant_gap_rejected(self):
        b = np.zeros((4, 4), dtype=complex)
        b[0, 1], b[1, 0] = 1, -1
        b[2, 3], b[3, 2] = 1, -1
        pair = liealg.SkewPair(a=np.diag([0j, 1j, 3j, 4j]), bmat=b)
        with pytest.raises(ResonantGap):
            liealg.extract_elementary(pair, (1, 2))

    def test_generators_skew(self, rng):
        spec = random_connected_spec(rng, 5, diag_imag=True)
        pair = prop.galerkin(spec, 5)
        chain = spectra.check_nonresonant(spec, spectra.find_chain(spec))
        if not chain.certified_nonresonant:
            pytest.skip("random draw resonant")
        j, k = chain.edges[0]
        even, odd = liealg.extract_elementary(pair, (j, k))
        for m in (even, odd):
            assert np.max(np.abs(m + m.conj().T)) < 1e-9


class TestLieRank:
    def test_ex4_full_unitary_algebra(self, ex4):
        pair = prop.galerkin(ex4, 4)
        assert liealg.lie_rank(pair) == (16, "U")

    def test_abelian_insufficient(self):
        pair = liealg.SkewPair(a=np.diag([1j, 2j, 3j]),
                               bmat=np.diag([1j, 1j, 2j]))
        dim, verdict = liealg.lie_rank(pair)
        assert dim <= 3
        assert verdict == "INSUFFICIENT"

    def test_two_level_example(self):
        pair = liealg.SkewPair(a=np.diag([1j, 2j]),
                               bmat=np.array([[0, 1], [-1, 0]], dtype=complex))
        assert liealg.lie_rank(pair) == (4, "U")

    def test_traceless_su(self):
        pair = liealg.SkewPair(a=np.diag([1j, -1j]),
                               bmat=np.array([[0, 1], [-1, 0]], dtype=complex))
        assert liealg.lie_rank(pair) == (3, "SU")

    def test_invariant_under_conjugation(self, ex4, rng):
        pair = prop.galerkin(ex4, 4)
        z = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        q, _ = np.linalg.qr(z)
        moved = liealg.SkewPair(a=q @ pair.a @ q.conj().T,
                                bmat=q @ pair.bmat @ q.conj().T)
        assert liealg.lie_rank(moved) == liealg.lie_rank(pair)

    def test_certified_hypotheses_imply_controllability(self):
        # certified non-resonant chain + connected graph + distinct gaps
        # on the edges forces transitivity on SU(n) or U(n)
        hits = 0
        for seed in range(30):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(3, 7))
            spec = random_connected_spec(rng, n)
            chain = spectra.check_nonresonant(spec, spectra.find_chain(spec))
            if not chain.certified_nonresonant:
                continue
            hits += 1
            pair = prop.galerkin(spec, n)
            _, verdict = liealg.lie_rank(pair)
            assert verdict in ("SU", "U")
        assert hits >= 10
