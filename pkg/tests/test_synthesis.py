import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import qctrl
from qctrl import models, spectra, synthesis
from qctrl.errors import (DegenerateGaps, EdgeNotInChain, NotFoundWithin,
                          NotLowestTerms, NotMConnected, ZeroValueStep)


class TestReparam:
    def test_direct_formula(self):
        u = synthesis.PiecewiseConstantControl(((2.0, 1.5),))
        assert synthesis.reparam(u).steps == ((0.5, 3.0),)

    def test_involution(self):
        u = synthesis.PiecewiseConstantControl(((0.25, 4.0), (5.0, 0.2)))
        assert synthesis.reparam(synthesis.reparam(u)).steps == u.steps

    def test_involution_exact_on_rationals(self, rng):
        for _ in range(50):
            steps = tuple((Fraction(int(rng.integers(1, 50)),
                                    int(rng.integers(1, 50))),
                           Fraction(int(rng.integers(1, 50)),
                                    int(rng.integers(1, 50))))
                          for _ in range(int(rng.integers(1, 6))))
            u = synthesis.PiecewiseConstantControl(steps)
            assert synthesis.reparam(synthesis.reparam(u)).steps == u.steps
            assert synthesis.reparam(u).l1_norm == u.total_duration

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3)),
                    min_size=1, max_size=6))
    def test_l1_identity_floats(self, steps):
        u = synthesis.PiecewiseConstantControl(tuple(steps))
        v = synthesis.reparam(u)
        assert v.l1_norm == pytest.approx(u.total_duration, rel=1e-12)
        w = synthesis.reparam(v)
        assert np.allclose(w.values(), u.values(), rtol=1e-12)
        assert np.allclose(w.durations(), u.durations(), rtol=1e-12)

    def test_zero_value_rejected(self):
        u = synthesis.PiecewiseConstantControl(((0.0, 1.0),))
        with pytest.raises(ZeroValueStep):
            synthesis.reparam(u)


class TestNuConstant:
    def test_first_factor(self):
        assert synthesis.nu_constant(2) == pytest.approx(np.cos(np.pi / 4),
                                                         abs=1e-15)

    def test_million_terms(self):
        val = synthesis.nu_constant(10 ** 6)
        assert 0.429 <= val <= 0.431

    def test_monotone_and_bounded(self):
        sample = [synthesis.nu_constant(t) for t in (2, 5, 10, 100, 1000)]
        assert all(a > b for a, b in zip(sample, sample[1:]))
        assert all(v > 0.4 for v in sample)

    def test_limit_constant_consistent(self):
        assert qctrl.NU == pytest.approx(synthesis.nu_constant(10 ** 6),
                                         abs=1e-5)


class TestAveragingTimes:
    def test_gaps_132(self):
        t = synthesis.averaging_times([1.0, 3.0, 2.0], spacing=0.0)
        assert len(t) == 4
        for g in (3.0, 2.0):
            assert abs(np.mean(np.exp(1j * g * t))) <= 1e-12
        bound = np.cos(np.pi / 6) * np.cos(np.pi / 4)
        assert abs(np.mean(np.exp(1j * t))) >= bound - 1e-12

    def test_single_gap(self):
        t = synthesis.averaging_times([2.5], t0=1.25)
        assert np.array_equal(t, [1.25])
        assert abs(np.mean(np.exp(1j * 2.5 * t))) == pytest.approx(1.0)

    def test_two_gaps_spacing(self):
        t = synthesis.averaging_times([1.0, 2.0], spacing=100.0)
        assert len(t) == 2
        assert t[1] - t[0] > 100.0
        assert abs(np.mean(np.exp(1j * 2.0 * t))) <= 1e-12

    def test_degenerate_rejected(self):
        with pytest.raises(DegenerateGaps):
            synthesis.averaging_times([1.0, 1.0 + 1e-12, 2.0])

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 5000), spacing=st.floats(0.0, 30.0))
    def test_spacing_and_integer_class_zeros(self, seed, spacing):
        rng = np.random.default_rng(seed)
        g1 = float(rng.uniform(0.5, 2.0))
        mults = sorted(rng.choice(np.arange(2, 9), size=3, replace=False))
        gaps = [g1] + [g1 * int(m) for m in mults]
        t = synthesis.averaging_times(gaps, spacing=spacing)
        assert np.all(np.diff(t) > spacing)
        for g in gaps[1:]:
            assert abs(np.mean(np.exp(1j * g * t))) <= 1e-10
        bound = np.prod([np.cos(np.pi * g1 / (2 * g)) for g in gaps[1:]])
        assert abs(np.mean(np.exp(1j * g1 * t))) >= bound - 1e-10


class TestSigmaSwap:
    def test_well_duration(self, well6, well6_chain):
        sched = synthesis.sigma_swap(well6, well6_chain, (1, 2))
        dur = sched.steps[0][2]
        assert dur == pytest.approx(9 * np.pi ** 3 / (32 * qctrl.NU),
                                    rel=1e-12)

    def test_unit_normalisation(self):
        mag = np.pi / (2 * qctrl.NU)
        b = np.zeros((2, 2), dtype=complex)
        b[0, 1], b[1, 0] = 1j * mag, 1j * mag
        spec = spectra.SystemSpec(lam=np.array([0.0, 1.0]), b=b)
        chain = spectra.find_chain(spec)
        sched = synthesis.sigma_swap(spec, chain, (1, 2))
        assert sched.steps[0][2] == pytest.approx(1.0, rel=1e-12)

    def test_rotation_and_square(self, well6, well6_chain):
        sched = synthesis.sigma_swap(well6, well6_chain, (1, 2))
        rot = synthesis.schedule_rotation(well6, sched, 6)
        psi1 = np.zeros(6, complex)
        psi1[0] = 1.0
        assert np.allclose(rot @ psi1, -np.eye(6)[1], atol=1e-9)
        twice = synthesis.schedule_rotation(well6, sched + sched, 6)
        expect = np.eye(6, dtype=complex)
        expect[0, 0] = expect[1, 1] = -1
        assert np.allclose(twice, expect, atol=1e-9)

    def test_edge_not_in_chain(self, well6, well6_chain):
        with pytest.raises(EdgeNotInChain):
            synthesis.sigma_swap(well6, well6_chain, (1, 4))


def path_spec(m):
    lam = np.array([1.0 + 1.7 * k + 0.13 * k * k for k in range(m)])
    b = np.zeros((m, m), dtype=complex)
    for k in range(m - 1):
        b[k, k + 1], b[k + 1, k] = 1.0, -1.0
    return spectra.SystemSpec(lam=lam, b=b)


def perm_matrix(sigma):
    m = len(sigma)
    p = np.zeros((m, m))
    for l in range(m):
        p[sigma[l] - 1, l] = 1.0
    return p


class TestPermutationToSchedule:
    def test_three_cycle_swaps(self):
        spec = path_spec(3)
        chain = spectra.find_chain(spec)
        sched = synthesis.permutation_to_schedule(spec, chain, [3, 2, 1])
        assert [s[0] for s in sched.steps] == [(1, 2), (2, 3), (1, 2)]
        assert len(sched) == 2 ** 2 - 1

    def test_identity_empty(self):
        spec = path_spec(4)
        chain = spectra.find_chain(spec)
        sched = synthesis.permutation_to_schedule(spec, chain, [1, 2, 3, 4])
        assert len(sched) == 0

    @pytest.mark.parametrize("m", [2, 3, 4, 5])
    def test_exhaustive_against_matrix_oracle(self, m):
        from itertools import permutations
        spec = path_spec(m)
        chain = spectra.find_chain(spec)
        for sigma in permutations(range(1, m + 1)):
            sched = synthesis.permutation_to_schedule(spec, chain, sigma)
            assert len(sched) <= 2 ** (m - 1) - 1
            rot = synthesis.schedule_rotation(spec, sched, m)
            assert np.allclose(np.abs(rot), perm_matrix(sigma), atol=1e-9)

    def test_not_m_connected(self):
        b = np.zeros((3, 3), dtype=complex)
        b[0, 2], b[2, 0] = 1, -1
        b[1, 2], b[2, 1] = 1, -1
        spec = spectra.SystemSpec(lam=np.array([1.0, 2.0, 4.0]), b=b)
        chain = spectra.find_chain(spec)  # star centred at 3
        with pytest.raises(NotMConnected):
            synthesis.permutation_to_schedule(spec, chain, [2, 1])


class TestStateTransferSchedule:
    def test_concentrates_arbitrary_state(self, rng):
        spec = path_spec(5)
        chain = spectra.find_chain(spec)
        for _ in range(10):
            x = rng.normal(size=5) + 1j * rng.normal(size=5)
            x /= np.linalg.norm(x)
            sched = synthesis.state_transfer_schedule(spec, chain, x, target=1)
            rot = synthesis.schedule_rotation(spec, sched, 5)
            y = rot @ x
            assert abs(y[0]) == pytest.approx(1.0, abs=1e-9)


class TestPeriodTau:
    def test_halves_and_thirds(self):
        assert synthesis.period_tau([Fraction(1, 2), Fraction(1, 3)]) == 6

    def test_integers_reduce_to_gcd(self):
        assert synthesis.period_tau([6, 10, 15]) == 1
        assert synthesis.period_tau([Fraction(4), Fraction(6)]) == Fraction(1, 2)

    def test_single_value(self):
        assert synthesis.period_tau([Fraction(3, 4)]) == Fraction(4, 3)

    def test_not_lowest_terms(self):
        with pytest.raises(NotLowestTerms):
            synthesis.period_tau([(2, 4)])

    def test_against_rational_lcm_oracle(self, rng):
        for _ in range(500):
            m = int(rng.integers(1, 4))
            fr = []
            for _ in range(m):
                a = int(rng.integers(1, 21))
                b = int(rng.integers(1, 21))
                g = math.gcd(a, b)
                fr.append(Fraction(a // g, b // g))
            tau = synthesis.period_tau(fr)
            oracle = Fraction(math.lcm(*[f.denominator for f in fr]),
                              math.gcd(*[f.numerator for f in fr]))
            assert tau == oracle
            # brute-force scan when it is affordable
            lcm_a = math.lcm(*[f.numerator for f in fr])
            horizon = math.prod(f.denominator for f in fr) * lcm_a
            if horizon <= 20000:
                for k in range(1, horizon + 1):
                    t = Fraction(k, lcm_a)
                    if all((t * f).denominator == 1 for f in fr):
                        assert t == tau
                        break

    def test_multiples_property(self, rng):
        for _ in range(50):
            fr = [Fraction(int(rng.integers(1, 15)), int(rng.integers(1, 15)))
                  for _ in range(2)]
            fr = [Fraction(f.numerator, f.denominator) for f in fr]
            tau = synthesis.period_tau(fr)
            assert all((tau * f).denominator == 1 for f in fr)
            assert any(((tau / 2) * f).denominator != 1 for f in fr) or \
                any((tau / 2 * f) % 1 != 0 for f in fr)


class TestPhaseTuneDrift:
    def test_single_frequency_closed_form(self):
        t = synthesis.phase_tune_drift([1.0], [0.0], [np.pi / 2],
                                       tol=1e-9, t_max=100.0)
        assert t == pytest.approx(np.pi / 2, abs=1e-12)

    def test_irrational_pair_found(self):
        lams = [1.0, np.sqrt(2.0)]
        tgt = [1.0, 2.5]
        t = synthesis.phase_tune_drift(lams, [0.0, 0.0], tgt,
                                       tol=0.1, t_max=5000.0)
        err = np.max(np.abs(np.exp(1j * (np.array(lams) * t - np.array(tgt)))
                            - 1.0))
        assert err <= 0.1

    def test_incompatible_targets(self):
        # the (1, 2) orbit is a closed curve with theta2 = 2*theta1; the
        # target (0, pi) sits at distance ~2 from it, far beyond tol
        with pytest.raises(NotFoundWithin):
            synthesis.phase_tune_drift([1.0, 2.0], [0.0, 0.0], [0.0, np.pi],
                                       tol=0.1, t_max=60.0)


class TestL1UpperBound:
    def test_well_m2(self, well6, well6_chain):
        val = synthesis.l1_upper_bound(well6, well6_chain, 2)
        assert val == pytest.approx(45 * np.pi ** 3 / 64, rel=1e-12)
        assert val == pytest.approx(21.80, rel=1e-3)

    def test_m1_zero(self, well6, well6_chain):
        assert synthesis.l1_upper_bound(well6, well6_chain, 1) == 0.0

    def test_ex4_m4(self, ex4, ex4_chain):
        val = synthesis.l1_upper_bound(ex4, ex4_chain, 4)
        assert val == pytest.approx(5 * np.pi * 7 / 4, rel=1e-12)
