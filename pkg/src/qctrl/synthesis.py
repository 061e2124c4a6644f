"""Construction of piecewise-constant controls for prescribed transfers.

The pipeline works in three layers:

1.  An ideal schedule on the driftless auxiliary system: elementary plane
    rotations along chain edges at rate ``NU * |b_jk|`` (swaps, permutation
    decompositions, amplitude folding).
2.  Averaged tracking: each schedule step is realized by a train of pulse
    values whose phases cancel every spectral gap of the truncation except
    the step's own edge gap.  The output is the slope sequence of a strictly
    increasing piecewise-linear primitive, i.e. a control for the
    drift-normalized system with values bounded below.
3.  Time reparametrization (value, dur) -> (1/value, value*dur) mapping the
    result back to a control with values in (0, delta].

L1 accounting comes for free: the L1 norm of the final control equals the
total duration before reparametrization.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import zeta

from .errors import (DecoupledEdge, DegenerateGaps, EdgeNotInChain,
                     NotFoundWithin, NotLowestTerms, NotMConnected,
                     PhaseCorrectionUndefined, QctrlError, ResonantTruncation,
                     SlopeCapExceeded, SpecValidationError, TrackingInfeasible,
                     ZeroValueStep)
from .spectra import (DEFAULT_GAP_TOL, Chain, SystemSpec, coupled_pairs,
                      couples_prefix)


def nu_constant(terms: int) -> float:
    """Partial product prod_{k=2}^{terms} cos(pi/(2k)).

    Strictly decreasing in ``terms``; every partial product stays above 2/5
    and the limit is the rotation-rate constant ``NU``.
    """
    if terms < 2:
        raise ValueError("terms must be >= 2")
    k = np.arange(2, terms + 1, dtype=float)
    return float(np.prod(np.cos(np.pi / (2.0 * k))))


def _nu_limit(head_terms: int = 20000) -> float:
    # log cos(pi/2k) = -pi^2/8k^2 - pi^4/192k^4 - pi^6/2880k^6 - O(k^-8);
    # sum the head directly and the tail through Hurwitz zeta values.
    k = np.arange(2, head_terms + 1, dtype=float)
    ln_head = float(np.sum(np.log(np.cos(np.pi / (2.0 * k)))))
    q = head_terms + 1
    ln_tail = (-(np.pi ** 2 / 8) * zeta(2, q)
               - (np.pi ** 4 / 192) * zeta(4, q)
               - (np.pi ** 6 / 2880) * zeta(6, q))
    return float(np.exp(ln_head + ln_tail))


NU = _nu_limit()
SLOPE_CAP = 1e12


@dataclass
class PiecewiseConstantControl:
    """Control as a finite sequence of (value, duration) steps.

    Values and durations may be floats or exact ``Fraction``s; exact inputs
    stay exact under reparametrization.
    """

    steps: tuple = ()

    def __post_init__(self):
        steps = tuple((v, d) for v, d in self.steps)
        for _, d in steps:
            if not d > 0:
                raise SpecValidationError("step durations must be positive")
        self.steps = steps

    def __len__(self):
        return len(self.steps)

    @property
    def total_duration(self):
        return sum((d for _, d in self.steps), start=0)

    @property
    def l1_norm(self):
        return sum((abs(v) * d for v, d in self.steps), start=0)

    def values(self) -> np.ndarray:
        return np.array([float(v) for v, _ in self.steps])

    def durations(self) -> np.ndarray:
        return np.array([float(d) for _, d in self.steps])

    def to_csv(self) -> str:
        lines = ["value,duration"]
        lines += [f"{float(v)!r},{float(d)!r}" for v, d in self.steps]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "PiecewiseConstantControl":
        rows = [ln for ln in text.strip().splitlines() if ln.strip()]
        if rows and rows[0].lower().replace(" ", "") == "value,duration":
            rows = rows[1:]
        steps = []
        for ln in rows:
            v, d = ln.split(",")
            steps.append((float(v), float(d)))
        return cls(tuple(steps))


@dataclass
class SigmaSchedule:
    """Sequence of elementary rotation steps (edge, theta, duration)."""

    steps: tuple = ()

    def __post_init__(self):
        norm = []
        for edge, theta, duration in self.steps:
            j, k = edge
            if not duration > 0:
                raise SpecValidationError("schedule durations must be positive")
            norm.append(((int(j), int(k)), float(theta), float(duration)))
        self.steps = tuple(norm)

    def __len__(self):
        return len(self.steps)

    @property
    def total_duration(self) -> float:
        return float(sum(d for _, _, d in self.steps))

    def __add__(self, other: "SigmaSchedule") -> "SigmaSchedule":
        return SigmaSchedule(self.steps + other.steps)


@dataclass
class SynthesisParams:
    """Averaging fineness and truncation for the tracking construction.

    eta       -- fineness target; each schedule step uses at least
                 ceil(1/eta) pulses (rounded up to a construction multiple)
    N         -- truncation dimension used during tracking
    delta_bar -- slope floor of the synthesized primitive; must exceed
                 1/delta, defaults to 1.05/delta of the spec at use time
    r_margin  -- extra spacing multiplier for averaging times
    """

    eta: float
    N: int
    delta_bar: float | None = None
    r_margin: int = 1
    slope_cap: float = SLOPE_CAP

    def __post_init__(self):
        if not self.eta > 0:
            raise SpecValidationError("eta must be positive")
        if self.N < 1:
            raise SpecValidationError("N must be at least 1")
        if self.r_margin < 0:
            raise SpecValidationError("r_margin must be nonnegative")

    def resolved_delta_bar(self, delta: float) -> float:
        db = self.delta_bar if self.delta_bar is not None else 1.05 / delta
        if not db * delta > 1:
            raise SpecValidationError("delta_bar * delta must exceed 1")
        return db


@dataclass
class TransferReport:
    """Outcome summary of one synthesized transfer."""

    fidelities: list
    l1_realized: float
    l1_upper: float
    l1_lower: float
    total_time: float
    params: dict

    def to_dict(self) -> dict:
        return {
            "fidelities": [float(f) for f in self.fidelities],
            "l1_realized": float(self.l1_realized),
            "l1_upper": float(self.l1_upper),
            "l1_lower": float(self.l1_lower),
            "total_time": float(self.total_time),
            "params": self.params,
        }


def reparam(u: PiecewiseConstantControl) -> PiecewiseConstantControl:
    """Time reparametrization (value, dur) -> (1/value, value*dur).

    An involution exchanging the roles of drift and coupling: the image
    drives the companion system for a total time equal to the L1 norm of the
    original control.  Exact for Fraction-valued steps.
    """
    out = []
    for v, d in u.steps:
        if not v > 0:
            raise ZeroValueStep(f"cannot reparametrize step value {v!r}")
        out.append((1 / v, v * d))
    return PiecewiseConstantControl(tuple(out))


def averaging_times(gaps, spacing: float = 0.0, t0: float = 0.0, *,
                    gap_tol: float = DEFAULT_GAP_TOL,
                    r_margin: int = 1) -> np.ndarray:
    """Pulse times that average away all listed gaps except the first.

    Binary-splitting construction: starting from {0}, every distinct gap
    modulus g among gaps[1:] doubles the time set by appending t + pi/g.
    The sorted times then receive increments 2*pi*r/|gaps[0]| with integer
    r large enough to push consecutive spacings above ``spacing``.

    Over the returned times, the arithmetic mean of exp(i*t*g) vanishes for
    every gap g whose modulus falls in one of the listed classes and whose
    ratio to |gaps[0]| is an integer; the mean for the first gap has modulus
    prod_c cos(pi*|gaps[0]| / (2*g_c)) over the distinct classes g_c.
    """
    gaps = np.asarray(gaps, dtype=float)
    if gaps.ndim != 1 or len(gaps) == 0:
        raise ValueError("gaps must be a nonempty 1-d sequence")
    if not np.all(np.isfinite(gaps)) or np.any(gaps == 0):
        raise ValueError("gaps must be nonzero finite reals")
    if spacing < 0:
        raise ValueError("spacing must be nonnegative")
    g1 = abs(float(gaps[0]))
    classes = []
    for g in np.abs(gaps[1:]):
        if abs(g - g1) <= gap_tol:
            raise DegenerateGaps(
                f"gap modulus {g} collides with the leading modulus {g1}")
        if not any(abs(g - c) <= gap_tol for c in classes):
            classes.append(float(g))
    tbar = _tree_times(classes)
    r = math.ceil(spacing * g1 / (2.0 * np.pi)) + max(1, r_margin)
    times = tbar + (2.0 * np.pi * r / g1) * np.arange(len(tbar))
    return times + t0


def _tree_times(moduli) -> np.ndarray:
    """Binary-splitting times: {0} doubled by +pi/g for each gap modulus g.

    The sum of exp(i*t*g) over the result factors as
    prod_c (1 + exp(i*pi*g/g_c)), which vanishes whenever |g| equals one of
    the listed moduli.
    """
    t = np.array([0.0])
    for g in moduli:
        t = np.concatenate([t, t + np.pi / float(g)])
    return np.sort(t)


# ---------------------------------------------------------------------------
# gap-class analysis for tracking

@dataclass
class _StepPlan:
    gamma1: float          # signed edge gap lam_k - lam_j
    tree_gaps: list        # moduli of integer-ratio classes
    q_lcm: int             # lcm of rational-ratio denominators (>= 1)
    irrational: list       # moduli handled only asymptotically
    nu_finite: float       # finite product over the tree classes


def _cluster_moduli(values, gap_tol):
    classes = []
    for v in sorted(values):
        if classes and abs(v - classes[-1][-1]) <= gap_tol:
            classes[-1].append(v)
        else:
            classes.append([v])
    return [float(np.mean(c)) for c in classes]


def _plan_step(lam, b, edge, zero_tol, gap_tol, qmax=64, lcm_cap=4096) -> _StepPlan:
    j, k = edge
    if abs(lam[j - 1] - lam[k - 1]) <= gap_tol:
        raise PhaseCorrectionUndefined(
            f"edge {(j, k)} joins (near-)equal eigenvalues")
    gamma1 = float(lam[k - 1] - lam[j - 1])
    g1 = abs(gamma1)
    n = len(lam)
    moduli = []
    for l in range(n):
        for m in range(l + 1, n):
            if {l + 1, m + 1} == {j, k} or abs(b[l, m]) <= zero_tol:
                continue
            moduli.append(abs(lam[l] - lam[m]))
    tree, qs, irr = [], [], []
    for c in _cluster_moduli(moduli, gap_tol):
        if abs(c - g1) <= gap_tol:
            raise ResonantTruncation(
                f"edge {(j, k)} gap {g1:.6g} collides with another coupled "
                f"gap inside the truncation")
        ratio = c / g1
        rtol = max(gap_tol / g1, 1e-12) * 4 + 1e-12 * ratio
        if abs(ratio - round(ratio)) <= rtol and round(ratio) >= 2:
            tree.append(c)
            continue
        frac = Fraction(ratio).limit_denominator(qmax)
        if frac.denominator > 1 and abs(ratio - float(frac)) <= rtol:
            qs.append(frac.denominator)
        else:
            irr.append(c)
    q_lcm = 1
    for q in qs:
        q_lcm = math.lcm(q_lcm, q)
        if q_lcm > lcm_cap:
            # fall back: classes past the cap are handled asymptotically
            q_lcm = math.lcm(*[qq for qq in qs if qq <= lcm_cap], 1)
            break
    nu_finite = float(np.prod([np.cos(np.pi * g1 / (2.0 * c)) for c in tree])) \
        if tree else 1.0
    return _StepPlan(gamma1=gamma1, tree_gaps=tree, q_lcm=q_lcm,
                     irrational=irr, nu_finite=nu_finite)


@dataclass
class TrackingStepInfo:
    edge: tuple
    theta: float
    schedule_duration: float
    theta_duration: float
    pulses: int
    nu_finite: float
    tree_classes: int
    q_lcm: int
    irrational_classes: int


@dataclass
class TrackingInfo:
    steps: list
    total_theta_duration: float


def track_schedule(schedule: SigmaSchedule, spec: SystemSpec,
                   params: SynthesisParams, *,
                   gap_tol: float = DEFAULT_GAP_TOL) -> PiecewiseConstantControl:
    """Control for the drift-normalized system tracking a schedule.

    See ``track_schedule_info`` for the construction; this wrapper returns
    only the control (the slope sequence of the primitive).
    """
    control, _ = track_schedule_info(schedule, spec, params, gap_tol=gap_tol)
    return control


def track_schedule_info(schedule: SigmaSchedule, spec: SystemSpec,
                        params: SynthesisParams, *,
                        gap_tol: float = DEFAULT_GAP_TOL):
    """Averaged realization of a schedule, with per-step diagnostics.

    Each schedule step (edge (j,k), theta, dur) is expanded into h pulse
    slots.  Pulse values are averaging times for the step's edge gap against
    every other coupled gap of the N-truncation: integer-ratio gap classes
    are cancelled by the binary-splitting construction, rational-ratio
    classes exactly by replicating the base block over full denominator
    cycles, and the remaining classes decay with the pulse count.  A global
    value shift tunes the edge phase to theta (including the coupling's own
    phase), and the per-slot term tau * i(b_jj - b_kk)/(lam_j - lam_k)
    compensates the diagonal coupling drift.

    Slots consist of a steep ramp to the pulse value followed by a creep at
    slope delta_bar, making the primitive strictly increasing; the returned
    control is its slope sequence (all values >= delta_bar).  The step's
    realized rotation rate nu_finite * |b_jk| exceeds NU * |b_jk|, so the
    slot grid is shortened by NU/nu_finite to land the scheduled rotation
    angle exactly.
    """
    N = params.N
    if N > spec.size:
        raise SpecValidationError(f"tracking truncation N={N} exceeds spec size")
    lam = spec.lam[:N]
    b = spec.b[:N, :N]
    delta_bar = params.resolved_delta_bar(spec.delta)
    h_min = math.ceil(1.0 / params.eta)

    out_steps = []
    infos = []
    v_end = 0.0
    t_theta = 0.0
    for edge, theta, dur in schedule.steps:
        j, k = edge
        if not (1 <= j <= N and 1 <= k <= N):
            raise SpecValidationError(f"edge {edge} outside truncation N={N}")
        bjk = b[j - 1, k - 1]
        if abs(bjk) <= spec.zero_tol:
            raise DecoupledEdge(f"edge {edge} has zero coupling")
        plan = _plan_step(lam, b, edge, spec.zero_tol, gap_tol)
        g1 = abs(plan.gamma1)

        # drift compensation rate; real because diagonal couplings are
        # purely imaginary for a skew-Hermitian coupling matrix
        corr_num = 1j * (b[j - 1, j - 1] - b[k - 1, k - 1])
        if abs(corr_num.imag) > 1e-12 * max(1.0, abs(corr_num)):
            raise SpecValidationError(
                "diagonal couplings are not purely imaginary; phase "
                "correction would be complex")
        corr_rate = corr_num.real / (lam[j - 1] - lam[k - 1])

        ntree = len(plan.tree_gaps)
        base_count = 2 ** ntree
        Q = plan.q_lcm
        # Cycle count: at least ceil(1/eta) pulses overall, and enough full
        # cancellation cycles that each advances the scheduled rotation by
        # at most eta radians (the mean-field error per cycle is quadratic
        # in that increment).  An even number of cycles per residue period
        # supports the palindromic arrangement that cancels the leading
        # time-ordering error.
        angle = dur * NU * abs(bjk)
        k_need = max(h_min / base_count, angle / params.eta, 1.0)
        K = 2 * Q * math.ceil(k_need / (2 * Q))
        h = base_count * K

        # theta-duration of the step: shortened so that the realized rate
        # nu_finite * sinc * (flat fraction) lands the scheduled angle
        d_theta = dur * NU / plan.nu_finite
        sf = 1.0
        for _ in range(8):
            ell = d_theta / h
            flat_t = ell * (1.0 - 1.0 / h)
            smear = g1 * delta_bar * flat_t / 2.0
            if smear >= 0.99 * np.pi / 2:
                raise TrackingInfeasible(
                    f"slot phase smear {smear:.3f} rad too large on edge "
                    f"{edge}; decrease eta or delta_bar")
            sf = np.sinc(smear / np.pi)  # sin(smear)/smear
            d_new = dur * NU / (plan.nu_finite * sf * (1.0 - 1.0 / h))
            if abs(d_new - d_theta) <= 1e-13 * d_theta:
                d_theta = d_new
                break
            d_theta = d_new
        ell = d_theta / h
        ramp_t = ell / h
        flat_t = ell - ramp_t

        spacing = (delta_bar + abs(corr_rate)) * ell * (1.0 + 1e-9)

        # Pulse values: tree phases t_bar cancel the integer-ratio classes,
        # a residue ladder in whole 2pi/g1 units cancels the rational-ratio
        # classes over full denominator cycles, and a carrier in whole
        # 2pi*Q/g1 units keeps the values strictly increasing with the
        # required spacing while staying invisible to all of them.  The
        # second half of the train mirrors the first (phases and residues),
        # so the leading time-ordering error of the slot product cancels.
        tbar = _tree_times(plan.tree_gaps)
        span = float(tbar[-1] - tbar[0])
        unit = 2.0 * np.pi / g1
        J = math.ceil((span + spacing + (Q - 1) * unit) / (Q * unit)) \
            + max(1, params.r_margin)
        carrier = Q * J * unit
        cycles = [r for _ in range(K // (2 * Q)) for r in range(Q)]
        residues = cycles + cycles[::-1]
        w = np.empty(h)
        idx = 0
        for kk in range(K):
            pattern = range(base_count) if kk < K // 2 \
                else range(base_count - 1, -1, -1)
            for i in pattern:
                w[idx] = tbar[i] + idx * carrier + residues[kk] * unit
                idx += 1

        # phase targeting: rotate the pulse train so the edge mean points at
        # xi = conj(b_jk)/|b_jk| * e^{i theta}, pre-compensating the creep
        c0 = complex(np.mean(np.exp(1j * plan.gamma1 * w)))
        xi = np.conj(bjk) / abs(bjk) * cmath.exp(1j * theta)
        desired = cmath.phase(xi) - plan.gamma1 * delta_bar * flat_t / 2.0
        shift = ((desired - cmath.phase(c0)) / plan.gamma1) % (2.0 * np.pi / g1)
        w = w + shift

        # absolute placement: the primitive must keep climbing from the
        # previous step's end value, in whole phase periods of the edge gap
        tau = t_theta + ell * np.arange(1, h + 1)
        corr = corr_rate * tau
        v_targets = w + corr
        need = v_end + delta_bar * ell
        if v_targets[0] < need:
            units = math.ceil((need - v_targets[0]) * g1 / (2.0 * np.pi))
            w = w + units * (2.0 * np.pi / g1)
            v_targets = w + corr

        prev = v_end
        for alpha in range(h):
            jump = float(v_targets[alpha] - prev)
            ramp_slope = jump / ramp_t
            if ramp_slope > params.slope_cap:
                raise SlopeCapExceeded(
                    f"ramp slope {ramp_slope:.3e} exceeds cap "
                    f"{params.slope_cap:.1e}; increase eta or decrease N")
            if ramp_slope < delta_bar - 1e-9:
                raise QctrlError(
                    f"internal: ramp slope {ramp_slope} below delta_bar")
            out_steps.append((ramp_slope, ramp_t))
            out_steps.append((delta_bar, flat_t))
            prev = float(v_targets[alpha]) + delta_bar * flat_t
        v_end = prev
        t_theta += d_theta
        infos.append(TrackingStepInfo(
            edge=edge, theta=theta, schedule_duration=dur,
            theta_duration=d_theta, pulses=h, nu_finite=plan.nu_finite,
            tree_classes=ntree, q_lcm=Q,
            irrational_classes=len(plan.irrational)))

    control = PiecewiseConstantControl(tuple(out_steps))
    return control, TrackingInfo(steps=infos, total_theta_duration=t_theta)


# ---------------------------------------------------------------------------
# schedules

def sigma_swap(spec: SystemSpec, chain: Chain, edge) -> SigmaSchedule:
    """Elementary exchange of the two levels of one chain edge.

    One step of duration pi/(2 * NU * |b_jk|) at phase 0; the generated
    rotation maps phi_j -> -phi_k, phi_k -> phi_j and fixes other levels.
    """
    j, k = edge
    if not chain.has_edge(j, k):
        raise EdgeNotInChain(f"edge {(j, k)} not in chain")
    mag = abs(spec.coupling(j, k))
    if mag <= spec.zero_tol:
        raise DecoupledEdge(f"edge {(j, k)} has zero coupling")
    duration = float(np.pi / (2.0 * NU * mag))
    return SigmaSchedule(steps=(((j, k), 0.0, duration),))


def schedule_rotation(spec: SystemSpec, schedule: SigmaSchedule,
                      n: int) -> np.ndarray:
    """Ideal composed rotation of a schedule on the first n levels.

    Each step contributes the exact plane rotation generated by
    NU * |b_jk| (e^{i theta} e_jk - e^{-i theta} e_kj} for its duration.
    """
    x = np.eye(n, dtype=complex)
    for (j, k), theta, dur in schedule.steps:
        a = NU * abs(spec.coupling(j, k)) * dur
        rot = np.eye(n, dtype=complex)
        c, s = np.cos(a), np.sin(a)
        rot[j - 1, j - 1] = c
        rot[k - 1, k - 1] = c
        rot[j - 1, k - 1] = s * cmath.exp(1j * theta)
        rot[k - 1, j - 1] = -s * cmath.exp(-1j * theta)
        x = rot @ x
    return x


def _decompose_permutation(sigma, edge_set, m) -> list:
    """Transpositions along chain edges composing (left to right) to sigma."""
    if m <= 1:
        return []
    if all(sigma[l] == l + 1 for l in range(m)):
        return []
    if sigma[m - 1] == m:
        return _decompose_permutation(sigma[:m - 1], edge_set, m - 1)
    s = sigma[m - 1]
    candidates = [k for k in range(1, m)
                  if (k, m) in edge_set or (m, k) in edge_set]
    if not candidates:
        raise NotMConnected(f"level {m} has no chain edge into 1..{m - 1}")
    k = min(candidates)

    def t_ks(x):
        return s if x == k else (k if x == s else x)

    def t_km(x):
        return m if x == k else (k if x == m else x)

    rho = [t_km(t_ks(sigma[l])) for l in range(m)]
    assert rho[m - 1] == m
    head = _decompose_permutation(rho[:m - 1], edge_set, m - 1)
    if s == k:
        tail = []
    else:
        swap = list(range(1, m))
        swap[k - 1], swap[s - 1] = s, k
        tail = _decompose_permutation(swap, edge_set, m - 1)
    return head + [(k, m)] + tail


def permutation_to_schedule(spec: SystemSpec, chain: Chain,
                            sigma) -> SigmaSchedule:
    """Swap schedule realizing a permutation of levels 1..m modulo signs.

    Uses at most 2^(m-1) - 1 transpositions, each a chain edge; requires the
    chain to couple every prefix 1..m' for m' <= m.
    """
    sigma = [int(x) for x in sigma]
    m = len(sigma)
    if sorted(sigma) != list(range(1, m + 1)):
        raise SpecValidationError(f"{sigma} is not a permutation of 1..{m}")
    for mm in range(2, m + 1):
        if not couples_prefix(chain, mm):
            raise NotMConnected(f"chain does not couple levels 1..{mm}")
    edge_set = set(chain.edges)
    transpositions = _decompose_permutation(sigma, edge_set, m)
    steps = []
    for j, k in transpositions:
        steps.extend(sigma_swap(spec, chain, (j, k)).steps)
    return SigmaSchedule(tuple(steps))


def state_transfer_schedule(spec: SystemSpec, chain: Chain, amplitudes,
                            target: int = 1) -> SigmaSchedule:
    """Rotations concentrating an amplitude vector onto one level.

    Processes the spanning tree of the chain (rooted at ``target``) from the
    leaves inward: each vertex is folded into its parent by a plane rotation
    whose angle and phase zero the vertex amplitude exactly.  The composed
    rotation maps the input direction onto the target level up to a global
    phase.
    """
    x = np.asarray(amplitudes, dtype=complex).copy()
    n = len(x)
    if not (1 <= target <= n):
        raise SpecValidationError("target outside the amplitude vector")
    if not couples_prefix(chain, n):
        raise NotMConnected(f"chain does not couple levels 1..{n}")
    adj = {v: set() for v in range(1, n + 1)}
    for j, k in chain.edges:
        if j <= n and k <= n:
            adj[j].add(k)
            adj[k].add(j)
    parent = {target: None}
    depth = {target: 0}
    order = [target]
    queue = [target]
    while queue:
        u = queue.pop(0)
        for w in sorted(adj[u]):
            if w not in parent:
                parent[w] = u
                depth[w] = depth[u] + 1
                order.append(w)
                queue.append(w)
    steps = []
    for v in sorted(order, key=lambda u: (-depth[u], u)):
        if v == target:
            continue
        p = parent[v]
        rv = abs(x[v - 1])
        if rv <= 1e-15:
            continue
        rp = abs(x[p - 1])
        theta = (cmath.phase(x[p - 1]) - cmath.phase(x[v - 1])) if rp > 1e-15 \
            else 0.0
        angle = math.atan2(rv, rp)
        mag = abs(spec.coupling(p, v))
        if mag <= spec.zero_tol:
            raise DecoupledEdge(f"edge {(p, v)} has zero coupling")
        duration = angle / (NU * mag)
        c, s = math.cos(angle), math.sin(angle)
        xp, xv = x[p - 1], x[v - 1]
        x[p - 1] = c * xp + cmath.exp(1j * theta) * s * xv
        x[v - 1] = -cmath.exp(-1j * theta) * s * xp + c * xv
        steps.append(((p, v), theta % (2.0 * np.pi), duration))
    return SigmaSchedule(tuple(steps))


# ---------------------------------------------------------------------------
# end-to-end transfers

def _chain_path(chain: Chain, source: int, target: int) -> list:
    adj = {}
    for j, k in chain.edges:
        adj.setdefault(j, set()).add(k)
        adj.setdefault(k, set()).add(j)
    if source not in adj or target not in adj:
        raise EdgeNotInChain(f"levels {source}->{target} not covered by chain")
    prev = {source: None}
    queue = [source]
    while queue:
        u = queue.pop(0)
        if u == target:
            break
        for w in sorted(adj[u]):
            if w not in prev:
                prev[w] = u
                queue.append(w)
    if target not in prev:
        raise EdgeNotInChain(f"no chain path {source} -> {target}")
    path = [target]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    return path[::-1]


def synth_transfer(spec: SystemSpec, chain: Chain, source: int, target: int,
                   params: SynthesisParams, *,
                   gap_tol: float = DEFAULT_GAP_TOL):
    """Control in (0, delta] steering level ``source`` onto ``target``.

    Pipeline: shortest chain path, one swap per edge, averaged tracking,
    then time reparametrization.  Returns (control, TransferReport); the
    realized L1 norm equals the pre-reparametrization duration.
    """
    from . import propagate as _prop

    echo = {"source": source, "target": target, "eta": params.eta,
            "N": params.N, "r_margin": params.r_margin}
    if source == target:
        report = TransferReport(fidelities=[1.0], l1_realized=0.0,
                                l1_upper=0.0, l1_lower=0.0, total_time=0.0,
                                params=echo | {"path": [source]})
        return PiecewiseConstantControl(), report

    path = _chain_path(chain, source, target)
    schedule = SigmaSchedule()
    for a, bv in zip(path, path[1:]):
        schedule = schedule + sigma_swap(spec, chain, (a, bv))
    u_rep, info = track_schedule_info(schedule, spec, params, gap_tol=gap_tol)
    control = reparam(u_rep)

    psi0 = np.zeros(params.N, dtype=complex)
    psi0[source - 1] = 1.0
    _, final = _prop.propagate(control, spec, params.N, psi0)
    fid = float(abs(final.m[target - 1, source - 1]))

    l1_realized = float(u_rep.total_duration)
    l1_upper = float(sum(5.0 * np.pi / (4.0 * abs(spec.coupling(a, bv)))
                         for a, bv in zip(path, path[1:])))
    ideal = schedule_rotation(spec, schedule, params.N)
    l1_lower = _prop.l1_lower_bound(spec, ideal, eps=0.0, m=params.N)
    if l1_lower > l1_realized + 1e-9:
        raise QctrlError(
            f"internal: lower bound {l1_lower} exceeds realized {l1_realized}")
    report = TransferReport(
        fidelities=[fid], l1_realized=l1_realized, l1_upper=l1_upper,
        l1_lower=l1_lower, total_time=float(control.total_duration),
        params=echo | {"path": path,
                       "pulses": [s.pulses for s in info.steps],
                       "nu_finite": [s.nu_finite for s in info.steps]})
    return control, report


def synth_permutation(spec: SystemSpec, chain: Chain, sigma,
                      params: SynthesisParams, *,
                      gap_tol: float = DEFAULT_GAP_TOL):
    """Control realizing a permutation of levels 1..m up to phases."""
    from . import propagate as _prop

    sigma = [int(x) for x in sigma]
    m = len(sigma)
    echo = {"sigma": sigma, "eta": params.eta, "N": params.N}
    schedule = permutation_to_schedule(spec, chain, sigma)
    if len(schedule) == 0:
        report = TransferReport(fidelities=[1.0] * m, l1_realized=0.0,
                                l1_upper=float(l1_upper_bound(spec, chain, m)),
                                l1_lower=0.0, total_time=0.0, params=echo)
        return PiecewiseConstantControl(), report
    u_rep, info = track_schedule_info(schedule, spec, params, gap_tol=gap_tol)
    control = reparam(u_rep)
    _, final = _prop.propagate(control, spec, params.N,
                               np.eye(params.N, dtype=complex)[:, 0])
    U = final.m
    fidelities = [float(abs(U[sigma[l] - 1, l])) for l in range(m)]
    l1_realized = float(u_rep.total_duration)
    ideal = schedule_rotation(spec, schedule, params.N)
    l1_lower = _prop.l1_lower_bound(spec, ideal, eps=0.0, m=m)
    report = TransferReport(
        fidelities=fidelities, l1_realized=l1_realized,
        l1_upper=float(l1_upper_bound(spec, chain, m)), l1_lower=l1_lower,
        total_time=float(control.total_duration),
        params=echo | {"pulses": [s.pulses for s in info.steps]})
    return control, report


# ---------------------------------------------------------------------------
# period arithmetic and phase tuning

def period_tau(lams) -> Fraction:
    """Smallest t > 0 with t * lam a positive integer for every listed lam.

    Inputs are positive rationals in lowest terms, given as Fractions or
    (numerator, denominator) pairs.  For lam_l = a_l / b_l the exact value
    is prod(b) / gcd_l(a_l * prod_{j != l} b_j).
    """
    fracs = []
    for x in lams:
        if isinstance(x, Fraction):
            f = x
        elif isinstance(x, tuple):
            a, b = x
            if math.gcd(int(a), int(b)) != 1:
                raise NotLowestTerms(f"{a}/{b} is not in lowest terms")
            f = Fraction(int(a), int(b))
        elif isinstance(x, int):
            f = Fraction(x)
        else:
            raise NotLowestTerms(f"need exact rationals, got {x!r}")
        if f <= 0:
            raise SpecValidationError("rational eigenvalues must be positive")
        fracs.append(f)
    if not fracs:
        raise SpecValidationError("need at least one rational")
    nums = [f.numerator for f in fracs]
    dens = [f.denominator for f in fracs]
    prod_b = math.prod(dens)
    g = math.gcd(*[a * (prod_b // b) for a, b in zip(nums, dens)])
    return Fraction(prod_b, g)


def phase_tune_drift(lams, current_phases, target_phases, tol: float,
                     t_max: float) -> float:
    """Free-drift time t with |e^{i lam_j t} e^{i th_j} - e^{i th~_j}| <= tol.

    A single frequency uses the exact closed form; otherwise a uniform grid
    of pitch tol / (2 max|lam|) is scanned up to ``t_max`` and the first
    admissible grid point returned.  Raises NotFoundWithin when the horizon
    is exhausted (the caller may retry with a larger one).
    """
    lams = np.asarray(lams, dtype=float)
    cur = np.asarray(current_phases, dtype=float)
    tgt = np.asarray(target_phases, dtype=float)
    if not (len(lams) == len(cur) == len(tgt)) or len(lams) == 0:
        raise SpecValidationError("phase lists must share a nonzero length")
    if not tol > 0:
        raise SpecValidationError("tol must be positive")
    if not (np.isfinite(t_max) and t_max > 0):
        raise SpecValidationError("t_max must be positive and finite")
    if np.any(lams == 0):
        raise SpecValidationError("frequencies must be nonzero")
    if len(lams) == 1:
        lam = float(lams[0])
        t = ((tgt[0] - cur[0]) / lam) % (2.0 * np.pi / abs(lam))
        return float(t)
    pitch = tol / (2.0 * float(np.max(np.abs(lams))))
    total = int(math.floor(t_max / pitch)) + 1
    chunk = 1 << 20
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=float)
        t = idx * pitch
        err = np.abs(np.exp(1j * (np.outer(t, lams) + (cur - tgt))) - 1.0)
        ok = np.nonzero(np.max(err, axis=1) <= tol)[0]
        if len(ok):
            return float(t[ok[0]])
    raise NotFoundWithin(t_max)


def l1_upper_bound(spec: SystemSpec, chain: Chain, m: int) -> float:
    """Worst-case L1 cost of permuting levels 1..m through chain swaps.

    5 pi (2^(m-1) - 1) / (4 min |b_jk|) over chain edges inside 1..m.
    """
    if m < 1:
        raise SpecValidationError("m must be at least 1")
    if m == 1:
        return 0.0
    mags = [abs(spec.coupling(j, k)) for j, k in chain.edges
            if j <= m and k <= m]
    if not mags:
        raise NotMConnected(f"chain has no edges inside 1..{m}")
    return float(5.0 * np.pi * (2 ** (m - 1) - 1) / (4.0 * min(mags)))
