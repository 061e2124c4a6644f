"""Exact piecewise propagation of truncated systems.

Piecewise-constant controls admit exact propagators: each segment is the
exponential of a skew-Hermitian matrix, computed through the Hermitian
eigendecomposition of its -i multiple, which is unconditionally stable.
The interaction-picture dynamics (the driftless system obtained by the
moving-frame change of variables) needs genuine time integration because
its generator depends on time through the diagonal couplings; a fixed-step
fourth-order Runge-Kutta scheme with unitarity renormalization is used.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (SpecValidationError, TruncationTooLarge, UnitarityBreach)
from .liealg import SkewPair
from .spectra import SystemSpec
from .synthesis import PiecewiseConstantControl

UNITARY_TOL = 1e-9
RENORM_TRIGGER = 1e-10


def _reunitarize(m: np.ndarray) -> np.ndarray:
    u, _, vh = np.linalg.svd(m)
    return u @ vh


@dataclass
class Unitary:
    """Unitary matrix wrapper; renormalized when drift exceeds 1e-10."""

    m: np.ndarray

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=complex)
        n = self.m.shape[0]
        if self.m.shape != (n, n):
            raise SpecValidationError("unitary must be square")
        drift = np.max(np.abs(self.m.conj().T @ self.m - np.eye(n)))
        if drift > UNITARY_TOL:
            raise UnitarityBreach(f"unitarity drift {drift:.2e}")
        if drift > RENORM_TRIGGER:
            self.m = _reunitarize(self.m)

    @property
    def size(self) -> int:
        return self.m.shape[0]


@dataclass
class Trajectory:
    """States of one propagation run, sampled at segment boundaries."""

    times: np.ndarray
    states: list
    controls: list

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        for psi in self.states:
            norm = np.linalg.norm(psi)
            if abs(norm - 1.0) > UNITARY_TOL:
                raise UnitarityBreach(f"state norm drifted to {norm}")

    def moduli(self) -> np.ndarray:
        """|<phi_j, psi(t)>| as a (times x levels) array."""
        return np.abs(np.asarray(self.states))


@dataclass
class DensityMatrix:
    """Hermitian, unit-trace, nonnegative matrix."""

    rho: np.ndarray

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=complex)
        n = self.rho.shape[0]
        if self.rho.shape != (n, n):
            raise SpecValidationError("density matrix must be square")
        herm = np.max(np.abs(self.rho - self.rho.conj().T))
        if herm > 1e-12:
            raise SpecValidationError(f"density not Hermitian: {herm:.2e}")
        tr = np.trace(self.rho).real
        if abs(tr - 1.0) > 1e-12:
            raise SpecValidationError(f"trace {tr} != 1")
        w = np.linalg.eigvalsh(self.rho)
        if np.min(w) < -1e-10:
            raise SpecValidationError(f"negative eigenvalue {np.min(w):.2e}")

    @property
    def size(self) -> int:
        return self.rho.shape[0]

    def spectrum(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.rho)


def galerkin(spec: SystemSpec, N: int) -> SkewPair:
    """Leading N x N truncation (diag(i lam), b)."""
    if N > spec.size or N < 1:
        raise TruncationTooLarge(f"N={N} not in 1..{spec.size}")
    a = np.diag(1j * spec.lam[:N])
    return SkewPair(a=a, bmat=spec.b[:N, :N].copy())


def step(pair: SkewPair, u: float, t: float) -> Unitary:
    """exp(t (a + u bmat)) via Hermitian eigendecomposition."""
    if not (np.isfinite(u) and np.isfinite(t)):
        raise SpecValidationError("step inputs must be finite")
    h = -1j * (pair.a + u * pair.bmat)
    w, v = np.linalg.eigh(h)
    return Unitary((v * np.exp(1j * t * w)) @ v.conj().T)


def _segment_unitary(cache, pair, u):
    key = float(u)
    if key not in cache:
        h = -1j * (pair.a + u * pair.bmat)
        cache[key] = np.linalg.eigh(h)
    return cache[key]


def propagate(control: PiecewiseConstantControl, spec: SystemSpec, N: int,
              psi0) -> tuple:
    """Exact piecewise propagation; returns (Trajectory, final Unitary).

    Eigendecompositions are cached per control value.  Norms are monitored
    at every segment; drift past 1e-10 renormalizes, past 1e-9 raises.
    """
    pair = galerkin(spec, N)
    psi = np.asarray(psi0, dtype=complex).copy()
    if psi.shape != (N,):
        raise SpecValidationError(f"psi0 must have length {N}")
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > 1e-9:
        raise SpecValidationError("psi0 must be unit norm")
    psi = psi / norm

    times = [0.0]
    states = [psi.copy()]
    controls = []
    U = np.eye(N, dtype=complex)
    cache = {}
    t = 0.0
    for v, d in control.steps:
        w, vecs = _segment_unitary(cache, pair, float(v))
        phases = np.exp(1j * float(d) * w)
        seg = (vecs * phases) @ vecs.conj().T
        U = seg @ U
        psi = seg @ psi
        norm = np.linalg.norm(psi)
        if abs(norm - 1.0) > UNITARY_TOL:
            raise UnitarityBreach(f"norm drift {abs(norm - 1.0):.2e}")
        if abs(norm - 1.0) > RENORM_TRIGGER:
            psi = psi / norm
        t += float(d)
        times.append(t)
        states.append(psi.copy())
        controls.append(float(v))
    return Trajectory(times=np.asarray(times), states=states,
                      controls=controls), Unitary(U)


def reparam_propagate(control: PiecewiseConstantControl, spec: SystemSpec,
                      N: int) -> Unitary:
    """Propagator of the drift-normalized system d psi = (u a + bmat) psi dt.

    Identical to propagating the time-reparametrized control through the
    original system; computed directly from exp(d (u a + bmat)) segments.
    """
    pair = galerkin(spec, N)
    U = np.eye(N, dtype=complex)
    for v, d in control.steps:
        h = -1j * (float(v) * pair.a + pair.bmat)
        w, vecs = np.linalg.eigh(h)
        U = (vecs * np.exp(1j * float(d) * w)) @ vecs.conj().T @ U
    return Unitary(U)


def interaction_frame(spec: SystemSpec, N: int, t: float,
                      v: float) -> np.ndarray:
    """Frame matrix exp(-v a - t d(b)) of the moving-frame change of variables."""
    pair = galerkin(spec, N)
    diag = -1j * v * spec.lam[:N] - t * np.diagonal(pair.bmat)
    return np.diag(np.exp(diag))


def interaction_generator(spec: SystemSpec, N: int, t: float,
                          v: float) -> np.ndarray:
    """Generator of the interaction-picture system at time t, primitive v.

    Entry (l, m) is b_lm e^{i v (lam_m - lam_l)} e^{t (b_mm - b_ll)} off the
    diagonal, zero on it.
    """
    lam = spec.lam[:N]
    b = spec.b[:N, :N]
    d = np.diagonal(b)
    phase = np.exp(1j * v * (lam[None, :] - lam[:, None])
                   + t * (d[None, :] - d[:, None]))
    theta = b * phase
    np.fill_diagonal(theta, 0.0)
    return theta


def interaction_propagate(control: PiecewiseConstantControl,
                          spec: SystemSpec, N: int,
                          step_size: float | None = None) -> Unitary:
    """Propagator of the interaction-picture system driven by ``control``.

    ``control`` is the control of the drift-normalized system; its primitive
    v(t) enters the generator.  Fixed-step RK4 with per-step unitarity
    renormalization; default step min(1e-2, 0.02/maxgap).
    """
    lam = spec.lam[:N]
    gaps = np.abs(lam[None, :] - lam[:, None])
    maxgap = float(np.max(gaps)) if N > 1 else 1.0
    if step_size is None:
        step_size = min(1e-2, 0.02 / max(maxgap, 1e-12))
    if step_size < 1e-9:
        raise SpecValidationError(f"step size {step_size:.2e} below floor 1e-9")

    Q = np.eye(N, dtype=complex)
    t = 0.0
    v = 0.0

    def theta_at(tt, vv):
        return interaction_generator(spec, N, tt, vv)

    for u, d in control.steps:
        u = float(u)
        d = float(d)
        nsub = max(1, int(np.ceil(d / step_size)))
        h = d / nsub
        for i in range(nsub):
            t0 = t + i * h
            v0 = v + u * i * h
            k1 = theta_at(t0, v0) @ Q
            k2 = theta_at(t0 + h / 2, v0 + u * h / 2) @ (Q + (h / 2) * k1)
            k3 = theta_at(t0 + h / 2, v0 + u * h / 2) @ (Q + (h / 2) * k2)
            k4 = theta_at(t0 + h, v0 + u * h) @ (Q + h * k3)
            Q = Q + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            drift = np.max(np.abs(Q.conj().T @ Q - np.eye(N)))
            if drift > RENORM_TRIGGER:
                Q = _reunitarize(Q)
        t += d
        v += u * d
    return Unitary(Q)


def interaction_from_reparam(control: PiecewiseConstantControl,
                             spec: SystemSpec, N: int) -> Unitary:
    """Interaction-picture propagator via exact exponentials.

    Composes the drift-normalized propagator with the frame matrix at the
    final time; agrees with ``interaction_propagate`` and serves as its
    cross-check and as the exact route for stiff controls.
    """
    U = reparam_propagate(control, spec, N)
    T = float(control.total_duration)
    vT = float(sum(float(v) * float(d) for v, d in control.steps))
    return Unitary(interaction_frame(spec, N, T, vT) @ U.m)


def density_evolve(rho0: DensityMatrix, control: PiecewiseConstantControl,
                   spec: SystemSpec, N: int) -> DensityMatrix:
    """Conjugate a density matrix by the control's propagator."""
    if rho0.size != N:
        raise SpecValidationError("density size must match truncation")
    psi0 = np.zeros(N, dtype=complex)
    psi0[0] = 1.0
    _, U = propagate(control, spec, N, psi0)
    return DensityMatrix(U.m @ rho0.rho @ U.m.conj().T)


def fidelity(psi, phi) -> float:
    """|<psi, phi>| for unit vectors."""
    return float(abs(np.vdot(np.asarray(psi, dtype=complex),
                             np.asarray(phi, dtype=complex))))


def tail_norm(psi, n: int) -> float:
    """Norm of the components above level n."""
    psi = np.asarray(psi, dtype=complex)
    return float(np.linalg.norm(psi[n:]))


def l1_lower_bound(spec: SystemSpec, target, eps: float = 0.0,
                   m: int | None = None) -> float:
    """Lower bound on the L1 norm of any control realizing ``target``.

    sup over k <= m and levels j of (| |<phi_j, phi_k>| - |<phi_j, U phi_k>| |
    - eps) / ||B phi_j||, with the column norm taken in the stored
    truncation (an underestimate of the full norm, so the reported bound is
    conservative for rapidly decaying couplings).
    """
    if eps < 0:
        raise SpecValidationError("eps must be nonnegative")
    U = target.m if isinstance(target, Unitary) else np.asarray(target,
                                                                dtype=complex)
    n = U.shape[0]
    if m is None:
        m = n
    if not (1 <= m <= n):
        raise SpecValidationError("m must lie within the target size")
    col_norms = np.linalg.norm(spec.b[:, :n], axis=0)
    best = 0.0
    for k in range(m):
        for j in range(n):
            num = abs((1.0 if j == k else 0.0) - abs(U[j, k])) - eps
            if num <= 0 or col_norms[j] <= 0:
                continue
            best = max(best, num / col_norms[j])
    return float(best)
