"""Built-in system generators and the planar-molecule steering procedure.

Three families are provided: the particle in a box with a linear control
potential (closed-form couplings, second-order perturbed spectrum), the
planar rotor driven by two orthogonal fields (exposed through its
parity-restricted single-input subsystems), and a small four-level system
with a degenerate pair that is decoupled from itself.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import RoundLimit, SpecValidationError
from .spectra import SystemSpec, find_chain
from .synthesis import (PiecewiseConstantControl, SynthesisParams, reparam,
                        state_transfer_schedule, track_schedule)

# ---------------------------------------------------------------------------
# particle in a box on (-1/2, 1/2)

@dataclass
class WellParams:
    """Truncation size and perturbation strength for the box model."""

    N: int
    eta: float = 0.0

    def __post_init__(self):
        if self.N < 2:
            raise SpecValidationError("N must be at least 2")
        if abs(self.eta) > 1.0:
            warnings.warn("second-order spectrum is used outside its "
                          "validity window |eta| <= 1", stacklevel=2)


def well_mode(k: int, x):
    """Normalized box eigenfunction: sqrt(2) cos/sin(k pi x) by parity of k."""
    if k % 2 == 1:
        return np.sqrt(2.0) * np.cos(k * np.pi * x)
    return np.sqrt(2.0) * np.sin(k * np.pi * x)


def _well_x_element(j: int, k: int) -> float:
    """<phi_j, x phi_k> in closed form; zero unless j + k is odd.

    The product of a cosine mode (odd index c) and a sine mode (even index
    s) expands as sin((s+c) pi x) + sin((s-c) pi x); each term integrates
    against x to 2 sin(m pi/2) / (m pi)^2 for odd m.
    """
    if (j + k) % 2 == 0:
        return 0.0
    s, c = (j, k) if j % 2 == 0 else (k, j)

    def part(m):
        return 2.0 * np.sin(m * np.pi / 2.0) / (m * m * np.pi * np.pi)

    return part(s + c) + part(s - c)


def well_lambda(k: int, eta: float) -> float:
    """Level k eigenvalue with its second-order shift in the control."""
    return (-k * k * np.pi ** 2 / 2.0
            - (1.0 / (24.0 * np.pi ** 2 * k * k)
               - 5.0 / (8.0 * np.pi ** 4 * k ** 4)) * eta * eta)


def infinite_well(p: WellParams, delta: float = 5.0) -> SystemSpec:
    """Box spec: lam_k = -k^2 pi^2/2 + O(eta^2), couplings i<phi_j, x phi_k>.

    Coupling magnitudes are 8jk / (pi^2 (j^2 - k^2)^2) for j + k odd and
    vanish otherwise.
    """
    n = p.N
    lam = np.array([well_lambda(k, p.eta) for k in range(1, n + 1)])
    x = np.zeros((n, n))
    for j in range(1, n + 1):
        for k in range(1, n + 1):
            if j != k:
                x[j - 1, k - 1] = _well_x_element(j, k)
    return SystemSpec(lam=lam, b=1j * x, delta=delta)


def well_spectrum_exact(N: int, eta: float, basis_size: int = 40) -> np.ndarray:
    """First N perturbed eigenvalues by dense diagonalization.

    Cross-validation for the second-order formula: diagonalizes the
    truncated drift-plus-coupling on a larger basis and returns the top N
    eigenvalues in level order.
    """
    if basis_size < N:
        raise SpecValidationError("basis_size must be at least N")
    lam0 = np.array([-k * k * np.pi ** 2 / 2.0 for k in range(1, basis_size + 1)])
    x = np.zeros((basis_size, basis_size))
    for j in range(1, basis_size + 1):
        for k in range(1, basis_size + 1):
            if j != k:
                x[j - 1, k - 1] = _well_x_element(j, k)
    w = np.linalg.eigvalsh(np.diag(lam0) + eta * x)
    return w[::-1][:N]


# ---------------------------------------------------------------------------
# planar rotor driven by two orthogonal fields

@dataclass
class MoleculeParams:
    """Truncation (max harmonic), field direction, and parity sector."""

    N: int
    alpha: float = 0.0
    parity: str = "even"

    def __post_init__(self):
        if self.N < 1:
            raise SpecValidationError("N must be at least 1")
        if self.parity not in ("even", "odd"):
            raise SpecValidationError("parity must be 'even' or 'odd'")


def planar_molecule(p: MoleculeParams, delta: float = 1.0) -> SystemSpec:
    """Parity-restricted rotor spec for the field direction alpha.

    Even sector (levels: constant, cos k(.-alpha), k = 1..N):
    lam = (0, -1, -4, ...), couplings -i/sqrt(2) on the first edge and
    -i/2 between consecutive harmonics.  Odd sector (sin k(.-alpha)):
    lam = (-1, -4, ...), couplings -i/2.  Couplings do not depend on alpha.
    """
    n = p.N
    if p.parity == "even":
        lam = np.array([-float(k * k) for k in range(0, n + 1)])
        b = np.zeros((n + 1, n + 1), dtype=complex)
        b[0, 1] = b[1, 0] = -1j / np.sqrt(2.0)
        for k in range(1, n):
            b[k, k + 1] = b[k + 1, k] = -0.5j
    else:
        lam = np.array([-float(k * k) for k in range(1, n + 1)])
        b = np.zeros((n, n), dtype=complex)
        for k in range(0, n - 1):
            b[k, k + 1] = b[k + 1, k] = -0.5j
    return SystemSpec(lam=lam, b=b, delta=delta)


def molecule_full_lambda(N: int) -> np.ndarray:
    """Eigenvalues on the combined basis [const, cos 1..N, sin 1..N]."""
    ks = np.arange(1, N + 1, dtype=float)
    return np.concatenate([[0.0], -ks ** 2, -ks ** 2])


def _molecule_mult_matrices(N: int):
    """Multiplication by cos(theta) and sin(theta) on the combined basis."""
    d = 2 * N + 1
    mc = np.zeros((d, d))
    ms = np.zeros((d, d))
    E = 0

    def C(k):
        return k

    def S(k):
        return N + k

    mc[E, C(1)] = mc[C(1), E] = 1.0 / np.sqrt(2.0)
    ms[E, S(1)] = ms[S(1), E] = 1.0 / np.sqrt(2.0)
    for k in range(1, N):
        mc[C(k), C(k + 1)] = mc[C(k + 1), C(k)] = 0.5
        mc[S(k), S(k + 1)] = mc[S(k + 1), S(k)] = 0.5
        ms[C(k), S(k + 1)] = ms[S(k + 1), C(k)] = 0.5
        ms[S(k), C(k + 1)] = ms[C(k + 1), S(k)] = -0.5
    return mc, ms


def molecule_full_spec(N: int, alpha: float, delta: float = 1.0) -> SystemSpec:
    """Rotor on the combined basis, field locked to direction alpha."""
    mc, ms = _molecule_mult_matrices(N)
    b = -1j * (np.cos(alpha) * mc + np.sin(alpha) * ms)
    return SystemSpec(lam=molecule_full_lambda(N), b=b, delta=delta)


def molecule_embeddings(N: int, alpha: float):
    """Column matrices of the alpha-even / alpha-odd bases in combined
    coordinates: even columns are (const, cos k(.-alpha)), odd columns
    sin k(.-alpha)."""
    d = 2 * N + 1
    even = np.zeros((d, N + 1))
    odd = np.zeros((d, N))
    even[0, 0] = 1.0
    for k in range(1, N + 1):
        even[k, k] = np.cos(k * alpha)
        even[N + k, k] = np.sin(k * alpha)
        odd[k, k - 1] = -np.sin(k * alpha)
        odd[N + k, k - 1] = np.cos(k * alpha)
    return even, odd


def _mode(parity: str, k: int, alpha: float):
    if parity == "even":
        if k == 0:
            return lambda th: 1.0 / np.sqrt(2.0 * np.pi)
        return lambda th: np.cos(k * (th - alpha)) / np.sqrt(np.pi)
    return lambda th: np.sin(k * (th - alpha)) / np.sqrt(np.pi)


def parity_couplings_zero(p: MoleculeParams, potential: str = "cos") -> float:
    """Largest forbidden coupling, by quadrature over the circle.

    potential 'cos': cross-parity elements <even_j, cos(.-alpha) odd_k>.
    potential 'sin': same-parity elements of sin(.-alpha) within each sector.
    Both vanish identically; the returned maximum certifies it numerically.
    """
    if potential not in ("cos", "sin"):
        raise SpecValidationError("potential must be 'cos' or 'sin'")
    n, alpha = p.N, p.alpha

    def pot(th):
        return np.cos(th - alpha) if potential == "cos" else np.sin(th - alpha)

    worst = 0.0
    if potential == "cos":
        pairs = [("even", j, "odd", k) for j in range(0, n + 1)
                 for k in range(1, n + 1)]
    else:
        pairs = [("even", j, "even", k) for j in range(0, n + 1)
                 for k in range(j, n + 1)]
        pairs += [("odd", j, "odd", k) for j in range(1, n + 1)
                  for k in range(j, n + 1)]
    for pa, j, pb, k in pairs:
        fa = _mode(pa, j, alpha)
        fb = _mode(pb, k, alpha)
        val, _ = quad(lambda th: fa(th) * pot(th) * fb(th), -np.pi, np.pi,
                      limit=200)
        worst = max(worst, abs(val))
    return worst


def tau_beta(a_coeffs, alpha: float, beta: float) -> float:
    """Even-mass of an alpha-odd function at angle beta.

    For phi = sum_k a_k sin(k(.-alpha))/sqrt(pi), the squared norm of its
    beta-even part is sum_k |a_k sin((beta-alpha) k)|^2.
    """
    a = np.asarray(a_coeffs, dtype=complex)
    k = np.arange(1, len(a) + 1)
    return float(np.sum(np.abs(a * np.sin((beta - alpha) * k)) ** 2))


# ---------------------------------------------------------------------------
# steering an arbitrary rotor state to the ground level

_ALPHA_GRID = (np.arange(64) / 64.0) * (np.pi / 2.0)
_BETA_GRID = (np.arange(1, 65) / 65.0) * (np.pi / 2.0)


@dataclass
class SteeringResult:
    """Outcome of the parity steering loop."""

    rounds: list          # list of (alpha, PiecewiseConstantControl)
    fidelity: float       # |<ground, psi(T)>|
    psi_final: np.ndarray
    betas: list           # re-angling choices made after round 1


def molecule_propagate(psi, alpha: float, control: PiecewiseConstantControl,
                       N: int) -> np.ndarray:
    """Propagate combined-basis coefficients under the alpha-locked field."""
    from . import propagate as _prop

    spec = molecule_full_spec(N, alpha)
    d = 2 * N + 1
    _, U = _prop.propagate(control, spec, d, np.asarray(psi, dtype=complex))
    return U.m @ np.asarray(psi, dtype=complex)


def molecule_steer_to_ground(psi0, eps: float, max_rounds: int,
                             alpha0: float | None = None,
                             eta: float = 0.1) -> SteeringResult:
    """Iterative parity procedure driving a rotor state to the constant mode.

    Each round locks the field to an angle alpha, folds the alpha-even part
    of the state onto the constant mode (plane rotations along the even
    chain, averaged tracking, reparametrization), and simulates the full
    two-sector dynamics.  The next angle is chosen on a 64-point grid to
    maximize the even mass of the odd remainder.  Stops when the ground
    fidelity reaches 1 - eps; raises RoundLimit otherwise.
    """
    psi = np.asarray(psi0, dtype=complex).copy()
    d = len(psi)
    if d % 2 != 1 or d < 3:
        raise SpecValidationError("state must have odd length 2N+1 >= 3")
    N = (d - 1) // 2
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > 1e-9:
        raise SpecValidationError("psi0 must be unit norm")
    psi = psi / norm
    if not eps > 0:
        raise SpecValidationError("eps must be positive")

    rounds = []
    betas = []
    alpha = None
    for _ in range(max_rounds):
        fid = abs(psi[0])
        if fid >= 1.0 - eps:
            break
        if alpha is None:
            if alpha0 is not None:
                alpha = float(alpha0)
            else:
                masses = [np.linalg.norm(molecule_embeddings(N, a)[0].T @ psi)
                          for a in _ALPHA_GRID]
                alpha = float(_ALPHA_GRID[int(np.argmax(masses))])
        else:
            even_prev, _ = molecule_embeddings(N, alpha)
            phi = psi - even_prev @ (even_prev.T @ psi)
            masses = [np.linalg.norm(molecule_embeddings(N, b)[0].T @ phi)
                      for b in _BETA_GRID]
            alpha = float(_BETA_GRID[int(np.argmax(masses))])
            betas.append(alpha)

        even, _ = molecule_embeddings(N, alpha)
        x_even = even.T @ psi
        vmax = 1.0 / max(np.cos(alpha), np.sin(alpha))
        even_spec = planar_molecule(MoleculeParams(N=N, alpha=alpha,
                                                   parity="even"),
                                    delta=vmax)
        chain = find_chain(even_spec)
        schedule = state_transfer_schedule(even_spec, chain, x_even, target=1)
        if len(schedule) == 0:
            # even part already concentrated; re-angle on the next pass
            continue
        params = SynthesisParams(eta=eta, N=N + 1)
        control = reparam(track_schedule(schedule, even_spec, params))
        psi = molecule_propagate(psi, alpha, control, N)
        rounds.append((alpha, control))

    fid = float(abs(psi[0]))
    if fid < 1.0 - eps:
        raise RoundLimit(fid, len(rounds))
    return SteeringResult(rounds=rounds, fidelity=fid, psi_final=psi,
                          betas=betas)


# ---------------------------------------------------------------------------
# four-level example with a decoupled degenerate pair

def example_4x4() -> SystemSpec:
    """Four levels (1, 2, 4, 4) with real +-1 couplings and b_34 = 0."""
    lam = np.array([1.0, 2.0, 4.0, 4.0])
    b = np.array([[0, 1, 1, 0],
                  [-1, 0, 0, 1],
                  [-1, 0, 0, 0],
                  [0, -1, 0, 0]], dtype=complex)
    return SystemSpec(lam=lam, b=b, delta=1.0)
