"""Finite-dimensional controllability certification.

Given the diagonal drift and the coupling matrix of a truncation, the rank
of the generated Lie algebra decides controllability: containment of the
full traceless skew-Hermitian algebra gives transitivity on the special
unitary group, and a trace surplus upgrades it to the full unitary group.
The elementary generators of a single edge are extracted by evaluating a
Lagrange polynomial on the squared eigenvalue gaps, which isolates one
off-diagonal pair from all iterated commutators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (CommutatorOverflow, DecoupledEdge, ResonantGap,
                     SpecValidationError, TruncationTooLarge)

SKEW_TOL = 1e-12
CLOSURE_TOL = 1e-10
OVERFLOW_GUARD = 1e300
MAX_AD_ORDER = 64
MAX_LIE_DIM = 12


@dataclass
class SkewPair:
    """Drift/coupling pair of skew-Hermitian matrices of equal size."""

    a: np.ndarray
    bmat: np.ndarray

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=complex)
        self.bmat = np.asarray(self.bmat, dtype=complex)
        n = self.a.shape[0]
        if self.a.shape != (n, n) or self.bmat.shape != (n, n):
            raise SpecValidationError("a and bmat must be square and same size")
        for name, m in (("a", self.a), ("bmat", self.bmat)):
            drift = np.max(np.abs(m + m.conj().T)) if n else 0.0
            if drift > SKEW_TOL:
                raise SpecValidationError(
                    f"{name} is not skew-Hermitian: max |m + m*| = {drift:.3e}")

    @property
    def size(self) -> int:
        return self.a.shape[0]


def bracket(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return x @ y - y @ x


def ad_power(p: SkewPair, order: int, max_order: int = MAX_AD_ORDER) -> np.ndarray:
    """Iterated commutator ad_a^order(bmat).

    For diagonal ``a`` the entries are (a_jj - a_kk)^order * b_jk, which is
    how the gap polynomials below act on the coupling matrix.
    """
    if order < 0:
        raise ValueError("order must be nonnegative")
    if order > max_order:
        raise ValueError(f"order {order} exceeds the configured max {max_order}")
    m = p.bmat.copy()
    for _ in range(order):
        m = bracket(p.a, m)
        if np.max(np.abs(m)) > OVERFLOW_GUARD:
            raise CommutatorOverflow(
                f"entries exceeded {OVERFLOW_GUARD:g} at some order <= {order}")
    return m


def _gaps_of(p: SkewPair) -> np.ndarray:
    return np.real(np.diagonal(p.a) / 1j)


def extract_elementary(p: SkewPair, edge, zero_tol: float = 1e-12,
                       gap_tol: float = 1e-9) -> tuple:
    """Two elementary skew-Hermitian generators supported on one edge.

    Requires the edge's squared gap to be isolated from the squared gap of
    every other coupled pair.  Returns (even, odd):

        even = b_jk e_jk + b_kj e_kj
        odd  = i (b_jk e_jk + conj(b_jk) e_kj)

    i.e. the two real directions spanned by the edge, scaled by b_jk.
    """
    j, k = edge
    n = p.size
    if not (1 <= j <= n and 1 <= k <= n) or j == k:
        raise SpecValidationError(f"edge {(j, k)} out of bounds")
    lam = _gaps_of(p)
    b = p.bmat
    if abs(b[j - 1, k - 1]) <= zero_tol:
        raise DecoupledEdge(f"edge {(j, k)} has zero coupling")
    target = (lam[j - 1] - lam[k - 1]) ** 2
    if target <= gap_tol ** 2:
        raise ResonantGap(f"edge {(j, k)} joins equal eigenvalues")

    # Nodes: squared gaps of all coupled pairs, plus 0 when the diagonal of
    # bmat is nonzero (so the polynomial annihilates it as well).
    nodes = []
    for l in range(n):
        for m in range(n):
            if l == m:
                if abs(b[l, l]) > zero_tol:
                    sq = 0.0
                else:
                    continue
            elif abs(b[l, m]) > zero_tol:
                sq = (lam[l] - lam[m]) ** 2
            else:
                continue
            if abs(np.sqrt(sq) - np.sqrt(target)) <= gap_tol:
                if {l + 1, m + 1} != {j, k}:
                    raise ResonantGap(
                        f"edge {(j, k)} gap collides with pair {(l + 1, m + 1)}")
                continue
            nodes.append(sq)
    # merge near-identical squared gaps so the interpolation stays conditioned
    merged = []
    for sq in sorted(nodes):
        if not merged or abs(np.sqrt(sq) - np.sqrt(merged[-1])) > gap_tol:
            merged.append(sq)
    nodes = merged

    def lagrange(sq):
        val = 1.0
        for nd in nodes:
            val *= (sq - nd) / (target - nd)
        return val

    even = np.zeros_like(b)
    odd = np.zeros_like(b)
    for l in range(n):
        for m in range(n):
            if abs(b[l, m]) <= zero_tol:
                continue
            w = lagrange((lam[l] - lam[m]) ** 2)
            even[l, m] = b[l, m] * w
            odd[l, m] = 1j * (lam[l] - lam[m]) * b[l, m] * w
    odd = odd / (lam[j - 1] - lam[k - 1])
    for name, m in (("even", even), ("odd", odd)):
        drift = np.max(np.abs(m + m.conj().T))
        if drift > 1e-9:
            raise SpecValidationError(f"{name} generator lost skewness: {drift:.2e}")
    return even, odd


def _to_real_vec(m: np.ndarray) -> np.ndarray:
    return np.concatenate([m.real.ravel(), m.imag.ravel()])


def lie_rank(p: SkewPair, max_dim: int = MAX_LIE_DIM,
             tol: float = CLOSURE_TOL) -> tuple:
    """Real dimension of the matrix Lie algebra generated by (a, bmat).

    Closure is computed by a bracket worklist with Gram-Schmidt rank
    tracking under the real inner product Re tr(X* Y).  The verdict is

        "SU"           dimension >= n^2 - 1 and both generators traceless,
        "U"            dimension == n^2,
        "INSUFFICIENT" otherwise.
    """
    n = p.size
    if n > max_dim:
        raise TruncationTooLarge(f"n={n} exceeds the configured max {max_dim}")
    full = n * n

    basis_mats = []
    basis_vecs = []

    def try_add(m):
        norm = np.linalg.norm(m)
        if norm < 1e-12:
            return False
        skew = np.max(np.abs(m + m.conj().T))
        if skew > 1e-10 * max(1.0, norm):
            raise SpecValidationError(
                f"closure produced a non-skew matrix: {skew:.2e}")
        v = _to_real_vec(m / norm)
        for bv in basis_vecs:
            v = v - np.dot(bv, v) * bv
        r = np.linalg.norm(v)
        if r <= tol:
            return False
        basis_vecs.append(v / r)
        basis_mats.append(m / norm)
        return True

    try_add(p.a)
    try_add(p.bmat)
    frontier = list(basis_mats)
    while frontier and len(basis_vecs) < full:
        new = []
        for x in frontier:
            for y in list(basis_mats):
                if len(basis_vecs) >= full:
                    break
                c = bracket(x, y)
                if try_add(c):
                    new.append(basis_mats[-1])
        frontier = new

    dim = len(basis_vecs)
    traceless = (abs(np.trace(p.a)) <= 1e-10 * max(1.0, np.linalg.norm(p.a)) and
                 abs(np.trace(p.bmat)) <= 1e-10 * max(1.0, np.linalg.norm(p.bmat)))
    if dim >= full - 1 and traceless:
        verdict = "SU"
    elif dim == full:
        verdict = "U"
    else:
        verdict = "INSUFFICIENT"
    return dim, verdict
