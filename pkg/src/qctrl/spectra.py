"""Truncated system descriptions and hypothesis checks.

A system is stored as the real eigenvalue list ``lam`` (the drift acts as
``diag(i*lam)`` on the eigenbasis), the skew-Hermitian coupling matrix ``b``
and the control bound ``delta``.  The checks below certify everything the
synthesis pipeline relies on: decoupling of degenerate levels, connectivity
of the coupling graph, non-resonance of a chain of edges, and the basis
reordering that makes every prefix of levels internally coupled.

Indices are 1-based in every public signature, matching the labelling of
eigenstates; they are converted to 0-based array indices internally.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .errors import NotConnected, SpecValidationError

SKEW_TOL = 1e-12
DEGENERACY_TOL = 1e-12
DEFAULT_GAP_TOL = 1e-9


@dataclass
class SystemSpec:
    """Finite truncation of a bilinear system: eigenvalues, couplings, bound.

    lam      -- real eigenvalues (drift eigenvalue of level k is i*lam[k-1])
    b        -- complex N x N coupling matrix, b[j,k] = <phi_j, B phi_k>
    delta    -- control bound, admissible control values are (0, delta]
    zero_tol -- couplings with modulus <= zero_tol are treated as exact zeros
    """

    lam: np.ndarray
    b: np.ndarray
    delta: float = 1.0
    zero_tol: float = 1e-12

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=float)
        self.b = np.asarray(self.b, dtype=complex)
        self.validate()

    @property
    def size(self) -> int:
        return len(self.lam)

    def validate(self):
        if self.lam.ndim != 1 or not np.all(np.isfinite(self.lam)):
            raise SpecValidationError("lambda must be a finite real vector")
        n = len(self.lam)
        if self.b.shape != (n, n):
            raise SpecValidationError(f"b must be {n}x{n}, got {self.b.shape}")
        if not np.all(np.isfinite(self.b)):
            raise SpecValidationError("b must be finite")
        skew = np.max(np.abs(self.b + self.b.conj().T)) if n else 0.0
        if skew > SKEW_TOL:
            raise SpecValidationError(
                f"b is not skew-Hermitian: max |b + b*| = {skew:.3e}")
        if not self.delta > 0:
            raise SpecValidationError("delta must be positive")
        if self.zero_tol < 0:
            raise SpecValidationError("zero_tol must be nonnegative")

    def coupling(self, j: int, k: int) -> complex:
        """Coupling <phi_j, B phi_k> with 1-based indices."""
        return self.b[j - 1, k - 1]

    def to_json(self) -> str:
        return json.dumps({
            "lambda": self.lam.tolist(),
            "b_re": self.b.real.tolist(),
            "b_im": self.b.imag.tolist(),
            "delta": self.delta,
            "zero_tol": self.zero_tol,
        })

    @classmethod
    def from_json(cls, text: str) -> "SystemSpec":
        d = json.loads(text)
        b = np.asarray(d["b_re"], dtype=float) + 1j * np.asarray(d["b_im"], dtype=float)
        return cls(lam=np.asarray(d["lambda"], dtype=float), b=b,
                   delta=float(d["delta"]),
                   zero_tol=float(d.get("zero_tol", 1e-12)))


@dataclass
class Chain:
    """Ordered edge set over the coupling graph with certification flags.

    Edges are stored 1-based with both orientations present.  ``violations``
    lists gap collisions as pairs ((j1,j2), (k1,k2)) of unordered index pairs.
    """

    edges: tuple = ()
    certified_connected: bool = False
    certified_nonresonant: bool = False
    violations: tuple = ()

    def __post_init__(self):
        self.edges = tuple((int(j), int(k)) for j, k in self.edges)

    def has_edge(self, j: int, k: int) -> bool:
        return (j, k) in self.edges or (k, j) in self.edges

    def unordered_edges(self):
        return sorted({tuple(sorted(e)) for e in self.edges})

    def to_json(self) -> str:
        return json.dumps({
            "edges": [list(e) for e in self.edges],
            "certified_connected": self.certified_connected,
            "certified_nonresonant": self.certified_nonresonant,
            "violations": [[list(a), list(b)] for a, b in self.violations],
        })


def coupled_pairs(spec: SystemSpec) -> set:
    """All ordered pairs (j, k), j != k, with |b_jk| above the zero threshold.

    The result is symmetric: (j, k) is present iff (k, j) is.
    """
    n = spec.size
    mask = np.abs(spec.b) > spec.zero_tol
    np.fill_diagonal(mask, False)
    js, ks = np.nonzero(mask)
    return {(int(j) + 1, int(k) + 1) for j, k in zip(js, ks)}


def check_degenerate_decoupling(spec: SystemSpec) -> list:
    """Pairs (j, k), j < k, with equal eigenvalues but nonzero coupling.

    An empty list certifies that degenerate levels are never directly
    coupled, which the synthesis pipeline assumes throughout.
    """
    bad = []
    n = spec.size
    for j in range(n):
        for k in range(j + 1, n):
            if abs(spec.lam[j] - spec.lam[k]) <= DEGENERACY_TOL \
                    and abs(spec.b[j, k]) > spec.zero_tol:
                bad.append((j + 1, k + 1))
    return bad


def _adjacency(spec: SystemSpec) -> list:
    n = spec.size
    pairs = coupled_pairs(spec)
    adj = [[] for _ in range(n + 1)]
    for j, k in pairs:
        adj[j].append(k)
    for a in adj:
        a.sort()
    return adj


def _components(adj, vertices) -> list:
    seen = set()
    comps = []
    for v in vertices:
        if v in seen:
            continue
        comp = []
        queue = deque([v])
        seen.add(v)
        while queue:
            u = queue.popleft()
            comp.append(u)
            for w in adj[u]:
                if w not in seen and w in vertices:
                    seen.add(w)
                    queue.append(w)
        comps.append(comp)
    return comps


def find_chain(spec: SystemSpec) -> Chain:
    """Spanning edge set of the coupling graph, found by breadth-first search.

    Traversal is lowest-index-first from level 1, so the result is
    deterministic.  Both orientations of every tree edge are stored.
    Raises NotConnected with the component list when the graph is split.
    """
    n = spec.size
    if n < 2:
        raise SpecValidationError("need at least two levels to build a chain")
    adj = _adjacency(spec)
    comps = _components(adj, set(range(1, n + 1)))
    if len(comps) > 1:
        raise NotConnected(comps)
    tree = []
    seen = {1}
    queue = deque([1])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if w not in seen:
                seen.add(w)
                tree.append((u, w))
                queue.append(w)
    edges = tuple(tree) + tuple((k, j) for j, k in tree)
    return Chain(edges=edges, certified_connected=True)


def chain_from_edges(spec: SystemSpec, edges) -> Chain:
    """Build a chain from explicit edges, adding reversals and validating.

    Connectivity is certified only if the edges span all levels of ``spec``.
    """
    n = spec.size
    undirected = set()
    for j, k in edges:
        if not (1 <= j <= n and 1 <= k <= n) or j == k:
            raise SpecValidationError(f"edge {(j, k)} out of bounds")
        if abs(spec.coupling(j, k)) <= spec.zero_tol:
            raise SpecValidationError(f"edge {(j, k)} has zero coupling")
        if abs(spec.lam[j - 1] - spec.lam[k - 1]) <= DEGENERACY_TOL:
            raise SpecValidationError(f"edge {(j, k)} joins degenerate levels")
        undirected.add(tuple(sorted((j, k))))
    ordered = tuple(sorted(undirected))
    all_edges = ordered + tuple((k, j) for j, k in ordered)
    adj = [[] for _ in range(n + 1)]
    for j, k in all_edges:
        adj[j].append(k)
    connected = len(_components(adj, set(range(1, n + 1)))) == 1
    return Chain(edges=all_edges, certified_connected=connected)


def check_nonresonant(spec: SystemSpec, chain: Chain,
                      gap_tol: float = DEFAULT_GAP_TOL) -> Chain:
    """Certify that every chain edge has a gap unique among coupled pairs.

    For each edge (s1, s2), the gap |lam_s1 - lam_s2| is compared with the
    gap of every other coupled pair; equality within ``gap_tol`` is recorded
    as a violation.  Returns a copy of the chain with the certification flag
    and the violation list populated.
    """
    pairs = {tuple(sorted(p)) for p in coupled_pairs(spec)}
    violations = []
    seen = set()
    for j, k in chain.edges:
        e = tuple(sorted((j, k)))
        if e in seen:
            continue
        seen.add(e)
        gap = abs(spec.lam[j - 1] - spec.lam[k - 1])
        for p in sorted(pairs):
            if p == e:
                continue
            other = abs(spec.lam[p[0] - 1] - spec.lam[p[1] - 1])
            if abs(gap - other) <= gap_tol:
                violations.append((e, p))
    return replace(chain, certified_nonresonant=not violations,
                   violations=tuple(violations))


def couples_prefix(chain: Chain, m: int) -> bool:
    """True when the chain restricted to levels 1..m connects all of them."""
    if m <= 1:
        return True
    adj = [[] for _ in range(m + 1)]
    for j, k in chain.edges:
        if j <= m and k <= m:
            adj[j].append(k)
    return len(_components(adj, set(range(1, m + 1)))) == 1


def reorder_basis(spec: SystemSpec, chain: Chain) -> tuple:
    """Relabel levels so that every prefix 1..m is coupled within itself.

    Returns sigma as a tuple: position m of the new ordering holds original
    level sigma[m-1].  Construction: sigma(1) = 1, and each next level is
    the smallest one joined by a chain edge to the already selected set.
    """
    if not chain.certified_connected:
        raise NotConnected([[j] for j in range(1, spec.size + 1)])
    n = spec.size
    neighbours = [set() for _ in range(n + 1)]
    for j, k in chain.edges:
        neighbours[j].add(k)
        neighbours[k].add(j)
    chosen = [1]
    selected = {1}
    while len(chosen) < n:
        frontier = set()
        for j in selected:
            frontier |= neighbours[j] - selected
        if not frontier:
            raise NotConnected([sorted(selected),
                                sorted(set(range(1, n + 1)) - selected)])
        nxt = min(frontier)
        chosen.append(nxt)
        selected.add(nxt)
    return tuple(chosen)


def apply_reorder(spec: SystemSpec, chain: Chain, sigma) -> tuple:
    """Return (spec, chain) rewritten in the ordering ``sigma``."""
    idx = np.asarray(sigma, dtype=int) - 1
    lam = spec.lam[idx]
    b = spec.b[np.ix_(idx, idx)]
    new_spec = SystemSpec(lam=lam, b=b, delta=spec.delta, zero_tol=spec.zero_tol)
    position = {orig: pos + 1 for pos, orig in enumerate(sigma)}
    edges = tuple((position[j], position[k]) for j, k in chain.edges)
    new_chain = Chain(edges=edges,
                      certified_connected=chain.certified_connected,
                      certified_nonresonant=chain.certified_nonresonant,
                      violations=chain.violations)
    return new_spec, new_chain
