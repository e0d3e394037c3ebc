"""Effective-resistance computations on the graph approximations.

Effective resistance between two vertices is obtained from one linear
solve against the conductance Laplacian with a unit current injected at
one vertex and extracted at the other; the singular constant mode is
removed by grounding the lowest-indexed vertex.  Solves share one sparse
factorization per pencil and get a single step of iterative refinement
when the residual is above 1e-10 * ||rhs||.

The module verifies the electrical equivalence that defines matching
pairs (all boundary pair resistances equal 2/3 at every level), computes
harmonic extensions, and estimates the resistance-metric dimension from
the scaling of block diameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import Pencil, assemble_neumann
from .errors import ConnectivityError, DomainError, LevelError, PencilSizeError
from .geometry import build_graph, cell_corner_ids, enumerate_words
from .sequences import MatchingSequence, resistance_dimension, scale_factors


class GroundedSolver:
    """Shared factorization of the Laplacian with one grounded vertex."""

    def __init__(self, p: Pencil, ground: int = 0):
        self.n = p.n
        self.ground = ground
        keep = np.array([i for i in range(p.n) if i != ground], dtype=np.int64)
        self.keep = keep
        A = p.L[keep][:, keep].tocsc()
        self._lu = spla.splu(A)
        self._A = A

    def solve(self, b_full: np.ndarray) -> np.ndarray:
        """Solve L phi = b with phi[ground] = 0; b must sum to zero."""
        b = b_full[self.keep]
        x = self._lu.solve(b)
        r = b - self._A.dot(x)
        nb = np.linalg.norm(b)
        if nb > 0 and np.linalg.norm(r) > 1e-10 * nb:
            x = x + self._lu.solve(r)
            r = b - self._A.dot(x)
            if np.linalg.norm(r) > 1e-8 * nb:
                raise ConnectivityError(
                    "grounded system did not solve to tolerance; graph may be disconnected"
                )
        phi = np.zeros(self.n)
        phi[self.keep] = x
        return phi

    def pair_resistance(self, u: int, v: int) -> float:
        if u == v:
            raise DomainError("effective resistance needs two distinct vertices")
        b = np.zeros(self.n)
        b[u] += 1.0
        b[v] -= 1.0
        phi = self.solve(b)
        r = float(phi[u] - phi[v])
        if r <= 0.0:
            raise ConnectivityError(
                f"nonpositive effective resistance {r!r} between {u} and {v}"
            )
        return r


def effective_resistance(p: Pencil, u: int, v: int) -> float:
    """Effective resistance between vertices u and v of a Neumann pencil."""
    return GroundedSolver(p).pair_resistance(u, v)


@dataclass(frozen=True)
class CompatibilityReport:
    """Boundary-pair resistances per level and their deviation from 2/3."""

    levels: tuple
    resistances: tuple      # one (r12, r13, r23) triple per level
    max_deviation: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return self.max_deviation <= self.tolerance


def compatibility_check(
    seq: MatchingSequence,
    m_max: int,
    beta: float = 0.25,
    tolerance: float = 1e-9,
) -> CompatibilityReport:
    """Check that all three V_0 pair resistances equal 2/3 on every level <= m_max.

    This is the defining property of matching pairs: each refinement is
    electrically equivalent to the unit-resistance triangle.
    """
    if m_max < 0:
        raise DomainError(f"m_max must be >= 0, got {m_max}")
    levels = []
    triples = []
    max_dev = 0.0
    for m in range(m_max + 1):
        g = build_graph(seq, m, s=1, beta=beta)
        p = assemble_neumann(g)
        solver = GroundedSolver(p)
        corners = cell_corner_ids(g, "")
        triple = tuple(
            solver.pair_resistance(corners[a], corners[b])
            for a, b in ((0, 1), (0, 2), (1, 2))
        )
        levels.append(m)
        triples.append(triple)
        max_dev = max(max_dev, max(abs(r - 2.0 / 3.0) for r in triple))
    return CompatibilityReport(tuple(levels), tuple(triples), max_dev, tolerance)


@dataclass(frozen=True)
class HarmonicExtension:
    values: np.ndarray
    energy: float


def harmonic_extension(p: Pencil, fixed: dict) -> HarmonicExtension:
    """Energy-minimizing extension of the boundary data ``fixed``.

    Solves the Schur system on the free vertices; the returned energy is
    the quadratic form of the full extension.
    """
    if not fixed:
        raise DomainError("harmonic extension needs at least one fixed vertex")
    for v, val in fixed.items():
        if not (0 <= v < p.n) or not math.isfinite(val):
            raise DomainError(f"bad fixed value {val!r} at vertex {v!r}")
    fixed_ids = np.array(sorted(fixed), dtype=np.int64)
    fixed_vals = np.array([fixed[v] for v in fixed_ids])
    free = np.array(sorted(set(range(p.n)) - set(fixed_ids.tolist())), dtype=np.int64)
    u = np.zeros(p.n)
    u[fixed_ids] = fixed_vals
    if free.size:
        A = p.L[free][:, free].tocsc()
        b = -p.L[free][:, fixed_ids].dot(fixed_vals)
        u[free] = spla.splu(A).solve(b)
    energy = float(u @ p.L.dot(u))
    return HarmonicExtension(u, energy)


@dataclass(frozen=True)
class DiameterScaling:
    """Per-level block diameters and the fitted decay rate.

    ``slope`` is the least-squares slope of log(max_w d_j(w)) against j,
    corrected for the known finite-prefix drift of the partial products
    a_j = delta_j / r**j when the family declares a limit (for constant
    families a_j = 1 and the correction vanishes).  ``slope_raw`` is the
    uncorrected fit.  The dimension estimate is ln 3 / (-slope).
    """

    levels: tuple
    max_diameter: tuple
    min_diameter: tuple
    records: tuple              # (level, word, diameter) rows
    slope: float
    slope_raw: float
    dimension_estimate: float
    predicted_dimension: Optional[float]


def cell_diameter_scaling(
    seq: MatchingSequence,
    m: int,
    j_max: int,
    beta: float = 0.25,
) -> DiameterScaling:
    """Corner-pair diameter proxy of every level-j block on the level-m graph.

    The proxy takes the maximum pairwise effective resistance among the
    three outer corners of the block; it underestimates the true block
    diameter by at most a bounded factor, which moves the intercept of
    the log fit, not its slope.
    """
    if j_max >= m:
        raise LevelError(f"j_max ({j_max}) must be below the graph level ({m})")
    g = build_graph(seq, m, s=1, beta=beta)
    p = assemble_neumann(g)
    solver = GroundedSolver(p)
    records = []
    max_d, min_d = [], []
    for j in range(j_max + 1):
        best = -np.inf
        worst = np.inf
        for w in enumerate_words(j):
            ids = cell_corner_ids(g, w)
            d = max(
                solver.pair_resistance(ids[a], ids[b])
                for a, b in ((0, 1), (0, 2), (1, 2))
            )
            records.append((j, w, d))
            best = max(best, d)
            worst = min(worst, d)
        max_d.append(best)
        min_d.append(worst)

    js = np.arange(j_max + 1, dtype=float)
    logs = np.log(np.array(max_d))
    slope_raw = float(np.polyfit(js, logs, 1)[0]) if j_max >= 1 else float("nan")
    limit = seq.limit_r
    if limit is not None and j_max >= 1:
        sf = scale_factors(seq, max(j_max, 1))
        drift = np.concatenate(([1.0], sf.partial_products[:j_max]))
        slope = float(np.polyfit(js, logs - np.log(drift), 1)[0])
        predicted = resistance_dimension(limit)
    else:
        slope = slope_raw
        predicted = None
    dim_est = math.log(3.0) / (-slope) if slope < 0 else float("nan")
    return DiameterScaling(
        levels=tuple(range(j_max + 1)),
        max_diameter=tuple(max_d),
        min_diameter=tuple(min_d),
        records=tuple(records),
        slope=slope,
        slope_raw=slope_raw,
        dimension_estimate=dim_est,
        predicted_dimension=predicted,
    )


@dataclass(frozen=True)
class DiameterResult:
    value: float
    exact: bool
    pairs_checked: int
    seed: Optional[int]


def resistance_diameter(
    p: Pencil,
    mode: str = "exact",
    k: int = 200,
    seed: int = 20240601,
    anchors: Optional[list] = None,
) -> DiameterResult:
    """Maximum pairwise effective resistance of the pencil's graph.

    ``exact`` inverts the grounded Laplacian densely (n <= 2000) and
    maximizes over all pairs.  ``sampled`` maximizes over k random pairs
    plus all pairs between the anchor vertices (the boundary corners,
    when the caller passes them; the lowest three ids otherwise) and the
    rest, and is only a lower bound.
    """
    n = p.n
    if mode == "exact":
        if n > 2000:
            raise PencilSizeError(
                f"exact diameter needs n <= 2000, got {n}; use mode='sampled'"
            )
        keep = np.arange(1, n)
        A = p.L[keep][:, keep].toarray()
        G = np.linalg.inv(A)
        K = np.zeros((n, n))
        K[1:, 1:] = G
        d = np.diag(K)
        R = d[:, None] + d[None, :] - 2.0 * K
        return DiameterResult(float(R.max()), True, n * (n - 1) // 2, None)
    if mode != "sampled":
        raise DomainError(f"unknown diameter mode {mode!r}")
    solver = GroundedSolver(p)
    rng = np.random.default_rng(seed)
    best = 0.0
    pairs = 0
    if anchors is None:
        anchors = list(range(min(3, n)))
    for a in anchors:
        for v in range(n):
            if v == a:
                continue
            best = max(best, solver.pair_resistance(a, v))
            pairs += 1
    for _ in range(k):
        u, v = rng.choice(n, size=2, replace=False)
        best = max(best, solver.pair_resistance(int(u), int(v)))
        pairs += 1
    return DiameterResult(best, False, pairs, seed)
