"""Generalized symmetric eigenproblems L u = lambda M u with diagonal mass.

Two backends:

* dense: reduce with the diagonal mass to the standard symmetric problem
  M^{-1/2} L M^{-1/2} and call LAPACK.  This is the oracle path and the
  only one that returns eigenvalues; it is capped by a size limit.

* inertia: for counting only.  Factor L - x M = P^T (L D L^T) P with a
  sparse up-looking LDL^T (no pivoting, reverse Cuthill-McKee ordering);
  by Sylvester's law of inertia the number of negative entries of D
  equals the number of pencil eigenvalues strictly below x.  A pivot
  whose magnitude falls under 1e-12 * max|L| means x sits numerically on
  an eigenvalue; the threshold is then nudged up by 10 * eps_shift
  relatively and the factorization retried.

The two backends are cross-validated against each other in the test
suite on every pencil family the package produces.

The symbolic analysis (elimination tree and column counts) depends only
on the sparsity pattern, which is shared by all thresholds x, so it is
done once per pencil and reused across a whole counting grid.  The
numeric kernel is JIT-compiled with numba when available and falls back
to pure Python otherwise.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import reverse_cuthill_mckee

from .assembly import Pencil
from .errors import (
    AssemblyError,
    ConvergenceError,
    DomainError,
    PencilSizeError,
    ThresholdAtEigenvalueError,
)

DENSE_LIMIT = 4000
EPS_SHIFT = 1e-9
SMALL_PIVOT_REL = 1e-12


# ---------------------------------------------------------------------------
# Spectra
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class Spectrum:
    """Sorted eigenvalues of a pencil with the residual of the worst pair."""

    eigenvalues: np.ndarray
    boundary: object
    residual_norm: float

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    def count_leq(self, x: float, eps_shift: float = EPS_SHIFT) -> int:
        """Right-continuous count #{lambda <= x} via the upward relative shift."""
        return int(np.searchsorted(self.eigenvalues, x * (1.0 + eps_shift), side="left"))

    def multiplicities(self, rel_gap: float = 1e-8) -> list[tuple[float, int]]:
        """Cluster eigenvalues whose relative gap is below ``rel_gap``."""
        ev = self.eigenvalues
        if len(ev) == 0:
            return []
        scale = max(abs(float(ev[0])), abs(float(ev[-1])), 1e-300)
        groups = []
        start = 0
        for i in range(1, len(ev) + 1):
            if i == len(ev) or ev[i] - ev[i - 1] > rel_gap * max(abs(ev[i - 1]), scale * 1e-6):
                groups.append((float(np.mean(ev[start:i])), i - start))
                start = i
        return groups


@dataclass(frozen=True)
class InertiaResult:
    """Number of pencil eigenvalues strictly below the threshold actually used."""

    x: float
    count: int
    factorization_ok: bool


def lambda_max_bound(p: Pencil) -> float:
    """Gershgorin-style upper bound max_i (sum_j |L_ij|) / M_i."""
    rowsums = np.asarray(abs(p.L).sum(axis=1)).ravel()
    return float(np.max(rowsums / p.mass))


# ---------------------------------------------------------------------------
# Dense backend
# ---------------------------------------------------------------------------

def eig_dense(p: Pencil, dense_limit: int = DENSE_LIMIT) -> Spectrum:
    """All eigenvalues of the pencil via mass-scaled symmetric reduction."""
    if p.n > dense_limit:
        raise PencilSizeError(
            f"pencil has {p.n} rows, above the dense limit {dense_limit}; "
            "use count_below for counting at this size"
        )
    mass = p.mass
    if np.any(mass <= 0.0):
        raise AssemblyError("pencil mass must be strictly positive")
    d = 1.0 / np.sqrt(mass)
    A = p.L.toarray() * d[None, :] * d[:, None]
    A = 0.5 * (A + A.T)
    w, U = scipy.linalg.eigh(A)
    V = U * d[:, None]
    R = p.L.dot(V) - (mass[:, None] * V) * w[None, :]
    residual = float(np.max(np.linalg.norm(R, axis=0) / np.linalg.norm(V, axis=0)))
    lam_max = max(abs(float(w[-1])), abs(float(w[0])), 1e-300)
    if residual > 1e-8 * lam_max:
        raise ConvergenceError(
            f"dense eigensolve residual {residual:.3e} exceeds 1e-8 * lambda_max"
        )
    return Spectrum(np.sort(w), p.boundary, residual)


def eig_lowest(p: Pencil, k: int, dense_limit: int = DENSE_LIMIT) -> Spectrum:
    """The k smallest eigenvalues, by shift-invert iteration or dense fallback."""
    if not (1 <= k <= p.n):
        raise DomainError(f"k must lie in 1..{p.n}, got {k}")
    # ARPACK needs k well below n and is not worth starting on small pencils
    if p.n <= 300 or k > p.n - 2 or k > p.n // 3:
        full = eig_dense(p, dense_limit=max(dense_limit, p.n))
        return Spectrum(full.eigenvalues[:k], p.boundary, full.residual_norm)
    bound = lambda_max_bound(p)
    sigma = -1e-6 * bound
    M = sp.diags(p.mass).tocsc()
    v0 = np.full(p.n, 1.0 / np.sqrt(p.n))
    try:
        w, V = spla.eigsh(
            p.L.tocsc(), k=k, M=M, sigma=sigma, which="LM", v0=v0, maxiter=5000
        )
    except spla.ArpackNoConvergence as exc:
        if p.n <= dense_limit:
            full = eig_dense(p, dense_limit)
            return Spectrum(full.eigenvalues[:k], p.boundary, full.residual_norm)
        raise ConvergenceError(f"shift-invert iteration failed to converge: {exc}")
    order = np.argsort(w)
    w, V = w[order], V[:, order]
    R = p.L.dot(V) - (p.mass[:, None] * V) * w[None, :]
    residual = float(np.max(np.linalg.norm(R, axis=0) / np.linalg.norm(V, axis=0)))
    lam_ref = max(abs(float(w[-1])), 1e-12 * bound)
    if residual > 1e-7 * lam_ref:
        if p.n <= dense_limit:
            full = eig_dense(p, dense_limit)
            return Spectrum(full.eigenvalues[:k], p.boundary, full.residual_norm)
        raise ConvergenceError(
            f"shift-invert residual {residual:.3e} exceeds 1e-7 * lambda_{k}"
        )
    return Spectrum(w, p.boundary, residual)


# ---------------------------------------------------------------------------
# Sparse LDL^T inertia backend
# ---------------------------------------------------------------------------

def _ldl_symbolic_py(n, Ap, Ai, parent, lnz, flag):
    """Elimination tree and column counts of the Cholesky factor.

    A is the upper triangle in CSC with sorted row indices and a full
    diagonal.  Walking each above-diagonal entry up the current tree
    gives both the tree and the exact count of nonzeros per column of L.
    """
    for k in range(n):
        parent[k] = -1
        flag[k] = k
        lnz[k] = 0
    for k in range(n):
        for p in range(Ap[k], Ap[k + 1]):
            i = Ai[p]
            while i < k and flag[i] != k:
                if parent[i] == -1:
                    parent[i] = k
                lnz[i] += 1
                flag[i] = k
                i = parent[i]


def _ldl_numeric_py(n, Ap, Ai, Ax, parent, Lp, Li, Lx, D, Y, pattern, flag, lnz,
                    pivot_tol):
    """Up-looking numeric factorization; returns (negative pivots, status).

    status 0 means success; 1 means a pivot magnitude fell below
    ``pivot_tol`` at the row where the factorization stopped.
    """
    for k in range(n):
        Y[k] = 0.0
        flag[k] = -1
        lnz[k] = 0
    nneg = 0
    for k in range(n):
        top = n
        flag[k] = k
        for p in range(Ap[k], Ap[k + 1]):
            i = Ai[p]
            if i > k:
                continue
            Y[i] += Ax[p]
            plen = 0
            while flag[i] != k:
                pattern[plen] = i
                plen += 1
                flag[i] = k
                i = parent[i]
            while plen > 0:
                plen -= 1
                top -= 1
                pattern[top] = pattern[plen]
        d = Y[k]
        Y[k] = 0.0
        while top < n:
            j = pattern[top]
            yj = Y[j]
            Y[j] = 0.0
            p_end = Lp[j] + lnz[j]
            for p in range(Lp[j], p_end):
                Y[Li[p]] -= Lx[p] * yj
            l_kj = yj / D[j]
            d -= l_kj * yj
            Li[p_end] = k
            Lx[p_end] = l_kj
            lnz[j] += 1
            top += 1
        D[k] = d
        if abs(d) <= pivot_tol:
            return nneg, 1
        if d < 0.0:
            nneg += 1
    return nneg, 0


try:  # pragma: no cover - exercised implicitly
    from numba import njit

    _ldl_symbolic = njit(cache=True)(_ldl_symbolic_py)
    _ldl_numeric = njit(cache=True)(_ldl_numeric_py)
    HAVE_NUMBA = True
except Exception:  # pragma: no cover
    _ldl_symbolic = _ldl_symbolic_py
    _ldl_numeric = _ldl_numeric_py
    HAVE_NUMBA = False


class InertiaCounter:
    """Reusable inertia evaluator for one pencil.

    Permutes the pencil with reverse Cuthill-McKee, extracts the upper
    triangle once, and keeps the symbolic factorization; each threshold x
    then only needs the numeric pass on L - x M.
    """

    def __init__(self, pencil: Pencil, small_pivot_rel: float = SMALL_PIVOT_REL):
        n = pencil.n
        self.n = n
        perm = np.asarray(reverse_cuthill_mckee(pencil.L.tocsr(), symmetric_mode=True))
        if n == 1:
            perm = np.array([0])
        Lp_ = pencil.L.tocsr()[perm][:, perm]
        upper = sp.triu(Lp_, format="csc")
        upper.sort_indices()
        self.Ap = upper.indptr.astype(np.int64)
        self.Ai = upper.indices.astype(np.int64)
        self.base = upper.data.astype(np.float64)
        # with sorted indices the diagonal is the last entry of each column
        self.diag_pos = self.Ap[1:] - 1
        if not np.array_equal(self.Ai[self.diag_pos], np.arange(n)):
            raise AssemblyError("stiffness matrix misses diagonal entries")
        self.m_perm = pencil.mass[perm].astype(np.float64)
        self.pivot_tol = small_pivot_rel * float(np.max(np.abs(pencil.L.data)))
        self.parent = np.empty(n, dtype=np.int64)
        self._lnz = np.empty(n, dtype=np.int64)
        self._flag = np.empty(n, dtype=np.int64)
        _ldl_symbolic(n, self.Ap, self.Ai, self.parent, self._lnz, self._flag)
        self.Lp = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(self._lnz, out=self.Lp[1:])
        nnz_l = int(self.Lp[n])
        self.Li = np.empty(nnz_l, dtype=np.int64)
        self.Lx = np.empty(nnz_l, dtype=np.float64)
        self.D = np.empty(n, dtype=np.float64)
        self.Y = np.zeros(n, dtype=np.float64)
        self.pattern = np.empty(n, dtype=np.int64)

    @property
    def fill_nonzeros(self) -> int:
        return int(self.Lp[self.n])

    def try_count(self, x: float) -> tuple[int, bool]:
        """One factorization attempt at threshold x: (count, succeeded)."""
        Ax = self.base.copy()
        Ax[self.diag_pos] -= x * self.m_perm
        nneg, status = _ldl_numeric(
            self.n, self.Ap, self.Ai, Ax, self.parent, self.Lp, self.Li, self.Lx,
            self.D, self.Y, self.pattern, self._flag, self._lnz, self.pivot_tol,
        )
        return int(nneg), status == 0

    def count_below(self, x: float, eps_shift: float = EPS_SHIFT,
                    retries: int = 3) -> InertiaResult:
        """Count eigenvalues strictly below x, nudging x off near-singular shifts."""
        xt = x
        for attempt in range(retries + 1):
            count, ok = self.try_count(xt)
            if ok:
                return InertiaResult(xt, count, attempt == 0)
            xt = xt * (1.0 + 10.0 * eps_shift)
        raise ThresholdAtEigenvalueError(
            f"threshold {x!r} sits on an eigenvalue: {retries} retries with relative "
            f"shift {10 * eps_shift:g} all hit pivots below {self.pivot_tol:.3e}"
        )


_counter_cache: "weakref.WeakKeyDictionary[Pencil, InertiaCounter]" = (
    weakref.WeakKeyDictionary()
)
_spectrum_cache: "weakref.WeakKeyDictionary[Pencil, Spectrum]" = (
    weakref.WeakKeyDictionary()
)


def get_counter(p: Pencil) -> InertiaCounter:
    counter = _counter_cache.get(p)
    if counter is None:
        counter = InertiaCounter(p)
        _counter_cache[p] = counter
    return counter


def eig_dense_cached(p: Pencil, dense_limit: int = DENSE_LIMIT) -> Spectrum:
    """eig_dense with one cached spectrum per pencil (keyed by identity)."""
    spec = _spectrum_cache.get(p)
    if spec is None:
        spec = eig_dense(p, dense_limit)
        _spectrum_cache[p] = spec
    return spec


def count_below(p: Pencil, x: float, eps_shift: float = EPS_SHIFT) -> InertiaResult:
    """Sylvester inertia count #{lambda_k < x} for the pencil.

    To evaluate the right-continuous counting function N(x) = #{lambda <= x},
    call with x * (1 + eps_shift), as counting_function does.
    """
    return get_counter(p).count_below(x, eps_shift=eps_shift)
