"""Counting functions, exponent fits, bracketing and the 1D reference.

The headline experiment samples the Dirichlet and Neumann eigenvalue
counting functions N(x) on a log grid, fits the log-log slope over a
window that drops the pre-asymptotic head (N < n_min) and the
discretization-polluted tail (x above the eta-quantile eigenvalue), and
compares the slope against half the predicted spectral dimension.

The bracketing check sandwiches the counting functions between the
component sums of the level-j decoupled forms: grounding V_j can only
lower counts, splitting the coupling corners can only raise them, so

    lowerSum(x) <= N_D(x) <= N_N(x) <= upperSum(x)

must hold as exact integers at every sampled x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .assembly import Pencil, apply_dirichlet, assemble_decoupled, assemble_neumann, Boundary
from .eigensolve import (
    DENSE_LIMIT,
    EPS_SHIFT,
    eig_dense,
    eig_dense_cached,
    get_counter,
    lambda_max_bound,
)
from .errors import (
    DomainError,
    EmptyPencilError,
    HanoiError,
    InsufficientDataError,
    LevelError,
)
from .geometry import GraphApprox, build_graph
from .sequences import MatchingSequence, PredictionSet, predicted_dimensions


# ---------------------------------------------------------------------------
# Counting functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CountingSample:
    x: float
    n_dirichlet: int
    n_neumann: int
    lower_sum: Optional[int] = None
    upper_sum: Optional[int] = None


def _count_fn(p: Optional[Pencil], backend: str, dense_limit: int, eps_shift: float):
    """Return a function x -> N(x) = #{lambda <= x} for one pencil."""
    if p is None or p.n == 0:
        return lambda x: 0
    if backend == "dense":
        spec = eig_dense_cached(p, dense_limit=dense_limit)
        return lambda x: spec.count_leq(x, eps_shift)
    if backend == "inertia":
        counter = get_counter(p)
        return lambda x: counter.count_below(x * (1.0 + eps_shift), eps_shift).count
    raise DomainError(f"unknown backend {backend!r}")


def counting_function(
    p_neumann: Pencil,
    p_dirichlet: Optional[Pencil],
    grid: Sequence[float],
    backend: str = "dense",
    dense_limit: int = DENSE_LIMIT,
    eps_shift: float = EPS_SHIFT,
) -> list[CountingSample]:
    """Sample N_D and N_N on the grid with the selected backend.

    ``p_dirichlet`` may be None for graphs whose Dirichlet condition
    constrains everything (the level-0 triangle); its counts are then 0.
    """
    grid = np.asarray(grid, dtype=float)
    if len(grid) == 0 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise DomainError("grid must be strictly increasing and positive")
    fn_n = _count_fn(p_neumann, backend, dense_limit, eps_shift)
    fn_d = _count_fn(p_dirichlet, backend, dense_limit, eps_shift)
    out = []
    for x in grid:
        try:
            out.append(CountingSample(float(x), fn_d(float(x)), fn_n(float(x))))
        except HanoiError as exc:
            raise type(exc)(f"counting failed at grid point x={x:g}: {exc}") from None
    return out


def auto_grid(
    p_neumann: Pencil,
    eta: float = 0.2,
    per_decade: int = 60,
    backend: str = "dense",
    dense_limit: int = DENSE_LIMIT,
    eps_shift: float = EPS_SHIFT,
    max_points: int = 400,
) -> np.ndarray:
    """Log-spaced grid from the 10th Neumann eigenvalue to the eta-quantile cutoff.

    The cutoff lambda_ceil(eta*n) marks the part of the discrete spectrum
    trusted to approximate the continuum; with the inertia backend both
    grid ends are located by bisection on the counting function.
    """
    n = p_neumann.n
    k_lo = min(10, max(2, n - 1))
    k_hi = max(k_lo + 1, min(n, math.ceil(eta * n)))
    if backend == "dense":
        spec = eig_dense_cached(p_neumann, dense_limit=dense_limit)
        x_lo = float(spec.eigenvalues[k_lo - 1])
        x_hi = float(spec.eigenvalues[k_hi - 1])
    else:
        counter = get_counter(p_neumann)
        fn = lambda x: counter.count_below(x * (1.0 + eps_shift), eps_shift).count
        x_lo = _bisect_quantile(fn, k_lo, lambda_max_bound(p_neumann))
        x_hi = _bisect_quantile(fn, k_hi, lambda_max_bound(p_neumann))
    if x_hi <= x_lo * (1.0 + 1e-9):
        raise InsufficientDataError(
            f"degenerate grid window [{x_lo:g}, {x_hi:g}]; the pencil is too small"
        )
    n_points = int(round(per_decade * math.log10(x_hi / x_lo)))
    n_points = min(max(n_points, 16), max_points)
    return np.geomspace(x_lo, x_hi, n_points)


def _bisect_quantile(count_fn, k: int, upper: float) -> float:
    """Smallest x with N(x) >= k, located by bisection to 1e-4 relative width."""
    lo, hi = 0.0, upper * 1.0001
    if count_fn(hi) < k:
        hi *= 4.0
    for _ in range(80):
        mid = 0.5 * (lo + hi) if lo == 0.0 else math.sqrt(lo * hi)
        if count_fn(mid) >= k:
            hi = mid
        else:
            lo = mid
        if lo > 0 and hi / lo < 1.0 + 1e-4:
            break
    return hi


# ---------------------------------------------------------------------------
# Exponent fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WindowPolicy:
    """Sample filter for the log-log fit."""

    n_min: int = 10
    eta: float = 0.2
    slope_tol: float = 0.08
    x_lo: Optional[float] = None
    x_hi: Optional[float] = None


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    stderr: float
    window: tuple
    n_points: int
    predicted: Optional[object]     # float for limit families, (lo, hi) for bands
    deviation: Optional[float]
    tolerance: float
    passed: Optional[bool]

    def describe(self) -> str:
        out = f"slope {self.slope:.5f} +/- {self.stderr:.5f} over {self.n_points} points"
        if self.predicted is not None:
            out += f", predicted {self.predicted}, deviation {self.deviation:.5f}"
        return out


def fit_exponent(
    samples: Sequence[CountingSample],
    policy: WindowPolicy = WindowPolicy(),
    prediction: Optional[PredictionSet] = None,
    which: str = "neumann",
) -> FitResult:
    """Least-squares slope of log N against log x over the policy window."""
    xs, ns = [], []
    for smp in samples:
        nval = smp.n_neumann if which == "neumann" else smp.n_dirichlet
        if nval < policy.n_min:
            continue
        if policy.x_lo is not None and smp.x < policy.x_lo:
            continue
        if policy.x_hi is not None and smp.x > policy.x_hi:
            continue
        xs.append(smp.x)
        ns.append(nval)
    if len(xs) < 8:
        lo = min((s.x for s in samples), default=float("nan"))
        hi = max((s.x for s in samples), default=float("nan"))
        raise InsufficientDataError(
            f"only {len(xs)} samples survive the window policy on [{lo:g}, {hi:g}]; "
            "need at least 8"
        )
    t = np.log(np.array(xs))
    y = np.log(np.array(ns, dtype=float))
    A = np.vstack([t, np.ones_like(t)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    dof = len(t) - 2
    if dof > 0:
        ss = float(res[0]) if len(res) else float(np.sum((y - A @ coef) ** 2))
        stderr = math.sqrt(ss / dof / float(np.sum((t - t.mean()) ** 2)))
    else:
        stderr = float("nan")
    predicted = deviation = passed = None
    if prediction is not None:
        predicted = prediction.half_exponent
        if prediction.kind == "limit":
            deviation = abs(slope - predicted)
        else:
            lo, hi = predicted
            deviation = 0.0 if lo <= slope <= hi else min(abs(slope - lo), abs(slope - hi))
        passed = deviation <= policy.slope_tol
    return FitResult(
        slope=slope,
        intercept=intercept,
        stderr=stderr,
        window=(min(xs), max(xs)),
        n_points=len(xs),
        predicted=predicted,
        deviation=deviation,
        tolerance=policy.slope_tol,
        passed=passed,
    )


def weyl_ratio(
    samples: Sequence[CountingSample],
    d_s: float,
    window: Optional[tuple] = None,
    which: str = "neumann",
) -> tuple[list[tuple[float, float]], float, float]:
    """Series N(x) / x**(d_s/2) and its min/max envelope over the window."""
    if d_s <= 0:
        raise DomainError(f"spectral dimension must be positive, got {d_s}")
    series = []
    for smp in samples:
        nval = smp.n_neumann if which == "neumann" else smp.n_dirichlet
        series.append((smp.x, nval / smp.x ** (0.5 * d_s)))
    sel = [
        r for (x, r) in series
        if r > 0 and (window is None or window[0] <= x <= window[1])
    ]
    if sel:
        return series, float(min(sel)), float(max(sel))
    return series, float("nan"), float("nan")


# ---------------------------------------------------------------------------
# Bracketing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BracketingReport:
    level: int
    samples: tuple
    violations: tuple

    @property
    def ok(self) -> bool:
        return len(self.violations) == 0


def bracketing_check(
    g: GraphApprox,
    j: int,
    grid: Sequence[float],
    backend: str = "dense",
    dense_limit: int = DENSE_LIMIT,
    eps_shift: float = EPS_SHIFT,
) -> BracketingReport:
    """Verify lowerSum <= N_D <= N_N <= upperSum at every grid point.

    Violations are collected in the report rather than raised: an entry
    means a discretization or convention bug and must stay inspectable.
    """
    if not (1 <= j < g.m):
        raise LevelError(f"decouple level {j} must satisfy 1 <= j < m = {g.m}")
    if g.s < 2:
        raise DomainError(
            "bracketing needs s >= 2 so the grounded bridges keep interior nodes"
        )
    p_n = assemble_neumann(g)
    p_d = apply_dirichlet(p_n, g, "v0")
    comps_upper = assemble_decoupled(g, j, "neumann_split")
    comps_lower = assemble_decoupled(g, j, "dirichlet_split")
    fn_n = _count_fn(p_n, backend, dense_limit, eps_shift)
    fn_d = _count_fn(p_d, backend, dense_limit, eps_shift)
    fns_upper = [_count_fn(c, backend, dense_limit, eps_shift) for c in comps_upper]
    fns_lower = [_count_fn(c, backend, dense_limit, eps_shift) for c in comps_lower]
    samples = []
    violations = []
    for x in np.asarray(grid, dtype=float):
        nd = fn_d(float(x))
        nn = fn_n(float(x))
        up = sum(fn(float(x)) for fn in fns_upper)
        lo = sum(fn(float(x)) for fn in fns_lower)
        samples.append(CountingSample(float(x), nd, nn, lo, up))
        if not (lo <= nd <= nn <= up):
            violations.append(
                f"x={x:.6g}: lowerSum={lo}, N_D={nd}, N_N={nn}, upperSum={up}"
            )
    return BracketingReport(j, tuple(samples), tuple(violations))


# ---------------------------------------------------------------------------
# 1D reference problem
# ---------------------------------------------------------------------------

def free_path_pencil(s: int, resistance: float = 1.0, mass: float = 1.0) -> Pencil:
    """Free-free path of s equal segments with trapezoidal mass lumping."""
    if s < 1:
        raise DomainError(f"need at least one segment, got {s}")
    n = s + 1
    c = s / resistance
    rows, cols, vals = [], [], []
    for i in range(s):
        rows += [i, i + 1, i, i + 1]
        cols += [i, i + 1, i + 1, i]
        vals += [c, c, -c, -c]
    L = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    L.sum_duplicates()
    m = np.full(n, mass / s)
    m[0] = m[-1] = mass / (2 * s)
    return Pencil(L, m, Boundary("neumann", component="path"), np.arange(n))


@dataclass(frozen=True)
class OneDimReport:
    s: int
    eigenvalue_errors: tuple        # relative error of lambda_k vs (k pi)^2
    max_eigenvalue_error: float
    bound_holds: bool
    bound_margins: tuple            # (x, N(x), sqrt(x)/pi + 1) rows
    counts: tuple

    @property
    def ok(self) -> bool:
        return self.bound_holds


def one_dim_reference(
    s: int,
    grid: Optional[Sequence[float]] = None,
    k_check: Optional[int] = None,
) -> OneDimReport:
    """Fidelity check of the unit path against the Neumann interval.

    The continuum eigenvalues are (k pi)^2; the counting bound is
    N(x) <= sqrt(x)/pi + 1.  The default grid places thresholds at
    ((k + 1/2) pi)^2, halfway between consecutive reference eigenvalues,
    where a count comparison between the discrete model and the continuum
    bound is meaningful; near (k pi)^2 the two differ by the sub-percent
    eigenvalue sag of the lumped discretization.
    """
    if s < 2:
        raise DomainError(f"the reference path needs s >= 2, got {s}")
    if k_check is None:
        k_check = max(1, s // 10)
    p = free_path_pencil(s)
    spec = eig_dense(p, dense_limit=max(DENSE_LIMIT, s + 1))
    errs = []
    for k in range(1, k_check + 1):
        target = (k * math.pi) ** 2
        errs.append(abs(float(spec.eigenvalues[k]) - target) / target)
    if grid is None:
        grid = [((k + 0.5) * math.pi) ** 2 for k in range(0, k_check + 1)]
    margins = []
    counts = []
    holds = True
    for x in grid:
        nx = spec.count_leq(float(x))
        bound = math.sqrt(x) / math.pi + 1.0
        margins.append((float(x), nx, bound))
        counts.append(nx)
        if nx > bound:
            holds = False
    return OneDimReport(
        s=s,
        eigenvalue_errors=tuple(errs),
        max_eigenvalue_error=float(max(errs)),
        bound_holds=holds,
        bound_margins=tuple(margins),
        counts=tuple(counts),
    )


# ---------------------------------------------------------------------------
# End-to-end counting experiment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CountingExperiment:
    graph: GraphApprox
    prediction: PredictionSet
    samples: tuple
    fit: FitResult
    weyl_series: tuple
    c1: float
    c2: float
    bracketing: Optional[BracketingReport]


def run_counting_experiment(
    seq: MatchingSequence,
    m: int,
    s: int,
    beta: float,
    backend: str = "auto",
    dense_limit: int = DENSE_LIMIT,
    eps_shift: float = EPS_SHIFT,
    eta: float = 0.2,
    per_decade: int = 60,
    grid: Optional[Sequence[float]] = None,
    policy: Optional[WindowPolicy] = None,
    bracket_level: Optional[int] = None,
    which: str = "neumann",
) -> CountingExperiment:
    """Build the level-m graph, sample N(x), fit the exponent, report envelopes."""
    g = build_graph(seq, m, s, beta)
    p_n = assemble_neumann(g)
    if backend == "auto":
        backend = "dense" if p_n.n <= dense_limit else "inertia"
    try:
        p_d = apply_dirichlet(p_n, g, "v0")
    except EmptyPencilError:
        p_d = None
    if grid is None:
        grid = auto_grid(
            p_n, eta=eta, per_decade=per_decade, backend=backend,
            dense_limit=dense_limit, eps_shift=eps_shift,
        )
    samples = counting_function(
        p_n, p_d, grid, backend=backend, dense_limit=dense_limit, eps_shift=eps_shift
    )
    prediction = predicted_dimensions(seq)
    policy = policy or WindowPolicy(eta=eta)
    fit = fit_exponent(samples, policy, prediction, which=which)
    if prediction.kind == "limit":
        d_s = prediction.d_s
    else:
        d_s = 0.5 * (prediction.d_s_lower + prediction.d_s_upper)
    series, c1, c2 = weyl_ratio(samples, d_s, window=fit.window, which=which)
    bracketing = None
    if bracket_level is not None:
        bracketing = bracketing_check(
            g, bracket_level, grid, backend=backend,
            dense_limit=dense_limit, eps_shift=eps_shift,
        )
        samples = bracketing.samples
    return CountingExperiment(
        graph=g,
        prediction=prediction,
        samples=tuple(samples),
        fit=fit,
        weyl_series=tuple(series),
        c1=c1,
        c2=c2,
        bracketing=bracketing,
    )
