"""Configuration-driven command line interface.

Commands (each takes ``--config PATH`` plus optional ``--out`` and
``--quiet``):

* ``validate``: sequence-condition diagnostics, predicted dimensions,
  and graph sanity checks; exit 0 iff every invariant holds.
* ``spectrum``: eigenvalues.csv and multiplicity.csv.
* ``counting``: counting.csv, report.json and optionally loglog.svg.
* ``resistance``: compatibility.csv, diameters.csv, resistance_report.json.

Exit codes: 0 success, 1 usage/config error, 2 numerical failure,
3 invariant or acceptance violation.

The JSON config round-trips losslessly; every output file embeds the
sha256 hash of the canonical config (as a leading comment line for CSV
and SVG, as the first key for JSON, which has no comment syntax).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.sparse.csgraph import connected_components

from . import analysis, geometry, resistance as res_mod, sequences
from .assembly import apply_dirichlet, assemble_neumann
from .eigensolve import eig_dense, eig_lowest
from .errors import (
    ConfigError,
    DomainError,
    EmptyPencilError,
    HanoiError,
    PencilSizeError,
    UnsupportedFamilyError,
)
from .svgplot import render_loglog

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_VIOLATION = 3


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SolverConfig:
    backend: str = "auto"           # auto | dense | inertia
    dense_limit: int = 4000
    eps_shift: float = 1e-9
    k_lowest: Optional[int] = None


@dataclass(frozen=True)
class GridConfig:
    mode: str = "auto"              # auto | explicit
    points: int = 60                # per-decade density in auto mode
    values: Optional[tuple] = None  # explicit grid


@dataclass(frozen=True)
class FitConfig:
    n_min: int = 10
    eta: float = 0.2
    slope_tol: float = 0.08


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: tuple = ("csv", "json")
    seed: int = 20240601


@dataclass(frozen=True)
class RunConfig:
    sequence: sequences.MatchingSequence
    level: int
    subdivisions: int
    beta: float
    alpha: Optional[float] = None
    solver: SolverConfig = SolverConfig()
    grid: GridConfig = GridConfig()
    fit: FitConfig = FitConfig()
    outputs: OutputConfig = OutputConfig()
    bracketing_level: Optional[int] = None


def _need(d: dict, key: str, ctx: str):
    if key not in d:
        raise ConfigError(f"{ctx}: missing key {key!r}")
    return d[key]


def _sequence_from_dict(d: dict) -> sequences.MatchingSequence:
    if not isinstance(d, dict):
        raise ConfigError("sequence: expected an object")
    kind = _need(d, "kind", "sequence")
    try:
        if kind == "constant":
            return sequences.constant(float(_need(d, "r", "sequence")))
        if kind == "geometric_to_limit":
            return sequences.geometric_to_limit(
                float(_need(d, "r_limit", "sequence")), float(_need(d, "q", "sequence"))
            )
        if kind == "explicit":
            vals = _need(d, "values", "sequence")
            return sequences.explicit([float(v) for v in vals], d.get("tail"))
    except DomainError as exc:
        raise ConfigError(f"sequence: {exc}") from None
    raise ConfigError(f"sequence.kind: unknown kind {kind!r}")


def _sequence_to_dict(seq: sequences.MatchingSequence) -> dict:
    if seq.kind == "constant":
        return {"kind": "constant", "r": seq.r}
    if seq.kind == "geometric_to_limit":
        return {"kind": "geometric_to_limit", "r_limit": seq.r_limit, "q": seq.q}
    return {"kind": "explicit", "values": list(seq.values), "tail": seq.tail}


def config_from_dict(d: dict) -> RunConfig:
    if not isinstance(d, dict):
        raise ConfigError("config: expected a JSON object at top level")
    known = {
        "sequence", "level", "subdivisions", "beta", "alpha",
        "solver", "grid", "fit", "outputs", "bracketing_level",
    }
    for key in d:
        if key not in known:
            raise ConfigError(f"config: unknown key {key!r}")
    seq = _sequence_from_dict(_need(d, "sequence", "config"))
    level = int(_need(d, "level", "config"))
    if level < 0:
        raise ConfigError(f"level: must be >= 0, got {level}")
    subdivisions = int(d.get("subdivisions", 1))
    if subdivisions < 1:
        raise ConfigError(f"subdivisions: must be >= 1, got {subdivisions}")
    beta = float(_need(d, "beta", "config"))
    if not (0.0 < beta < 1.0 / 3.0):
        raise ConfigError(
            f"beta: must lie in (0, 1/3) for a finite line measure, got {beta}"
        )
    alpha = d.get("alpha")
    if alpha is not None:
        alpha = float(alpha)
        if not (0.0 < alpha < 1.0):
            raise ConfigError(f"alpha: must lie in (0, 1), got {alpha}")
    sd = d.get("solver", {})
    solver = SolverConfig(
        backend=sd.get("backend", "auto"),
        dense_limit=int(sd.get("dense_limit", 4000)),
        eps_shift=float(sd.get("eps_shift", 1e-9)),
        k_lowest=(int(sd["k_lowest"]) if sd.get("k_lowest") is not None else None),
    )
    if solver.backend not in ("auto", "dense", "inertia"):
        raise ConfigError(f"solver.backend: unknown backend {solver.backend!r}")
    gd = d.get("grid", {})
    grid = GridConfig(
        mode=gd.get("mode", "auto"),
        points=int(gd.get("points", 60)),
        values=(tuple(float(v) for v in gd["values"]) if gd.get("values") else None),
    )
    if grid.mode not in ("auto", "explicit"):
        raise ConfigError(f"grid.mode: unknown mode {grid.mode!r}")
    if grid.mode == "explicit" and not grid.values:
        raise ConfigError("grid.values: explicit grid mode needs values")
    fd = d.get("fit", {})
    fit = FitConfig(
        n_min=int(fd.get("n_min", 10)),
        eta=float(fd.get("eta", 0.2)),
        slope_tol=float(fd.get("slope_tol", 0.08)),
    )
    od = d.get("outputs", {})
    outputs = OutputConfig(
        directory=od.get("directory", "out"),
        formats=tuple(od.get("formats", ("csv", "json"))),
        seed=int(od.get("seed", 20240601)),
    )
    bl = d.get("bracketing_level")
    return RunConfig(
        sequence=seq,
        level=level,
        subdivisions=subdivisions,
        beta=beta,
        alpha=alpha,
        solver=solver,
        grid=grid,
        fit=fit,
        outputs=outputs,
        bracketing_level=(int(bl) if bl is not None else None),
    )


def config_to_dict(cfg: RunConfig) -> dict:
    return {
        "sequence": _sequence_to_dict(cfg.sequence),
        "level": cfg.level,
        "subdivisions": cfg.subdivisions,
        "beta": cfg.beta,
        "alpha": cfg.alpha,
        "solver": {
            "backend": cfg.solver.backend,
            "dense_limit": cfg.solver.dense_limit,
            "eps_shift": cfg.solver.eps_shift,
            "k_lowest": cfg.solver.k_lowest,
        },
        "grid": {
            "mode": cfg.grid.mode,
            "points": cfg.grid.points,
            "values": (list(cfg.grid.values) if cfg.grid.values else None),
        },
        "fit": {"n_min": cfg.fit.n_min, "eta": cfg.fit.eta, "slope_tol": cfg.fit.slope_tol},
        "outputs": {
            "directory": cfg.outputs.directory,
            "formats": list(cfg.outputs.formats),
            "seed": cfg.outputs.seed,
        },
        "bracketing_level": cfg.bracketing_level,
    }


def config_hash(cfg: RunConfig) -> str:
    canonical = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} line {exc.lineno}: {exc.msg}") from None
    return config_from_dict(data)


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def atomic_write(path: str, text: str):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def write_csv(path: str, header: list, rows: list, cfg_hash: str):
    lines = [f"# config={cfg_hash}", ",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    atomic_write(path, "\n".join(lines) + "\n")


def write_json(path: str, payload: dict, cfg_hash: str):
    body = {"config_hash": cfg_hash}
    body.update(payload)
    atomic_write(path, json.dumps(body, indent=2) + "\n")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _say(quiet: bool, *parts):
    if not quiet:
        print(*parts)


def _prediction_payload(seq) -> dict:
    try:
        pred = sequences.predicted_dimensions(seq)
    except UnsupportedFamilyError:
        return {"kind": "diagnostics_only"}
    if pred.kind == "limit":
        return {
            "kind": "limit",
            "d_s": pred.d_s,
            "dim_h": pred.dim_h,
            "relation_check": pred.relation_check,
        }
    return {
        "kind": "band",
        "d_s_lower": pred.d_s_lower,
        "d_s_upper": pred.d_s_upper,
        "dim_lower": pred.dim_lower,
        "dim_upper": pred.dim_upper,
    }


def cmd_validate(cfg: RunConfig, quiet: bool = False) -> int:
    report = sequences.validate_conditions(cfg.sequence, max(cfg.level, 40))
    _say(quiet, f"sequence {report.family}: {report.verdict}")
    for w in report.warnings:
        _say(quiet, f"  warning: {w}")
    pred = _prediction_payload(cfg.sequence)
    if pred["kind"] == "limit":
        _say(quiet, f"predicted d_S = {pred['d_s']:.6f}, dim_H = {pred['dim_h']:.6f}")
    elif pred["kind"] == "band":
        _say(quiet, f"predicted d_S in [{pred['d_s_lower']:.6f}, {pred['d_s_upper']:.6f}]")
    if "violated" in report.verdict:
        _say(quiet, f"FAIL sequence-conditions: {report.verdict}")
        return EXIT_VIOLATION

    g = geometry.build_graph(cfg.sequence, cfg.level, cfg.subdivisions, cfg.beta, cfg.alpha)
    m, s = cfg.level, cfg.subdivisions
    nv_expect = 3 ** (m + 1) + (s - 1) * (3 ** (m + 1) - 3) // 2
    ne_expect = 3 ** (m + 1) + s * (3 ** (m + 1) - 3) // 2
    checks = [
        ("vertex-count", g.n_vertices == nv_expect),
        ("edge-count", g.n_edges == ne_expect),
        ("total-mass", abs(float(g.masses.sum()) - 1.0) <= 1e-12),
    ]
    p = assemble_neumann(g)
    ncomp, _ = connected_components(p.L, directed=False)
    checks.append(("connectivity", ncomp == 1))
    bounds_ok = True
    for j in range(m + 1):
        mu = 0.5 * (3.0 ** (-j) + cfg.beta ** j)
        if not (cfg.beta ** j <= mu + 1e-15 and mu <= 3.0 ** (-j) + 1e-15):
            bounds_ok = False
    checks.append(("measure-bounds", bounds_ok))
    _say(quiet, f"graph level {m}, s={s}: {g.n_vertices} vertices, {g.n_edges} edges, "
                f"total mass {float(g.masses.sum()):.15f}")
    for name, ok in checks:
        if not ok:
            _say(quiet, f"FAIL {name}")
            return EXIT_VIOLATION
    _say(quiet, "all invariant checks pass")
    return EXIT_OK


def cmd_spectrum(cfg: RunConfig, quiet: bool = False) -> int:
    h = config_hash(cfg)
    g = geometry.build_graph(cfg.sequence, cfg.level, cfg.subdivisions, cfg.beta, cfg.alpha)
    p_n = assemble_neumann(g)
    pencils = [("neumann", p_n)]
    try:
        pencils.append(("dirichlet_v0", apply_dirichlet(p_n, g, "v0")))
    except EmptyPencilError:
        pass
    k = cfg.solver.k_lowest
    if p_n.n > cfg.solver.dense_limit and k is None:
        raise PencilSizeError(
            f"pencil of size {p_n.n} exceeds dense_limit {cfg.solver.dense_limit}; "
            "request solver.k_lowest or use the counting command"
        )
    rows = []
    mult_rows = []
    for label, p in pencils:
        if k is not None:
            spec = eig_lowest(p, min(k, p.n), dense_limit=cfg.solver.dense_limit)
        else:
            spec = eig_dense(p, dense_limit=cfg.solver.dense_limit)
        for i, lam in enumerate(spec.eigenvalues, start=1):
            rows.append((i, float(lam), label))
        for value, mult in spec.multiplicities():
            mult_rows.append((label, value, mult))
    outdir = cfg.outputs.directory
    write_csv(os.path.join(outdir, "eigenvalues.csv"), ["k", "lambda", "boundary"], rows, h)
    write_csv(
        os.path.join(outdir, "multiplicity.csv"),
        ["boundary", "lambda", "multiplicity"], mult_rows, h,
    )
    _say(quiet, f"wrote eigenvalues.csv and multiplicity.csv to {outdir}")
    return EXIT_OK


def cmd_counting(cfg: RunConfig, quiet: bool = False) -> int:
    h = config_hash(cfg)
    grid = np.asarray(cfg.grid.values) if cfg.grid.mode == "explicit" else None
    exp = analysis.run_counting_experiment(
        cfg.sequence,
        cfg.level,
        cfg.subdivisions,
        cfg.beta,
        backend=cfg.solver.backend,
        dense_limit=cfg.solver.dense_limit,
        eps_shift=cfg.solver.eps_shift,
        eta=cfg.fit.eta,
        per_decade=cfg.grid.points,
        grid=grid,
        policy=analysis.WindowPolicy(
            n_min=cfg.fit.n_min, eta=cfg.fit.eta, slope_tol=cfg.fit.slope_tol
        ),
        bracket_level=cfg.bracketing_level,
    )
    outdir = cfg.outputs.directory
    rows = []
    for smp, (x, ratio) in zip(exp.samples, exp.weyl_series):
        rows.append((smp.x, smp.n_dirichlet, smp.n_neumann, smp.lower_sum,
                     smp.upper_sum, ratio))
    write_csv(
        os.path.join(outdir, "counting.csv"),
        ["x", "n_dirichlet", "n_neumann", "lower_sum", "upper_sum", "weyl_ratio"],
        rows, h,
    )
    fit = exp.fit
    verdict = "pass" if (fit.passed and (exp.bracketing is None or exp.bracketing.ok)) \
        else "fail"
    payload = {
        "sequence": cfg.sequence.describe(),
        "level": cfg.level,
        "subdivisions": cfg.subdivisions,
        "beta": cfg.beta,
        "prediction": _prediction_payload(cfg.sequence),
        "fit": {
            "slope": fit.slope,
            "intercept": fit.intercept,
            "stderr": fit.stderr,
            "window": list(fit.window),
            "n_points": fit.n_points,
            "predicted": (list(fit.predicted) if isinstance(fit.predicted, tuple)
                          else fit.predicted),
            "deviation": fit.deviation,
            "tolerance": fit.tolerance,
        },
        "weyl_envelope": {"c1": exp.c1, "c2": exp.c2},
        "bracketing": (
            None if exp.bracketing is None else {
                "level": exp.bracketing.level,
                "violations": list(exp.bracketing.violations),
            }
        ),
        "verdict": verdict,
    }
    write_json(os.path.join(outdir, "report.json"), payload, h)
    if "svg" in cfg.outputs.formats:
        pts = [(smp.x, smp.n_neumann) for smp in exp.samples if smp.n_neumann > 0]
        guide = fit.predicted if not isinstance(fit.predicted, tuple) \
            else 0.5 * (fit.predicted[0] + fit.predicted[1])
        svg = render_loglog(
            pts, fit.slope, fit.intercept, guide,
            title="eigenvalue counting", header_comment=f"config={h}",
        )
        atomic_write(os.path.join(outdir, "loglog.svg"), svg)
    _say(quiet, f"fit: {fit.describe()}")
    _say(quiet, f"verdict: {verdict}")
    return EXIT_OK if verdict == "pass" else EXIT_VIOLATION


def cmd_resistance(cfg: RunConfig, quiet: bool = False) -> int:
    h = config_hash(cfg)
    outdir = cfg.outputs.directory
    compat = res_mod.compatibility_check(cfg.sequence, cfg.level, beta=cfg.beta)
    rows = []
    for m, triple in zip(compat.levels, compat.resistances):
        for pair, r in zip(("p1-p2", "p1-p3", "p2-p3"), triple):
            rows.append((m, pair, r, abs(r - 2.0 / 3.0)))
    write_csv(
        os.path.join(outdir, "compatibility.csv"),
        ["m", "pair", "resistance", "deviation"], rows, h,
    )
    payload = {
        "sequence": cfg.sequence.describe(),
        "compatibility": {
            "max_deviation": compat.max_deviation,
            "tolerance": compat.tolerance,
            "ok": compat.ok,
        },
    }
    if cfg.level >= 1:
        scaling = res_mod.cell_diameter_scaling(
            cfg.sequence, cfg.level, cfg.level - 1, beta=cfg.beta
        )
        write_csv(
            os.path.join(outdir, "diameters.csv"),
            ["j", "word", "diameter"],
            [(j, w or "-", d) for (j, w, d) in scaling.records], h,
        )
        if cfg.level >= 2:  # a one-level record has no slope to fit
            payload["diameter_fit"] = {
                "slope": scaling.slope,
                "slope_raw": scaling.slope_raw,
                "dimension_estimate": scaling.dimension_estimate,
                "predicted_dimension": scaling.predicted_dimension,
            }
    payload["verdict"] = "pass" if compat.ok else "fail"
    write_json(os.path.join(outdir, "resistance_report.json"), payload, h)
    _say(quiet, f"compatibility max deviation: {compat.max_deviation:.3e}")
    _say(quiet, f"verdict: {payload['verdict']}")
    return EXIT_OK if compat.ok else EXIT_VIOLATION


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hanoispec",
        description="Spectral and resistance experiments on Hanoi attractor graphs",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        cp = sub.add_parser(name, help=fn.__doc__)
        cp.add_argument("--config", required=True, help="path to the JSON run config")
        cp.add_argument("--out", default=None, help="override the output directory")
        cp.add_argument("--quiet", action="store_true", help="suppress progress output")
    return parser


COMMANDS = {
    "validate": cmd_validate,
    "spectrum": cmd_spectrum,
    "counting": cmd_counting,
    "resistance": cmd_resistance,
}


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.out is not None:
            cfg = RunConfig(
                sequence=cfg.sequence, level=cfg.level, subdivisions=cfg.subdivisions,
                beta=cfg.beta, alpha=cfg.alpha, solver=cfg.solver, grid=cfg.grid,
                fit=cfg.fit,
                outputs=OutputConfig(
                    directory=args.out, formats=cfg.outputs.formats, seed=cfg.outputs.seed
                ),
                bracketing_level=cfg.bracketing_level,
            )
        return COMMANDS[args.command](cfg, quiet=args.quiet)
    except (ConfigError, PencilSizeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HanoiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
