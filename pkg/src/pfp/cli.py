"""Command-line front end: ``pfp <command> <config> [options]``.

The config is one JSON object with the blocks ``equation``, ``N``, ``T``,
optionally ``B``, and optionally ``run``::

    {
      "equation": {"kind": "homogeneous", "mu": 1.0},
      "N": {"family": "geometric1", "p": 0.5},
      "T": {"atoms": [[0.5, 1.0]]},
      "run": {"tol": 1e-8, "samples": 100000, "depth": 40, "seed": 0}
    }

Count families and their parameters: ``degenerate`` (``k``), ``explicit``
(``pmf`` as ``[[k, mass], ...]``), ``geometric1`` and ``geometric0`` (``p``),
``poisson`` (``lam``).  Command-line options override the ``run`` block.

Exit status: 0 on success, 2 when the equation's conditions fail, 1 on error
(including a ``report`` whose three variance estimates disagree).
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from .conditions import EQ_TOL, Kind, ProblemSpec, check_conditions
from .errors import InvalidLaw, MissingField, ParseError, PfpError, SpecInvalid, UnknownEquationKind
from .measures import CountLaw, DiscreteMeasure, mk_discrete
from .simulate import DEFAULT_PRUNE_WEIGHT, mc_estimate
from .solver import DEFAULT_TOL, SolveOptions, closed_form_moments, solve
from .transforms import default_grid, dump_csv, lst_eval, stable_map

COMMANDS = ("check", "solve", "simulate", "stable-map", "report")
BACKENDS = ("auto", "grid", "discrete")
EXIT_OK, EXIT_ERROR, EXIT_UNSATISFIED = 0, 1, 2

# Agreement thresholds used by ``report``.
SOLVER_VAR_TOL = 1e-4
MC_VAR_REL = 0.05
MC_SE_MULT = 4.0


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemSpec
    command: str = "check"
    tol: float = DEFAULT_TOL
    max_iter: Optional[int] = None
    backend: str = "auto"
    samples: int = 100_000
    depth: int = 40
    alpha: Optional[float] = None
    seed: int = 0
    output_path: Optional[str] = None
    tol_eq: float = EQ_TOL

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ParseError(f"unknown command {self.command!r}; expected one of {', '.join(COMMANDS)}")
        if self.backend not in BACKENDS:
            raise ParseError(f"unknown backend {self.backend!r}")
        if self.command == "stable-map" and self.alpha is None:
            raise MissingField("alpha")
        if self.samples < 2 or self.depth < 0:
            raise ParseError("samples must be >= 2 and depth >= 0")


# ---------------------------------------------------------------------------
# parsing


def _line_of(text: str, key: str) -> Optional[int]:
    m = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _block(doc: dict, name: str, text: str) -> dict:
    if name not in doc:
        raise MissingField(name)
    block = doc[name]
    if not isinstance(block, dict):
        raise ParseError(f"block {name!r} must be an object (line {_line_of(text, name)})")
    return block


def _field(block: dict, key: str, text: str, where: str):
    if key not in block:
        raise MissingField(f"{where}.{key}", _line_of(text, where))
    return block[key]


def _measure(block: dict, name: str, text: str) -> DiscreteMeasure:
    atoms = _field(block, "atoms", text, name)
    try:
        pairs = [(float(x), float(w)) for x, w in atoms]
        return mk_discrete(pairs)
    except (TypeError, ValueError) as exc:
        raise InvalidLaw(f"{name}.atoms (line {_line_of(text, name)}): {exc}") from None


def _count_law(block: dict, text: str) -> CountLaw:
    family = _field(block, "family", text, "N")
    try:
        if family == "degenerate":
            return CountLaw.degenerate(_field(block, "k", text, "N"))
        if family == "explicit":
            return CountLaw.explicit([(k, w) for k, w in _field(block, "pmf", text, "N")])
        if family in ("geometric1", "geometric0"):
            return CountLaw(family, p=float(_field(block, "p", text, "N")))
        if family == "poisson":
            return CountLaw.poisson(float(_field(block, "lam", text, "N")))
    except MissingField:
        raise
    except (TypeError, ValueError) as exc:
        raise InvalidLaw(f"N (line {_line_of(text, 'N')}): {exc}") from None
    raise InvalidLaw(f"N.family {family!r} is not a known count family (line {_line_of(text, 'family')})")


def parse_config(text: str) -> RunConfig:
    """Validate a JSON config and build a :class:`RunConfig`."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError("config must be a JSON object")
    eq = _block(doc, "equation", text)
    kind = _field(eq, "kind", text, "equation")
    try:
        kind = Kind(kind)
    except ValueError:
        raise UnknownEquationKind(f"unknown equation kind {kind!r} (line {_line_of(text, 'kind')})") from None
    n = _count_law(_block(doc, "N", text), text)
    t = _measure(_block(doc, "T", text), "T", text)
    b = None
    if kind.nonhomogeneous:
        b = _measure(_block(doc, "B", text), "B", text)
    elif "B" in doc:
        raise ParseError(f"block 'B' is only allowed for nonhomogeneous kinds (line {_line_of(text, 'B')})")
    if kind.nonhomogeneous:
        mu = eq.get("mu")
    else:
        mu = _field(eq, "mu", text, "equation")
    m = 0
    if kind is Kind.FLOORED:
        m = _field(eq, "m", text, "equation")
    elif "m" in eq:
        raise ParseError(f"equation.m is only allowed for the floored kind (line {_line_of(text, 'm')})")
    try:
        problem = ProblemSpec(kind, n, t, None if mu is None else float(mu), b, m)
    except SpecInvalid as exc:
        raise ParseError(f"equation: {exc}") from None

    run = doc.get("run", {}) or {}
    if not isinstance(run, dict):
        raise ParseError("block 'run' must be an object")
    known = {f.name for f in fields(RunConfig)} - {"problem"}
    extra = set(run) - known - {"output"}
    if extra:
        key = sorted(extra)[0]
        raise ParseError(f"unknown run option {key!r} (line {_line_of(text, key)})")
    opts = {k: v for k, v in run.items() if k in known}
    if "output" in run:
        opts["output_path"] = run["output"]
    return RunConfig(problem=problem, **opts)


def _measure_dict(m: DiscreteMeasure) -> dict:
    return {"atoms": [[x, w] for x, w in m.atoms]}


def serialize(cfg: RunConfig) -> str:
    """JSON text that :func:`parse_config` maps back to ``cfg``."""
    p = cfg.problem
    eq: dict[str, Any] = {"kind": p.kind.value}
    if p.mu is not None:
        eq["mu"] = p.mu
    if p.kind is Kind.FLOORED:
        eq["m"] = p.m
    doc: dict[str, Any] = {"equation": eq, "N": p.n.to_dict(), "T": _measure_dict(p.t)}
    if p.b is not None:
        doc["B"] = _measure_dict(p.b)
    run = {f.name: getattr(cfg, f.name) for f in fields(RunConfig) if f.name != "problem"}
    doc["run"] = run
    return json.dumps(doc, indent=2)


# ---------------------------------------------------------------------------
# running


def _clean(obj):
    """Make a report JSON-safe (no NaN/inf, no numpy scalars)."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _solve(cfg: RunConfig):
    opts = SolveOptions(tol=cfg.tol, max_iter=cfg.max_iter, backend=cfg.backend, tol_eq=cfg.tol_eq)
    return solve(cfg.problem, opts)


def _comparison(cf, res, mc) -> dict:
    solver_ok = abs(res.extracted_variance - cf.variance) <= SOLVER_VAR_TOL * (1 + cf.variance) + res.moment_drift
    mc_var_ok = abs(mc.var_hat - cf.variance) <= max(MC_VAR_REL * cf.variance, MC_SE_MULT * mc.se_var) + 1e-12
    mc_mean_ok = abs(mc.mean_hat - cf.mu1) <= MC_SE_MULT * mc.se_mean + 1e-12 * cf.mu1
    return {
        "mean": {"closed_form": cf.mu1, "solver": res.extracted_mean, "monte_carlo": mc.mean_hat,
                 "monte_carlo_se": mc.se_mean},
        "variance": {"closed_form": cf.variance, "solver": res.extracted_variance, "monte_carlo": mc.var_hat,
                     "monte_carlo_se": mc.se_var},
        "agree": {"solver": bool(solver_ok), "monte_carlo_variance": bool(mc_var_ok),
                  "monte_carlo_mean": bool(mc_mean_ok)},
        "discrepancy": not (solver_ok and mc_var_ok and mc_mean_ok),
    }


def run(cfg: RunConfig) -> tuple[int, dict, Optional[str]]:
    """Execute ``cfg``; returns ``(exit code, report, curve csv or None)``."""
    timings: dict[str, float] = {}
    report: dict[str, Any] = {}
    csv = None

    def timed(name, fn):
        t0 = time.perf_counter()
        out = fn()
        timings[name] = time.perf_counter() - t0
        return out

    cond = timed("check", lambda: check_conditions(cfg.problem, cfg.tol_eq))
    report["conditions"] = cond.to_dict()
    code = EXIT_OK
    if not cond.satisfied:
        code = EXIT_UNSATISFIED
    elif cfg.command != "check":
        p = cfg.problem
        if cfg.command in ("solve", "stable-map", "report"):
            cf = closed_form_moments(p, cfg.tol_eq)
            report["closed_form"] = cf.to_dict()
            res = timed("solve", lambda: _solve(cfg))
            report["solve"] = res.summary()
            s = default_grid()
            if cfg.command == "stable-map":
                csv = dump_csv(s, stable_map(res.solution, cfg.alpha, s))
                report["stable_map"] = {"alpha": cfg.alpha, "points": int(s.size)}
            else:
                csv = dump_csv(s, lst_eval(res.solution, s))
        if cfg.command in ("simulate", "report"):
            mc = timed("simulate", lambda: mc_estimate(p, cfg.samples, cfg.depth, cfg.seed))
            report["mc"] = mc.to_dict()
        if cfg.command == "report":
            report["comparison"] = _comparison(cf, res, mc)
            if report["comparison"]["discrepancy"]:
                code = EXIT_ERROR
    report["meta"] = {"version": __version__, "command": cfg.command, "seed": cfg.seed,
                      "timings": timings, "prune_weight": DEFAULT_PRUNE_WEIGHT}
    return code, _clean(report), csv


def _error_report(exc: Exception) -> dict:
    code = getattr(exc, "code", "INTERNAL_ERROR")
    return {"error": {"code": code, "type": type(exc).__name__, "message": str(exc)}}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="pfp",
        description="Check, solve and simulate fixed-point equations X = sum T_i X_i and variants.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("config", type=Path, help="JSON problem file")
    ap.add_argument("--tol", type=float, default=None, help=f"solver stopping tolerance (default {DEFAULT_TOL})")
    ap.add_argument("--max-iter", type=int, default=None, help="iteration cap (default from the contraction bound)")
    ap.add_argument("--samples", type=int, default=None, help="Monte Carlo sample count (default 100000)")
    ap.add_argument("--depth", type=int, default=None, help="Monte Carlo tree depth (default 40)")
    ap.add_argument("--alpha", type=float, default=None, help="stable index in (0,1) for stable-map")
    ap.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    ap.add_argument("--backend", choices=BACKENDS, default=None, help="solver backend (default auto)")
    ap.add_argument("--tol-eq", type=float, default=None, help=f"tolerance on equality conditions (default {EQ_TOL})")
    ap.add_argument("--output", type=Path, default=None,
                    help="write the JSON report here and any curve to the same path with suffix .csv")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config.read_text(encoding="utf-8"))
        overrides = {
            "command": args.command,
            "tol": args.tol,
            "max_iter": args.max_iter,
            "samples": args.samples,
            "depth": args.depth,
            "alpha": args.alpha,
            "seed": args.seed,
            "backend": args.backend,
            "tol_eq": args.tol_eq,
            "output_path": None if args.output is None else str(args.output),
        }
        cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
        code, report, csv = run(cfg)
    except (PfpError, OSError) as exc:
        print(json.dumps(_error_report(exc), indent=2))
        print(f"pfp: {exc}", file=sys.stderr)
        return EXIT_ERROR

    text = json.dumps(report, indent=2, sort_keys=True)
    if cfg.output_path:
        out = Path(cfg.output_path)
        out.write_text(text + "\n", encoding="utf-8")
        if csv is not None:
            out.with_suffix(".csv").write_text(csv, encoding="utf-8")
    elif cfg.command == "stable-map" and csv is not None:
        sys.stdout.write(csv)
    else:
        print(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
