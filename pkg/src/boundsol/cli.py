"""Command-line front end.

Every command writes JSON (and where useful CSV) artifacts into the output
directory; each artifact embeds the resolved run configuration. Exit codes:
0 on success, 1 for usage or configuration errors, 2 when a solve or study
fails to converge.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bvp1d import SolverError, continuation_solve, validate_bounds
from .driver import (MaxDomainReached, StudyConfigError, blowup_demo, expand_until_converged,
                     mms_convergence, residual_order, uniqueness_probe)
from .grid import NonConformingSpacing, WindowNotNested, gridfn_to_csv, make_grid
from .problemfile import ProblemFileError, load_problem_file
from .problems import (CoupledSystemProblem, HamiltonianProblem, PdeProblem, ProblemError,
                       ScalarProblem, lower_bound_check, pde_mms_gaussian, preset, psd_check,
                       scalar_mms_gaussian)

log = logging.getLogger("boundsol")

OUTPUT_ENV = "BOUNDSOL_OUTPUT_DIR"
DEFAULT_OUTPUT = "boundsol-out"

EXIT_OK, EXIT_USAGE, EXIT_NO_CONVERGENCE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    problem: str | None = None
    problem_source: str | None = None  # "preset" or "file"
    L: float | None = None
    L0: float | None = None
    Lmax: float | None = None
    Ls: list[float] | None = None
    h: float | None = None
    W: float | None = None
    solver: str | None = None
    tol: float | None = None
    output_dir: str = DEFAULT_OUTPUT
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def validate(self) -> None:
        for k in ("L", "L0", "Lmax", "h", "W", "tol"):
            v = getattr(self, k)
            if v is not None and not (v > 0):
                raise UsageError(f"--{k} must be positive (got {v})")
        if self.Ls is not None and any(not (x > 0) for x in self.Ls):
            raise UsageError("--Ls entries must be positive")
        if self.seed < 0:
            raise UsageError("--seed must be non-negative")
        if self.L0 is not None and self.h is not None:
            r = 2 * self.L0 / self.h
            if abs(r - round(r)) > 1e-9 * max(1.0, r):
                raise UsageError(f"2*L0/h = {r:g} must be an integer")
        if self.W is not None and self.L0 is not None and self.W > self.L0:
            raise UsageError(f"window W={self.W:g} exceeds L0={self.L0:g}")
        if self.W is not None and self.L is not None and self.W > self.L:
            raise UsageError(f"window W={self.W:g} exceeds L={self.L:g}")

    def to_dict(self) -> dict:
        return asdict(self)


# ------------------------------------------------------------------ output

def _json_default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "to_dict"):
        return o.to_dict()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _clean(o):
    """Non-finite floats become strings so the JSON stays standard."""
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    return o


class Artifacts:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.dir = Path(cfg.output_dir)
        self.written: list[Path] = []

    def _path(self, name: str) -> Path:
        self.dir.mkdir(parents=True, exist_ok=True)
        return self.dir / name

    def json(self, name: str, payload: dict) -> Path:
        doc = {"config": self.cfg.to_dict(), **payload}
        text = json.dumps(_clean(json.loads(json.dumps(doc, default=_json_default))),
                          indent=2, sort_keys=True)
        p = self._path(name)
        p.write_text(text + "\n")
        self.written.append(p)
        return p

    def csv(self, name: str, text: str) -> Path:
        cfg = json.dumps(_clean(self.cfg.to_dict()), sort_keys=True)
        p = self._path(name)
        p.write_text(f"# config: {cfg}\n{text}")
        self.written.append(p)
        return p


# ---------------------------------------------------------------- problems

def _load_problem(args):
    if getattr(args, "problem", None):
        return load_problem_file(args.problem), str(args.problem), "file"
    name = getattr(args, "preset", None)
    if not name:
        raise UsageError("give --preset NAME or --problem FILE")
    return preset(name), name, "preset"


def _csv_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


# ---------------------------------------------------------------- commands

def cmd_solve(args, cfg: RunConfig, out: Artifacts) -> int:
    p = args.problem_obj
    if isinstance(p, PdeProblem):
        from .pde2d import interior_bounds, make_grid2d, solve2d
        rep = solve2d(p, make_grid2d(cfg.L, cfg.h), cfg.solver, cfg.tol)
        ib = interior_bounds(rep.solution) if cfg.L > 2 else None
        out.json("solve.json", {"report": rep.to_dict(), "interior_bounds": ib and asdict(ib)})
        out.csv("solution.csv", rep.solution.to_csv())
        return EXIT_OK
    grid = make_grid(cfg.L, cfg.h)
    if cfg.solver == "variational":
        from .variational import minimize
        u, erep = minimize(p, grid, tol=cfg.tol)
        payload = {"energy": json.loads(erep.to_json()), "bounds": asdict(validate_bounds(p, u))}
    else:
        rep = continuation_solve(p, grid, tol=cfg.tol)
        u = rep.solution
        payload = {"report": rep.to_dict()}
    out.json("solve.json", payload)
    out.csv("solution.csv", gridfn_to_csv(u))
    return EXIT_OK


def cmd_study(args, cfg: RunConfig, out: Artifacts) -> int:
    p = args.problem_obj
    try:
        if isinstance(p, PdeProblem):
            from .pde2d import expand2d
            study = expand2d(p, cfg.W, cfg.tol, cfg.L0, cfg.Lmax, cfg.h,
                             cfg.solver)
        else:
            study = expand_until_converged(p, cfg.W, cfg.tol, cfg.L0, cfg.Lmax,
                                           cfg.solver, cfg.h)
    except MaxDomainReached as exc:
        out.json("study.json", {"study": exc.study.to_dict(), "error": _error_record(exc)})
        raise
    out.json("study.json", {"study": study.to_dict()})
    out.csv("window.csv", study.window_csv())
    return EXIT_OK


def cmd_validate(args, cfg: RunConfig, out: Artifacts) -> int:
    from .checks import fd_check_all
    p = args.problem_obj
    payload: dict = {"sampled": True}
    payload["fd_checks"] = [dict(asdict(r), passed=r.passed)
                            for r in fd_check_all(p, seed=cfg.seed)]
    if isinstance(p, CoupledSystemProblem):
        payload["psd"] = asdict(psd_check(p, seed=cfg.seed))
    if isinstance(p, HamiltonianProblem) and p.f0 is not None:
        payload["energy_lower_bound_min"] = lower_bound_check(p)
    if isinstance(p, ScalarProblem):
        payload["coefficients"] = {"a0": p.a0, "a1": p.a1, "M": p.M, "f_bounded": p.f_bounded}
        if p.exact:
            payload["exact_residual_order"] = asdict(residual_order(p, h=cfg.h))
        if p.f_bounded:
            payload["uniqueness_max_diff"] = uniqueness_probe(
                p, cfg.W, cfg.L, 4, cfg.h, seed=cfg.seed)
    if not isinstance(p, PdeProblem):
        rep = continuation_solve(p, make_grid(cfg.L, cfg.h), tol=cfg.tol)
        payload["bounds"] = asdict(rep.bounds)
    out.json("validate.json", payload)
    return EXIT_OK


def cmd_demo_blowup(args, cfg: RunConfig, out: Artifacts) -> int:
    rep = blowup_demo(cfg.Ls, cfg.h, cfg.W)
    order = residual_order(preset("counterexample_91"), 10.0, cfg.h)
    out.json("blowup.json", {"blowup": rep.to_dict(), "exact_residual_order": asdict(order)})
    out.csv("blowup.csv", rep.table_csv())
    for r in rep.rows:
        print(f"L={r['L']:g}  sup|u|={r['sup_u']:.6g}")
    if not rep.passed:
        log.error("sup|u| at L=%g does not exceed %.4g", rep.rows[-1]["L"], rep.fixed_bound)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def cmd_mms(args, cfg: RunConfig, out: Artifacts) -> int:
    p = pde_mms_gaussian() if args.dim == 2 else scalar_mms_gaussian()
    hs = [cfg.h / 2 ** k for k in range(args.levels)]
    rep = mms_convergence(p, cfg.L, cfg.W, hs)
    out.json("mms.json", {"mms": rep.to_dict()})
    for h, e in zip(rep.hs, rep.errors):
        print(f"h={h:g}  window error={e:.3e}")
    return EXIT_OK


def cmd_psd_check(args, cfg: RunConfig, out: Artifacts) -> int:
    p = args.problem_obj
    if not isinstance(p, CoupledSystemProblem):
        raise UsageError("psd-check needs a coupled system problem")
    rep = psd_check(p, count=args.count, seed=cfg.seed)
    out.json("psd.json", {"psd": asdict(rep)})
    print(f"min eigenvalue {rep.min_eigenvalue:.6g}: {'pass' if rep.passed else 'fail'}")
    return EXIT_OK


def cmd_energy_monotone(args, cfg: RunConfig, out: Artifacts) -> int:
    p = args.problem_obj
    if isinstance(p, PdeProblem):
        from .pde2d import min_energy_sequence2d
        rows = min_energy_sequence2d(p, cfg.Ls, cfg.h)
        values = [e for _, e in rows]
        payload = {"M_L": [{"L": L, "M_L": e} for L, e in rows]}
    else:
        from .variational import h1_bound_constant, min_energy_sequence, ml_table_csv
        recs = min_energy_sequence(p, cfg.Ls, cfg.h)
        values = [r.M_L for r in recs]
        payload = {"M_L": [asdict(r) for r in recs]}
        if getattr(p, "f0", None) is not None:
            payload["h1_bound_constant"] = h1_bound_constant(p, recs, make_grid(cfg.Ls[-1], cfg.h))
        out.csv("ml_table.csv", ml_table_csv(recs))
    payload["monotone"] = all(b <= a + 1e-8 for a, b in zip(values, values[1:]))
    out.json("energy_monotone.json", payload)
    return EXIT_OK


# ------------------------------------------------------------------ parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _problem_args(sp, default_preset=None):
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--preset", default=default_preset, help="named problem")
    g.add_argument("--problem", type=Path, help="problem file (key = value)")


def _common(sp):
    sp.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
    sp.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="boundsol", description="Bounded solutions on the line and the plane "
                 "via Dirichlet truncation.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    sp = sub.add_parser("solve", help="one Dirichlet solve on [-L, L] (or [-L, L]^2)")
    _problem_args(sp)
    sp.add_argument("--L", type=float, default=8.0)
    sp.add_argument("--h", type=float, default=0.01)
    sp.add_argument("--solver", choices=["continuation", "variational", "newton", "minimize"])
    sp.add_argument("--tol", type=float, default=1e-9)
    _common(sp)

    sp = sub.add_parser("study", help="domain-doubling convergence study on a window")
    _problem_args(sp)
    sp.add_argument("--W", type=float, default=2.0)
    sp.add_argument("--L0", type=float, default=4.0)
    sp.add_argument("--Lmax", type=float, default=32.0)
    sp.add_argument("--h", type=float, default=0.01)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--solver", choices=["continuation", "variational", "newton", "minimize"])
    _common(sp)

    sp = sub.add_parser("validate", help="sampled hypothesis checks, FD checks and bounds")
    _problem_args(sp)
    sp.add_argument("--L", type=float, default=8.0)
    sp.add_argument("--W", type=float, default=2.0)
    sp.add_argument("--h", type=float, default=0.01)
    sp.add_argument("--tol", type=float, default=1e-9)
    _common(sp)

    sp = sub.add_parser("demo-blowup", help="growth of Dirichlet solutions for unbounded forcing")
    sp.add_argument("--Ls", type=_csv_floats, default=[4.0, 8.0, 16.0])
    sp.add_argument("--h", type=float, default=0.01)
    sp.add_argument("--W", type=float, help="residual window half-width (default: smallest L)")
    _common(sp)

    sp = sub.add_parser("mms", help="manufactured Gaussian solution, error under h-halving")
    sp.add_argument("--dim", type=int, choices=[1, 2], default=1)
    sp.add_argument("--h", type=float, help="coarsest spacing (default 0.01 in 1-D, 0.05 in 2-D)")
    sp.add_argument("--levels", type=int, default=2)
    sp.add_argument("--L", type=float, help="half-length (default 8 in 1-D, 4 in 2-D)")
    sp.add_argument("--W", type=float, help="window (default 2 in 1-D, 1.5 in 2-D)")
    _common(sp)

    sp = sub.add_parser("psd-check", help="sampled positive semi-definiteness of a coupled system")
    _problem_args(sp, default_preset="example1")
    sp.add_argument("--count", type=int, default=10_000)
    _common(sp)

    sp = sub.add_parser("energy-monotone", help="minimum energies on nested domains")
    _problem_args(sp, default_preset="example2")
    sp.add_argument("--Ls", type=_csv_floats, default=[2.0, 4.0, 8.0])
    sp.add_argument("--h", type=float, default=0.01)
    _common(sp)
    return ap


_COMMANDS = {
    "solve": cmd_solve, "study": cmd_study, "validate": cmd_validate,
    "demo-blowup": cmd_demo_blowup, "mms": cmd_mms, "psd-check": cmd_psd_check,
    "energy-monotone": cmd_energy_monotone,
}


def _config(args) -> RunConfig:
    out = args.out or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT
    cfg = RunConfig(args.command, output_dir=out, seed=args.seed)
    for k in ("L", "L0", "Lmax", "Ls", "h", "W", "solver", "tol"):
        if hasattr(args, k):
            setattr(cfg, k, getattr(args, k))
    if args.command == "mms":
        d2 = args.dim == 2
        cfg.h = cfg.h or (0.05 if d2 else 0.01)
        cfg.L = cfg.L or (4.0 if d2 else 8.0)
        cfg.W = cfg.W or (1.5 if d2 else 2.0)
        if args.levels < 1:
            raise UsageError("--levels must be at least 1")
        cfg.extra = {"dim": args.dim, "levels": args.levels}
    if args.command == "psd-check":
        if args.count < 1:
            raise UsageError("--count must be positive")
        cfg.extra = {"count": args.count}
    if args.command == "demo-blowup" and cfg.W is None:
        cfg.W = min(cfg.Ls) if cfg.Ls else None
    if cfg.Ls is not None and not cfg.Ls:
        raise UsageError("--Ls is empty")
    return cfg


def _resolve_solver(p, solver: str | None) -> str:
    if isinstance(p, PdeProblem):
        allowed = ("newton", "minimize")
    elif isinstance(p, HamiltonianProblem) or isinstance(p, ScalarProblem):
        allowed = ("continuation", "variational")
    else:
        allowed = ("continuation",)
    if solver is None:
        return allowed[0]
    if solver not in allowed:
        raise UsageError(f"--solver {solver} does not apply to {type(p).__name__}; "
                         f"choose from {', '.join(allowed)}")
    return solver


def _error_record(exc: BaseException) -> dict:
    return {"type": type(exc).__name__, "message": str(exc)}


def run(argv=None) -> int:
    """Parse ``argv``, run the command and return the exit code."""
    parser = build_parser()
    cfg = None
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s")
        if not args.command:
            parser.print_help()
            return EXIT_USAGE
        cfg = _config(args)
        cfg.validate()
        if hasattr(args, "preset"):
            args.problem_obj, cfg.problem, cfg.problem_source = _load_problem(args)
            if args.command in ("solve", "study"):
                cfg.solver = _resolve_solver(args.problem_obj, cfg.solver)
        code = _COMMANDS[args.command](args, cfg, Artifacts(cfg))
        if code == EXIT_OK:
            print(f"wrote {cfg.output_dir}", file=sys.stderr)
        return code
    except (MaxDomainReached, SolverError) as exc:
        return _fail(cfg, exc, EXIT_NO_CONVERGENCE)
    except (UsageError, StudyConfigError, ProblemFileError, ProblemError, NonConformingSpacing,
            WindowNotNested, FileNotFoundError, ValueError, TypeError) as exc:
        return _fail(cfg, exc, EXIT_USAGE)


def _fail(cfg: RunConfig | None, exc: BaseException, code: int) -> int:
    print(f"error: {exc}", file=sys.stderr)
    if cfg is not None:
        try:
            Artifacts(cfg).json("error.json", {"error": _error_record(exc), "exit_code": code})
        except OSError as err:
            print(f"error: could not write error record: {err}", file=sys.stderr)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
