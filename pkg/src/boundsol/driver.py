"""Whole-line limits from Dirichlet truncations.

Solutions on ``[-L, L]`` for ``L = L0, 2 L0, 4 L0, ...`` (fixed ``h``) are
compared on a fixed window ``[-W, W]`` at shared nodes. A study converges
when the last window difference is below the tolerance and the sequence
of differences has been strictly decreasing.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .bvp1d import BoundsReport, continuation_solve, residual, solve_linear_poisson, system_of
from .expr import evaluate
from .grid import (GridFn, gridfn_to_csv, make_grid,
                   restrict_to_window, sup_norm, zero_extend)
from .problems import ScalarProblem, preset, predicted_bounds

log = logging.getLogger(__name__)

__all__ = [
    "ConvergenceStudy", "MaxDomainReached", "StudyConfigError",
    "expand_until_converged", "uniqueness_probe", "blowup_demo", "BlowupReport",
    "exact_residual", "ResidualOrder", "residual_order", "doubling_schedule",
    "MMSReport", "mms_convergence",
]


class StudyConfigError(ValueError):
    pass


class MaxDomainReached(RuntimeError):
    """Raised when ``Lmax`` is reached without convergence; ``study`` holds the partial data."""

    def __init__(self, msg: str, study: "ConvergenceStudy"):
        super().__init__(msg)
        self.study = study


@dataclass
class ConvergenceStudy:
    window_W: float
    Ls: list[float]
    diffs: list[float]
    final_solution: GridFn | None
    bounds_reports: list[BoundsReport | None]
    converged: bool
    solver: str = "continuation"
    h: float = float("nan")
    tol: float = float("nan")
    notes: list[str] = field(default_factory=list)

    @property
    def decay_rates(self) -> list[float]:
        """Ratios ``d_{j+1} / d_j``; reported, never asserted."""
        return [b / a if a > 0 else float("nan") for a, b in zip(self.diffs, self.diffs[1:])]

    def to_dict(self) -> dict:
        sol = self.final_solution
        return {
            "window_W": self.window_W,
            "Ls": self.Ls,
            "diffs": self.diffs,
            "decay_rates": self.decay_rates,
            "converged": self.converged,
            "solver": self.solver,
            "h": self.h,
            "tol": self.tol,
            "bounds_reports": [None if b is None else asdict(b) for b in self.bounds_reports],
            "final_window": None if sol is None else {
                "n_interior": sol.values.shape[-1],
                "sup": sup_norm(sol),
                "values": sol.values.tolist(),
            },
            "notes": self.notes,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), indent=2, default=_json_default, **kw)

    def window_csv(self) -> str:
        if self.final_solution is None:
            raise ValueError("study has no solution")
        if hasattr(self.final_solution, "to_csv"):
            return self.final_solution.to_csv()
        return gridfn_to_csv(self.final_solution)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def doubling_schedule(L0: float, Lmax: float) -> list[float]:
    """``[L0, 2 L0, ..., Lmax]``; ``Lmax`` must be ``L0 * 2^k``."""
    if L0 <= 0 or Lmax < L0:
        raise StudyConfigError(f"need 0 < L0 <= Lmax (L0={L0}, Lmax={Lmax})")
    k = math.log2(Lmax / L0)
    if abs(k - round(k)) > 1e-9:
        raise StudyConfigError(f"Lmax={Lmax} is not L0={L0} times a power of two")
    return [L0 * 2 ** j for j in range(int(round(k)) + 1)]


def _check_study(W: float, L0: float, Lmax: float, h: float) -> list[float]:
    if not (W > 0 and h > 0):
        raise StudyConfigError("W and h must be positive")
    if L0 < max(W, 1.0):
        raise StudyConfigError(f"L0={L0} must be at least max(W, 1) = {max(W, 1.0)}")
    Ls = doubling_schedule(L0, Lmax)
    # L0/h integral keeps every grid's half-length on the same node lattice
    r = L0 / h
    if abs(r - round(r)) > 1e-9 * max(1.0, r):
        raise StudyConfigError(f"L0/h = {r!r} must be an integer for nested grids")
    r = W / h
    if abs(r - round(r)) > 1e-9 * max(1.0, r):
        raise StudyConfigError(f"W/h = {r!r} must be an integer so the window lies on nodes")
    return Ls


def _window_diff(a: GridFn, b: GridFn) -> float:
    if a.values.shape != b.values.shape:
        raise ValueError("window solutions live on different node sets")
    return float(np.max(np.abs(a.values - b.values))) if a.values.size else 0.0


def _is_converged(diffs: Sequence[float], tol: float) -> bool:
    if math.isinf(tol):
        return True
    if not diffs or diffs[-1] > tol:
        return False
    return all(b < a for a, b in zip(diffs, diffs[1:]))


def expand_until_converged(p, W: float, tol: float, L0: float, Lmax: float,
                           solver: str = "continuation", h: float = 0.01,
                           newton_tol: float = 1e-9) -> ConvergenceStudy:
    """Solve on doubling domains until the window solutions settle.

    Parameters
    ----------
    p : problem
        Any 1-D problem; ``solver="variational"`` needs a potential.
    W : float
        Half-width of the comparison window.
    tol : float
        Threshold on the window sup-difference of consecutive solutions.
        ``inf`` accepts the first solve.
    L0, Lmax : float
        First and last half-length; ``Lmax = L0 * 2^k``.
    solver : {"continuation", "variational"}
    h : float
        Grid spacing shared by all levels.

    Raises
    ------
    MaxDomainReached
        ``Lmax`` solved without convergence; the partial study is attached.
    """
    if solver not in ("continuation", "variational"):
        raise StudyConfigError(f"unknown solver {solver!r}")
    Ls = _check_study(W, L0, Lmax, h)
    from .bvp1d import validate_bounds
    from .variational import minimize

    study = ConvergenceStudy(W, [], [], None, [], False, solver, h, tol)
    prev_full = None
    for L in Ls:
        grid = make_grid(L, h)
        if solver == "continuation":
            u = continuation_solve(p, grid, tol=newton_tol, bounds=False).solution
        else:
            u0 = None if prev_full is None else zero_extend(prev_full, grid)
            u, _ = minimize(p, grid, u0, tol=min(newton_tol, 1e-10))
        try:
            report = validate_bounds(p, u)
        except TypeError:
            report = None
        window = restrict_to_window(u, W)
        study.Ls.append(float(L))
        study.bounds_reports.append(report)
        if study.final_solution is not None:
            study.diffs.append(_window_diff(window, study.final_solution))
            log.info("L=%g window diff %.3e", L, study.diffs[-1])
        study.final_solution = window
        prev_full = u
        if _is_converged(study.diffs, tol):
            study.converged = True
            return study
    raise MaxDomainReached(
        f"no convergence up to L={Ls[-1]} (diffs {['%.2e' % d for d in study.diffs]})", study)


def uniqueness_probe(p, W: float, L: float, seeds: int = 4, h: float = 0.01,
                     tol: float = 1e-10, seed: int = 0) -> float:
    """Largest pairwise window sup-difference among solves from distinct starts.

    Starts, in order: the linear (Poisson) solution, zero, the constants
    ``+0.9 K0`` and ``-0.9 K0`` with ``K0`` the a priori sup bound, then
    random values bounded by ``K0``.
    """
    if L < W:
        raise StudyConfigError(f"L={L} must be at least W={W}")
    if seeds < 1:
        raise StudyConfigError("need at least one seed")
    grid = make_grid(L, h)
    sys = system_of(p)
    m = sys.m
    K0 = predicted_bounds(p)[0][:, None] * np.ones((m, grid.n_interior))
    rng = np.random.default_rng(seed)
    starts = [
        solve_linear_poisson(GridFn(grid, sys.forcing_values(grid.interior))),
        GridFn.zeros(grid, m),
        GridFn(grid, 0.9 * K0),
        GridFn(grid, -0.9 * K0),
    ]
    while len(starts) < seeds:
        starts.append(GridFn(grid, rng.uniform(-1.0, 1.0, K0.shape) * K0))
    windows = [restrict_to_window(continuation_solve(p, grid, tol=tol, u0=s, bounds=False)
                                  .solution, W) for s in starts[:seeds]]
    worst = 0.0
    for i in range(len(windows)):
        for j in range(i + 1, len(windows)):
            worst = max(worst, _window_diff(windows[i], windows[j]))
    return worst


# ---------------------------------------------------------------- blow-up

def exact_residual(p: ScalarProblem, L: float, h: float) -> GridFn:
    """Discrete residual of the problem's exact solution sampled on ``[-L, L]``.

    The exact end values are used at the boundary, so the result measures
    only the truncation error of the stencil.
    """
    if not p.exact:
        raise ValueError(f"problem {p.name!r} has no exact solution")
    grid = make_grid(L, h)
    t = grid.nodes
    vals = np.array([np.broadcast_to(evaluate(e, {"t": t}), t.shape) for e in p.exact])
    u = GridFn(grid, vals[:, 1:-1])
    return residual(p, 1.0, u, boundary=(vals[:, 0], vals[:, -1]))


@dataclass(frozen=True)
class ResidualOrder:
    h: float
    sup_h: float
    sup_half: float
    ratio: float
    center_h: float
    center_predicted: float


def residual_order(p: ScalarProblem, L: float = 10.0, h: float = 0.01) -> ResidualOrder:
    """Compare exact-solution residuals at ``h`` and ``h/2``.

    ``center_predicted = -h^2/3`` is the leading term at ``t = 0`` for
    ``t sin t``: its second difference there is ``2 sin(h)/h``, not 2.
    """
    r1 = exact_residual(p, L, h)
    r2 = exact_residual(p, L, h / 2)
    s1, s2 = sup_norm(r1), sup_norm(r2)
    c = r1.grid.n_interior // 2
    return ResidualOrder(h, s1, s2, s1 / s2, float(r1.values[0, c]), -h * h / 3)


@dataclass
class BlowupReport:
    W: float
    h: float
    rows: list[dict]
    M_window: float
    fixed_bound: float
    nondecreasing: bool
    exceeds_bound: bool

    @property
    def passed(self) -> bool:
        return self.exceeds_bound

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), indent=2, default=_json_default, **kw)

    def table_csv(self) -> str:
        lines = ["L,sup_u,exact_residual_window_sup"]
        lines += [f"{r['L']!r},{r['sup_u']!r},{r['exact_residual_window_sup']!r}"
                  for r in self.rows]
        return "\n".join(lines) + "\n"


def blowup_demo(Ls: Sequence[float] = (4, 8, 16), h: float = 0.01, W: float | None = None,
                p: ScalarProblem | None = None) -> BlowupReport:
    """Dirichlet solves for the unbounded-forcing counterexample.

    ``W`` defaults to the smallest ``L``. ``M_window`` is the sampled sup of
    ``|f|`` on ``[-W, W]``; the bound it would give for bounded forcing is
    ``2 (M_window / a0)^(1/3)``, which ``sup |u|`` at the largest ``L`` must
    exceed.
    """
    p = preset("counterexample_91") if p is None else p
    Ls = sorted(float(L) for L in Ls)
    if not Ls:
        raise StudyConfigError("no domain sizes given")
    W = Ls[0] if W is None else float(W)
    rows = []
    for L in Ls:
        grid = make_grid(L, h)
        u = continuation_solve(p, grid, bounds=False).solution
        r = restrict_to_window(exact_residual(p, L, h), min(W, L))
        rows.append({"L": L, "sup_u": sup_norm(u), "exact_residual_window_sup": sup_norm(r)})
    tw = make_grid(W, h).nodes
    M_window = float(np.max(np.abs(np.broadcast_to(evaluate(p.f, {"t": tw}), tw.shape))))
    bound = 2.0 * (M_window / p.a0) ** (1.0 / 3.0)
    sups = [r["sup_u"] for r in rows]
    nondecreasing = all(b >= a for a, b in zip(sups, sups[1:]))
    return BlowupReport(W, h, rows, M_window, bound, nondecreasing, sups[-1] > bound)


# -------------------------------------------------------------------- MMS

@dataclass
class MMSReport:
    problem: str
    L: float
    W: float
    hs: list[float]
    errors: list[float]

    @property
    def ratios(self) -> list[float]:
        return [a / b if b > 0 else float("inf") for a, b in zip(self.errors, self.errors[1:])]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ratios"] = self.ratios
        return d


def mms_convergence(p, L: float, W: float, hs: Sequence[float], tol: float = 1e-10) -> MMSReport:
    """Window sup-error against the stored exact solution for each spacing in ``hs``."""
    from .pde2d import PdeProblem, make_grid2d, solve2d

    if not p.exact:
        raise ValueError(f"problem {p.name!r} has no exact solution")
    errors = []
    for h in hs:
        if isinstance(p, PdeProblem):
            w = solve2d(p, make_grid2d(L, h), "newton", tol).solution.restrict(W)
            X1, X2 = w.grid.mesh()
            env = {"x1": X1, "x2": X2}
        else:
            w = restrict_to_window(continuation_solve(p, make_grid(L, h), tol, bounds=False)
                                   .solution, W)
            env = {"t": w.grid.interior}
        shape = w.values.shape[1:]
        exact = np.array([np.broadcast_to(evaluate(e, env), shape) for e in p.exact])
        errors.append(float(np.max(np.abs(w.values - exact))))
    return MMSReport(p.name, float(L), float(W), [float(h) for h in hs], errors)
