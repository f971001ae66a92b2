"""Discrete energy minimization for problems with a potential.

The discrete energy of ``u`` (interior values, zero at both ends) is::

    J(u) = sum_cells 1/2 ((u[j+1]-u[j])/h)^2 h
           + trapezoid( a(t) (V(u) - V(0)) + sum_i u_i f_i(t) )

Its gradient with respect to the interior node values is exactly ``-h``
times the central-difference residual used by :mod:`boundsol.bvp1d`, so
both solvers target the same discrete solution.

The energy is measured relative to the zero state (``V(0)`` subtracted).
This leaves minimizers untouched and makes the zero extension of a
minimizer on [-L, L] an admissible competitor of equal energy on any
larger nested grid, so minimum values cannot increase with ``L``.
"""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import LinAlgError, solveh_banded

from . import kernels
from .bvp1d import SolverError, system_of
from .expr import evaluate
from .grid import Grid1D, GridFn, h1_seminorm_sq, make_grid, zero_extend
from .problems import eval_on

log = logging.getLogger(__name__)

__all__ = [
    "EnergyReport", "LineSearchStalled", "MaxIterations", "MLRecord",
    "energy", "energy_gradient", "minimize", "min_energy_sequence", "ml_table_csv",
    "zero_state_energy", "h1_bound_constant",
]

ARMIJO_C = 1e-4
NEWTON_SWITCH = 1.0
MAX_HALVINGS = 40
_EPS = np.finfo(float).eps


class LineSearchStalled(SolverError):
    pass


class MaxIterations(SolverError):
    pass


def _potential(p):
    sys = system_of(p)
    if sys.potential is None:
        raise TypeError(f"{type(p).__name__} has no potential; use the continuation solver")
    return sys


def _density(sys, grid: Grid1D, u_full: np.ndarray):
    t = grid.nodes
    env = sys.zenv(u_full)
    V = eval_on(sys.potential, env, t.shape)
    V0 = float(evaluate(sys.potential, {z: 0.0 for z in sys.zvars}))
    a = eval_on(sys.coef[0], {"t": t}, t.shape)
    forcing = sys.forcing_values(t)
    terms = a * (V - V0)
    work = np.sum(u_full * forcing, axis=0)
    return terms + work, np.abs(a * V) + np.abs(a * V0) + np.abs(work)


def _energy_and_scale(sys, grid: Grid1D, u: np.ndarray) -> tuple[float, float]:
    full = np.pad(u, ((0, 0), (1, 1)))
    d = np.diff(full, axis=1)
    kinetic = 0.5 * float(np.sum(d * d)) / grid.h
    dens, scale = _density(sys, grid, full)
    w = np.full(dens.shape, grid.h)
    w[0] = w[-1] = 0.5 * grid.h
    return kinetic + float(np.dot(w, dens)), kinetic + float(np.dot(w, scale))


def energy(p, u: GridFn) -> float:
    """Discrete energy relative to the zero state (see module docstring)."""
    return _energy_and_scale(_potential(p), u.grid, u.values)[0]


def _gradient(sys, grid: Grid1D, u: np.ndarray) -> np.ndarray:
    t = grid.interior
    res = kernels.second_difference(u, grid.h) - sys.forcing_values(t) \
        - sys.coef_values(t) * sys.nonlin_values(u)
    return -grid.h * res


def energy_gradient(p, u: GridFn) -> GridFn:
    """Exact gradient of :func:`energy` with respect to the interior node values."""
    return GridFn(u.grid, _gradient(_potential(p), u.grid, u.values))


def _hessian_banded(sys, grid: Grid1D, u: np.ndarray, shift: float = 0.0) -> np.ndarray:
    """Upper banded storage (bandwidth m) of the energy Hessian, node-major order."""
    m, n = u.shape
    h = grid.h
    c = sys.coef_values(grid.interior)
    dF = sys.dnonlin_values(u)                      # (m, m, n)
    blocks = h * np.transpose(c[:, None, :] * dF, (2, 0, 1))
    blocks = 0.5 * (blocks + np.transpose(blocks, (0, 2, 1)))
    idx = np.arange(m)
    blocks[:, idx, idx] += 2.0 / h + shift
    N = m * n
    ab = np.zeros((m + 1, N))
    for di in range(m):
        for dk in range(di, m):
            r = np.arange(n) * m + di
            col = np.arange(n) * m + dk
            ab[m + r - col, col] = blocks[:, di, dk]
    ab[0, m:] = -1.0 / h
    return ab


def _newton_direction(sys, grid, u, g) -> np.ndarray | None:
    """Solve ``(H + shift I) d = -g``, raising the shift until Cholesky succeeds."""
    m, n = u.shape
    rhs = -g.T.reshape(m * n)
    shift = 0.0
    for _ in range(30):
        try:
            d = solveh_banded(_hessian_banded(sys, grid, u, shift), rhs)
            return d.reshape(n, m).T
        except LinAlgError:
            shift = max(4 * shift, 1e-3 * grid.h)
    return None


@dataclass
class EnergyReport:
    J_value: float
    grad_sup: float
    iterations: int
    h1_seminorm_sq: float
    newton_steps: int = 0
    J_history: list[float] = field(default_factory=list, repr=False)

    def to_json(self, **kw) -> str:
        d = asdict(self)
        d.pop("J_history")
        return json.dumps(d, indent=2, **kw)


def minimize(p, grid: Grid1D, u0: GridFn | None = None, tol: float = 1e-10,
             max_iter: int = 500) -> tuple[GridFn, EnergyReport]:
    """Minimize the discrete energy until the gradient sup-norm is at most ``tol``.

    Steepest descent with Armijo backtracking (c = 1e-4, halving) while the
    gradient sup-norm is at least 1, then Newton steps on the banded Hessian
    (shifted to positive definite where needed) under the same Armijo rule.
    A failed Newton line search falls back to a gradient step. Accepted
    energies never increase beyond floating-point resolution.
    """
    sys = _potential(p)
    m = sys.m
    u = np.zeros((m, grid.n_interior)) if u0 is None else np.array(u0.values, dtype=float)
    if u.shape != (m, grid.n_interior):
        raise ValueError(f"initial guess has shape {u.shape}, expected {(m, grid.n_interior)}")
    J, scale = _energy_and_scale(sys, grid, u)
    g = _gradient(sys, grid, u)
    history = [J]
    gd_step = grid.h / 4
    newton_steps = 0
    for it in range(max_iter + 1):
        gsup = float(np.max(np.abs(g))) if g.size else 0.0
        if gsup <= tol:
            fn = GridFn(grid, u)
            return fn, EnergyReport(J, gsup, it, h1_seminorm_sq(fn), newton_steps, history)
        if it == max_iter:
            break
        accepted = False
        if gsup < NEWTON_SWITCH:
            d = _newton_direction(sys, grid, u, g)
            if d is not None and float(np.sum(g * d)) < 0:
                step = _armijo(sys, grid, u, J, scale, g, d, 1.0)
                if step is not None:
                    accepted = True
                    newton_steps += 1
                    u, J, scale = step[1:]
        if not accepted:
            step = _armijo(sys, grid, u, J, scale, g, -g, 2 * gd_step)
            if step is None:
                raise LineSearchStalled(
                    f"no Armijo decrease along the gradient (grad sup {gsup:.3e})")
            gd_step, u, J, scale = step
        g = _gradient(sys, grid, u)
        history.append(J)
    raise MaxIterations(f"energy minimization did not reach grad sup {tol:.1e} "
                        f"in {max_iter} iterations (grad sup {gsup:.3e})")


def _armijo(sys, grid, u, J, scale, g, d, step):
    """Backtrack from ``step``; returns ``(step, u, J, scale)`` or None."""
    slope = float(np.sum(g * d))
    slack = 64 * _EPS * scale
    for _ in range(MAX_HALVINGS):
        trial = u + step * d
        if np.all(np.isfinite(trial)):
            with np.errstate(over="ignore", invalid="ignore"):
                Jt, st = _energy_and_scale(sys, grid, trial)
            if np.isfinite(Jt) and Jt <= J + ARMIJO_C * step * slope + slack:
                return step, trial, Jt, st
        step *= 0.5
    return None


# ---------------------------------------------------------------- M_L table

@dataclass(frozen=True)
class MLRecord:
    """``M_L`` is relative to the zero state; ``J_raw`` adds back the
    trapezoid integral of ``a V(0)`` over [-L, L]."""

    L: float
    M_L: float
    h1_seminorm_sq: float
    iterations: int
    J_raw: float = float("nan")


def zero_state_energy(p, grid: Grid1D) -> float:
    """Trapezoid integral of ``a(t) V(0)`` over the grid."""
    sys = _potential(p)
    t = grid.nodes
    V0 = float(evaluate(sys.potential, {z: 0.0 for z in sys.zvars}))
    a = eval_on(sys.coef[0], {"t": t}, t.shape)
    w = np.full(t.shape, grid.h)
    w[0] = w[-1] = 0.5 * grid.h
    return float(np.dot(w, a)) * V0


def h1_bound_constant(p, records: Sequence["MLRecord"], grid: Grid1D) -> float:
    """``2 (J_raw(L_min) + int f0)``, with ``int f0`` the trapezoid sum on ``grid``.

    Bounds twice the kinetic energy of every minimizer when the raw minimum
    values do not increase with L; that holds only if ``V(0) = 0``, so for
    other potentials the constant is an empirical check, not a proof.
    """
    if p.f0 is None:
        raise ValueError("problem declares no f0")
    t = grid.nodes
    w = np.full(t.shape, grid.h)
    w[0] = w[-1] = 0.5 * grid.h
    int_f0 = float(np.dot(w, eval_on(p.f0, {"t": t}, t.shape)))
    return 2.0 * (records[0].J_raw + int_f0)


def min_energy_sequence(p, Ls: Sequence[float], h: float, tol: float = 1e-10,
                        max_iter: int = 500, return_solutions: bool = False):
    """Minimum energies on nested grids for increasing ``Ls``.

    Each minimization starts from the zero extension of the previous
    minimizer, an admissible competitor with the same energy.
    """
    Ls = list(Ls)
    if any(b <= a for a, b in zip(Ls, Ls[1:])):
        raise ValueError("Ls must be strictly increasing")
    records, sols = [], []
    prev = None
    for L in Ls:
        grid = make_grid(L, h)
        u0 = None if prev is None else zero_extend(prev, grid)
        u, rep = minimize(p, grid, u0, tol, max_iter)
        records.append(MLRecord(float(L), rep.J_value, rep.h1_seminorm_sq, rep.iterations,
                                rep.J_value + zero_state_energy(p, grid)))
        sols.append(u)
        prev = u
    return (records, sols) if return_solutions else records


def ml_table_csv(records: Sequence[MLRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["L", "M_L", "h1_seminorm_sq", "iterations", "J_raw"])
    for r in records:
        w.writerow([repr(r.L), repr(r.M_L), repr(r.h1_seminorm_sq), r.iterations, repr(r.J_raw)])
    return buf.getvalue()
