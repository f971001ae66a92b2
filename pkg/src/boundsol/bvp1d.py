"""Dirichlet problems on [-L, L] by damped Newton and lambda-continuation.

Every 1-D problem is handled through its :class:`~boundsol.problems.System1D`
view. The discrete residual of component ``i`` at interior node ``j`` is::

    (u[j+1] - 2 u[j] + u[j-1]) / h^2 - lam * coef_i(t_j) * F_i(u[:, j]) - g_i(t_j)

with ``u = 0`` at both ends. ``lam = 0`` is the linear Poisson problem,
``lam = 1`` the target problem.
"""
from __future__ import annotations

import functools
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from . import kernels
from .expr import variables
from .grid import Grid1D, GridFn, sup_norm
from .problems import (CoupledSystemProblem, HamiltonianProblem, ScalarProblem, System1D,
                       predicted_bounds)

log = logging.getLogger(__name__)

__all__ = [
    "SolveReport", "BoundsReport", "NewtonResult", "BandedJacobian",
    "SolverError", "SingularSystem", "NewtonStalled", "MaxIterations", "ContinuationFailed",
    "system_of", "solve_linear_poisson", "residual", "jacobian", "newton",
    "continuation_solve", "validate_bounds",
]

MAX_HALVINGS = 30
LAMBDA_STEP0 = 0.25
LAMBDA_STEP_MIN = 1e-4
EASY_ITERS = 4


class SolverError(RuntimeError):
    pass


class SingularSystem(SolverError):
    pass


class NewtonStalled(SolverError):
    pass


class MaxIterations(SolverError):
    pass


class ContinuationFailed(SolverError):
    pass


@functools.lru_cache(maxsize=64)
def system_of(p) -> System1D:
    return p.system()


def _is_linear(sys: System1D) -> bool:
    return all(not variables(d) for row in sys.dnonlin for d in row)


# ------------------------------------------------------------- linear solve

def solve_linear_poisson(rhs: GridFn) -> GridFn:
    """Solve ``D2 u = rhs`` with zero ends, component by component (Thomas)."""
    grid = rhs.grid
    n = grid.n_interior
    inv = 1.0 / (grid.h * grid.h)
    off = np.full(n, inv)
    diag = np.full(n, -2.0 * inv)
    out = np.empty_like(rhs.values)
    for i in range(rhs.m):
        try:
            out[i] = kernels.thomas(off, diag, off, rhs.values[i])
        except ZeroDivisionError as exc:  # cannot happen for this matrix
            raise SingularSystem(str(exc)) from None
    return GridFn(grid, out)


# ------------------------------------------------------ residual / jacobian

def _residual_values(sys: System1D, lam: float, grid: Grid1D, u: np.ndarray,
                     boundary=None) -> np.ndarray:
    t = grid.interior
    d2 = kernels.second_difference(u, grid.h)
    if boundary is not None:
        left, right = (np.broadcast_to(np.asarray(b, dtype=float), (u.shape[0],))
                       for b in boundary)
        inv = 1.0 / (grid.h * grid.h)
        d2[:, 0] += left * inv
        d2[:, -1] += right * inv
    out = d2 - sys.forcing_values(t)
    if lam != 0.0:
        out -= lam * sys.coef_values(t) * sys.nonlin_values(u)
    return out


def residual(p, lam: float, u: GridFn, boundary=None) -> GridFn:
    """Central-difference residual at interior nodes.

    ``boundary`` optionally supplies ``(u(-L), u(L))`` (per component) in
    place of the homogeneous Dirichlet values, for diagnosing sampled
    functions that do not vanish at the ends.
    """
    return GridFn(u.grid, _residual_values(system_of(p), lam, u.grid, u.values, boundary))


@dataclass(frozen=True, eq=False)
class BandedJacobian:
    """Derivative of the residual: block tridiagonal with identity off-blocks.

    ``blocks[j]`` is the ``m x m`` diagonal block at node ``j``; the off-diagonal
    blocks are ``I / h^2``. Unknowns are ordered node-major (``k = j*m + i``).
    """

    h: float
    blocks: np.ndarray  # (n, m, m)

    @property
    def m(self) -> int:
        return self.blocks.shape[1]

    @property
    def n(self) -> int:
        return self.blocks.shape[0]

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """Apply to ``v`` of shape ``(m, n)``."""
        out = np.einsum("jik,kj->ij", self.blocks, v)
        inv = 1.0 / (self.h * self.h)
        out[:, 1:] += inv * v[:, :-1]
        out[:, :-1] += inv * v[:, 1:]
        return out

    def to_dense(self) -> np.ndarray:
        m, n = self.m, self.n
        A = np.zeros((m * n, m * n))
        inv = 1.0 / (self.h * self.h)
        for j in range(n):
            A[j * m:(j + 1) * m, j * m:(j + 1) * m] = self.blocks[j]
            if j + 1 < n:
                for i in range(m):
                    A[j * m + i, (j + 1) * m + i] = inv
                    A[(j + 1) * m + i, j * m + i] = inv
        return A

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve ``J x = rhs`` for ``rhs`` of shape ``(m, n)``."""
        m, n = self.m, self.n
        inv = 1.0 / (self.h * self.h)
        if m == 1:
            off = np.full(n, inv)
            try:
                x = kernels.thomas(off, self.blocks[:, 0, 0], off, rhs[0])
            except ZeroDivisionError as exc:
                raise SingularSystem(str(exc)) from None
            if not np.all(np.isfinite(x)):
                raise SingularSystem("non-finite Newton correction")
            return x[None, :]
        N = m * n
        ab = np.zeros((2 * m + 1, N))
        # ab[m + r - c, c] = A[r, c]
        for di in range(m):
            for dk in range(m):
                r = np.arange(n) * m + di
                c = np.arange(n) * m + dk
                ab[m + r - c, c] = self.blocks[:, di, dk]
        ab[0, m:] = inv
        ab[2 * m, :N - m] = inv
        try:
            x = solve_banded((m, m), ab, rhs.T.reshape(N))
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(str(exc)) from None
        return x.reshape(n, m).T


def _jacobian_blocks(sys: System1D, lam: float, grid: Grid1D, u: np.ndarray) -> BandedJacobian:
    m, n = u.shape
    blocks = np.zeros((n, m, m))
    diag = -2.0 / (grid.h * grid.h)
    for i in range(m):
        blocks[:, i, i] = diag
    if lam != 0.0:
        c = sys.coef_values(grid.interior)  # (m, n)
        dF = sys.dnonlin_values(u)          # (m, m, n)
        blocks -= lam * np.transpose(c[:, None, :] * dF, (2, 0, 1))
    return BandedJacobian(grid.h, blocks)


def jacobian(p, lam: float, u: GridFn) -> BandedJacobian:
    """Exact derivative of :func:`residual` with respect to the node values."""
    return _jacobian_blocks(system_of(p), lam, u.grid, u.values)


# ----------------------------------------------------------------- newton

@dataclass
class NewtonResult:
    solution: GridFn
    iterations: int
    residuals: list[float] = field(default_factory=list)


def newton(p, lam: float, u0: GridFn, tol: float = 1e-9, max_iter: int = 50) -> NewtonResult:
    """Damped Newton on the residual sup-norm.

    A full step is taken when it lowers the sup-residual; otherwise the step
    is halved up to 30 times before :class:`NewtonStalled` is raised. The
    recorded sup-residuals are therefore strictly decreasing.
    """
    sys = system_of(p)
    grid = u0.grid
    u = np.array(u0.values, dtype=float)
    r = _residual_values(sys, lam, grid, u)
    rn = float(np.max(np.abs(r))) if r.size else 0.0
    history = [rn]
    for it in range(max_iter + 1):
        if rn <= tol:
            return NewtonResult(GridFn(grid, u), it, history)
        if it == max_iter:
            break
        J = _jacobian_blocks(sys, lam, grid, u)
        du = J.solve(-r)
        step = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = u + step * du
            if np.all(np.isfinite(trial)):
                with np.errstate(over="ignore", invalid="ignore"):
                    rt = _residual_values(sys, lam, grid, trial)
                rtn = float(np.max(np.abs(rt)))
                if np.isfinite(rtn) and rtn < rn:
                    break
            step *= 0.5
        else:
            raise NewtonStalled(
                f"no residual decrease after {MAX_HALVINGS} halvings (residual {rn:.3e})")
        u, r, rn = trial, rt, rtn
        history.append(rn)
    raise MaxIterations(f"Newton did not reach {tol:.1e} in {max_iter} iterations "
                        f"(residual {rn:.3e})")


# ----------------------------------------------------------- continuation

@dataclass(frozen=True)
class BoundsReport:
    """Measured against predicted a priori bounds (max over components)."""

    K0_measured: float
    K0_predicted: float
    K1_measured: float
    K1_predicted: float
    K2_measured: float
    K2_predicted: float
    passed: bool
    components: tuple = ()
    sampled: bool = True


@dataclass
class SolveReport:
    solution: GridFn
    lambda_path: list[tuple[float, int]]
    final_residual_sup: float
    bounds: BoundsReport | None = None
    problem: str = ""

    def to_dict(self) -> dict:
        g = self.solution.grid
        return {
            "problem": self.problem,
            "grid": {"L": g.L, "h": g.h, "n_interior": g.n_interior},
            "lambda_path": [{"lambda": lam, "newton_iters": k} for lam, k in self.lambda_path],
            "final_residual_sup": self.final_residual_sup,
            "solution_sup": sup_norm(self.solution),
            "bounds": None if self.bounds is None else asdict(self.bounds),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), indent=2, default=_json_default, **kw)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def continuation_solve(p, grid: Grid1D, tol: float = 1e-9, u0: GridFn | None = None,
                       max_iter: int = 50, bounds: bool = True) -> SolveReport:
    """Track the solution from ``lam = 0`` (linear) to ``lam = 1``.

    Steps start at 0.25, halve when Newton fails, double (up to 0.25) after
    an easy step, and :class:`ContinuationFailed` is raised below 1e-4.
    Problems whose nonlinearity is affine go 0 -> 1 in one step. When ``u0``
    is given, Newton at ``lam = 1`` from ``u0`` is tried first and the
    continuation path is the fallback.
    """
    sys = system_of(p)
    path: list[tuple[float, int]] = []
    u = None
    if u0 is not None:
        try:
            res = newton(p, 1.0, u0, tol, max_iter)
            u = res.solution
            path.append((1.0, res.iterations))
        except SolverError as exc:
            log.info("direct Newton from the supplied start failed (%s); continuing in lambda", exc)
    if u is None:
        rhs = GridFn(grid, sys.forcing_values(grid.interior))
        u = solve_linear_poisson(rhs)
        path.append((0.0, 1))
        lam = 0.0
        max_step = 1.0 if _is_linear(sys) else LAMBDA_STEP0
        step = max_step
        while lam < 1.0:
            target = min(1.0, lam + step)
            try:
                res = newton(p, target, u, tol, max_iter)
            except SolverError as exc:
                step *= 0.5
                log.debug("lambda %.5f failed (%s); step -> %.2e", target, exc, step)
                if step < LAMBDA_STEP_MIN:
                    raise ContinuationFailed(
                        f"step fell below {LAMBDA_STEP_MIN} at lambda={lam:.6f}") from exc
                continue
            u, lam = res.solution, target
            path.append((lam, res.iterations))
            if res.iterations <= EASY_ITERS:
                step = min(2 * step, max_step)
    rn = float(np.max(np.abs(_residual_values(sys, 1.0, grid, u.values))))
    report = validate_bounds(p, u) if bounds else None
    return SolveReport(u, path, rn, report, getattr(p, "name", ""))


def validate_bounds(p, u: GridFn) -> BoundsReport:
    """Compare the solution with the a priori bounds of the problem constants.

    Scalar: ``K0 = (M/a0)^(1/3)``, ``K2 = a1 K0^3 + M``, ``K1 = 2 K0 + K2/2``.
    Measured ``K1`` uses central differences and ``K2 = sup|coef F(u) + g|``.
    The derivative bound assumes ``L >= 1``.
    """
    if not isinstance(p, (ScalarProblem, CoupledSystemProblem, HamiltonianProblem)):
        raise TypeError(f"no 1-D bounds for {type(p).__name__}")
    sys = system_of(p)
    K0p, K1p, K2p = predicted_bounds(p)
    full = u.with_boundary()
    K0m = np.max(np.abs(u.values), axis=1)
    K1m = np.max(np.abs(full[:, 2:] - full[:, :-2]), axis=1) / (2 * u.grid.h)
    t = u.grid.interior
    upp = sys.coef_values(t) * sys.nonlin_values(u.values) + sys.forcing_values(t)
    K2m = np.max(np.abs(upp), axis=1)
    eps = 1e-6
    comps = tuple(
        dict(K0_measured=float(K0m[i]), K0_predicted=float(K0p[i]),
             K1_measured=float(K1m[i]), K1_predicted=float(K1p[i]),
             K2_measured=float(K2m[i]), K2_predicted=float(K2p[i]))
        for i in range(u.m))
    ok = bool(np.all(K0m <= K0p + eps) and np.all(K1m <= K1p + eps) and np.all(K2m <= K2p + eps))
    return BoundsReport(float(K0m.max()), float(K0p.max()), float(K1m.max()), float(K1p.max()),
                        float(K2m.max()), float(K2p.max()), ok, comps)
