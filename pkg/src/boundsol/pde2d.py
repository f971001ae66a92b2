"""Planar problems ``Lap u_i - a(x) V_{z_i}(u) = f_i(x)`` on squares.

The computational domain is the square ``[-L, L]^2`` with zero boundary
values, discretized by the five-point Laplacian. Arrays of interior values
have shape ``(m, N, N)`` with ``N = 2L/h - 1``; axis 1 runs along ``x1``.

Two solvers target the same discrete equations:

* ``newton``: damped Newton on the sup-residual; each linear system is the
  negated Jacobian ``-Lap + a Hess V(u)``, symmetric positive definite when
  ``V`` is convex, and is solved by Jacobi-preconditioned conjugate gradients.
* ``minimize``: Armijo descent on the discrete energy, switching to
  truncated Newton-CG steps once the gradient is small.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .bvp1d import MaxIterations, NewtonStalled, SolverError
from .expr import evaluate
from .grid import _skip_preamble
from .problems import PdeProblem, _zvars, eval_on

log = logging.getLogger(__name__)

__all__ = [
    "Grid2D", "GridFn2D", "make_grid2d", "residual2d", "energy2d", "energy_gradient2d",
    "SolveReport2d", "solve2d", "InteriorBounds", "interior_bounds", "expand2d",
    "min_energy_sequence2d", "CGNoConvergence", "LineSearchStalled", "MarginTooLarge",
    "NotConvex", "SQUARE_DOMAIN_NOTE",
]

CG_RTOL = 1e-10
MAX_HALVINGS = 30
ARMIJO_C = 1e-4
NEWTON_SWITCH = 1.0
HOLDER_ALPHA = 0.5
_EPS = np.finfo(float).eps
_REL_TOL = 1e-9

SQUARE_DOMAIN_NOTE = ("truncations are squares [-L, L]^2 rather than discs of radius L; "
                      "zero extension and interior convergence are unaffected")


class CGNoConvergence(SolverError):
    pass


class LineSearchStalled(SolverError):
    pass


class NotConvex(SolverError):
    """The Newton path needs ``a Hess V`` positive semi-definite at the iterate."""


class MarginTooLarge(ValueError):
    pass


# ------------------------------------------------------------------- grids

@dataclass(frozen=True)
class Grid2D:
    """Square ``[-L, L]^2`` with ``n_cells`` cells of width ``h`` per side."""

    L: float
    h: float
    n_cells: int

    @property
    def n_interior(self) -> int:
        return self.n_cells - 1

    @property
    def axis(self) -> np.ndarray:
        i = np.arange(self.n_cells + 1)
        return (2 * i - self.n_cells) * (self.h / 2)

    def mesh(self, interior: bool = True) -> tuple[np.ndarray, np.ndarray]:
        s = self.axis[1:-1] if interior else self.axis
        return np.meshgrid(s, s, indexing="ij")


def make_grid2d(L: float, h: float) -> Grid2D:
    if not (L > 0 and h > 0):
        raise ValueError(f"L and h must be positive (L={L}, h={h})")
    r = 2.0 * L / h
    n = round(r)
    if abs(r - n) > _REL_TOL * max(1.0, r) or n < 2:
        raise ValueError(f"2L/h = {r!r} must be an integer of at least 2")
    return Grid2D(float(L), float(h), int(n))


def _offset(outer: Grid2D, inner_L: float) -> tuple[Grid2D, int]:
    inner = make_grid2d(inner_L, outer.h)
    shift = outer.n_cells - inner.n_cells
    if shift < 0 or shift % 2:
        raise ValueError(f"square of half-side {inner_L} is not nested in L={outer.L}")
    return inner, shift // 2


@dataclass(frozen=True, eq=False)
class GridFn2D:
    grid: Grid2D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 2:
            v = v[None]
        N = self.grid.n_interior
        if v.ndim != 3 or v.shape[1:] != (N, N):
            raise ValueError(f"values shape {v.shape} does not match the {N}x{N} interior")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    def with_boundary(self) -> np.ndarray:
        return np.pad(self.values, ((0, 0), (1, 1), (1, 1)))

    def restrict(self, W: float) -> "GridFn2D":
        """Values at the interior nodes of the sub-square ``[-W, W]^2``."""
        inner, k = _offset(self.grid, W)
        n = inner.n_interior
        return GridFn2D(inner, self.values[:, k:k + n, k:k + n])

    def zero_extend(self, grid: Grid2D) -> "GridFn2D":
        if grid.h != self.grid.h:
            raise ValueError("grids do not share the spacing h")
        _, k = _offset(grid, self.grid.L)
        out = np.zeros((self.m, grid.n_interior, grid.n_interior))
        n = self.grid.n_interior
        out[:, k:k + n, k:k + n] = self.values
        return GridFn2D(grid, out)

    def to_csv(self) -> str:
        """``x1,x2,u1..um`` on all nodes, preceded by a ``# L=..,h=..,m=..`` row."""
        buf = io.StringIO()
        buf.write(f"# L={self.grid.L!r},h={self.grid.h!r},m={self.m}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x1", "x2"] + [f"u{i + 1}" for i in range(self.m)])
        full = self.with_boundary()
        s = self.grid.axis
        for i, x1 in enumerate(s):
            for j, x2 in enumerate(s):
                w.writerow([repr(float(x1)), repr(float(x2))]
                           + [repr(float(v)) for v in full[:, i, j]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "GridFn2D":
        lines = _skip_preamble(text.splitlines())
        meta = dict(kv.split("=", 1) for kv in lines[0][1:].strip().split(","))
        grid = make_grid2d(float(meta["L"]), float(meta["h"]))
        m = int(meta["m"])
        data = np.array([[float(x) for x in r[2:]] for r in csv.reader(lines[2:]) if r])
        n = grid.n_cells + 1
        full = data.reshape(n, n, m).transpose(2, 0, 1)
        return cls(grid, full[:, 1:-1, 1:-1])


# ------------------------------------------------------- discrete operator

class _Data:
    """Coefficient and forcing samples on one grid, plus pointwise V terms."""

    def __init__(self, p: PdeProblem, grid: Grid2D):
        self.p = p
        self.grid = grid
        X1, X2 = grid.mesh()
        env = {"x1": X1, "x2": X2}
        self.a = eval_on(p.a, env, X1.shape)
        self.f = np.array([eval_on(fi, env, X1.shape) for fi in p.f])
        self.zv = _zvars(p.m)
        self.V0 = float(evaluate(p.V, {z: 0.0 for z in self.zv}))
        self._dvz = p.dvz

    def env(self, u):
        return dict(zip(self.zv, u))

    def Vz(self, u):
        env = self.env(u)
        return np.array([eval_on(e, env, u.shape[1:]) for e in self.p.Vz])

    def dVz(self, u):
        env = self.env(u)
        return np.array([[eval_on(e, env, u.shape[1:]) for e in row] for row in self._dvz])

    def residual(self, u):
        h = self.grid.h
        lap = np.array([kernels.laplacian5(np.ascontiguousarray(ui), h) for ui in u])
        return lap - self.a * self.Vz(u) - self.f

    def energy(self, u) -> tuple[float, float]:
        """Energy and a magnitude scale for roundoff-aware comparisons."""
        full = np.pad(u, ((0, 0), (1, 1), (1, 1)))
        d1 = np.diff(full, axis=1)
        d2 = np.diff(full, axis=2)
        kinetic = 0.5 * float(np.sum(d1 * d1) + np.sum(d2 * d2))
        V = eval_on(self.p.V, self.env(u), u.shape[1:])
        h2 = self.grid.h ** 2
        pot = self.a * (V - self.V0)
        work = np.sum(u * self.f, axis=0)
        J = kinetic + h2 * float(np.sum(pot + work))
        scale = kinetic + h2 * float(np.sum(np.abs(self.a * V) + np.abs(self.a * self.V0)
                                            + np.abs(work)))
        return J, scale

    def neg_jacobian(self, u):
        """``(matvec, diagonal)`` of ``-Lap + a Hess V(u)``."""
        h = self.grid.h
        A = self.a * self.dVz(u)                           # (m, m, N, N)
        A = 0.5 * (A + np.swapaxes(A, 0, 1))
        m = u.shape[0]

        def matvec(v):
            out = np.einsum("ikxy,kxy->ixy", A, v) if m > 1 else A[0] * v
            for i in range(m):
                out[i] -= kernels.laplacian5(np.ascontiguousarray(v[i]), h)
            return out

        diag = np.array([A[i, i] for i in range(m)]) + 4.0 / (h * h)
        return matvec, diag, A

    def min_curvature(self, A) -> float:
        m = A.shape[0]
        if m == 1:
            return float(np.min(A[0, 0]))
        M = np.moveaxis(A, (0, 1), (-2, -1))
        return float(np.min(np.linalg.eigvalsh(M)))


def _data(p: PdeProblem, grid: Grid2D) -> _Data:
    if not isinstance(p, PdeProblem):
        raise TypeError(f"expected a PdeProblem, got {type(p).__name__}")
    return _Data(p, grid)


def residual2d(p: PdeProblem, u: GridFn2D) -> GridFn2D:
    """Five-point Laplacian minus ``a V_{z_i}(u)`` minus ``f_i`` at interior nodes."""
    return GridFn2D(u.grid, _data(p, u.grid).residual(u.values))


def energy2d(p: PdeProblem, u: GridFn2D) -> float:
    """Discrete energy relative to the zero state.

    ``1/2`` the sum of squared node differences over all grid edges (the
    cell-area factor cancels the ``1/h^2``) plus ``h^2`` times the sum over
    interior nodes of ``a (V(u) - V(0)) + u . f``.
    """
    return _data(p, u.grid).energy(u.values)[0]


def energy_gradient2d(p: PdeProblem, u: GridFn2D) -> GridFn2D:
    """Exact gradient of :func:`energy2d`: ``-h^2`` times the residual."""
    return GridFn2D(u.grid, -u.grid.h ** 2 * _data(p, u.grid).residual(u.values))


# -------------------------------------------------------------------- CG

def _pcg(matvec, diag, b, rtol=CG_RTOL, max_iter=None, truncate=False):
    """Jacobi-preconditioned CG for ``A x = b``.

    With ``truncate`` a direction of non-positive curvature ends the
    iteration early (returning the current iterate, or ``b`` itself on
    the first step) instead of raising.
    """
    bnorm = math.sqrt(float(np.sum(b * b)))
    x = np.zeros_like(b)
    if bnorm == 0.0:
        return x, 0
    if max_iter is None:
        max_iter = 10 * b.shape[-1] + 200
    r = b.copy()
    z = r / diag
    d = z.copy()
    rz = float(np.sum(r * z))
    for k in range(1, max_iter + 1):
        Ad = matvec(d)
        dAd = float(np.sum(d * Ad))
        if dAd <= 0.0:
            if truncate:
                return (b.copy() if k == 1 else x), k
            raise NotConvex("non-positive curvature in conjugate gradients")
        alpha = rz / dAd
        x += alpha * d
        r -= alpha * Ad
        if math.sqrt(float(np.sum(r * r))) <= rtol * bnorm:
            return x, k
        z = r / diag
        rz_new = float(np.sum(r * z))
        d = z + (rz_new / rz) * d
        rz = rz_new
    if truncate:
        return x, max_iter
    raise CGNoConvergence(f"CG did not reach relative residual {rtol:.0e} in {max_iter} iterations")


# ----------------------------------------------------------------- solvers

@dataclass
class SolveReport2d:
    solution: GridFn2D
    method: str
    iterations: int
    final_residual_sup: float
    cg_iterations: int = 0
    energy: float | None = None
    problem: str = ""
    notes: list[str] = field(default_factory=lambda: [SQUARE_DOMAIN_NOTE])

    def to_dict(self) -> dict:
        g = self.solution.grid
        return {
            "problem": self.problem,
            "grid": {"L": g.L, "h": g.h, "n_interior_per_side": g.n_interior},
            "method": self.method,
            "iterations": self.iterations,
            "cg_iterations": self.cg_iterations,
            "final_residual_sup": self.final_residual_sup,
            "energy": self.energy,
            "solution_sup": float(np.max(np.abs(self.solution.values)))
            if self.solution.values.size else 0.0,
            "notes": self.notes,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), indent=2, **kw)


def _sup(x) -> float:
    return float(np.max(np.abs(x))) if x.size else 0.0


def _newton(D: _Data, u, tol, max_iter):
    r = D.residual(u)
    rn = _sup(r)
    cg_total = 0
    for it in range(max_iter + 1):
        if rn <= tol:
            return u, it, rn, cg_total
        if it == max_iter:
            break
        matvec, diag, A = D.neg_jacobian(u)
        if D.min_curvature(A) < -1e-12:
            raise NotConvex("a Hess V has a negative eigenvalue at the current iterate")
        # J d = -r  <=>  (-J) d = r
        d, k = _pcg(matvec, diag, r)
        cg_total += k
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = u + t * d
            with np.errstate(over="ignore", invalid="ignore"):
                rt = D.residual(trial)
            rtn = _sup(rt)
            if np.isfinite(rtn) and rtn < rn:
                break
            t *= 0.5
        else:
            raise NewtonStalled(f"no sup-residual decrease after {MAX_HALVINGS} halvings "
                                f"(residual {rn:.3e})")
        u, r, rn = trial, rt, rtn
    raise MaxIterations(f"Newton did not reach {tol:.1e} in {max_iter} iterations "
                        f"(residual {rn:.3e})")


def _armijo(D: _Data, u, J, scale, g, d, step):
    slope = float(np.sum(g * d))
    slack = 64 * _EPS * scale
    for _ in range(40):
        trial = u + step * d
        with np.errstate(over="ignore", invalid="ignore"):
            Jt, st = D.energy(trial)
        if np.isfinite(Jt) and Jt <= J + ARMIJO_C * step * slope + slack:
            return step, trial, Jt, st
        step *= 0.5
    return None


def _minimize(D: _Data, u, tol, max_iter):
    h2 = D.grid.h ** 2
    J, scale = D.energy(u)
    r = D.residual(u)
    gd_step = 0.125
    cg_total = 0
    for it in range(max_iter + 1):
        rn = _sup(r)
        if rn <= tol:
            return u, it, rn, cg_total, J
        if it == max_iter:
            break
        g = -h2 * r
        accepted = False
        if _sup(g) < NEWTON_SWITCH:
            matvec, diag, _ = D.neg_jacobian(u)
            # energy Hessian is h^2 (-J); solve (-J) d = r so that H d = -g
            d, k = _pcg(matvec, diag, r, truncate=True)
            cg_total += k
            if float(np.sum(g * d)) < 0:
                step = _armijo(D, u, J, scale, g, d, 1.0)
                if step is not None:
                    accepted = True
                    u, J, scale = step[1:]
        if not accepted:
            step = _armijo(D, u, J, scale, g, -g, 2 * gd_step)
            if step is None:
                raise LineSearchStalled(f"no Armijo decrease along the gradient "
                                        f"(residual {rn:.3e})")
            gd_step, u, J, scale = step
        r = D.residual(u)
    raise MaxIterations(f"minimization did not reach residual {tol:.1e} in {max_iter} "
                        f"iterations (residual {rn:.3e})")


def solve2d(p: PdeProblem, grid: Grid2D, method: str = "newton", tol: float = 1e-9,
            u0: GridFn2D | None = None, max_iter: int | None = None) -> SolveReport2d:
    """Solve the discrete problem to sup-residual ``tol``.

    Parameters
    ----------
    method : {"newton", "minimize"}
        Newton requires ``a Hess V`` positive semi-definite at every
        iterate; if that fails the solve continues on the minimize path and
        the report says so.
    u0 : GridFn2D, optional
        Starting values (zero by default).
    """
    if method not in ("newton", "minimize"):
        raise ValueError(f"unknown method {method!r}")
    D = _data(p, grid)
    N = grid.n_interior
    u = np.zeros((p.m, N, N)) if u0 is None else np.array(u0.values, dtype=float)
    if u.shape != (p.m, N, N):
        raise ValueError(f"initial guess has shape {u.shape}, expected {(p.m, N, N)}")
    notes = [SQUARE_DOMAIN_NOTE]
    if method == "newton":
        try:
            u, it, rn, cg = _newton(D, u, tol, 50 if max_iter is None else max_iter)
            return SolveReport2d(GridFn2D(grid, u), "newton", it, rn, cg,
                                 D.energy(u)[0], p.name, notes)
        except NotConvex as exc:
            log.info("switching to energy minimization: %s", exc)
            notes.append(f"newton path abandoned ({exc}); solved by minimization")
    u, it, rn, cg, J = _minimize(D, u, tol, 2000 if max_iter is None else max_iter)
    return SolveReport2d(GridFn2D(grid, u), "minimize", it, rn, cg, J, p.name, notes)


# ---------------------------------------------------------- interior bounds

@dataclass(frozen=True)
class InteriorBounds:
    sup_u_full: float
    sup_Du_margin1: float
    sup_D2u_margin2: float
    holder_quotient_sample: float
    alpha: float = HOLDER_ALPHA

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.sup_u_full, self.sup_Du_margin1, self.sup_D2u_margin2,
                self.holder_quotient_sample)


def _box(axis: np.ndarray, R: float) -> slice:
    idx = np.nonzero(np.abs(axis) <= R * (1 + _REL_TOL))[0]
    return slice(int(idx[0]), int(idx[-1]) + 1)


def holder_offsets(h: float, count: int = 64, seed: int = 0, radius: float = 1.0):
    """Distinct integer node offsets ``(di, dj)`` with ``0 < h |(di, dj)| <= radius``."""
    k = int(math.floor(radius / h + _REL_TOL))
    rng = np.random.default_rng(seed)
    out: list[tuple[int, int]] = []
    seen = set()
    tries = 0
    while len(out) < count and tries < 100 * count:
        tries += 1
        di, dj = (int(x) for x in rng.integers(-k, k + 1, size=2))
        if (di, dj) == (0, 0) or (di, dj) in seen or h * math.hypot(di, dj) > radius:
            continue
        seen.add((di, dj))
        out.append((di, dj))
    return out


def interior_bounds(u: GridFn2D, count: int = 64, seed: int = 0) -> InteriorBounds:
    """Sup norms of ``u`` and its difference quotients on shrinking squares.

    * ``sup_u_full``: all nodes.
    * ``sup_Du_margin1``: central first differences at nodes with distance
      at least 1 from the boundary.
    * ``sup_D2u_margin2``: pure and mixed central second differences at
      distance at least 2.
    * ``holder_quotient_sample``: the largest ``|D2u(x) - D2u(y)| / |x-y|^(1/2)``
      over all node pairs in the margin-2 square whose offset is one of
      ``count`` seeded offsets of length at most 1.
    """
    g = u.grid
    if g.L <= 2:
        raise MarginTooLarge(f"interior bounds need L > 2 (L={g.L})")
    h = g.h
    U = u.with_boundary()
    s = g.axis
    sup_u = _sup(U)

    b1 = _box(s, g.L - 1)
    i1 = slice(b1.start - 1, b1.stop - 1)
    i2 = slice(b1.start + 1, b1.stop + 1)
    c1 = U[:, b1, b1]
    Dx = (U[:, i2, b1] - U[:, i1, b1]) / (2 * h)
    Dy = (U[:, b1, i2] - U[:, b1, i1]) / (2 * h)
    sup_du = max(_sup(Dx), _sup(Dy)) if c1.size else 0.0

    b2 = _box(s, g.L - 2)
    lo, hi = slice(b2.start - 1, b2.stop - 1), slice(b2.start + 1, b2.stop + 1)
    C = U[:, b2, b2]
    Dxx = (U[:, hi, b2] - 2 * C + U[:, lo, b2]) / (h * h)
    Dyy = (U[:, b2, hi] - 2 * C + U[:, b2, lo]) / (h * h)
    Dxy = (U[:, hi, hi] - U[:, hi, lo] - U[:, lo, hi] + U[:, lo, lo]) / (4 * h * h)
    D2 = np.concatenate([Dxx, Dyy, Dxy])
    sup_d2 = _sup(D2)

    n = D2.shape[1]
    holder = 0.0
    for di, dj in holder_offsets(h, count, seed):
        if abs(di) >= n or abs(dj) >= n:
            continue
        A = D2[:, max(0, -di):n - max(0, di), max(0, -dj):n - max(0, dj)]
        B = D2[:, max(0, di):n - max(0, -di), max(0, dj):n - max(0, -dj)]
        if A.size:
            q = _sup(A - B) / (h * math.hypot(di, dj)) ** HOLDER_ALPHA
            holder = max(holder, q)
    return InteriorBounds(sup_u, sup_du, sup_d2, holder)


# ------------------------------------------------------------------ studies

def expand2d(p: PdeProblem, W: float, tol: float, L0: float, Lmax: float, h: float,
             method: str = "newton", solve_tol: float = 1e-9):
    """Planar analog of :func:`boundsol.driver.expand_until_converged`.

    Each level starts from the zero extension of the previous solution.
    ``bounds_reports`` holds :class:`InteriorBounds` for levels with L > 2.
    """
    from .driver import ConvergenceStudy, MaxDomainReached, _check_study, _is_converged

    Ls = _check_study(W, L0, Lmax, h)
    study = ConvergenceStudy(W, [], [], None, [], False, method, h, tol,
                             notes=[SQUARE_DOMAIN_NOTE])
    prev = None
    for L in Ls:
        grid = make_grid2d(L, h)
        u0 = None if prev is None else prev.zero_extend(grid)
        u = solve2d(p, grid, method, solve_tol, u0).solution
        window = u.restrict(W)
        study.Ls.append(float(L))
        study.bounds_reports.append(interior_bounds(u) if L > 2 else None)
        if study.final_solution is not None:
            study.diffs.append(_sup(window.values - study.final_solution.values))
            log.info("L=%g window diff %.3e", L, study.diffs[-1])
        study.final_solution = window
        prev = u
        if _is_converged(study.diffs, tol):
            study.converged = True
            return study
    raise MaxDomainReached(
        f"no convergence up to L={Ls[-1]} (diffs {['%.2e' % d for d in study.diffs]})", study)


def min_energy_sequence2d(p: PdeProblem, Ls: Sequence[float], h: float, tol: float = 1e-9):
    """``(L, minimum energy)`` on nested squares, warm-started by zero extension."""
    out = []
    prev = None
    for L in Ls:
        grid = make_grid2d(L, h)
        u0 = None if prev is None else prev.zero_extend(grid)
        rep = solve2d(p, grid, "minimize", tol, u0)
        out.append((float(L), rep.energy))
        prev = rep.solution
    return out
