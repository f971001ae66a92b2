"""Finite-difference consistency checks of Jacobians and energy gradients.

Each check draws random points and directions from a seeded generator and
reports the worst relative error of a central difference against the
analytic derivative.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bvp1d import jacobian, residual
from .grid import GridFn, make_grid
from .problems import PdeProblem

__all__ = ["FDReport", "fd_check_jacobian", "fd_check_gradient", "fd_check_all"]

FD_EPS = 1e-5


@dataclass(frozen=True)
class FDReport:
    what: str
    problem: str
    trials: int
    max_rel_error: float
    tolerance: float = 1e-6

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(float(np.linalg.norm(a)), float(np.linalg.norm(b)), 1e-300)
    return float(np.linalg.norm(a - b)) / scale


def fd_check_jacobian(p, L: float = 4.0, h: float = 0.1, trials: int = 20, seed: int = 0,
                      amplitude: float = 1.0, eps: float = FD_EPS) -> FDReport:
    """Jacobian-vector products against central differences of the residual."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    if isinstance(p, PdeProblem):
        from .pde2d import _data, make_grid2d
        grid = make_grid2d(L, h)
        D = _data(p, grid)
        N = grid.n_interior
        for _ in range(trials):
            u = amplitude * rng.uniform(-1, 1, (p.m, N, N))
            v = rng.uniform(-1, 1, u.shape)
            matvec, _, _ = D.neg_jacobian(u)
            fd = (D.residual(u + eps * v) - D.residual(u - eps * v)) / (2 * eps)
            worst = max(worst, _rel(-matvec(v), fd))
        return FDReport("jacobian", p.name, trials, worst)
    grid = make_grid(L, h)
    m = len(p.system().zvars)
    for _ in range(trials):
        u = GridFn(grid, amplitude * rng.uniform(-1, 1, (m, grid.n_interior)))
        v = rng.uniform(-1, 1, u.values.shape)
        Jv = jacobian(p, 1.0, u).matvec(v)
        rp = residual(p, 1.0, GridFn(grid, u.values + eps * v)).values
        rm = residual(p, 1.0, GridFn(grid, u.values - eps * v)).values
        worst = max(worst, _rel(Jv, (rp - rm) / (2 * eps)))
    return FDReport("jacobian", p.name, trials, worst)


def fd_check_gradient(p, L: float = 4.0, h: float = 0.1, trials: int = 20, seed: int = 0,
                      amplitude: float = 1.0, eps: float = 1e-6) -> FDReport:
    """Directional derivatives of the discrete energy against the analytic gradient."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    if isinstance(p, PdeProblem):
        from .pde2d import GridFn2D, energy2d, energy_gradient2d, make_grid2d
        grid = make_grid2d(L, h)
        N = grid.n_interior
        E, G = energy2d, energy_gradient2d
        wrap = lambda x: GridFn2D(grid, x)  # noqa: E731
        shape = (p.m, N, N)
    else:
        from .variational import energy, energy_gradient
        grid = make_grid(L, h)
        E, G = energy, energy_gradient
        wrap = lambda x: GridFn(grid, x)  # noqa: E731
        shape = (len(p.system().zvars), grid.n_interior)
    for _ in range(trials):
        u = amplitude * rng.uniform(-1, 1, shape)
        v = rng.uniform(-1, 1, shape)
        exact = float(np.sum(G(p, wrap(u)).values * v))
        fd = (E(p, wrap(u + eps * v)) - E(p, wrap(u - eps * v))) / (2 * eps)
        worst = max(worst, abs(exact - fd) / max(abs(exact), abs(fd), 1e-300))
    return FDReport("energy_gradient", p.name, trials, worst)


def fd_check_all(p, seed: int = 0, trials: int = 20) -> list[FDReport]:
    """Every check that applies to the problem's variant."""
    out = [fd_check_jacobian(p, trials=trials, seed=seed)]
    if isinstance(p, PdeProblem) or getattr(p.system(), "potential", None) is not None:
        out.append(fd_check_gradient(p, trials=trials, seed=seed))
    return out
