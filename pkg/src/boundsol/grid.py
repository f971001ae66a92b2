"""Uniform 1-D grids on [-L, L] and grid functions with zero Dirichlet ends.

Node coordinates are computed from integers as ``(2*i - n) * (h/2)`` so a
node sitting at the same physical position on two nested grids (same ``h``)
has a bitwise-identical coordinate.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid1D", "GridFn", "NonConformingSpacing", "WindowNotNested",
    "make_grid", "sup_norm", "h1_seminorm_sq", "restrict_to_window",
    "derivative_bound_chain", "zero_extend", "gridfn_to_csv", "gridfn_from_csv",
]

_REL_TOL = 1e-9


class NonConformingSpacing(ValueError):
    pass


class WindowNotNested(ValueError):
    pass


def _integer_ratio(x: float, h: float) -> int | None:
    r = x / h
    k = round(r)
    if abs(r - k) <= _REL_TOL * max(1.0, abs(r)):
        return int(k)
    return None


@dataclass(frozen=True)
class Grid1D:
    """Grid on [-L, L] with ``n_cells`` cells of width ``h``."""

    L: float
    h: float
    n_cells: int

    @property
    def n_interior(self) -> int:
        return self.n_cells - 1

    @property
    def nodes(self) -> np.ndarray:
        """All nodes, boundary included."""
        i = np.arange(self.n_cells + 1)
        return (2 * i - self.n_cells) * (self.h / 2)

    @property
    def interior(self) -> np.ndarray:
        return self.nodes[1:-1]


def make_grid(L: float, h: float) -> Grid1D:
    """Build the grid on [-L, L]; ``2L/h`` must be an integer of at least 2."""
    if not (L > 0 and h > 0):
        raise NonConformingSpacing(f"L and h must be positive (L={L}, h={h})")
    n = _integer_ratio(2.0 * L, h)
    if n is None:
        raise NonConformingSpacing(f"2L/h = {2 * L / h!r} is not an integer")
    if n < 2:
        raise NonConformingSpacing(f"2L/h = {n} leaves no interior node")
    return Grid1D(float(L), float(h), n)


@dataclass(frozen=True, eq=False)
class GridFn:
    """Vector-valued data on the interior nodes of a grid.

    ``values`` has shape ``(m, n_interior)``; boundary values are implicitly 0.
    """

    grid: Grid1D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[None, :]
        if v.ndim != 2 or v.shape[1] != self.grid.n_interior:
            raise ValueError(
                f"values shape {v.shape} does not match {self.grid.n_interior} interior nodes")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    def with_boundary(self) -> np.ndarray:
        """Values on all nodes, shape ``(m, n_cells + 1)``."""
        return np.pad(self.values, ((0, 0), (1, 1)))

    @classmethod
    def zeros(cls, grid: Grid1D, m: int = 1) -> "GridFn":
        return cls(grid, np.zeros((m, grid.n_interior)))

    @classmethod
    def sample(cls, grid: Grid1D, *funcs) -> "GridFn":
        """Sample callables ``f(t)`` on the interior nodes."""
        t = grid.interior
        return cls(grid, np.array([np.broadcast_to(f(t), t.shape) for f in funcs]))


def sup_norm(f: GridFn) -> float:
    if f.values.size == 0:
        return 0.0
    return float(np.max(np.abs(f.values)))


def h1_seminorm_sq(f: GridFn) -> float:
    """Sum over all cells of ``((v[i+1]-v[i])/h)^2 * h``, boundary gaps included."""
    d = np.diff(f.with_boundary(), axis=1)
    return float(np.sum(d * d) / f.grid.h)


def _window_offset(grid: Grid1D, W: float) -> tuple[Grid1D, int]:
    if W > grid.L * (1 + _REL_TOL):
        raise WindowNotNested(f"window W={W} exceeds L={grid.L}")
    try:
        wgrid = make_grid(W, grid.h)
    except NonConformingSpacing as exc:
        raise WindowNotNested(str(exc)) from None
    shift = grid.n_cells - wgrid.n_cells
    if shift % 2:
        raise WindowNotNested(f"window [-{W}, {W}] does not fall on grid nodes")
    return wgrid, shift // 2


def restrict_to_window(f: GridFn, W: float) -> GridFn:
    """Copy the values at the interior nodes of [-W, W]."""
    wgrid, k = _window_offset(f.grid, W)
    return GridFn(wgrid, f.values[:, k:k + wgrid.n_interior])


def zero_extend(f: GridFn, grid: Grid1D) -> GridFn:
    """Embed ``f`` into a larger nested grid, zero outside its interval."""
    if grid.h != f.grid.h:
        raise WindowNotNested("grids do not share the spacing h")
    _, k = _window_offset(grid, f.grid.L)
    out = np.zeros((f.m, grid.n_interior))
    out[:, k:k + f.grid.n_interior] = f.values
    return GridFn(grid, out)


def derivative_bound_chain(K0: float, K2: float) -> float:
    """Bound on sup|u'| from sup|u| <= K0 and sup|u''| <= K2.

    From u(t+1) = u(t) + u'(t) + int_t^{t+1} (t+1-s) u''(s) ds, so
    |u'(t)| <= 2*K0 + K2/2. Only meaningful on intervals of length >= 1.
    """
    if K0 < 0 or K2 < 0:
        raise ValueError("bounds must be non-negative")
    return 2.0 * K0 + 0.5 * K2


def gridfn_to_csv(f: GridFn) -> str:
    """CSV text: a ``# L=..,h=..,m=..`` header row, then ``t,u1..um`` on all nodes."""
    buf = io.StringIO()
    buf.write(f"# L={f.grid.L!r},h={f.grid.h!r},m={f.m}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"u{i + 1}" for i in range(f.m)])
    full = f.with_boundary()
    for j, t in enumerate(f.grid.nodes):
        w.writerow([repr(float(t))] + [repr(float(x)) for x in full[:, j]])
    return buf.getvalue()


def gridfn_from_csv(text: str) -> GridFn:
    lines = _skip_preamble(text.splitlines())
    meta = dict(kv.split("=", 1) for kv in lines[0][1:].strip().split(","))
    grid = make_grid(float(meta["L"]), float(meta["h"]))
    m = int(meta["m"])
    rows = list(csv.reader(lines[2:]))
    data = np.array([[float(x) for x in r[1:]] for r in rows if r])
    if data.shape != (grid.n_cells + 1, m):
        raise ValueError(f"expected {grid.n_cells + 1} rows of {m} values")
    return GridFn(grid, data[1:-1].T)


def _skip_preamble(lines: list[str]) -> list[str]:
    """Drop leading comment rows before the ``# L=..`` metadata row."""
    for k, line in enumerate(lines):
        if line.startswith("# L="):
            return lines[k:]
        if not line.startswith("#"):
            break
    raise ValueError("missing '# L=..,h=..,m=..' header row")
