"""Problem definitions, sampled hypothesis checks, presets and manufactured solutions.

Four variants are supported::

    scalar       u'' - a(t) u^3 = f(t)
    system       u'' - a1e(t) fe(u, v) = h1(t),  v'' - a2e(t) ge(u, v) = h2(t)
    hamiltonian  u_i'' - a(t) V_{z_i}(u) = f_i(t),            i = 1..m
    pde          Lap u_i - a(x1, x2) V_{z_i}(u) = f_i(x1, x2), i = 1..m

Coefficient bounds (a0, a1, M, alpha) are obtained by dense sampling over a
finite range unless declared explicitly. Sampling is never a proof: a bound
that holds on the sampled range may fail outside it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

from .expr import Expr, Var, as_expr, diff, evaluate, substitute, variables

__all__ = [
    "ScalarProblem", "CoupledSystemProblem", "HamiltonianProblem", "PdeProblem",
    "ProblemSpec", "System1D", "ProblemError", "UnknownPreset", "PsdReport",
    "PRESETS", "preset", "psd_check", "manufacture", "sample_bounds",
    "lower_bound_check", "predicted_bounds", "eval_on",
    "scalar_mms_gaussian", "pde_mms_gaussian",
]

SAMPLE_L = 64.0
SAMPLE_H = 0.01
SAMPLE_L_2D = 16.0
SAMPLE_H_2D = 0.1
# sampling box for the solution-valued arguments of nonlinearities
Z_BOX = 10.0


class ProblemError(ValueError):
    pass


class UnknownPreset(ProblemError, KeyError):
    def __str__(self):
        return f"unknown preset {self.args[0]!r}; choose from {', '.join(PRESETS)}"


def eval_on(e: Expr, env: dict, shape) -> np.ndarray:
    """Evaluate and broadcast to ``shape`` (constants become full arrays)."""
    return np.broadcast_to(np.asarray(evaluate(e, env), dtype=float), shape)


def _check_vars(e: Expr, allowed: Sequence[str], what: str) -> Expr:
    bad = variables(e) - set(allowed)
    if bad:
        raise ProblemError(
            f"{what}: variable(s) {', '.join(sorted(bad))} not in {{{', '.join(allowed)}}}")
    return e


def sample_bounds(a: Expr, fs: Sequence[Expr], L: float = SAMPLE_L, h: float = SAMPLE_H,
                  var: str = "t"):
    """Sampled ``(a0, a1, M, f_bounded)`` over [-L, L].

    ``f_bounded`` is False when sup|f| over [-L, L] exceeds sup|f| over
    [-L/2, L/2] by more than 1%, the signature of growing data.
    """
    n = int(round(2 * L / h))
    t = (2 * np.arange(n + 1) - n) * (h / 2)
    av = eval_on(a, {var: t}, t.shape)
    fv = np.array([eval_on(f, {var: t}, t.shape) for f in fs]) if fs else np.zeros((1, t.size))
    M = float(np.max(np.abs(fv)))
    inner = np.abs(t) <= L / 2
    M_half = float(np.max(np.abs(fv[:, inner])))
    bounded = M <= 1.01 * M_half + 1e-300
    return float(np.min(av)), float(np.max(av)), M, bool(bounded)


@dataclass(frozen=True)
class System1D:
    """Common view of every 1-D variant used by the solvers.

    Component ``i`` reads ``u_i'' - coef_i(t) * nonlin_i(u) = forcing_i(t)``
    where ``nonlin_i`` is written in the variables ``zvars``.
    ``potential`` is set when ``nonlin_i = dV/dz_i`` (variational structure).
    """

    zvars: tuple[str, ...]
    coef: tuple[Expr, ...]
    nonlin: tuple[Expr, ...]
    dnonlin: tuple[tuple[Expr, ...], ...]
    forcing: tuple[Expr, ...]
    potential: Expr | None = None

    @property
    def m(self) -> int:
        return len(self.zvars)

    def zenv(self, u: np.ndarray) -> dict:
        return {z: u[i] for i, z in enumerate(self.zvars)}

    def coef_values(self, t):
        return np.array([eval_on(c, {"t": t}, np.shape(t)) for c in self.coef])

    def forcing_values(self, t):
        return np.array([eval_on(g, {"t": t}, np.shape(t)) for g in self.forcing])

    def nonlin_values(self, u):
        env = self.zenv(u)
        return np.array([eval_on(F, env, u.shape[1:]) for F in self.nonlin])

    def dnonlin_values(self, u):
        env = self.zenv(u)
        return np.array([[eval_on(d, env, u.shape[1:]) for d in row] for row in self.dnonlin])


def _jacobian_exprs(nonlin, zvars):
    return tuple(tuple(diff(F, z) for z in zvars) for F in nonlin)


@dataclass(frozen=True)
class ScalarProblem:
    """``u'' - a(t) u^3 = f(t)`` with sampled ``a0 <= a <= a1`` and ``|f| <= M``."""

    a: Expr
    f: Expr
    a0: float
    a1: float
    M: float
    f_bounded: bool = True
    exact: tuple[Expr, ...] | None = None
    name: str = "scalar"
    kind: str = field(default="scalar", init=False)

    @classmethod
    def build(cls, a, f, *, a0=None, a1=None, M=None, name="scalar", exact=None):
        a = _check_vars(as_expr(a), ("t",), "a(t)")
        f = _check_vars(as_expr(f), ("t",), "f(t)")
        s0, s1, sM, bounded = sample_bounds(a, [f])
        p = cls(a, f, s0 if a0 is None else float(a0), s1 if a1 is None else float(a1),
                sM if M is None else float(M), bounded, exact, name)
        if p.a0 <= 0:
            raise ProblemError(f"a(t) must be bounded below by a positive a0 (sampled a0={p.a0})")
        return p

    @property
    def m(self) -> int:
        return 1

    def system(self) -> System1D:
        z = Var("z1")
        nonlin = (z ** 3,)
        return System1D(("z1",), (self.a,), nonlin, _jacobian_exprs(nonlin, ("z1",)),
                        (self.f,), potential=z ** 4 / 4.0)


@dataclass(frozen=True)
class CoupledSystemProblem:
    """Two coupled equations with nonlinearities ``fe(x, y)``, ``ge(x, y)``."""

    a1e: Expr
    a2e: Expr
    fe: Expr
    ge: Expr
    h1: Expr
    h2: Expr
    a0: float
    a1: float
    M: float
    alpha: float
    exact: tuple[Expr, ...] | None = None
    name: str = "system"
    kind: str = field(default="system", init=False)

    @classmethod
    def build(cls, a1e, a2e, fe, ge, h1, h2, *, a0=None, a1=None, M=None, alpha=None,
              name="system", exact=None):
        a1e, a2e, h1, h2 = (_check_vars(as_expr(e), ("t",), k)
                            for e, k in ((a1e, "a1e"), (a2e, "a2e"), (h1, "h1"), (h2, "h2")))
        fe = _check_vars(as_expr(fe), ("x", "y"), "fe(x,y)")
        ge = _check_vars(as_expr(ge), ("x", "y"), "ge(x,y)")
        b1 = sample_bounds(a1e, [h1, h2])
        b2 = sample_bounds(a2e, [])
        s0, s1, sM = min(b1[0], b2[0]), max(b1[1], b2[1]), b1[2]
        if alpha is None:
            x, y = _lattice(2, Z_BOX, 201)
            alpha = float(min(np.min(x * eval_on(fe, {"x": x, "y": y}, x.shape)),
                              np.min(y * eval_on(ge, {"x": x, "y": y}, x.shape))))
        p = cls(a1e, a2e, fe, ge, h1, h2, s0 if a0 is None else float(a0),
                s1 if a1 is None else float(a1), sM if M is None else float(M),
                float(alpha), exact, name)
        if p.a0 <= 0:
            raise ProblemError(f"a_i(t) must be bounded below by a positive a0 (sampled a0={p.a0})")
        return p

    @property
    def m(self) -> int:
        return 2

    def system(self) -> System1D:
        nonlin = (self.fe, self.ge)
        return System1D(("x", "y"), (self.a1e, self.a2e), nonlin,
                        _jacobian_exprs(nonlin, ("x", "y")), (self.h1, self.h2))


def _zvars(m: int) -> tuple[str, ...]:
    return tuple(f"z{i + 1}" for i in range(m))


@dataclass(frozen=True)
class HamiltonianProblem:
    """``u_i'' - a(t) V_{z_i}(u) = f_i(t)``; ``Vz`` is derived from ``V``."""

    m: int
    V: Expr
    Vz: tuple[Expr, ...]
    a: Expr
    f: tuple[Expr, ...]
    f0: Expr | None
    a0: float
    a1: float
    M: float
    exact: tuple[Expr, ...] | None = None
    name: str = "hamiltonian"
    kind: str = field(default="hamiltonian", init=False)

    @classmethod
    def build(cls, V, a, f: Sequence, f0=None, *, a0=None, a1=None, M=None,
              name="hamiltonian", exact=None):
        m = len(f)
        zv = _zvars(m)
        V = _check_vars(as_expr(V), zv, "V(z)")
        a = _check_vars(as_expr(a), ("t",), "a(t)")
        fs = tuple(_check_vars(as_expr(fi), ("t",), f"f{i + 1}(t)") for i, fi in enumerate(f))
        f0 = None if f0 is None else _check_vars(as_expr(f0), ("t",), "f0(t)")
        s0, s1, sM, _ = sample_bounds(a, fs)
        p = cls(m, V, tuple(diff(V, z) for z in zv), a, fs, f0,
                s0 if a0 is None else float(a0), s1 if a1 is None else float(a1),
                sM if M is None else float(M), exact, name)
        if p.a0 <= 0:
            raise ProblemError(f"a(t) must be bounded below by a positive a0 (sampled a0={p.a0})")
        return p

    def system(self) -> System1D:
        zv = _zvars(self.m)
        return System1D(zv, (self.a,) * self.m, self.Vz, _jacobian_exprs(self.Vz, zv),
                        self.f, potential=self.V)


@dataclass(frozen=True)
class PdeProblem:
    """``Lap u_i - a(x1, x2) V_{z_i}(u) = f_i(x1, x2)`` on the plane."""

    m: int
    V: Expr
    Vz: tuple[Expr, ...]
    a: Expr
    f: tuple[Expr, ...]
    a0: float
    a1: float
    M: float
    exact: tuple[Expr, ...] | None = None
    name: str = "pde"
    n: int = 2
    kind: str = field(default="pde", init=False)

    @classmethod
    def build(cls, V, a, f: Sequence, *, a0=None, a1=None, M=None, name="pde", exact=None):
        m = len(f)
        zv = _zvars(m)
        xs = ("x1", "x2")
        V = _check_vars(as_expr(V), zv, "V(z)")
        a = _check_vars(as_expr(a), xs, "a(x)")
        fs = tuple(_check_vars(as_expr(fi), xs, f"f{i + 1}(x)") for i, fi in enumerate(f))
        n = int(round(2 * SAMPLE_L_2D / SAMPLE_H_2D))
        s = (2 * np.arange(n + 1) - n) * (SAMPLE_H_2D / 2)
        X1, X2 = np.meshgrid(s, s, indexing="ij")
        env = {"x1": X1, "x2": X2}
        av = eval_on(a, env, X1.shape)
        sM = max(float(np.max(np.abs(eval_on(fi, env, X1.shape)))) for fi in fs)
        p = cls(m, V, tuple(diff(V, z) for z in zv), a, fs,
                float(np.min(av)) if a0 is None else float(a0),
                float(np.max(av)) if a1 is None else float(a1),
                sM if M is None else float(M), exact, name)
        if p.a0 <= 0:
            raise ProblemError(f"a(x) must be bounded below by a positive a0 (sampled a0={p.a0})")
        return p

    @property
    def dvz(self) -> tuple[tuple[Expr, ...], ...]:
        return _jacobian_exprs(self.Vz, _zvars(self.m))


ProblemSpec = Union[ScalarProblem, CoupledSystemProblem, HamiltonianProblem, PdeProblem]


# ------------------------------------------------------------------ presets

def _example2_f0(a0: float) -> Expr:
    # Young's inequality with eps = a0/2:
    #   |z f| <= eps z^4 + (3/4)(4 eps)^(-1/3) |f|^(4/3),  |z f| <= eps z^2 + f^2/(4 eps)
    eps = a0 / 2.0
    c3 = max(0.75 * (4 * eps) ** (-1.0 / 3.0), 1.0 / (4 * eps))
    # f1 = f2 = exp(-t^2): f1^(4/3) = exp(-4t^2/3), f2^2 = exp(-2t^2)
    return as_expr(f"{c3!r} * (exp(-4 * t^2 / 3) + exp(-2 * t^2))")


def _build_preset(name: str) -> ProblemSpec:
    if name == "model_constant":
        return ScalarProblem.build("1", "1", name=name)
    if name == "counterexample_91":
        return ScalarProblem.build(
            "1", "2*cos(t) - t*sin(t) - t^3*sin(t)^3", name=name,
            exact=(as_expr("t*sin(t)"),))
    if name == "example1":
        return CoupledSystemProblem.build(
            "1", "1", "x + x^3 + 0.05*tanh(y)", "y + y^3 + 0.05*tanh(x)", "0.5", "0.5",
            name=name)
    if name == "example2":
        return HamiltonianProblem.build(
            "z1^4 + z2^2 + exp(-z1^2 - z2^2)", "1", ["exp(-t^2)", "exp(-t^2)"],
            f0=_example2_f0(1.0), name=name)
    if name == "pde_quartic":
        return PdeProblem.build("z1^4", "1", ["4"], name=name)
    raise UnknownPreset(name)


PRESETS = ("model_constant", "counterexample_91", "example1", "example2", "pde_quartic")
_PRESET_CACHE: dict[str, ProblemSpec] = {}


def preset(name: str) -> ProblemSpec:
    """Named problems: constant model, the unbounded-forcing counterexample,
    a coupled pair, a two-component Hamiltonian system and a quartic 2-D PDE."""
    if name not in PRESETS:
        raise UnknownPreset(name)
    if name not in _PRESET_CACHE:
        _PRESET_CACHE[name] = _build_preset(name)
    return _PRESET_CACHE[name]


# ------------------------------------------------------------- validation

def _lattice(d: int, R: float, k: int):
    axis = np.linspace(-R, R, k)
    return np.meshgrid(*([axis] * d), indexing="ij") if d > 1 else (axis,)


@dataclass(frozen=True)
class PsdReport:
    min_eigenvalue: float
    passed: bool
    samples: int
    argmin: tuple[float, float, float]
    sampled: bool = True


def psd_check(p: CoupledSystemProblem, sample_box=((-10.0, 10.0), (-5.0, 5.0), (-5.0, 5.0)),
              count: int = 10_000, seed: int = 0) -> PsdReport:
    """Smallest eigenvalue of the symmetric matrix of the coupling quadratic form.

    Samples ``(t, x, y)`` uniformly from ``sample_box`` and forms
    ``[[a1 f_x, (a1 f_y + a2 g_x)/2], [., a2 g_y]]``. Passes when the minimum
    is at least ``-1e-12``.
    """
    rng = np.random.default_rng(seed)
    (t0, t1), (x0, x1), (y0, y1) = sample_box
    t = rng.uniform(t0, t1, count)
    x = rng.uniform(x0, x1, count)
    y = rng.uniform(y0, y1, count)
    env = {"x": x, "y": y}
    c1 = eval_on(p.a1e, {"t": t}, t.shape)
    c2 = eval_on(p.a2e, {"t": t}, t.shape)
    A = c1 * eval_on(diff(p.fe, "x"), env, x.shape)
    D = c2 * eval_on(diff(p.ge, "y"), env, x.shape)
    B = 0.5 * (c1 * eval_on(diff(p.fe, "y"), env, x.shape)
               + c2 * eval_on(diff(p.ge, "x"), env, x.shape))
    lam = 0.5 * (A + D) - np.sqrt(0.25 * (A - D) ** 2 + B * B)
    k = int(np.argmin(lam))
    lmin = float(lam[k])
    return PsdReport(lmin, lmin >= -1e-12, count, (float(t[k]), float(x[k]), float(y[k])))


def lower_bound_check(p: HamiltonianProblem, L: float = 8.0, nt: int = 81, nz: int = 41,
                      zmax: float = Z_BOX) -> float:
    """Min over a coarse (t, z) lattice of ``a V(z) + sum z_i f_i(t) + f0(t)``.

    Non-negative means the integrable lower bound on the energy density
    holds on the lattice.
    """
    if p.f0 is None:
        raise ProblemError("problem declares no f0")
    t = np.linspace(-L, L, nt)
    zs = _lattice(p.m, zmax, nz) if p.m <= 3 else tuple(
        np.random.default_rng(0).uniform(-zmax, zmax, (p.m, 20_000)))
    zflat = [np.ravel(z) for z in zs]
    env = {f"z{i + 1}": zflat[i] for i in range(p.m)}
    Vv = eval_on(p.V, env, zflat[0].shape)
    worst = math.inf
    for tk in t:
        av = float(evaluate(p.a, {"t": tk}))
        dens = av * Vv + sum(zflat[i] * float(evaluate(p.f[i], {"t": tk})) for i in range(p.m))
        worst = min(worst, float(np.min(dens)) + float(evaluate(p.f0, {"t": tk})))
    return worst


def predicted_bounds(p: ProblemSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """A priori ``(K0, K1, K2)`` per component from problem constants only.

    Scalar problems use the closed form ``K0 = (M/a0)^(1/3)``. Other 1-D
    variants locate, by sampling with the remaining components over
    ``[-Z_BOX, Z_BOX]``, the largest ``|x|`` at which the nonlinearity can
    still balance ``M/a0`` (the maximum-principle argument at an extremum).
    """
    from .grid import derivative_bound_chain

    if isinstance(p, ScalarProblem):
        K0 = (p.M / p.a0) ** (1.0 / 3.0)
        K2 = p.a1 * K0 ** 3 + p.M
        return np.array([K0]), np.array([derivative_bound_chain(K0, K2)]), np.array([K2])
    sys = p.system() if not isinstance(p, PdeProblem) else None
    if sys is None:
        nonlin, zv = p.Vz, _zvars(p.m)
    else:
        nonlin, zv = sys.nonlin, sys.zvars
    m = len(zv)
    K0 = np.zeros(m)
    target = p.M / p.a0
    for i in range(m):
        K0[i] = max(_extremum_bound(nonlin[i], zv, i, target, +1),
                    _extremum_bound(nonlin[i], zv, i, target, -1))
    # |F_i| over the box |z_k| <= K0_k
    axes = [np.linspace(-K0[k], K0[k], 41) for k in range(m)]
    if m <= 3:
        grids = np.meshgrid(*axes, indexing="ij")
        pts = [np.ravel(g) for g in grids]
    else:
        rng = np.random.default_rng(0)
        pts = [rng.uniform(-K0[k], K0[k], 20_000) for k in range(m)]
    env = dict(zip(zv, pts))
    K2 = np.array([p.a1 * float(np.max(np.abs(eval_on(F, env, pts[0].shape)))) + p.M
                   for F in nonlin])
    K1 = np.array([derivative_bound_chain(K0[i], K2[i]) for i in range(m)])
    return K0, K1, K2


def _extremum_bound(F: Expr, zv, i: int, target: float, sign: int) -> float:
    """Largest ``s*x >= 0`` with ``s * min/max_others F(x, others) <= target``."""
    m = len(zv)
    others = [k for k in range(m) if k != i]
    if others:
        if len(others) <= 2:
            og = np.meshgrid(*[np.linspace(-Z_BOX, Z_BOX, 81)] * len(others), indexing="ij")
            ovals = [np.ravel(g) for g in og]
        else:
            rng = np.random.default_rng(1)
            ovals = [rng.uniform(-Z_BOX, Z_BOX, 10_000) for _ in others]
    else:
        ovals = []

    def worst(x: float) -> float:
        n = ovals[0].size if ovals else 1
        env = {zv[k]: v for k, v in zip(others, ovals)}
        env[zv[i]] = np.full(n, x)
        vals = sign * eval_on(F, env, (n,))
        return float(np.min(vals))

    xs = sign * np.linspace(0.0, 4 * Z_BOX, 801)
    feasible = [abs(x) for x in xs if worst(x) <= target]
    if not feasible:
        return 0.0
    lo = max(feasible)
    if lo >= 4 * Z_BOX:
        return math.inf
    hi = lo + 4 * Z_BOX / 800
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if worst(sign * mid) <= target:
            lo = mid
        else:
            hi = mid
    return hi


# ------------------------------------------------------ manufactured data

def manufacture(template: ProblemSpec, u_star: Sequence) -> ProblemSpec:
    """Replace the forcing so that ``u_star`` solves the equations exactly.

    1-D: ``f_i = u_i*'' - coef_i * nonlin_i(u*)``; 2-D: the Laplacian replaces
    the second derivative. The exact solution is stored in ``exact``.
    """
    u_star = tuple(as_expr(u) for u in u_star)
    if len(u_star) != template.m:
        raise ProblemError(f"need {template.m} exact component(s), got {len(u_star)}")
    if isinstance(template, PdeProblem):
        for u in u_star:
            _check_vars(u, ("x1", "x2"), "exact solution")
        sub = dict(zip(_zvars(template.m), u_star))
        fs = tuple(diff(diff(u, "x1"), "x1") + diff(diff(u, "x2"), "x2")
                   - template.a * substitute(Vz, sub)
                   for u, Vz in zip(u_star, template.Vz))
        return replace(template, f=fs, exact=u_star, name=f"{template.name}+mms")
    for u in u_star:
        _check_vars(u, ("t",), "exact solution")
    sys = template.system()
    sub = dict(zip(sys.zvars, u_star))
    fs = tuple(diff(diff(u, "t"), "t") - c * substitute(F, sub)
               for u, c, F in zip(u_star, sys.coef, sys.nonlin))
    name = f"{template.name}+mms"
    if isinstance(template, ScalarProblem):
        return replace(template, f=fs[0], exact=u_star, name=name,
                       M=sample_bounds(template.a, fs)[2])
    if isinstance(template, CoupledSystemProblem):
        return replace(template, h1=fs[0], h2=fs[1], exact=u_star, name=name,
                       M=sample_bounds(template.a1e, fs)[2])
    return replace(template, f=fs, exact=u_star, name=name,
                   M=sample_bounds(template.a, fs)[2])


def scalar_mms_gaussian() -> ScalarProblem:
    """Cubic scalar problem manufactured from ``u* = exp(-t^2)``."""
    return manufacture(ScalarProblem.build("1", "0", name="cubic"), ["exp(-t^2)"])


def pde_mms_gaussian() -> PdeProblem:
    """Linear 2-D problem (V = z1^2) manufactured from ``u* = exp(-x1^2 - x2^2)``."""
    return manufacture(PdeProblem.build("z1^2", "1", ["0"], name="quadratic"),
                       ["exp(-x1^2 - x2^2)"])
