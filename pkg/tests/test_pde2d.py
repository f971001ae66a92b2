import math

import numpy as np
import pytest

from boundsol.checks import fd_check_gradient, fd_check_jacobian
from boundsol.driver import MaxDomainReached
from boundsol.expr import evaluate
from boundsol.pde2d import (CGNoConvergence, GridFn2D, MarginTooLarge, _pcg, energy2d,
                            expand2d, holder_offsets, interior_bounds, make_grid2d,
                            min_energy_sequence2d, residual2d, solve2d)
from boundsol.problems import PdeProblem, pde_mms_gaussian, preset


def _sample(grid, p):
    X1, X2 = grid.mesh()
    return GridFn2D(grid, np.array([evaluate(e, {"x1": X1, "x2": X2}) for e in p.exact]))


def test_grid_nesting_and_restriction():
    g = make_grid2d(4, 0.1)
    X1, X2 = g.mesh()
    u = GridFn2D(g, X1 + 10 * X2)
    w = u.restrict(1)
    Y1, Y2 = w.grid.mesh()
    assert np.array_equal(w.values[0], Y1 + 10 * Y2)
    back = w.zero_extend(g)
    assert np.array_equal(back.restrict(1).values, w.values)
    with pytest.raises(ValueError):
        make_grid2d(1, 0.3)


def test_trivial_problem():
    p = PdeProblem.build("z1^2", "1", ["0"])
    g = make_grid2d(2, 0.25)
    assert np.all(residual2d(p, GridFn2D(g, np.zeros((1, 15, 15)))).values == 0)
    rep = solve2d(p, g)
    assert rep.iterations == 0 and np.all(rep.solution.values == 0)


def test_constant_ansatz_residual():
    p = preset("pde_quartic")
    g = make_grid2d(2, 0.1)
    r = residual2d(p, GridFn2D(g, -np.ones((1, 39, 39)))).values[0]
    assert np.max(np.abs(r[1:-1, 1:-1])) <= 1e-12
    assert np.all(r[0, 1:-1] == pytest.approx(1 / 0.01))


def test_mms_residual_second_order():
    p = pde_mms_gaussian()
    sups = [np.max(np.abs(residual2d(p, _sample(make_grid2d(5, h), p)).values))
            for h in (0.1, 0.05)]
    assert 3.6 <= sups[0] / sups[1] <= 4.4


@pytest.mark.parametrize("p", [preset("pde_quartic"), pde_mms_gaussian()], ids=["quartic", "mms"])
def test_fd_checks(p):
    assert fd_check_jacobian(p, L=2, h=0.2).max_rel_error <= 1e-6
    assert fd_check_gradient(p, L=2, h=0.2).max_rel_error <= 1e-6


def test_energy_zero_extension_invariant():
    p = preset("pde_quartic")
    g = make_grid2d(1, 0.1)
    u = GridFn2D(g, np.random.default_rng(0).uniform(-1, 1, (1, 19, 19)))
    assert energy2d(p, u.zero_extend(make_grid2d(3, 0.1))) == pytest.approx(energy2d(p, u),
                                                                            rel=1e-12)


def test_newton_and_minimize_agree():
    p = preset("pde_quartic")
    g = make_grid2d(3, 0.1)
    a = solve2d(p, g, "newton", 1e-9)
    b = solve2d(p, g, "minimize", 1e-9)
    assert a.method == "newton" and b.method == "minimize"
    assert np.max(np.abs(a.solution.values - b.solution.values)) <= 1e-8
    assert np.max(np.abs(a.solution.values)) <= 1 + 1e-6
    assert "square" in a.to_json()


def test_nonconvex_potential_routes_to_minimize():
    p = PdeProblem.build("z1^4 - z1^2", "1", ["0.1"])
    rep = solve2d(p, make_grid2d(2, 0.2), "newton", 1e-8)
    assert rep.method == "minimize" and rep.final_residual_sup <= 1e-8
    assert any("abandoned" in n for n in rep.notes)


def test_cg_failure_and_success():
    A = np.diag(np.arange(1.0, 51.0))
    b = np.ones(50)
    x, k = _pcg(lambda v: A @ v, np.ones(50), b)
    np.testing.assert_allclose(A @ x, b, rtol=1e-9)
    with pytest.raises(CGNoConvergence):
        _pcg(lambda v: A @ v, np.ones(50), b, max_iter=3)


def test_interior_bounds_trivial_and_bilinear():
    g = make_grid2d(4, 0.1)
    zero = interior_bounds(GridFn2D(g, np.zeros((1, 79, 79))))
    assert zero.as_tuple() == (0.0, 0.0, 0.0, 0.0)
    X1, X2 = g.mesh()
    ib = interior_bounds(GridFn2D(g, X1 * X2))
    assert ib.sup_D2u_margin2 == pytest.approx(1.0, rel=1e-9)
    assert ib.sup_Du_margin1 == pytest.approx(3.0, rel=1e-9)
    assert ib.holder_quotient_sample <= 1e-8
    with pytest.raises(MarginTooLarge):
        interior_bounds(GridFn2D(make_grid2d(2, 0.1), np.zeros((1, 39, 39))))


def test_holder_offsets():
    offs = holder_offsets(0.05, 64, seed=0)
    assert len(offs) == 64 == len(set(offs))
    assert all(0 < 0.05 * math.hypot(*o) <= 1 for o in offs)
    assert offs == holder_offsets(0.05, 64, seed=0)


def test_expand2d_quartic():
    s = expand2d(preset("pde_quartic"), 2, 1e-6, 4, 16, 0.1)
    assert s.converged
    assert np.max(np.abs(s.final_solution.values + 1)) <= 5e-3
    assert "x1,x2,u1" in s.window_csv()


def test_expand2d_infinite_tolerance_and_failure():
    p = preset("pde_quartic")
    s = expand2d(p, 2, math.inf, 4, 8, 0.2)
    assert s.converged and s.Ls == [4.0]
    with pytest.raises(MaxDomainReached):
        expand2d(p, 2, 0.0, 4, 8, 0.2)


def test_mms_2d_error():
    p = pde_mms_gaussian()
    w = solve2d(p, make_grid2d(4, 0.1)).solution.restrict(1.5)
    exact = _sample(w.grid, p)
    assert np.max(np.abs(w.values - exact.values)) <= 4e-3


def test_min_energy_2d_monotone():
    vals = [e for _, e in min_energy_sequence2d(pde_mms_gaussian(), [1, 2, 4], 0.1)]
    assert vals[2] <= vals[1] <= vals[0] + 1e-8


def test_csv_round_trip():
    g = make_grid2d(1, 0.25)
    u = GridFn2D(g, np.random.default_rng(0).normal(size=(2, 7, 7)))
    back = GridFn2D.from_csv(u.to_csv())
    assert np.array_equal(back.values, u.values) and back.grid == g
