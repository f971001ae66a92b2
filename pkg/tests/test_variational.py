import numpy as np
import pytest
from hypothesis import given, strategies as st

from boundsol.bvp1d import continuation_solve
from boundsol.checks import fd_check_gradient
from boundsol.grid import GridFn, make_grid, zero_extend
from boundsol.problems import HamiltonianProblem, preset
from boundsol.variational import (energy, energy_gradient, h1_bound_constant, min_energy_sequence,
                                  minimize, ml_table_csv, zero_state_energy)


def test_energy_of_zero_is_zero():
    g = make_grid(4, 0.1)
    assert energy(preset("example2"), GridFn.zeros(g, 2)) == 0.0


def test_energy_hand_value():
    # V = z^2/2, a = 1, f = 0: J = 1/2 sum (du)^2/h + h/2 sum u^2
    p = HamiltonianProblem.build("z1^2/2", "1", ["0"])
    g = make_grid(0.5, 0.25)  # three interior nodes
    u = GridFn(g, [1.0, 2.0, 1.0])
    kinetic = 0.5 * (1 + 1 + 1 + 1) / 0.25
    assert energy(p, u) == pytest.approx(kinetic + 0.25 * 0.5 * 6.0, rel=1e-14)


@pytest.mark.parametrize("name", ["model_constant", "example2"])
def test_gradient_fd(name):
    assert fd_check_gradient(preset(name)).max_rel_error <= 1e-6


def test_gradient_is_scaled_residual():
    from boundsol.bvp1d import residual
    p = preset("example2")
    g = make_grid(2, 0.1)
    u = GridFn(g, np.random.default_rng(0).normal(size=(2, g.n_interior)))
    np.testing.assert_allclose(energy_gradient(p, u).values, -g.h * residual(p, 1.0, u).values,
                               rtol=1e-14, atol=1e-14)


def test_minimizer_matches_continuation():
    p = preset("example2")
    g = make_grid(8, 0.01)
    u, rep = minimize(p, g)
    v = continuation_solve(p, g, tol=1e-10, bounds=False).solution
    assert np.max(np.abs(u.values - v.values)) <= 1e-8
    assert rep.grad_sup <= 1e-10
    assert all(b <= a + 1e-12 * max(1, abs(a)) for a, b in zip(rep.J_history, rep.J_history[1:]))


def test_minimize_rejects_problems_without_potential():
    with pytest.raises(TypeError):
        minimize(preset("example1"), make_grid(2, 0.1))


def test_min_energy_sequence_monotone_and_h1_bounded():
    p = preset("example2")
    recs = min_energy_sequence(p, [2, 4, 8], 0.02)
    M = [r.M_L for r in recs]
    assert M[2] <= M[1] <= M[0] + 1e-8
    C = h1_bound_constant(p, recs, make_grid(8, 0.02))
    assert all(r.h1_seminorm_sq <= C for r in recs)
    assert recs[0].J_raw == pytest.approx(recs[0].M_L + zero_state_energy(p, make_grid(2, 0.02)))
    assert ml_table_csv(recs).startswith("L,M_L,h1_seminorm_sq,iterations,J_raw\n")


@given(st.integers(0, 2**31), st.floats(0.1, 3.0))
def test_zero_extension_preserves_energy(seed, amp):
    p = preset("example2")
    small = make_grid(1, 0.1)
    u = GridFn(small, amp * np.random.default_rng(seed).uniform(-1, 1, (2, small.n_interior)))
    big = zero_extend(u, make_grid(4, 0.1))
    assert energy(p, big) == pytest.approx(energy(p, u), rel=1e-12, abs=1e-12)
