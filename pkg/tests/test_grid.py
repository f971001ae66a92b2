import numpy as np
import pytest
from hypothesis import given, strategies as st

from boundsol.grid import (GridFn, NonConformingSpacing, WindowNotNested,
                           derivative_bound_chain, gridfn_from_csv, gridfn_to_csv, h1_seminorm_sq,
                           make_grid, restrict_to_window, sup_norm, zero_extend)


def test_make_grid_counts():
    g = make_grid(4, 0.01)
    assert g.n_cells == 800 and g.n_interior == 799
    assert g.nodes[0] == -4.0 and g.nodes[-1] == 4.0 and g.nodes[400] == 0.0


@pytest.mark.parametrize("L, h", [(1.0, 0.3), (0.0, 0.1), (1.0, -0.1), (0.05, 0.1)])
def test_nonconforming_spacing(L, h):
    with pytest.raises(NonConformingSpacing):
        make_grid(L, h)


@given(st.integers(1, 6), st.integers(1, 4), st.sampled_from([0.01, 0.02, 0.05, 0.1, 0.25]))
def test_nested_nodes_are_bitwise_identical(L0, k, h):
    small, big = make_grid(L0, h), make_grid(L0 * 2**k, h)
    off = (big.n_cells - small.n_cells) // 2
    assert np.array_equal(big.nodes[off:off + small.n_cells + 1], small.nodes)


def test_restrict_and_zero_extend_round_trip():
    g = make_grid(4, 0.05)
    f = GridFn.sample(g, np.cos)
    w = restrict_to_window(f, 2)
    assert np.array_equal(w.grid.interior, g.interior[(np.abs(g.interior) < 2 - 1e-12)])
    np.testing.assert_array_equal(w.values[0], np.cos(w.grid.interior))
    big = zero_extend(w, make_grid(8, 0.05))
    assert np.array_equal(restrict_to_window(big, 2).values, w.values)
    assert sup_norm(big) == sup_norm(w)


def test_window_errors():
    g = make_grid(4, 0.1)
    f = GridFn.zeros(g)
    with pytest.raises(WindowNotNested):
        restrict_to_window(f, 5)
    with pytest.raises(WindowNotNested):
        restrict_to_window(f, 0.05)  # window not on grid nodes
    with pytest.raises(WindowNotNested):
        zero_extend(f, make_grid(8, 0.05))


def test_gridfn_is_immutable_and_finite():
    g = make_grid(1, 0.5)
    f = GridFn(g, [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        f.values[0] = 5.0
    with pytest.raises(ValueError):
        GridFn(g, [1.0, np.nan, 3.0])
    with pytest.raises(ValueError):
        GridFn(g, [1.0, 2.0])


def test_h1_seminorm_of_hat_function():
    # hat of height 1 on [-1, 1]: |u'|^2 integrates to 2 exactly on nodes
    g = make_grid(1, 0.125)
    f = GridFn.sample(g, lambda t: 1 - np.abs(t))
    assert h1_seminorm_sq(f) == pytest.approx(2.0, rel=1e-14)


def test_h1_includes_boundary_gaps():
    g = make_grid(0.5, 0.5)  # one interior node at t = 0
    assert h1_seminorm_sq(GridFn(g, [1.0])) == pytest.approx(2 * (1 / 0.5) ** 2 * 0.5)


def test_derivative_chain():
    assert derivative_bound_chain(1.0, 2.0) == 3.0
    with pytest.raises(ValueError):
        derivative_bound_chain(-1.0, 0.0)


@given(st.lists(st.floats(-1e3, 1e3), min_size=6, max_size=6))
def test_derivative_chain_dominates_smooth_samples(coef):
    # u = sum c_k sin(k t / 2): compare sup|u'| against the chain bound
    t = np.linspace(-20, 20, 4001)
    k = np.arange(1, 7)[:, None] / 2
    c = np.array(coef)[:, None]
    u, du, d2u = (c * np.sin(k * t)).sum(0), (c * k * np.cos(k * t)).sum(0), \
        (-c * k**2 * np.sin(k * t)).sum(0)
    K0, K2 = np.abs(u).max(), np.abs(d2u).max()
    assert np.abs(du).max() <= derivative_bound_chain(K0, K2) * (1 + 1e-9) + 1e-9


def test_csv_round_trip():
    g = make_grid(2, 0.25)
    f = GridFn.sample(g, np.sin, np.cos)
    text = gridfn_to_csv(f)
    assert text.splitlines()[1] == "t,u1,u2"
    back = gridfn_from_csv("# config: {}\n" + text)
    assert back.grid == g and np.array_equal(back.values, f.values)
