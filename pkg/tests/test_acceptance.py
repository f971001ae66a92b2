"""Acceptance criteria, one test each, at their stated tolerances.

Each test records a one-line verdict in ``RESULTS``; ``conftest.py`` prints
them at the end of the session. ``python tests/test_acceptance.py`` runs the
same checks without pytest.
"""
import math
import time

import numpy as np

from boundsol.bvp1d import continuation_solve
from boundsol.checks import fd_check_gradient, fd_check_jacobian
from boundsol.driver import (blowup_demo, expand_until_converged, mms_convergence,
                             residual_order, uniqueness_probe)
from boundsol.grid import make_grid
from boundsol.pde2d import interior_bounds, make_grid2d, solve2d
from boundsol.problems import (CoupledSystemProblem, ScalarProblem, pde_mms_gaussian, preset,
                               psd_check, scalar_mms_gaussian)
from boundsol.variational import h1_bound_constant, min_energy_sequence, minimize

RESULTS: dict[int, str] = {}


def record(n: int, title: str, ok: bool, detail: str) -> None:
    RESULTS[n] = f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d} {title}: {detail}"
    print(RESULTS[n])
    assert ok, RESULTS[n]


def test_c01_constant_solution_oracle():
    t0 = time.perf_counter()
    s = expand_until_converged(preset("model_constant"), W=2, tol=1e-6, L0=4, Lmax=32, h=0.01)
    elapsed = time.perf_counter() - t0
    err = float(np.max(np.abs(s.final_solution.values + 1.0)))
    record(1, "constant solution", s.converged and err <= 1e-3 and elapsed <= 10,
           f"window sup|u+1| = {err:.2e} (<= 1e-3), Ls = {s.Ls}, {elapsed:.2f} s (<= 10 s)")


def test_c02_max_principle_bound():
    worst = 0.0
    for f in ("1", "cos(t)", "exp(-t^2)"):
        p = ScalarProblem.build("1", f)
        for L in (4, 8, 16, 32):
            u = continuation_solve(p, make_grid(L, 0.01), bounds=False).solution
            worst = max(worst, float(np.max(np.abs(u.values))))
    record(2, "max-principle bound", worst <= 1 + 1e-6,
           f"max sup|u| over 3 forcings x L in {{4,8,16,32}} = {worst:.9f} (<= 1 + 1e-6)")


def test_c03_discretization_order():
    r = residual_order(preset("counterexample_91"), L=10.0, h=0.01)
    rel = abs(r.center_h - r.center_predicted) / abs(r.center_predicted)
    record(3, "second-order residual", 3.6 <= r.ratio <= 4.4 and rel <= 0.15,
           f"ratio {r.ratio:.4f} in [3.6, 4.4]; r(0) = {r.center_h:.4e} vs -h^2/3 = "
           f"{r.center_predicted:.4e} (rel {rel:.1e} <= 0.15)")


def test_c04_blowup():
    rep = blowup_demo([4, 8, 16], h=0.01)
    sups = [row["sup_u"] for row in rep.rows]
    ok = all(b > a for a, b in zip(sups, sups[1:])) and sups[-1] > 4
    record(4, "blow-up under unbounded forcing", ok,
           "sup|u_L| = " + ", ".join(f"{s:.3f}" for s in sups) + " (strictly increasing, last > 4)")


def test_c05_fd_checks():
    reports = [
        fd_check_jacobian(preset("model_constant")),
        fd_check_jacobian(preset("example1")),
        fd_check_jacobian(preset("example2")),
        fd_check_gradient(preset("example2")),
        fd_check_jacobian(preset("pde_quartic")),
        fd_check_gradient(preset("pde_quartic")),
        fd_check_jacobian(pde_mms_gaussian()),
        fd_check_gradient(pde_mms_gaussian()),
    ]
    worst = max(r.max_rel_error for r in reports)
    record(5, "Jacobian / gradient FD checks", all(r.trials == 20 for r in reports) and worst <= 1e-6,
           f"worst relative error {worst:.1e} over {len(reports)} checks x 20 trials (<= 1e-6)")


def test_c06_cross_solver():
    p = preset("example2")
    g = make_grid(8, 0.01)
    u, _ = minimize(p, g)
    v = continuation_solve(p, g, bounds=False).solution
    d = float(np.max(np.abs(u.values - v.values)))
    record(6, "minimizer = continuation solution", d <= 1e-8, f"sup difference {d:.1e} (<= 1e-8)")


def test_c07_energy_monotone():
    p = preset("example2")
    recs = min_energy_sequence(p, [2, 4, 8], 0.01)
    M = [r.M_L for r in recs]
    C = h1_bound_constant(p, recs, make_grid(8, 0.01))
    h1 = [r.h1_seminorm_sq for r in recs]
    ok = M[2] <= M[1] <= M[0] + 1e-8 and max(h1) <= C
    record(7, "M_L monotone, H1 bounded", ok,
           "M_L = " + ", ".join(f"{m:.6f}" for m in M)
           + "; |u'|^2 = " + ", ".join(f"{x:.4f}" for x in h1) + f" <= {C:.4f}")


def test_c08_mms():
    r1 = mms_convergence(scalar_mms_gaussian(), L=8, W=2, hs=[0.01, 0.005])
    r2 = mms_convergence(pde_mms_gaussian(), L=4, W=1.5, hs=[0.05, 0.025])
    ok = (r1.errors[0] <= 2e-4 and 3.2 <= r1.ratios[0] <= 4.8
          and r2.errors[0] <= 1e-3 and 3.2 <= r2.ratios[0] <= 4.8)
    record(8, "manufactured solutions", ok,
           f"1-D err {r1.errors[0]:.2e} (<= 2e-4) ratio {r1.ratios[0]:.3f}; "
           f"2-D err {r2.errors[0]:.2e} (<= 1e-3) ratio {r2.ratios[0]:.3f} (4 +- 20%)")


def test_c09_uniqueness():
    d = uniqueness_probe(preset("model_constant"), W=2, L=8, seeds=4, h=0.01)
    record(9, "uniqueness probe", d <= 1e-8, f"max pairwise window difference {d:.1e} (<= 1e-8)")


def test_c10_pde_constant_and_interior_bounds():
    p = preset("pde_quartic")
    t0 = time.perf_counter()
    centers, sups, bounds = [], [], {}
    prev = None
    for L in (4, 8, 16):
        g = make_grid2d(L, 0.05)
        u0 = None if prev is None else prev.zero_extend(g)
        u = solve2d(p, g, "newton", 1e-9, u0).solution
        c = g.n_interior // 2
        centers.append(abs(u.values[0, c, c] + 1))
        sups.append(float(np.max(np.abs(u.values))))
        bounds[L] = interior_bounds(u).as_tuple()
        prev = u
    elapsed = time.perf_counter() - t0
    growth = max(b / a - 1 if a > 0 else (0.0 if b == 0 else math.inf)
                 for a, b in zip(bounds[8], bounds[16]))
    ok = max(centers) <= 5e-3 and max(sups) <= 1 + 1e-6 and growth <= 0.05 and elapsed <= 120
    record(10, "2-D constant oracle and interior bounds", ok,
           f"max |u(0)+1| {max(centers):.1e} (<= 5e-3), max sup|u| {max(sups):.9f}, "
           f"bounds growth 8->16 {growth:+.2e} (<= 5%), {elapsed:.1f} s (<= 120 s)")


def test_c11_psd():
    good = psd_check(preset("example1"), count=10_000)
    broken = CoupledSystemProblem.build("1", "1", "-x + x^3", "y + y^3", "0.5", "0.5", alpha=0.0)
    bad = psd_check(broken, count=10_000)
    ok = good.passed and good.min_eigenvalue >= 0.9 and not bad.passed
    record(11, "PSD check", ok, f"example1 min eigenvalue {good.min_eigenvalue:.4f} (>= 0.9); "
           f"broken variant {bad.min_eigenvalue:.3f} fails")


if __name__ == "__main__":
    import sys
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_c"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
