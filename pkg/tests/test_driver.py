import json
import math

import numpy as np
import pytest

from boundsol.driver import (MaxDomainReached, StudyConfigError, blowup_demo, doubling_schedule,
                             expand_until_converged, mms_convergence, residual_order,
                             uniqueness_probe)
from boundsol.expr import evaluate
from boundsol.problems import ScalarProblem, preset, scalar_mms_gaussian


def test_doubling_schedule():
    assert doubling_schedule(4, 32) == [4, 8, 16, 32]
    with pytest.raises(StudyConfigError):
        doubling_schedule(4, 24)


@pytest.mark.parametrize("kw", [dict(W=8, L0=4), dict(W=2, L0=0.5), dict(W=2, L0=4.005),
                                dict(W=2.005, L0=4)])
def test_study_preconditions(kw):
    with pytest.raises(StudyConfigError):
        expand_until_converged(preset("model_constant"), kw["W"], 1e-6, kw["L0"],
                               kw["L0"] * 4, h=0.01)


def test_model_constant_study():
    s = expand_until_converged(preset("model_constant"), 2, 1e-6, 4, 32, h=0.01)
    assert s.converged and s.Ls[0] == 4
    assert all(b < a for a, b in zip(s.diffs, s.diffs[1:]))
    assert np.max(np.abs(s.final_solution.values + 1)) <= 1e-4
    # every level passes the same L-independent predicted bounds
    assert all(b.passed for b in s.bounds_reports)
    assert len({(b.K0_predicted, b.K1_predicted, b.K2_predicted) for b in s.bounds_reports}) == 1
    d = json.loads(s.to_json())
    assert d["converged"] and len(d["decay_rates"]) == len(s.diffs) - 1


def test_mms_study_recovers_exact_solution():
    p = scalar_mms_gaussian()
    s = expand_until_converged(p, 2, 1e-6, 4, 32, h=0.01)
    t = s.final_solution.grid.interior
    assert np.max(np.abs(s.final_solution.values[0] - np.exp(-t * t))) <= 2e-4


def test_variational_study_example2():
    s = expand_until_converged(preset("example2"), 2, 1e-6, 4, 32, solver="variational", h=0.02)
    assert s.converged and all(b.passed for b in s.bounds_reports)


def test_infinite_tolerance_single_solve():
    s = expand_until_converged(preset("model_constant"), 2, math.inf, 4, 32, h=0.05)
    assert s.converged and s.Ls == [4.0] and s.diffs == []


def test_max_domain_reached_carries_partial_study():
    with pytest.raises(MaxDomainReached) as info:
        expand_until_converged(preset("model_constant"), 2, 1e-14, 4, 8, h=0.05)
    st = info.value.study
    assert not st.converged and st.Ls == [4.0, 8.0] and len(st.diffs) == 1


def test_study_is_bitwise_reproducible():
    a = expand_until_converged(preset("model_constant"), 2, 1e-6, 4, 32, h=0.05)
    b = expand_until_converged(preset("model_constant"), 2, 1e-6, 4, 32, h=0.05)
    assert a.to_json() == b.to_json()


def test_uniqueness_probe():
    assert uniqueness_probe(preset("model_constant"), 2, 8, seeds=4) <= 1e-8
    assert uniqueness_probe(preset("model_constant"), 2, 8, seeds=1) == 0.0
    zero = ScalarProblem.build("1", "0")
    assert uniqueness_probe(zero, 2, 4, seeds=5) == 0.0


def test_exact_residual_order():
    r = residual_order(preset("counterexample_91"), 10.0, 0.01)
    assert 3.6 <= r.ratio <= 4.4
    assert abs(r.center_h - r.center_predicted) <= 0.15 * abs(r.center_predicted)


def test_blowup_growth():
    rep = blowup_demo([4, 8, 16], 0.01)
    sups = [row["sup_u"] for row in rep.rows]
    assert all(b > a for a, b in zip(sups, sups[1:]))
    assert rep.passed and sups[-1] > 4
    # the window residual of the exact solution does not depend on L
    res = {row["exact_residual_window_sup"] for row in rep.rows}
    assert len(res) == 1
    assert rep.table_csv().splitlines()[0] == "L,sup_u,exact_residual_window_sup"


def test_mms_convergence_second_order():
    rep = mms_convergence(scalar_mms_gaussian(), 8, 2, [0.02, 0.01, 0.005])
    assert all(3.2 <= r <= 4.8 for r in rep.ratios)
