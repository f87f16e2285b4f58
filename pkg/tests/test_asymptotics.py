import math

import pytest

from planar_morse.asymptotics import (
    eigenvalue_sweep,
    good_set_sweep,
    potential_convergence,
    profile_convergence,
    trend_statistics,
)
from planar_morse.theta import theta_sequence


def test_eigen_sweep_m1_trend():
    res = eigenvalue_sweep(1, 0.0, (5.0, 10.0, 20.0))
    assert [r["p"] for r in res.rows] == [5.0, 10.0, 20.0]
    assert all(r["status"] == "ok" for r in res.rows)
    err = [r["error"][0] for r in res.rows]
    assert all(b < a for a, b in zip(err, err[1:]))
    assert res.trend["1"]["last_three_decreasing"]
    assert res.rows[0]["target"] == [-1.0]


def test_eigen_sweep_targets_include_henon_factor():
    res = eigenvalue_sweep(2, 1.0, (5.0, 10.0))
    table = theta_sequence(2)
    a2 = 1.5**2
    assert res.rows[0]["target"] == [a2 * table.beta(1), a2 * table.beta(0)]
    for r in res.rows:
        assert r["nu"][0] < -a2 < r["nu"][1] < 0


def test_failed_rows_are_kept():
    res = eigenvalue_sweep(2, 0.0, (5.0, 10.0), method="galerkin")
    assert all(r["status"] == "ok" for r in res.rows)
    # below p = 2 the Galerkin oracle reports a ConvergenceFailure; the row stays
    res = eigenvalue_sweep(2, 0.0, (1.5, 5.0), method="galerkin")
    assert res.rows[0]["status"].startswith("failed: ConvergenceFailure")
    assert res.rows[1]["status"] == "ok"
    assert res.rows[0]["nu"] is None


def test_sweep_jobs_independent():
    a = eigenvalue_sweep(1, 0.0, (5.0, 10.0, 20.0), jobs=1).as_dict()
    b = eigenvalue_sweep(1, 0.0, (5.0, 10.0, 20.0), jobs=3).as_dict()
    assert a == b


@pytest.mark.parametrize("grid", [(), (5.0, 5.0), (10.0, 5.0), (0.5, 5.0), (5.0, 500.0)])
def test_grid_validation(grid):
    with pytest.raises(ValueError):
        eigenvalue_sweep(1, 0.0, grid)


def test_trend_ceiling_stabilization():
    rows = [{"status": "ok", "error": [e, 1e-3], "ceil": [c, 0]}
            for e, c in [(3.0, 4), (2.0, 5), (1.0, 5), (0.5, 5)]]
    t = trend_statistics(rows, 2)
    assert t["1"]["ceil_stabilized"] and t["1"]["target_ceil"] == 5
    assert t["1"]["last_three_decreasing"]
    assert not t["2"]["last_three_decreasing"]
    rows[-1]["ceil"] = [4, 0]
    assert not trend_statistics(rows, 2)["1"]["ceil_stabilized"]


def test_profile_convergence_decreases():
    res = profile_convergence(2, (10.0, 20.0, 40.0))
    for i in ("0", "1"):
        vals = res.trend["sup_distance"][i]["values"]
        assert all(b < a for a, b in zip(vals, vals[1:]))
    ratio = res.trend["s_over_eps_error"]["1"]["values"]
    assert all(b < a for a, b in zip(ratio, ratio[1:]))
    row = next(r for r in res.rows if r["p"] == 40.0 and r["i"] == 1)
    t1 = theta_sequence(1).theta(1)
    assert row["s_over_eps_target"] == pytest.approx(math.sqrt((t1**2 - 4) / 2))


def test_potential_convergence_decreases():
    res = potential_convergence(2, (20.0, 40.0, 80.0))
    for i in ("0", "1"):
        vals = res.trend["sup_distance"][i]["values"]
        assert all(b < a for a, b in zip(vals, vals[1:]))
    assert "s_over_eps" not in res.rows[0]


def test_good_set_sweep():
    res = good_set_sweep(2, (10.0, 40.0), K_values=(4.0, 16.0))
    for r in res.rows:
        assert 0 <= r["max_f_good_set"] <= r["max_f"] * (1 + 1e-9) + 1e-12
