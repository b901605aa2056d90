import numpy as np
import pytest

import nova


def test_registry():
    assert nova.list_problems()[:4] == ["P1", "P2", "P3", "P4"]
    info = nova.problem_info("P2")
    assert info["dim"] == 2
    assert info["builders"]


def test_run_reaches_reference_point():
    res = nova.run(problem="P2")
    assert res["status"] == "stationary"
    assert np.linalg.norm(res["x"] - np.ones(2)) <= 1e-4
    assert len(res["trace"]) == res["iterations"]
    assert all(row["max_g"] <= 1e-9 for row in res["trace"])


def test_runs_are_deterministic():
    a = nova.run(problem="P3", x0="random", seed=5)
    b = nova.run(problem="P3", x0="random", seed=5)
    assert np.array_equal(a["x"], b["x"])
    assert [r["U"] for r in a["trace"]] == [r["U"] for r in b["trace"]]


def test_simulate_counts_messages():
    res = nova.simulate(problem="P2", simulate={"mode": "primal"})
    assert res["status"] == "stationary"
    assert res["total_messages"] == sum(r["messages"] for r in res["rounds"])
    assert res["total_messages"] == 2 * res["agents"] * len(res["rounds"])


def test_step_sequence():
    g = nova.step_sequence(1.0, 0.5, 3)
    assert g == [1.0, 0.5, 0.375]


def test_grid_oracle():
    r = nova.grid_oracle("P2", 0.01)
    assert r["found"]
    assert np.allclose(r["point"], [1.0, 1.0])
    assert r["value"] == pytest.approx(2.0)


def test_surrogates_verify():
    assert all(nova.verify_surrogates("P1", samples=200).values())


def test_feasible_samples():
    pts = nova.sample_feasible_points("P2", 3, seed=1)
    assert len(pts) == 3 and pts[0].shape == (2,)


def test_errors_map_to_exception_classes():
    with pytest.raises(nova.ConfigError):
        nova.run(problem="P9")
    with pytest.raises(nova.ConfigError):
        nova.run(problem="P2", stepsize=0.1)
    with pytest.raises(nova.NovaError):
        nova.run(problem="P2", step={"kind": "constant", "gamma": 1.0, "gamma_max": 1.0,
                                     "L_grad_U": 2.0, "c_tilde": 0.4})
