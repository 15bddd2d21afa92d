import numpy as np
import pytest

from echomem.config import scenario_from_dict, sweep_from_dict
from echomem.runner import (
    compare_engines,
    oracle_check,
    run_angular,
    run_scenario,
    run_sweep,
)
from echomem.ensemble import WaveVectorSet


def test_semiclassical_report():
    rep = run_scenario(scenario_from_dict({"pulse_error": {"epsilon": 0.01}}))
    assert np.isclose(rep.nsr, 2.5e-5, rtol=1e-4)
    assert rep.abs_dev < 1e-10 * rep.formula_nsr
    assert rep.formula_kind == "exact"


def test_quantum_pumping_report():
    rep = run_scenario(scenario_from_dict({"engine": "quantum",
                                           "pumping_defect": {"defect_count": 20}}))
    assert np.isclose(rep.echo, 980**2 / 1000, rtol=1e-12)
    assert np.isclose(rep.noise, 20 * 980 / 1000, rtol=1e-12)
    assert rep.sectors["pumping_norm"] > 0


def test_oracle_report_matches_quantum():
    raw = {"ensemble": {"atom_count": 8}, "pulse_error": {"model": "random", "epsilon_scale": 0.2,
                                                          "axis_mode": "uniform"}}
    q = run_scenario(scenario_from_dict({**raw, "engine": "quantum"}))
    o = run_scenario(scenario_from_dict({**raw, "engine": "oracle"}))
    assert abs(q.echo - o.echo) < 1e-10 * q.echo and abs(q.noise - o.noise) < 1e-10 * q.echo


def test_bound_kind_for_gradient():
    rep = run_scenario(scenario_from_dict({"pulse_error": {"model": "gradient", "epsilon_max": 0.1}}))
    assert rep.formula_kind == "bound"
    assert rep.noise <= rep.formula_noise


def test_sweep_epsilon_monotone():
    spec = sweep_from_dict({"sweep": {"parameter": "epsilon", "values": [0, 0.005, 0.01, 0.02]}})
    res = run_sweep(spec)
    nsr = [r["nsr"] for r in res.rows]
    assert len(res.rows) == 4 and np.all(np.diff(nsr) > 0)


def test_sweep_m_follows_quadratic_law():
    spec = sweep_from_dict({"pulse_error": {"epsilon": 0.01}, "timeline": {"spacing": 50.0},
                            "ensemble": {"atom_count": 2000},
                            "sweep": {"parameter": "m", "values": [1, 10, 20, 30]}})
    for row in run_sweep(spec).rows:
        assert abs(row["nsr"] - row["value"] ** 2 * 5e-5) < 0.15 * row["value"] ** 2 * 5e-5 + 1e-3


def test_sweep_continues_after_failure():
    spec = sweep_from_dict({"engine": "quantum",
                            "sweep": {"parameter": "defect_fraction", "values": [0.1, 1.0, 0.2]}})
    res = run_sweep(spec)
    assert [r["value"] for r in res.rows] == [0.1, 0.2]
    assert res.failures[0]["index"] == 1


def test_sweep_threads_do_not_change_rows():
    spec = sweep_from_dict({"sweep": {"parameter": "tau", "values": [1.0, 2.0, 3.0, 4.0]},
                            "pulse_error": {"epsilon": 0.05}})
    assert run_sweep(spec, threads=1).rows == run_sweep(spec, threads=3).rows


def test_compare_small_ensemble_all_engines():
    cfg = scenario_from_dict({"ensemble": {"atom_count": 8},
                              "pulse_error": {"model": "random", "epsilon_scale": 0.05,
                                              "axis_mode": "uniform"}})
    res = compare_engines(cfg)
    assert res.passed
    statuses = {(p["a"], p["b"]): p["status"] for p in res.pairs}
    assert statuses[("quantum", "oracle")] == "pass"
    assert statuses[("quantum_avg", "oracle_avg")] == "pass"
    assert statuses[("semiclassical", "quantum_avg")] == "pass"
    assert statuses[("semiclassical", "quantum")] == "skip"


def test_compare_ideal_everything_agrees():
    cfg = scenario_from_dict({"ensemble": {"atom_count": 6}, "pulse_error": {"model": "ideal"}})
    res = compare_engines(cfg)
    for p in res.pairs:
        if p["status"] != "skip":
            assert p["deviation"] <= 1e-12


def test_compare_uniform_small_error():
    cfg = scenario_from_dict({"ensemble": {"atom_count": 500}, "pulse_error": {"epsilon": 0.05}})
    res = compare_engines(cfg, ("semiclassical", "quantum_avg", "oracle"))
    pair = res.pairs[0]
    assert pair["status"] == "pass" and pair["deviation"] <= 0.05**4
    assert res.engines["oracle"]["status"] == "skip"


def test_compare_skips_pumping_for_semiclassical():
    cfg = scenario_from_dict({"engine": "quantum", "ensemble": {"atom_count": 6},
                              "pumping_defect": {"defect_count": 1}})
    res = compare_engines(cfg)
    assert res.engines["semiclassical"]["status"] == "skip"


def test_angular_arc_peaks_at_center():
    cfg = scenario_from_dict({"ensemble": {"atom_count": 500, "box_dimensions": [50, 50, 50]},
                              "angular": {"mode": "arc", "theta_max_deg": 5.0, "points": 21}})
    res = run_angular(cfg)
    center = res.rows[10]
    assert center["theta_deg"] < 1e-9
    assert center["intensity"] == max(r["intensity"] for r in res.rows)


def test_oracle_check_passes():
    res = oracle_check(WaveVectorSet.counter_propagating(), instances=10, max_atoms=8, seed=1)
    assert res["passed"] and res["worst_relative_deviation"] < 1e-10
