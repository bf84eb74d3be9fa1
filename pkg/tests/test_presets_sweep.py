import json

import numpy as np

from vesim.ensemble import EnsembleConfig, PopulationDistributions, run_ensemble
from vesim.model import default_environment, default_kinetics
from vesim.presets import (FIG4_EXPECTED_TYPES, describe_presets,
                           fig4_scenario, fig9_scenario)
from vesim.runner import run_scenario
from vesim.schedule import LightSignal
from vesim.sweep import SweepSpec, _point_worker, fig6_sweep, run_sweep


def test_preset_registry_complete():
    names = {name for name, _, _ in describe_presets()}
    assert {"fig3", "fig4", "fig5", "fig6", "fig9", "fig10",
            "fig11"} <= names


def test_fig4_scenario_selfcheck(tmp_path):
    out, _ = run_scenario(fig4_scenario(), tmp_path / "fig4")
    manifest = json.loads((out / "manifest.json").read_text())
    check = manifest["self_check"]
    # the type-sequence assertion ships inside the preset's manifest
    assert check["expected_types"] == FIG4_EXPECTED_TYPES
    for solver in ("fdm", "exact", "closed"):
        assert check[f"types_match_{solver}"] is True
    assert check["c_s_out_constant_in_type_b"] is True
    assert check["c_s_out_strictly_increasing_in_symport"] is True
    assert (out / "fig4" / "trajectory_fdm.csv").exists()
    sched = manifest["runs"]["fig4"]["schedule"]["fdm"]
    assert [c["type"] for c in sched] == FIG4_EXPECTED_TYPES


def test_fig9_scenario_shared_pool(tmp_path):
    scenario = fig9_scenario(seed=3, n_mod=6, n_ex=2)
    out, results = run_scenario(scenario, tmp_path / "fig9")
    res = results["fig9"]
    assert res["ensemble"] is not None
    assert res["shared_pool"] is not None
    assert len(res["shared_pool"].trajectories) == 6
    manifest = json.loads((out / "manifest.json").read_text())
    # the pooled-compartment baseline stays inside the closed-form
    # approximation's error band (same sampled vesicles on both sides)
    assert manifest["self_check"]["shared_pool_vs_independent_max_rel"] < 0.1
    assert (out / "fig9" / "ensemble_stats.csv").exists()
    assert (out / "fig9" / "shared_pool.csv").exists()


def test_empty_signal_constant_trajectories(tmp_path):
    import yaml
    from vesim.cli import main as cli_main
    from vesim.trajectory import read_trajectory_csv
    tree = {
        "run": {"solver": "all", "seed": 0},
        "vesicle": {"d_in": "87 nm", "d_mem": "14 nm", "n_pumps": 40,
                    "n_sym": 30, "permeability": "3e-6 m/s"},
        "signal": {"intervals": [], "horizon": 50},
        "sample_interval": 5.0,
        "fdm": {"dt": "1e-2 s", "record_stride": 500},
    }
    cfg = tmp_path / "dark.yaml"
    cfg.write_text(yaml.safe_dump(tree))
    assert cli_main(["run", "--config", str(cfg), "--out",
                     str(tmp_path / "o")]) == 0
    for solver in ("fdm", "exact", "closed"):
        data = read_trajectory_csv(tmp_path / "o" / "dark"
                                   / f"trajectory_{solver}.csv")
        assert np.allclose(data["C_H_in"], 3.98e-5, rtol=1e-12), solver
        assert np.allclose(data["C_S_in"], 300.0, rtol=1e-12), solver
        assert np.all(data["light"] == 0)


def test_sweep_point_failure_isolated():
    # an impossible point must produce an error row, not abort the sweep
    spec = SweepSpec(name="broken", description="", kind="illumination",
                     points=[{"symport_rate": 0.006, "permeability": -1.0,
                              "duration": 60.0},
                             {"symport_rate": 0.006, "permeability": 3e-6,
                              "duration": 60.0}])
    result = run_sweep(spec)
    assert result.summary["failed"] == 1
    assert "error" in result.rows[0]
    assert "error" not in result.rows[1]


def test_sweep_worker_roundtrip():
    row = _point_worker(("illumination",
                         {"symport_rate": 0.006, "permeability": 3e-6,
                          "duration": 60.0}, 0))
    assert row["symport_duration_closed"] > 0
    assert "error" not in row


def test_fig6_sweep_spec_covers_required_grid():
    spec = fig6_sweep()
    combos = {(p["symport_rate"], p["permeability"]) for p in spec.points}
    assert (0.006, 3e-6) in combos
    assert any(g > 0.006 for g, _ in combos)
    assert any(l > 3e-6 for _, l in combos)


def test_ensemble_parallel_matches_serial():
    pop = PopulationDistributions()
    kin = default_kinetics()
    cfg = EnsembleConfig(n_mod=6, n_ex=4, seed=11)
    env = default_environment(v_out=cfg.v_out_per_vesicle)
    sig = LightSignal([(0.0, 200.0)], 400.0)
    ts = np.array([0.0, 200.0, 400.0])
    serial = run_ensemble(pop, kin, env, sig, cfg, sample_times=ts,
                          workers=1)
    parallel = run_ensemble(pop, kin, env, sig, cfg, sample_times=ts,
                            workers=2)
    assert np.array_equal(serial.per_exp_c_s_out, parallel.per_exp_c_s_out)
    assert np.array_equal(serial.per_exp_mean_c_h_in,
                          parallel.per_exp_mean_c_h_in)
