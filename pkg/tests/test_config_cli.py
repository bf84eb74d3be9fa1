import json
import math
import subprocess
import sys

import pytest
import yaml

from vesim.cli import main as cli_main
from vesim.config import (ConfigError, config_hash, load_config,
                          parse_config, parse_quantity, to_config_tree)
from vesim.runner import emit_plot_data, run_scenario
from vesim.trajectory import read_trajectory_csv

MINIMAL = {
    "run": {"solver": "closed", "seed": 5},
    "vesicle": {"d_in": "87 nm", "d_mem": "14 nm", "n_pumps": 40,
                "n_sym": 30, "permeability": "3e-6 m/s"},
    "signal": {"intervals": [[0, 60]], "horizon": 120},
}


class TestQuantities:
    def test_basic_units(self):
        assert parse_quantity("87 nm", "length", "x") == pytest.approx(
            8.7e-8)
        assert parse_quantity("1 mL", "volume", "x") == pytest.approx(1e-6)
        assert parse_quantity("20 mol/m^3", "concentration", "x") == 20.0
        assert parse_quantity("2 min", "time", "x") == 120.0
        assert parse_quantity("1.685e-3 1/nm^2", "areal_density", "x") \
            == pytest.approx(1.685e15)

    def test_dimension_mismatch_is_hard_error(self):
        with pytest.raises(ConfigError, match="expected a length"):
            parse_quantity("87 s", "length", "vesicle.d_in")

    def test_bare_number_rejected_for_quantity(self):
        with pytest.raises(ConfigError, match="unit suffix"):
            parse_quantity(87, "length", "vesicle.d_in")

    def test_unknown_unit(self):
        with pytest.raises(ConfigError, match="unknown unit"):
            parse_quantity("87 furlong", "length", "x")

    def test_field_path_in_message(self):
        cfg = dict(MINIMAL, vesicle=dict(MINIMAL["vesicle"],
                                         d_in="87 mol/m^3"))
        with pytest.raises(ConfigError, match="vesicle.d_in"):
            parse_config(cfg)


class TestParsing:
    def test_minimal_roundtrip_hash(self):
        cfg = parse_config(MINIMAL)
        tree = to_config_tree(cfg)
        cfg2 = parse_config(tree)
        assert config_hash(cfg) == config_hash(cfg2)

    def test_defaults_match_reference_table(self):
        cfg = parse_config(MINIMAL)
        assert cfg.environment.buffer_total == 20.0
        assert cfg.environment.k_a == pytest.approx(6.2e-5)
        assert cfg.environment.c_s_in0 == 300.0
        assert cfg.kinetics.k_m == pytest.approx(1.3e-2)
        assert cfg.kinetics.stoichiometry == 3.0
        assert cfg.kinetics.xi == 0.015
        assert cfg.fdm.dt == pytest.approx(1e-2)

    def test_exactly_one_of_vesicle_population(self):
        cfg = dict(MINIMAL)
        cfg["population"] = {}
        with pytest.raises(ConfigError, match="exactly one"):
            parse_config(cfg)
        cfg2 = {k: v for k, v in MINIMAL.items() if k != "vesicle"}
        with pytest.raises(ConfigError, match="exactly one"):
            parse_config(cfg2)

    def test_population_requires_ensemble(self):
        cfg = {"run": {"solver": "closed"}, "population": {},
               "signal": {"intervals": [[0, 60]], "horizon": 120}}
        cfg["ensemble"] = {"n_mod": 4, "n_ex": 2}
        parsed = parse_config(cfg)
        assert parsed.population is not None
        assert parsed.environment.v_out == pytest.approx(1e-17)
        tree = to_config_tree(parsed)
        assert config_hash(parse_config(tree)) == config_hash(parsed)

    def test_population_diameter_log_units(self):
        cfg = {"run": {}, "population": {
                   "diameter": {"shift": "39.74 nm", "mu_log": 4.16,
                                "sigma_log": 0.62, "log_unit": "nm"}},
               "ensemble": {"n_mod": 2, "n_ex": 2},
               "signal": {"intervals": [], "horizon": 10}}
        parsed = parse_config(cfg)
        assert parsed.population.diameter.mu_log == pytest.approx(
            4.16 + math.log(1e-9))

    def test_bad_signal(self):
        cfg = dict(MINIMAL, signal={"intervals": [[60, 10]], "horizon": 120})
        with pytest.raises(ConfigError, match="signal"):
            parse_config(cfg)

    def test_missing_horizon(self):
        cfg = dict(MINIMAL, signal={"intervals": [[0, 10]]})
        with pytest.raises(ConfigError, match="horizon"):
            parse_config(cfg)


class TestRunnerArtifacts:
    def test_config_run_artifacts_and_determinism(self, tmp_path):
        cfg_path = tmp_path / "cfg.yaml"
        cfg_path.write_text(yaml.safe_dump(MINIMAL))
        from vesim.presets import Scenario
        cfg = load_config(cfg_path, label="mini")
        out1, _ = run_scenario(Scenario("mini", "test", [cfg]),
                               tmp_path / "a")
        out2, _ = run_scenario(Scenario("mini", "test", [cfg]),
                               tmp_path / "b")
        f1 = (out1 / "mini" / "trajectory_closed.csv").read_bytes()
        f2 = (out2 / "mini" / "trajectory_closed.csv").read_bytes()
        assert f1 == f2  # identical config + seed: byte-identical output
        manifest = json.loads((out1 / "manifest.json").read_text())
        assert manifest["runs"]["mini"]["config_hash"] == config_hash(cfg)

    def test_manifest_roundtrip(self, tmp_path):
        from vesim.presets import Scenario
        cfg = parse_config(MINIMAL, label="mini")
        out, _ = run_scenario(Scenario("mini", "t", [cfg]), tmp_path / "m")
        manifest = json.loads((out / "manifest.json").read_text())
        reparsed = parse_config(manifest["runs"]["mini"]["config"])
        assert config_hash(reparsed) == manifest["runs"]["mini"]["config_hash"]

    def test_trajectory_csv_schema(self, tmp_path):
        from vesim.presets import Scenario
        cfg = parse_config(dict(MINIMAL, run={"solver": "all", "seed": 1}),
                           label="mini")
        out, _ = run_scenario(Scenario("mini", "t", [cfg]), tmp_path / "s")
        fdm = read_trajectory_csv(out / "mini" / "trajectory_fdm.csv")
        assert list(fdm)[:8] == ["t", "C_H_in", "C_H_out", "C_S_in",
                                 "C_S_out", "phase", "cycle", "light"]
        assert "solver" not in fdm
        exact = read_trajectory_csv(out / "mini" / "trajectory_exact.csv")
        assert "solver" in exact and set(exact["solver"]) == {"exact"}

    def test_emit_plot_data(self, tmp_path):
        from vesim.presets import Scenario
        cfg = parse_config(MINIMAL, label="mini")
        out, _ = run_scenario(Scenario("mini", "t", [cfg]), tmp_path / "p")
        plot = emit_plot_data(out)
        lines = plot.read_text().splitlines()
        assert lines[0] == "series,t,value"
        series = {ln.split(",")[0] for ln in lines[1:]}
        assert "mini/closed/C_H_in" in series
        assert "mini/closed/light" in series

    def test_emit_plot_data_empty_dir(self, tmp_path):
        from vesim.runner import MissingArtifacts
        with pytest.raises(MissingArtifacts):
            emit_plot_data(tmp_path)


class TestCli:
    def test_presets_list(self, capsys):
        assert cli_main(["presets", "list"]) == 0
        out = capsys.readouterr().out
        for name in ("fig3", "fig4", "fig5", "fig6", "fig9", "fig10",
                     "fig11"):
            assert name in out

    def test_run_config_file(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.yaml"
        cfg_path.write_text(yaml.safe_dump(MINIMAL))
        rc = cli_main(["run", "--config", str(cfg_path), "--out",
                       str(tmp_path / "out")])
        assert rc == 0
        assert (tmp_path / "out" / "manifest.json").exists()

    def test_validation_error_exit_code(self, tmp_path):
        cfg_path = tmp_path / "bad.yaml"
        bad = dict(MINIMAL, vesicle=dict(MINIMAL["vesicle"], d_in="87 s"))
        cfg_path.write_text(yaml.safe_dump(bad))
        assert cli_main(["run", "--config", str(cfg_path),
                         "--out", str(tmp_path / "o")]) == 1

    def test_both_preset_and_config_rejected(self, tmp_path):
        cfg_path = tmp_path / "cfg.yaml"
        cfg_path.write_text(yaml.safe_dump(MINIMAL))
        assert cli_main(["run", "--preset", "fig4", "--config",
                         str(cfg_path)]) == 1

    def test_emit_plot_data_missing_dir(self, tmp_path):
        assert cli_main(["emit-plot-data", str(tmp_path / "nowhere")]) == 1

    def test_seed_override_changes_ensemble(self, tmp_path):
        tree = {
            "run": {"solver": "closed", "seed": 1},
            "population": {},
            "ensemble": {"n_mod": 3, "n_ex": 2},
            "signal": {"intervals": [[0, 50]], "horizon": 100},
            "sample_interval": 25.0,
        }
        cfg_path = tmp_path / "ens.yaml"
        cfg_path.write_text(yaml.safe_dump(tree))
        rc = cli_main(["run", "--config", str(cfg_path), "--seed", "7",
                       "--out", str(tmp_path / "o1")])
        assert rc == 0
        rc = cli_main(["run", "--config", str(cfg_path), "--seed", "8",
                       "--out", str(tmp_path / "o2")])
        assert rc == 0
        a = (tmp_path / "o1" / "ens" / "ensemble_stats.csv").read_bytes()
        b = (tmp_path / "o2" / "ens" / "ensemble_stats.csv").read_bytes()
        assert a != b

    def test_solver_error_exit_code(self, tmp_path):
        # valid config whose step is too coarse for the unbuffered
        # stiffness: the stability check trips inside the solver
        tree = dict(MINIMAL,
                    run={"solver": "fdm", "seed": 1},
                    environment={"buffer_total": "0 mol/m^3"},
                    fdm={"dt": "1e-2 s", "record_stride": 10})
        cfg_path = tmp_path / "stiff.yaml"
        cfg_path.write_text(yaml.safe_dump(tree))
        rc = cli_main(["run", "--config", str(cfg_path), "--out",
                       str(tmp_path / "o")])
        assert rc == 2

    def test_module_entrypoint(self, tmp_path):
        r = subprocess.run([sys.executable, "-m", "vesim.cli", "presets",
                            "list"], capture_output=True, text=True)
        assert r.returncode == 0
        assert "fig3" in r.stdout
