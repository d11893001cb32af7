import json

import numpy as np
import pytest

from magslam.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, main
from magslam.config import (
    PRESETS,
    ConfigError,
    RunConfig,
    config_from_dict,
    load_config,
    save_config,
    subseed,
)


class TestConfigFromDict:
    def test_defaults(self):
        cfg = config_from_dict({})
        assert cfg.mode == "slamma"
        assert cfg.rate == 10.0
        assert cfg.length_scale == 1.0
        assert cfg.vertical_update is True

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            config_from_dict({"lenght_scale": 0.5})

    def test_type_mismatch_rejected(self):
        with pytest.raises(ConfigError, match="seed"):
            config_from_dict({"seed": "zero"})

    def test_bool_not_accepted_as_number(self):
        with pytest.raises(ConfigError, match="rate"):
            config_from_dict({"rate": True})

    def test_unknown_mode(self):
        with pytest.raises(ConfigError, match="mode"):
            config_from_dict({"mode": "magic"})

    def test_nonpositive_rejected(self):
        with pytest.raises(ConfigError, match="length_scale"):
            config_from_dict({"length_scale": 0.0})

    def test_schema_version_check(self):
        with pytest.raises(ConfigError, match="schema_version"):
            config_from_dict({"schema_version": 99})

    def test_sigma_ratio_expansion(self):
        cfg = config_from_dict({"length_scale": 0.4, "sigma_se_over_ell": 5.0})
        assert cfg.sigma_se == pytest.approx(2.0)

    def test_motion_validation(self):
        with pytest.raises(ConfigError, match="motion"):
            config_from_dict({"motion": {"kind": "circle_no_rotation", "spin": 3}})
        with pytest.raises(ConfigError, match="motion.kind"):
            config_from_dict({"motion": {"duration": 4.0}})
        cfg = config_from_dict({"motion": {"kind": "square_loop", "side": 0.5}})
        assert cfg.motion["side"] == 0.5

    def test_earth_field_length(self):
        with pytest.raises(ConfigError, match="earth_field"):
            config_from_dict({"earth_field": [1.0, 2.0]})


class TestPresets:
    def test_known_rows(self):
        assert set(PRESETS) == {
            "tiny_no_rot",
            "tiny_yaw_rot",
            "snake_wide_1",
            "snake_wide_2",
            "squares_short",
            "squares_long",
            "snake_long",
            "snake_thin_1",
            "snake_thin_2",
            "infinity_symbol",
        }

    def test_snake_wide_1_expansion(self):
        cfg = config_from_dict({"preset": "snake_wide_1"})
        assert cfg.length_scale == pytest.approx(0.5)
        assert cfg.sigma_se == pytest.approx(1.25 * 0.5)
        assert cfg.o_pos_mm_per_s == [-50, 50, 0]
        assert cfg.o_rot_deg_per_s == [0, 0, 1]
        assert cfg.sigma_pos_per_s == [0.01, 0.01, 0.01]
        assert cfg.sigma_rot_deg_per_s == [0.1, 0.1, 1.0]

    def test_explicit_values_win_over_preset(self):
        cfg = config_from_dict({"preset": "snake_wide_1", "length_scale": 0.3})
        assert cfg.length_scale == 0.3

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="preset"):
            config_from_dict({"preset": "nope"})

    def test_drift_conversion(self):
        cfg = config_from_dict({"preset": "snake_wide_1"})
        o_pos, o_rot = cfg.drift()
        assert np.allclose(o_pos, [-0.05, 0.05, 0.0])
        assert np.allclose(o_rot, [0.0, 0.0, np.deg2rad(1.0)])


class TestNoiseAndHyper:
    def test_noise_step_scaling(self):
        cfg = config_from_dict({"sigma_pos_per_s": [0.01, 0.01, 0.01], "rate": 10.0})
        noise = cfg.noise()
        assert np.allclose(np.diag(noise.sigma_pos), (0.01 / 10.0) ** 2)

    def test_rot_noise_in_radians(self):
        cfg = config_from_dict({"sigma_rot_deg_per_s": [1.0, 1.0, 1.0], "rate": 10.0})
        noise = cfg.noise()
        assert np.allclose(np.diag(noise.sigma_rot), (np.deg2rad(1.0) / 10.0) ** 2)

    def test_margin_default(self):
        cfg = config_from_dict({"length_scale": 0.4})
        assert cfg.margin == pytest.approx(0.8)
        cfg = config_from_dict({"length_scale": 0.4, "domain_margin": 0.1})
        assert cfg.margin == 0.1

    def test_hyper_round_trip(self):
        cfg = config_from_dict({"length_scale": 0.7, "sigma_se": 2.0, "sigma_y": 0.2})
        hyper = cfg.hyper()
        assert hyper.length_scale == 0.7
        assert hyper.sigma_se == 2.0
        assert hyper.sigma_y == 0.2


class TestConfigIo:
    def test_round_trip(self, tmp_path):
        cfg = config_from_dict(
            {"mode": "slcamma", "seed": 5, "motion": {"kind": "square_loop_yaw"}}
        )
        path = tmp_path / "config.json"
        save_config(path, cfg)
        loaded = load_config(path)
        assert loaded == cfg

    def test_load_rejects_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.json")


class TestSubseed:
    def test_deterministic(self):
        assert subseed(7, "field") == subseed(7, "field")

    def test_streams_differ(self):
        seeds = {subseed(7, s) for s in ("field", "calibration", "dataset", "replicate")}
        assert len(seeds) == 4

    def test_index_differs(self):
        assert subseed(7, "replicate", 0) != subseed(7, "replicate", 1)

    def test_master_differs(self):
        assert subseed(7, "field") != subseed(8, "field")


def small_sim_config(tmp_path, **extra):
    raw = {
        "mode": "slamma",
        "seed": 1,
        "length_scale": 1.0,
        "sigma_se": 1.0,
        "n_se_modes": 40,
        "field_method": "reduced_rank",
        "vertical_update": False,
        "sample_calibration": True,
        "motion": {"kind": "wiggling_in_place", "duration": 3.0},
    }
    raw.update(extra)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(raw))
    return path


class TestCli:
    def test_presets_list(self, capsys):
        assert main(["presets", "list"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "snake_wide_1" in out

    def test_bad_config_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"mode": "magic"}))
        code = main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")])
        assert code == EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_simulate_requires_motion(self, tmp_path, capsys):
        code = main(["simulate", "--out", str(tmp_path / "o")])
        assert code == EXIT_CONFIG

    def test_missing_dataset_exit_code(self, tmp_path, capsys):
        code = main(
            [
                "slam",
                "--dataset",
                str(tmp_path / "nothing"),
                "--out",
                str(tmp_path / "run"),
            ]
        )
        assert code == EXIT_DATA

    def test_simulate_then_slam(self, tmp_path, capsys):
        cfg = small_sim_config(tmp_path)
        ds_dir = tmp_path / "ds"
        assert main(["simulate", "--config", str(cfg), "--out", str(ds_dir)]) == EXIT_OK
        assert (ds_dir / "odometry.csv").exists()
        assert (ds_dir / "measurements.csv").exists()
        assert (ds_dir / "metadata.json").exists()

        run_dir = tmp_path / "run"
        code = main(
            [
                "slam",
                "--config",
                str(cfg),
                "--dataset",
                str(ds_dir),
                "--out",
                str(run_dir),
            ]
        )
        assert code == EXIT_OK
        summary = json.loads((run_dir / "summary.json").read_text())
        assert summary["diverged_step"] is None
        assert (run_dir / "trajectory.csv").exists()
        printed = capsys.readouterr().out
        assert "final_pos_error" in printed

    def test_monte_carlo_replicates(self, tmp_path, capsys):
        cfg = small_sim_config(tmp_path)
        out = tmp_path / "mc"
        assert main(["simulate", "--config", str(cfg), "--mc", "2", "--out", str(out)]) == EXIT_OK
        assert (out / "rep_000" / "odometry.csv").exists()
        assert (out / "rep_001" / "odometry.csv").exists()
        assert (out / "manifest.json").exists()
        a = (out / "rep_000" / "measurements.csv").read_bytes()
        b = (out / "rep_001" / "measurements.csv").read_bytes()
        assert a != b

    def test_simulate_deterministic(self, tmp_path, capsys):
        cfg = small_sim_config(tmp_path)
        d1 = tmp_path / "d1"
        d2 = tmp_path / "d2"
        assert main(["simulate", "--config", str(cfg), "--out", str(d1)]) == EXIT_OK
        assert main(["simulate", "--config", str(cfg), "--out", str(d2)]) == EXIT_OK
        for name in ("odometry.csv", "measurements.csv", "groundtruth.csv"):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()

    def test_slam_deterministic(self, tmp_path, capsys):
        cfg = small_sim_config(tmp_path)
        ds_dir = tmp_path / "ds"
        main(["simulate", "--config", str(cfg), "--out", str(ds_dir)])
        r1 = tmp_path / "r1"
        r2 = tmp_path / "r2"
        for r in (r1, r2):
            assert (
                main(
                    [
                        "slam",
                        "--config",
                        str(cfg),
                        "--dataset",
                        str(ds_dir),
                        "--out",
                        str(r),
                    ]
                )
                == EXIT_OK
            )
        assert (r1 / "trajectory.csv").read_bytes() == (r2 / "trajectory.csv").read_bytes()

    def test_mode_override(self, tmp_path, capsys):
        cfg = small_sim_config(tmp_path)
        ds_dir = tmp_path / "ds"
        main(["simulate", "--config", str(cfg), "--out", str(ds_dir)])
        run_dir = tmp_path / "run_dr"
        code = main(
            [
                "slam",
                "--config",
                str(cfg),
                "--mode",
                "dead_reckoning",
                "--dataset",
                str(ds_dir),
                "--out",
                str(run_dir),
            ]
        )
        assert code == EXIT_OK
        summary = json.loads((run_dir / "summary.json").read_text())
        assert summary["mode"] == "dead_reckoning"

    def test_report_and_map_export(self, tmp_path, capsys):
        cfg = small_sim_config(tmp_path)
        ds_dir = tmp_path / "ds"
        main(["simulate", "--config", str(cfg), "--out", str(ds_dir)])
        run_dir = tmp_path / "run"
        main(["slam", "--config", str(cfg), "--dataset", str(ds_dir), "--out", str(run_dir)])

        rep_dir = tmp_path / "report"
        assert main(["report", str(run_dir), "--out", str(rep_dir)]) == EXIT_OK
        assert (rep_dir / "summary.json").exists()
        assert (rep_dir / "traj_errors.csv").exists()

        assert main(["map-export", str(run_dir), "--n", "5"]) == EXIT_OK
        grid = run_dir / "map_grid.csv"
        assert grid.exists()
        header = grid.read_text().splitlines()[0]
        assert header == "x,y,z,mean_x,mean_y,mean_z,norm,std_norm"
