"""
Test cases for CLI commands and the run configuration
"""
import json
from pathlib import Path
from unittest.mock import Mock, patch

import numpy as np
import pytest

from triplewave.cli.cli import main
from triplewave.cli.config import RunConfig, dump_config, load_config
from triplewave.cli.pipelines import PipelineRunner
from triplewave.detector.fronts import FrontEstimate
from triplewave.errors import ConfigError


def _json_tail(out):
    """Parse the JSON document printed after the progress lines."""
    return json.loads(out[out.index("{\n"):])


class TestCLI:
    @patch('triplewave.cli.cli.PipelineRunner')
    def test_rays_command(self, mock_runner_cls):
        """Test rays command"""
        mock_runner = Mock()
        mock_runner_cls.return_value = mock_runner
        mock_runner.run_rays.return_value = {
            "success": True,
            "message": "Traced 8 ray(s)",
            "exit_code": 0,
            "n_rays": 8,
        }

        with patch('sys.argv', ['triplewave', 'rays']), \
             patch('sys.exit') as mock_exit:
            main()
            mock_runner.run_rays.assert_called_once()
            mock_exit.assert_called_once_with(0)

    @patch('triplewave.cli.cli.PipelineRunner')
    def test_out_and_threads_reach_runner(self, mock_runner_cls, tmp_path):
        """Test --out and --threads are handed to the runner"""
        mock_runner = Mock()
        mock_runner_cls.return_value = mock_runner
        mock_runner.run_flowout.return_value = {"success": True, "message": "ok", "exit_code": 0}

        with patch('sys.argv', ['triplewave', '--out', str(tmp_path / 'o'), '--threads', '4', 'flowout']), \
             patch('sys.exit') as mock_exit:
            main()
            _, kwargs = mock_runner_cls.call_args
            assert kwargs == {"out_dir": str(tmp_path / 'o'), "threads": 4}
            mock_exit.assert_called_once_with(0)

    @patch('triplewave.cli.cli.PipelineRunner')
    def test_experiment_verdict_failure(self, mock_runner_cls, capsys):
        """Test a contradicted verdict exits with 1"""
        mock_runner = Mock()
        mock_runner_cls.return_value = mock_runner
        mock_runner.run_experiment.return_value = {
            "success": False,
            "message": "Verdict OFF (contradicts the predicted ON)",
            "exit_code": 1,
            "verdict": "OFF",
        }

        with patch('sys.argv', ['triplewave', 'experiment']), \
             patch('sys.exit') as mock_exit:
            main()
            mock_exit.assert_called_once_with(1)
        captured = capsys.readouterr()
        assert "Failed: Verdict OFF" in captured.err
        assert "verdict: 'OFF'" in captured.out or "verdict: OFF" in captured.out

    @patch('triplewave.cli.cli.PipelineRunner')
    def test_json_output(self, mock_runner_cls, capsys):
        """Test --output-format json"""
        mock_runner = Mock()
        mock_runner_cls.return_value = mock_runner
        mock_runner.run_norms.return_value = {"success": True, "message": "Threshold measured 5.5",
                                              "exit_code": 0, "threshold": 5.5}

        with patch('sys.argv', ['triplewave', '--output-format', 'json', 'norms']), \
             patch('sys.exit') as mock_exit:
            main()
            mock_exit.assert_called_once_with(0)
        assert _json_tail(capsys.readouterr().out)["threshold"] == 5.5

    @patch('triplewave.cli.cli.PipelineRunner')
    def test_verify_all_takes_worst_exit_code(self, mock_runner_cls, capsys):
        """Test verify-all lists every check"""
        mock_runner = Mock()
        mock_runner_cls.return_value = mock_runner
        mock_runner.verify_all.return_value = {
            "success": False,
            "exit_code": 3,
            "message": "Failed: experiment",
            "results": {
                "symbols": {"success": True, "exit_code": 0, "message": "ok"},
                "experiment": {"success": False, "exit_code": 3, "message": "NumericError"},
            },
        }

        with patch('sys.argv', ['triplewave', 'verify-all']), \
             patch('sys.exit') as mock_exit:
            main()
            mock_exit.assert_called_once_with(3)
        out = capsys.readouterr().out
        assert "symbols: ok (exit 0)" in out
        assert "experiment: FAILED (exit 3)" in out

    @patch('triplewave.cli.cli.PipelineRunner')
    def test_malformed_config(self, mock_runner_cls, config_file, capsys):
        """Test an unknown key is a usage error with its line"""
        path = config_file("grid:\n  t_end: 1.0\n  pointz: [65, 65]\n")

        with patch('sys.argv', ['triplewave', '--config', path, 'rays']), \
             patch('sys.exit') as mock_exit:
            main()
            mock_exit.assert_called_once_with(2)
            mock_runner_cls.assert_not_called()
        err = capsys.readouterr().err
        assert "Invalid configuration" in err
        assert "grid.pointz" in err
        assert "[line: 3]" in err

    @patch('triplewave.cli.cli.PipelineRunner')
    def test_wrong_type_in_optional_field(self, mock_runner_cls, config_file, capsys):
        """Test a string for an optional number is a usage error"""
        path = config_file("geometry:\n  speed_x3: one\n")

        with patch('sys.argv', ['triplewave', '--config', path, 'flowout']), \
             patch('sys.exit') as mock_exit:
            main()
            mock_exit.assert_called_once_with(2)
            mock_runner_cls.assert_not_called()
        err = capsys.readouterr().err
        assert "geometry.speed_x3" in err
        assert "[line: 2]" in err

    def test_unknown_command(self):
        """Test an unknown subcommand is a usage error"""
        with patch('sys.argv', ['triplewave', 'plot']), \
             patch('sys.exit') as mock_exit:
            main()
            mock_exit.assert_called_once_with(2)


class TestPipelines:
    """Small real runs through the CLI."""

    def test_rays_on_cylinder(self, config_file, capsys):
        path = config_file({
            "scenario": {"id": "planes-cylinder"},
            "geometry": {"gamma_count": 2, "angular_res": 4, "s_max": 1.0, "s_samples": 11},
        })
        with patch('sys.argv', ['triplewave', '--config', path, '--output-format', 'json', 'rays']), \
             patch('sys.exit') as mock_exit:
            main()
            mock_exit.assert_called_once_with(0)
        result = _json_tail(capsys.readouterr().out)
        assert result["n_rays"] > 0
        lines = Path("out/rays/rays.csv").read_text().strip().splitlines()
        assert lines[0] == "ray,s,t,x1,x2,x3,tau,xi1,xi2,xi3"
        assert len(lines) == result["n_rays"] * 11 + 1
        report = json.loads(Path(result["report"]).read_text())
        assert report["null_conserved"]
        assert report["closed_form_distance"] <= 1e-8
        assert report["config"]["scenario"]["id"] == "planes-cylinder"
        assert Path("out/rays/metadata.json").exists()

    def test_zero_rays(self, config_file):
        path = config_file({"scenario": {"id": "planes-cylinder"}, "geometry": {"gamma_count": 0}})
        with patch('sys.argv', ['triplewave', '--config', path, 'rays']), \
             patch('sys.exit') as mock_exit:
            main()
            mock_exit.assert_called_once_with(0)
        lines = Path("out/rays/rays.csv").read_text().strip().splitlines()
        assert lines == ["ray,s,t,x1,x2,x3,tau,xi1,xi2,xi3"]

    def test_flowout_spheres(self, tmp_path):
        config = RunConfig.from_dict({
            "scenario": {"id": "spheres", "params": {"a": 1.0, "b": 1.0}},
            "geometry": {"gamma_count": 3, "angular_res": 8, "s_max": 1.5, "s_samples": 21},
        })
        result = PipelineRunner(config, out_dir=str(tmp_path / "run")).run_flowout()
        assert result["success"], result["message"]
        assert result["exit_code"] == 0
        assert result["closed_form_distance"] <= 1e-8
        assert (tmp_path / "run" / "flowout" / "front_mesh.bin").exists()
        assert (tmp_path / "run" / "flowout" / "front_nodes.dat").exists()

    def test_flowout_without_flow(self):
        config = RunConfig.from_dict({"scenario": {"id": "planes-cone"},
                                      "geometry": {"gamma_count": 3, "s_max": 0.0}})
        result = PipelineRunner(config).run_flowout()
        assert result["exit_code"] == 0
        report = json.loads(Path(result["report"]).read_text())
        assert report["mesh_shape"][2] == 1

    def test_flowout_needs_gamma(self):
        config = RunConfig.from_dict({"geometry": {"gamma_count": 0}})
        result = PipelineRunner(config).run_flowout()
        assert not result["success"]
        assert result["exit_code"] == 2

    def test_symbol_scan(self):
        result = PipelineRunner(RunConfig()).run_symbols()
        assert result["success"], result["message"]
        report = json.loads(Path(result["report"]).read_text())
        assert report["n_failures"] == 0
        assert report["m_range"] == [-12.0, -1.01]

    def test_norms(self):
        config = RunConfig.from_dict({"norms": {
            "r_values": [5.0, 6.0], "base_points": 256, "refinements": 2,
            "kernel_cases": [{"n": 3, "k": [1.0, 1.0, 1.0]}],
        }})
        result = PipelineRunner(config).run_norms()
        assert result["success"], result["message"]
        assert result["threshold"] == pytest.approx(5.5)
        report = json.loads(Path(result["report"]).read_text())
        assert report["kernel_cases"][0]["convergent"]
        assert report["families"]["embedding"]["satisfied"]
        assert report["families"]["below_product_threshold"]["refused"]

    def test_bad_kernel_case(self):
        config = RunConfig.from_dict({"norms": {"r_values": [5.0, 6.0], "base_points": 256,
                                                "refinements": 2, "kernel_cases": [{"n": 3}]}})
        result = PipelineRunner(config).run_norms()
        assert result["exit_code"] == 2
        assert "kernel_cases.0" in result["message"]

    def test_experiment_without_cubic_term_is_off(self):
        config = RunConfig.from_dict({
            "grid": {"lower": [-2.0, -2.0], "upper": [2.0, 2.0], "points": [65, 65], "t_end": 0.5},
            "nonlinearity": {"coeffs": {}},
            "pipelines": ["experiment"],
        })
        result = PipelineRunner(config).run_experiment()
        assert result["verdict"] == "OFF"
        assert not result["predicted_on"]
        assert result["exit_code"] == 0
        for name in ("field_cubic.bin", "field_quadratic.bin", "field_linear.bin", "ridge.csv", "q_slice.dat"):
            assert Path("out/experiment", name).exists()

    def _experiment_with_gap(self, config_file, gap):
        grid = {"lower": [-2.0, -2.0], "upper": [2.0, 2.0], "points": [65, 65], "t_end": 0.5}
        path = config_file({"grid": grid, "pipelines": ["experiment"]})
        verdict = {"verdict": "ON", "time": 0.5, "ratio": 50.0}
        front = FrontEstimate(time=0.5, points=np.array([[0.5, 0.0]]), indices=np.array([[40, 32]]),
                              strength=np.array([1.0]), energy_map=np.zeros((65, 65)), threshold=0.1,
                              band=(25.0, 50.0))
        with patch('triplewave.cli.pipelines.cubic_discriminator', return_value=(verdict, front)), \
             patch.object(PipelineRunner, '_order_gap', return_value=gap), \
             patch('sys.argv', ['triplewave', '--config', path, '--output-format', 'json', 'experiment']), \
             patch('sys.exit') as mock_exit:
            main()
        return mock_exit

    def test_experiment_order_gap_mismatch_fails(self, config_file, capsys):
        gap = {"skipped": False, "passed": False, "measured_gap": -3.1, "predicted_gap": -12.5}
        mock_exit = self._experiment_with_gap(config_file, gap)
        mock_exit.assert_called_once_with(1)
        captured = capsys.readouterr()
        result = _json_tail(captured.out)
        assert result["verdict"] == "ON"
        assert result["predicted_on"]
        assert result["order_gap_checked"]
        assert not result["order_gap_passed"]
        assert "order gap -3.10 misses the predicted -12.50" in result["message"]
        report = json.loads(Path("out/experiment/experiment_report.json").read_text())
        assert not report["success"]

    def test_experiment_order_gap_match_passes(self, config_file, capsys):
        gap = {"skipped": False, "passed": True, "measured_gap": -12.3, "predicted_gap": -12.5}
        mock_exit = self._experiment_with_gap(config_file, gap)
        mock_exit.assert_called_once_with(0)
        result = _json_tail(capsys.readouterr().out)
        assert result["order_gap_checked"]
        assert result["order_gap_passed"]

    def test_experiment_grid_must_match_scenario(self):
        config = RunConfig.from_dict({
            "scenario": {"id": "planes-cylinder"},
            "grid": {"lower": [-2.0, -2.0], "upper": [2.0, 2.0], "points": [65, 65]},
        })
        result = PipelineRunner(config).run_experiment()
        assert result["exit_code"] == 2
        assert "grid" in result["message"]


class TestConfig:
    def test_defaults(self):
        config = load_config(None)
        assert config.scenario.id == "fig1-2d"
        assert config.grid.points == [769, 769]
        assert len(config.profiles) == 3

    def test_round_trip(self, tmp_path):
        config = RunConfig.from_dict({"seed": 7, "scenario": {"id": "spheres", "params": {"a": 0.5}},
                                      "geometry": {"gamma_sampling": "random"}})
        loaded = load_config(dump_config(config, tmp_path / "config.yaml"))
        assert loaded == config
        assert loaded.to_dict() == config.to_dict()

    def test_ints_are_accepted_for_floats(self, config_file):
        config = load_config(config_file({"grid": {"t_end": 2}}))
        assert config.grid.t_end == 2.0
        assert isinstance(config.grid.t_end, float)

    @pytest.mark.parametrize("content,field", [
        ({"grid": {"points": "many"}}, "grid.points"),
        ({"tolerances": {"null": 0.0}}, "tolerances.null"),
        ({"geometry": {"gamma_count": 2.5}}, "geometry.gamma_count"),
        ({"pipelines": ["plots"]}, "pipelines"),
        ({"profiles": [{"kind": "jump"}]}, "profiles"),
        ({"nonlinearity": {"forcing": "yes"}}, "nonlinearity.forcing"),
        ({"geometry": {"speed_x3": "one"}}, "geometry.speed_x3"),
        ({"detector": {"band": "wide"}}, "detector.band"),
        ({"detector": {"band": [10.0, "x"]}}, "detector.band.1"),
        ({"nonlinearity": {"cutoff_center": [0.0, None]}}, "nonlinearity.cutoff_center.1"),
        ({"tolerances": {"null": None}}, "tolerances.null"),
        ({"grid": {"lower": [-2.0, "a"]}}, "grid.lower.1"),
        ({"nonlinearity": {"coeffs": {"3": "one"}}}, "nonlinearity.coeffs.3"),
    ])
    def test_invalid_values(self, config_file, content, field):
        with pytest.raises(ConfigError) as excinfo:
            load_config(config_file(content))
        assert excinfo.value.field == field
        assert excinfo.value.line is not None

    def test_yaml_syntax_error(self, config_file):
        with pytest.raises(ConfigError) as excinfo:
            load_config(config_file("grid: [1, 2\n"))
        assert excinfo.value.line is not None

    def test_optional_fields(self, config_file):
        config = load_config(config_file({"detector": {"band": [10, 20]}, "geometry": {"speed_x3": None},
                                          "profiles": [{"smoothing_eps": 0.01}, {}, {}]}))
        assert config.detector.band == [10.0, 20.0]
        assert all(isinstance(v, float) for v in config.detector.band)
        assert config.geometry.speed_x3 is None
        assert config.profiles[0].smoothing_eps == 0.01
        assert config.profiles[1].smoothing_eps is None
