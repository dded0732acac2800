import json
import subprocess
import sys

import numpy as np
import pytest

from fracshape.cli import DEFAULTS, build_parser, main
from fracshape.curve import circle
from fracshape.io import save_samples


@pytest.fixture
def files(tmp_path):
    out = {}
    save_samples(circle(32).x, tmp_path / "unit.json")
    save_samples(circle(32, 2.0).x, tmp_path / "big.json")
    save_samples(circle(16).x, tmp_path / "small.csv")
    t = np.arange(32) / 32
    r = 1 - np.cos(2 * np.pi * t)
    save_samples(np.stack([r * np.cos(2 * np.pi * t), r * np.sin(2 * np.pi * t)], axis=1), tmp_path / "cardioid.json")
    (tmp_path / "broken.json").write_text('{"samples": [[1, 2], [3')
    for f in tmp_path.iterdir():
        out[f.stem] = str(f)
    out["dir"] = tmp_path
    return out


def run(argv, capsys):
    code = main(argv)
    cap = capsys.readouterr()
    return code, cap.out, cap.err


class TestNorm:
    def test_unit_circle_closed_form(self, files, capsys):
        code, out, _ = run(["norm", files["unit"], "--q", "1"], capsys)
        assert code == 0
        data = json.loads(out)
        # position field on the unit circle: a single mode, |h|^2 = 2 pi rho^(1-2q)
        assert data["gq_dot_norm"] == pytest.approx(np.sqrt(2 * np.pi), rel=1e-10)
        assert data["length"] == pytest.approx(2 * np.pi, rel=1e-12)
        assert data["config"]["q"] == 1.0

    def test_function_input(self, tmp_path, capsys):
        t = np.arange(16) / 16
        save_samples(np.sin(2 * np.pi * t)[:, None], tmp_path / "f.csv")
        code, out, _ = run(["norm", str(tmp_path / "f.csv"), "--q", "1"], capsys)
        data = json.loads(out)
        assert code == 0 and data["kind"] == "function"
        assert data["hq_dot_seminorm"] == pytest.approx(2 * np.pi / np.sqrt(2), rel=1e-12)

    def test_malformed_json(self, files, capsys):
        code, _, err = run(["norm", files["broken"]], capsys)
        assert code == 2 and "error" in err

    def test_missing_file(self, files, capsys):
        assert run(["norm", str(files["dir"] / "none.json")], capsys)[0] == 2

    def test_not_immersed(self, files, capsys):
        code, _, err = run(["norm", files["cardioid"]], capsys)
        assert code == 3 and "ImmersionViolation" in err

    def test_csv_output(self, files, capsys):
        code, out, _ = run(["norm", files["small"], "--format", "csv"], capsys)
        assert code == 0 and out.startswith("key,value\n") and "gq_norm," in out

    def test_resample_flag(self, files, capsys):
        code, out, _ = run(["norm", files["small"], "--n", "64"], capsys)
        assert code == 0 and json.loads(out)["config"]["n"] == 64

    @pytest.mark.parametrize("flag", [["--n", "12"], ["--q", "-1"], ["--tol", "0"], ["--jobs", "0"]])
    def test_invalid_options(self, files, capsys, flag):
        assert run(["norm", files["unit"]] + flag, capsys)[0] == 2


class TestDistance:
    def test_identical(self, files, capsys):
        code, out, _ = run(["distance", files["unit"], files["unit"]], capsys)
        data = json.loads(out)
        assert code == 0 and data["distance_upper_bound"] == 0.0 and data["converged"]

    def test_circles(self, files, capsys, tmp_path):
        path_out = tmp_path / "path.json"
        code, out, _ = run(["distance", files["unit"], files["big"], "--q", "1", "--path-out", str(path_out)], capsys)
        data = json.loads(out)
        assert code == 0
        assert data["distance_upper_bound"] >= data["srv_lower_bound"]
        assert data["srv_lower_bound"] == pytest.approx(np.sqrt(2 * np.pi * (3 - 2 * np.sqrt(2))), rel=1e-6)
        assert json.loads(path_out.read_text())["m"] == DEFAULTS["m"]

    def test_mismatched_grids(self, files, capsys):
        assert run(["distance", files["unit"], files["small"]], capsys)[0] == 2

    def test_non_convergence_is_soft(self, files, capsys):
        code, out, _ = run(["distance", files["unit"], files["big"], "--max-iter", "1", "--tol", "1e-12"], capsys)
        assert code == 0 and json.loads(out)["converged"] is False


class TestExperiment:
    def test_shrinking_circle(self, capsys):
        code, out, _ = run(["experiment", "shrinking-circle", "--q", "1.0", "--n", "16"], capsys)
        data = json.loads(out)
        assert code == 0 and data["passed"]
        assert data["header"]["config"]["q"] == 1.0
        assert all(row["rel_err"] <= 0.01 for row in data["results"]["table"])

    def test_bench_composition(self, capsys):
        code, out, _ = run(["experiment", "bench", "--which", "composition", "--trials", "20", "--n", "128"], capsys)
        data = json.loads(out)
        assert code == 0 and data["passed"]
        assert sum(r["violations"] for r in data["results"]["orders"]) == 0

    def test_repeated_runs_are_byte_identical(self, tmp_path, capsys):
        outs = []
        f = tmp_path / "r.json"
        for _ in range(2):
            args = ["experiment", "bench", "--which", "nesting", "--trials", "10", "--n", "64", "--seed", "4", "--out", str(f)]
            assert main(args) == 0
            outs.append(f.read_bytes())
        assert outs[0] == outs[1]

    def test_plot_files(self, tmp_path):
        out = tmp_path / "rep.csv"
        assert main(["experiment", "shrinking-circle", "--n", "16", "--m", "64", "--format", "csv", "--out", str(out)]) == 0
        assert out.read_text().startswith("section,key,value\n")
        plot = tmp_path / "rep.length_vs_eps.csv"
        assert plot.read_text().startswith("eps,length\n")

    def test_unknown_experiment(self, capsys):
        code, _, err = run(["experiment", "nope"], capsys)
        assert code == 2
        for name in ("shrinking-circle", "vanishing-distance", "bench", "ball-equivalence"):
            assert name in err

    def test_unknown_bench(self, capsys):
        assert run(["experiment", "bench", "--which", "nope"], capsys)[0] == 2


class TestConfig:
    def test_precedence(self, files, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"q": 0.5, "m": 4}))
        data = json.loads(run(["norm", files["unit"], "--config", str(cfg)], capsys)[1])
        assert data["config"]["q"] == 0.5 and data["config"]["m"] == 4
        data = json.loads(run(["norm", files["unit"], "--config", str(cfg), "--q", "2"], capsys)[1])
        assert data["config"]["q"] == 2.0 and data["config"]["m"] == 4
        data = json.loads(run(["norm", files["unit"]], capsys)[1])
        assert data["config"]["q"] == DEFAULTS["q"]

    def test_header_has_every_default(self, files, capsys):
        data = json.loads(run(["norm", files["unit"]], capsys)[1])
        assert set(data["config"]) == set(DEFAULTS)

    def test_bad_config(self, files, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"nope": 1}))
        assert run(["norm", files["unit"], "--config", str(cfg)], capsys)[0] == 2
        cfg.write_text("[1]")
        assert run(["norm", files["unit"], "--config", str(cfg)], capsys)[0] == 2


class TestHelp:
    @pytest.mark.parametrize("command", ["norm", "distance", "experiment"])
    def test_help_lists_flags(self, command):
        parser = build_parser()
        sub = parser._subparsers._group_actions[0].choices[command]
        text = sub.format_help()
        for flag in ("--q", "--n", "--m", "--seed", "--tol", "--max-iter", "--jobs", "--format", "--out", "--config"):
            assert flag in text

    def test_module_entry_point(self):
        res = subprocess.run([sys.executable, "-m", "fracshape", "--help"], capture_output=True, text=True)
        assert res.returncode == 0 and "norm" in res.stdout and "experiment" in res.stdout

    def test_no_command(self, capsys):
        assert main([]) == 2
