import csv
import subprocess
import sys

import numpy as np
import pytest

from medix.cli import main
from medix.filter import FilterConfig, medix_filter
from medix.stats import element_wise_median, geometric_median, write_gradients_binary, write_gradients_csv
from medix.svg import plot_lines


def run(argv, capsys=None):
    code = main(argv)
    if capsys is not None:
        return code, capsys.readouterr()
    return code


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


SMALL = ["--n-per-class", "40", "--n-ood", "60", "--epochs", "60"]


class TestSynth2d:
    def test_outputs(self, tmp_path, capsys):
        code, cap = run(["synth2d", "--out", str(tmp_path)] + SMALL, capsys)
        assert code == 0
        for name in ("synth2d_metrics.csv", "synth2d_points.csv", "synth2d_trace.csv",
                     "synth2d_filter.json", "synth2d_truth.svg", "synth2d_flagged.svg"):
            assert (tmp_path / name).exists()
        assert "fpr95" in cap.out
        flagged_svg = (tmp_path / "synth2d_flagged.svg").read_text()
        assert 'fill="#000000"' in flagged_svg
        pts = rows(tmp_path / "synth2d_points.csv")
        assert len(pts) == 3 * 40 + 60

    def test_all_ood(self, tmp_path, capsys):
        code, cap = run(["synth2d", "--pi", "1.0", "--out", str(tmp_path)] + SMALL, capsys)
        assert code == 0
        pts = rows(tmp_path / "synth2d_points.csv")
        assert all(p["__origin"] == "1" for p in pts)
        doc = (tmp_path / "synth2d_filter.json").read_text()
        assert '"stop_reason"' in doc

    def test_svg_regenerated_from_csv(self, tmp_path):
        assert run(["synth2d", "--out", str(tmp_path)] + SMALL) == 0
        from medix.svg import plot_wild_scatter

        plot_wild_scatter(tmp_path / "synth2d_points.csv", tmp_path / "again.svg", "flagged", "wild data: flagged")
        assert (tmp_path / "again.svg").read_bytes() == (tmp_path / "synth2d_flagged.svg").read_bytes()


class TestConfigLayering:
    def test_flag_overrides_file(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# sweep settings\nsteps = 4\nmax-ood = 90\nm_in = 50\n")
        assert run(["sweep", "--config", str(cfg), "--steps", "6", "--out", str(tmp_path / "o")]) == 0
        series = rows(tmp_path / "o" / "sweep.csv")
        assert len(series) == 6  # flag wins
        assert series[-1]["n_ood"] == "90"  # file value used

    def test_env_out_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MEDIX_OUT", str(tmp_path / "env"))
        assert run(["sweep", "--steps", "3", "--m-in", "30", "--max-ood", "20"]) == 0
        assert (tmp_path / "env" / "sweep.csv").exists()

    def test_unknown_key(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("colour = blue\n")
        code, cap = run(["sweep", "--config", str(cfg), "--out", str(tmp_path)], capsys)
        assert code == 2 and "unknown config key" in cap.err

    def test_bad_value_in_file(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("steps = many\n")
        assert run(["sweep", "--config", str(cfg), "--out", str(tmp_path)]) == 2

    def test_missing_config(self, tmp_path):
        assert run(["sweep", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)]) == 2

    def test_bad_flag_value(self):
        with pytest.raises(SystemExit) as exc:
            main(["sweep", "--steps", "x"])
        assert exc.value.code == 2


class TestSweep:
    def test_rows_and_zero_level(self, tmp_path, capsys):
        code, cap = run(["sweep", "--steps", "10", "--out", str(tmp_path)], capsys)
        assert code == 0
        series = rows(tmp_path / "sweep.csv")
        assert len(series) == 10 and series[0]["n_ood"] == "0"
        assert float(rows(tmp_path / "sweep_summary.csv")[0]["spearman"]) >= 0.95
        assert "spearman" in cap.out


class TestBounds:
    def test_half_contamination_row(self, tmp_path):
        assert run(["bounds", "--pi", "0.5", "--out", str(tmp_path)]) == 0
        table = {r["bound"]: r for r in rows(tmp_path / "bounds.csv")}
        assert float(table["inlier"]["contamination"]) == 0.5
        assert float(table["outlier"]["contamination"]) == 0.5

    def test_vacuous_flag(self, tmp_path):
        assert run(["bounds", "--pi", "0.1", "--m", "200", "--out", str(tmp_path)]) == 0
        table = {r["bound"]: r for r in rows(tmp_path / "bounds.csv")}
        assert float(table["outlier"]["value"]) > 1 and table["outlier"]["vacuous"] == "1"
        assert table["inlier"]["vacuous"] == "0"

    def test_not_applicable_row(self, tmp_path, capsys):
        code, cap = run(["bounds", "--Delta", "1", "--out", str(tmp_path)], capsys)
        assert code == 0 and "separation violated" in cap.err
        table = {r["bound"]: r for r in rows(tmp_path / "bounds.csv")}
        assert table["outlier"]["value"] == ""

    def test_coverage_matches_library(self, tmp_path):
        from medix.bounds import Scenario, monte_carlo_coverage, write_coverage_csv

        argv = ["bounds", "--coverage", "inlier", "--trials", "6", "--m", "200", "--pi", "0.3", "--seed", "2"]
        assert run(argv + ["--out", str(tmp_path)]) == 0
        rep = monte_carlo_coverage(Scenario(pi=0.3, m=200, d=20), "inlier", 6, seed=2)
        write_coverage_csv(tmp_path / "lib.csv", rep)
        assert (tmp_path / "coverage_inlier.csv").read_bytes() == (tmp_path / "lib.csv").read_bytes()

    def test_bad_pi(self, tmp_path):
        assert run(["bounds", "--pi", "1.0", "--out", str(tmp_path)]) == 2


class TestEwmVsGm:
    def test_outputs(self, tmp_path):
        argv = ["ewm-vs-gm", "--m-in", "60", "--levels", "10,20", "--k", "5", "--out", str(tmp_path)]
        assert run(argv) == 0
        table = rows(tmp_path / "ewm_vs_gm.csv")
        assert [(r["n_ood"], r["aggregator"]) for r in table] == [("10", "ewm"), ("10", "gm"), ("20", "ewm"), ("20", "gm")]
        assert (tmp_path / "ewm_vs_gm.svg").exists()

    def test_one_dim_symmetric_agree(self):
        G = np.array([[-3.0], [-1.0], [0.0], [1.0], [3.0], [-2.0], [2.0]])
        np.testing.assert_array_equal(geometric_median(G).point, element_wise_median(G))
        G = np.array([[-4.0], [-1.0], [1.0], [4.0]])
        np.testing.assert_array_equal(geometric_median(G).point, element_wise_median(G))
        ref = np.array([0.5])
        a = medix_filter(G, ref, FilterConfig(eps_stop=1e-6, k=1, T=1, stop_rule="delta"))
        b = medix_filter(G, ref, FilterConfig(eps_stop=1e-6, k=1, T=1, stop_rule="delta", aggregator="gm"))
        assert a.trace[0].d_t == b.trace[0].d_t

    def test_bad_levels(self, tmp_path):
        assert run(["ewm-vs-gm", "--levels", "-5", "--out", str(tmp_path)]) == 2


class TestHyperSweep:
    def test_grid_rows(self, tmp_path):
        argv = ["hyper-sweep", "--eps-grid", "5e-5,5e-4,5e-3,5e-2", "--k-fracs", "0.1,0.2,0.3,0.5",
                "--out", str(tmp_path)] + SMALL
        assert run(argv) == 0
        assert len(rows(tmp_path / "hyper_sweep.csv")) == 16

    def test_default_eps_grid_spread(self, tmp_path):
        assert run(["hyper-sweep", "--k-fracs", "0.5", "--out", str(tmp_path)]) == 0
        fpr = [float(r["fpr95"]) for r in rows(tmp_path / "hyper_sweep.csv")]
        assert len(fpr) == 4 and max(fpr) - min(fpr) <= 0.05

    def test_invalid_grid(self, tmp_path, capsys):
        code, cap = run(["hyper-sweep", "--eps-grid", "0.01,-1", "--out", str(tmp_path)], capsys)
        assert code == 2 and "invalid eps_stop" in cap.err
        assert not (tmp_path / "hyper_sweep.csv").exists()


class TestFilterCommand:
    def data(self, tmp_path):
        rng = np.random.default_rng(0)
        G = rng.normal(size=(50, 3))
        G[:10] += 8
        return G

    def test_csv_round_trip(self, tmp_path):
        G = self.data(tmp_path)
        write_gradients_csv(tmp_path / "g.csv", G)
        write_gradients_csv(tmp_path / "r.csv", np.zeros((1, 3)))
        out = tmp_path / "o"
        argv = ["filter", "--gradients", str(tmp_path / "g.csv"), "--ref", str(tmp_path / "r.csv"),
                "--k", "2", "--eps-stop", "0.01", "--out", str(out)]
        assert run(argv) == 0
        import json

        doc = json.loads((out / "filter_result.json").read_text())
        expect = medix_filter(G, np.zeros(3), FilterConfig(eps_stop=0.01, k=2))
        assert doc["outlier_ids"] == expect.outlier_ids.tolist()
        surv = np.loadtxt(out / "survivors.csv", delimiter=",", skiprows=1, ndmin=2)
        assert surv.shape == (len(expect.survivor_ids), 3)

    def test_binary_input(self, tmp_path):
        G = self.data(tmp_path)
        write_gradients_binary(tmp_path / "g.bin", G)
        write_gradients_binary(tmp_path / "r.bin", np.zeros((1, 3)))
        out = tmp_path / "o"
        argv = ["filter", "--gradients", str(tmp_path / "g.bin"), "--ref", str(tmp_path / "r.bin"), "--out", str(out)]
        assert run(argv) == 0
        assert (out / "survivors.mdxg").read_bytes()[:4] == b"MDXG"

    def test_missing_input(self, tmp_path, capsys):
        code, cap = run(["filter", "--gradients", str(tmp_path / "none.csv"), "--ref", "x", "--out", str(tmp_path)],
                        capsys)
        assert code == 2 and "not found" in cap.err

    def test_stage_failure(self, tmp_path, capsys):
        (tmp_path / "g.csv").write_text("g0,g1\n1.0,nan\n2.0,3.0\n")
        write_gradients_csv(tmp_path / "r.csv", np.zeros((1, 2)))
        code, cap = run(["filter", "--gradients", str(tmp_path / "g.csv"), "--ref", str(tmp_path / "r.csv"),
                         "--out", str(tmp_path)], capsys)
        assert code == 3 and "stage read" in cap.err

    def test_batch_too_large(self, tmp_path):
        write_gradients_csv(tmp_path / "g.csv", np.zeros((4, 2)))
        write_gradients_csv(tmp_path / "r.csv", np.zeros((1, 2)))
        argv = ["filter", "--gradients", str(tmp_path / "g.csv"), "--ref", str(tmp_path / "r.csv"), "--k", "4",
                "--out", str(tmp_path)]
        assert run(argv) == 2


class TestMetricsCommand:
    def test_scores(self, tmp_path, capsys):
        (tmp_path / "in.txt").write_text("score\n3\n4\n5\n")
        (tmp_path / "out.txt").write_text("0\n1\n2\n")
        code, cap = run(["metrics", "--in-scores", str(tmp_path / "in.txt"), "--out-scores",
                         str(tmp_path / "out.txt"), "--out", str(tmp_path)], capsys)
        assert code == 0
        r = rows(tmp_path / "metrics.csv")[0]
        assert float(r["auroc"]) == 1.0 and float(r["fpr95"]) == 0.0 and r["ind_acc"] == ""

    def test_bad_score_line(self, tmp_path):
        (tmp_path / "in.txt").write_text("1\nabc\n")
        (tmp_path / "out.txt").write_text("0\n")
        argv = ["metrics", "--in-scores", str(tmp_path / "in.txt"), "--out-scores", str(tmp_path / "out.txt"),
                "--out", str(tmp_path)]
        assert run(argv) == 3


def test_line_plot_from_csv(tmp_path):
    (tmp_path / "t.csv").write_text("x,y,g\n0,1.0,a\n1,2.0,a\n0,0.5,b\n1,,b\n")
    plot_lines(tmp_path / "t.csv", tmp_path / "t.svg", "x", "y", "g", "t")
    svg = (tmp_path / "t.svg").read_text()
    assert svg.startswith("<svg") and svg.count("<polyline") == 2


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "medix.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "medix" in res.stdout
