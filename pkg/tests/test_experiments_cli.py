"""Experiment harness and command-line driver."""

import json
import math

import numpy as np
import pytest

from confgeo import experiments
from confgeo.cli import main
from confgeo.domains import get_domain
from confgeo.estimator import EstimatorParams
from confgeo.factors import ConstantFactor
from confgeo.geometry import PointCloud
from confgeo.graphs import Ball


class TestSelfTest:
    def test_fresh_build_passes(self):
        payload, ok = experiments.run_selftest(seed=0)
        assert ok
        assert all(entry["ok"] for entry in payload["suites"])

    def test_injected_asymmetry_detected(self):
        payload, ok = experiments.run_selftest(
            seed=0, inject="weight-asymmetry"
        )
        assert not ok
        failing = {e["suite"] for e in payload["suites"] if not e["ok"]}
        assert failing == {"weight-symmetry"}

    def test_deterministic(self):
        a, _ = experiments.run_selftest(seed=3)
        b, _ = experiments.run_selftest(seed=3)
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


class TestRunEstimate:
    def test_losses_and_budget_on_domain(self):
        domain = get_domain("square")
        cloud = domain.sample(1, 300)
        params = EstimatorParams(Ball(0.3), 2)
        pairs = [[0, 10], [5, 200], [7, 7]]
        payload = experiments.run_estimate(cloud, params, ConstantFactor(1.0),
                                           pairs, domain=domain, seed=1)
        assert payload["params"]["graph"] == "ball"
        assert len(payload["estimates"]) == 3
        assert payload["budget"] > 0
        assert 0 <= payload["ell_inf"] <= 1


class TestRunConvergence:
    def test_report_shape_and_determinism(self):
        domain = get_domain("segment")
        out1 = experiments.run_convergence(
            domain, ConstantFactor(1.0), "knn_default",
            [40, 80], trials=2, seed=5, pair_budget=200, net_resolution=128,
        )
        out2 = experiments.run_convergence(
            domain, ConstantFactor(1.0), "knn_default",
            [40, 80], trials=2, seed=5, pair_budget=200, net_resolution=128,
        )
        assert json.dumps(out1, sort_keys=True) == json.dumps(out2,
                                                              sort_keys=True)
        assert [entry["n"] for entry in out1["per_n"]] == [40, 80]
        assert out1["predicted_slope"] == -1.0

    def test_single_grid_point_has_no_slope(self):
        domain = get_domain("segment")
        out = experiments.run_convergence(
            domain, ConstantFactor(1.0), "knn_default",
            [50], trials=2, seed=6, pair_budget=100, net_resolution=128,
        )
        assert out["slope"] is None
        assert len(out["per_n"][0]["losses"]) == 2

    def test_rejects_disordered_grid(self):
        with pytest.raises(ValueError, match="increasing"):
            experiments.run_convergence(
                get_domain("segment"), ConstantFactor(1.0), "knn_default",
                [100, 50], trials=1, seed=0,
            )


class TestRunGraphEquivalence:
    def test_small_run_reports_bound(self):
        out = experiments.run_graph_equivalence(
            get_domain("square"), n=200, k=80, eps=0.5, trials=10, seed=2
        )
        assert out["r_minus"] < out["r_plus"]
        assert 0 <= out["both_inclusion_freq"] <= 1
        assert not out["bound_vacuous"]

    def test_vacuous_bound_still_reports(self):
        out = experiments.run_graph_equivalence(
            get_domain("square"), n=100, k=1, eps=0.9, trials=3, seed=2
        )
        assert out["bound_vacuous"]
        assert out["probability_bound"] < 0


class TestRunCarvedCube:
    def test_report_fields(self):
        out = experiments.run_carved_cube(3, 1.0, 1.0, 0.1, 50_000, seed=4)
        assert out["pre_carve_distance"] == pytest.approx(0.2)
        assert out["distortion"] >= out["distortion_lower_bound"]
        assert out["fraction_within_bound"]

    def test_rejects_zero_notch(self):
        with pytest.raises(ValueError):
            experiments.run_carved_cube(3, 1.0, 1.0, 0.0, 1000, seed=0)


def run_cli(tmp_path, *args):
    out_path = tmp_path / "out.json"
    code = main(list(args) + ["--out", str(out_path)])
    payload = json.loads(out_path.read_text()) if out_path.exists() else None
    return code, payload


class TestCli:
    def test_estimate_collinear_euclidean(self, tmp_path):
        csv = tmp_path / "points.csv"
        PointCloud([0.0, 1.0, 2.0]).to_csv(csv)
        code, payload = run_cli(
            tmp_path, "estimate", "--input", str(csv),
            "--r", "5.0", "--q", "2", "--pairs", "all",
        )
        assert code == 0
        assert payload["estimates"] == [1.0, 2.0, 1.0]

    def test_estimate_disconnected_reports_inf_strings(self, tmp_path):
        csv = tmp_path / "points.csv"
        PointCloud([0.0, 1.0, 10.0]).to_csv(csv)
        code, payload = run_cli(
            tmp_path, "estimate", "--input", str(csv),
            "--r", "1.5", "--q", "2", "--pairs", "all",
        )
        assert code == 0
        assert "inf" in payload["estimates"]

    def test_estimate_pairs_file(self, tmp_path):
        csv = tmp_path / "points.csv"
        PointCloud([0.0, 1.0, 2.0]).to_csv(csv)
        pairs = tmp_path / "pairs.csv"
        pairs.write_text("0,2\n", encoding="utf-8")
        code, payload = run_cli(
            tmp_path, "estimate", "--input", str(csv),
            "--r", "5.0", "--q", "2", "--pairs", str(pairs),
        )
        assert code == 0
        assert payload["pairs"] == [[0, 2]]

    def test_estimate_domain_with_rule_and_factor(self, tmp_path):
        factor = json.dumps({
            "kind": "radial_affine", "base": 2.0, "axis": 0, "slope": 1.0,
            "kappa": 1.0, "f_min": 1.0,
        })
        code, payload = run_cli(
            tmp_path, "estimate", "--domain", "circle", "--n", "120",
            "--factor", factor, "--rule", "knn_default",
            "--pairs", "random:50", "--seed", "9",
        )
        assert code == 0
        assert payload["params"]["rule"] == "knn_default"
        assert payload["l_inf"] >= payload["ell_inf"]

    def test_infinite_resolution_flag(self, tmp_path):
        csv = tmp_path / "points.csv"
        PointCloud([0.0, 1.0, 2.0]).to_csv(csv)
        code, payload = run_cli(
            tmp_path, "estimate", "--input", str(csv),
            "--r", "5.0", "--q", "inf", "--pairs", "all",
        )
        assert code == 0
        assert payload["params"]["q"] == "inf"

    def test_byte_identical_reruns(self, tmp_path):
        args = ["convergence", "--domain", "segment", "--n-grid", "30,60",
                "--trials", "2", "--seed", "3", "--pair-budget", "100"]
        first = tmp_path / "a.json"
        second = tmp_path / "b.json"
        assert main(args + ["--out", str(first)]) == 0
        assert main(args + ["--out", str(second)]) == 0
        assert first.read_bytes() == second.read_bytes()

    def test_carved_cube_command(self, tmp_path):
        code, payload = run_cli(
            tmp_path, "carved-cube", "--epsilon", "0.1",
            "--mc-samples", "20000",
        )
        assert code == 0
        assert payload["distortion"] >= payload["distortion_lower_bound"]

    def test_hausdorff_command(self, tmp_path):
        code, payload = run_cli(
            tmp_path, "hausdorff", "--domain", "circle", "--n", "64",
            "--n", "128", "--trials", "3",
        )
        assert code == 0
        assert payload["all_ok"]

    def test_graph_equiv_command(self, tmp_path):
        code, payload = run_cli(
            tmp_path, "graph-equiv", "--n", "150", "--k", "60",
            "--eps", "0.5", "--trials", "5",
        )
        assert code == 0
        assert payload["both_inclusion_freq"] == 1.0

    def test_selftest_command(self, tmp_path):
        code, payload = run_cli(tmp_path, "selftest")
        assert code == 0
        assert payload["all_ok"]

    def test_selftest_injection_exits_3(self, tmp_path):
        code, payload = run_cli(tmp_path, "selftest", "--inject",
                                "weight-asymmetry")
        assert code == 3
        assert not payload["all_ok"]

    def test_usage_error_exit_1(self, tmp_path):
        code = main(["estimate", "--r", "1.0", "--q", "2"])
        assert code == 1

    def test_io_error_exit_2(self, tmp_path):
        code = main(["estimate", "--input", str(tmp_path / "missing.csv"),
                     "--r", "1.0", "--q", "2"])
        assert code == 2

    def test_parse_error_reports_line(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("1.0,2.0\noops\n", encoding="utf-8")
        code = main(["estimate", "--input", str(bad), "--r", "1", "--q", "2"])
        assert code == 2
        assert "line 2" in capsys.readouterr().err
