import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from fastmix.exact import MarginalTable, brute_force
from fastmix.experiments import (
    ExperimentRecord,
    MethodSettings,
    default_checkpoints,
    error_curve,
    evaluate_model,
    ground_truth,
    marginal_error,
    run_strength_sweep,
    run_time_sweep,
)
from fastmix.mrf import gen_ising_grid, gen_random_graph, save_model


def tiny_settings(**kw):
    base = dict(sweeps=400, steps=3, pool_size=30, radius=1.5)
    base.update(kw)
    return MethodSettings(**base)


class TestMarginalError:
    def test_identical_zero(self):
        t = MarginalTable(node=[np.array([0.3, 0.7])])
        assert marginal_error(t, t) == 0.0

    def test_half_gap(self):
        t = MarginalTable(node=[np.array([1.0, 0.0]), np.array([1.0, 0.0])])
        e = MarginalTable(node=[np.array([0.5, 0.5]), np.array([0.5, 0.5])])
        assert marginal_error(t, e) == pytest.approx(0.5)

    def test_symmetry(self):
        rng = np.random.default_rng(80)
        p = rng.dirichlet(np.ones(2), size=3)
        q = rng.dirichlet(np.ones(2), size=3)
        a = MarginalTable(node=[row for row in p])
        b = MarginalTable(node=[row for row in q])
        assert marginal_error(a, b) == pytest.approx(marginal_error(b, a))

    def test_multistate_average(self):
        t = MarginalTable(node=[np.array([0.5, 0.25, 0.25])])
        e = MarginalTable(node=[np.array([0.25, 0.5, 0.25])])
        assert marginal_error(t, e) == pytest.approx((0.25 + 0.25 + 0.0) / 3)

    def test_shape_mismatch(self):
        a = MarginalTable(node=[np.array([0.5, 0.5])])
        b = MarginalTable(node=[np.array([0.3, 0.3, 0.4])])
        with pytest.raises(ValueError):
            marginal_error(a, b)


class TestGroundTruth:
    def test_brute_force_source(self):
        m = gen_random_graph(4, 0.6, 1.0, 1.0, seed=0)
        truth = ground_truth(m)
        assert truth.meta["source"] == "brute_force"

    def test_reference_chain_matches_brute_force(self):
        m = gen_random_graph(4, 0.8, 1.0, 0.8, seed=1)
        exact = ground_truth(m)
        ref = ground_truth(m, cap=2, ref_chains=60, ref_sweeps=1500, seed=2)
        assert ref.meta["source"] == "reference_gibbs"
        assert marginal_error(exact, ref) < 0.02


class TestRecord:
    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentRecord("t", "mixed", 1.0, 1.0, 0, "mf", 0, error=1.5)
        with pytest.raises(ValueError):
            ExperimentRecord("t", "mixed", 1.0, 1.0, 0, "mf", 0, error=0.5,
                             stderr=float("inf"))


class TestEvaluate:
    def test_all_methods_run(self):
        m = gen_random_graph(4, 0.8, 1.0, 1.5, seed=3)
        methods = ["gibbs_original", "euclidean+gibbs", "piecewise+gibbs",
                   "reversed+gibbs", "mf", "lbp"]
        records = evaluate_model(m, methods, tiny_settings(), seed=0)
        assert [r.method for r in records] == methods
        for rec in records:
            assert 0.0 <= rec.error <= 1.0

    def test_zero_coupling_every_method_accurate(self):
        m = gen_random_graph(4, 0.8, 1.0, 0.0, seed=4)
        methods = ["gibbs_original", "mf", "lbp", "euclidean+gibbs"]
        records = evaluate_model(m, methods, tiny_settings(sweeps=4000), seed=0)
        for rec in records:
            assert rec.error < 0.05, rec.method


class TestStrengthSweep:
    def test_row_count_and_determinism(self, tmp_path):
        top = {"kind": "random", "n": 4, "p_e": 0.8, "d_n": 1.0, "mode": "mixed"}
        out1 = tmp_path / "a.csv"
        out2 = tmp_path / "b.csv"
        methods = ["gibbs_original", "mf"]
        for out in (out1, out2):
            run_strength_sweep(top, [0.0, 1.0], trials=2, methods=methods,
                               out=str(out), settings=tiny_settings(), master_seed=5)
        rows1 = list(csv.DictReader(open(out1)))
        assert len(rows1) == 2 * len(methods)
        # byte identity modulo the wall-clock column
        a = open(out1).read().splitlines()
        b = open(out2).read().splitlines()
        header = a[0].split(",")
        drop = header.index("mean_seconds")
        for ra, rb in zip(a, b):
            va = ra.split(",")
            vb = rb.split(",")
            del va[drop], vb[drop]
            assert va == vb

    def test_zero_coupling_floor(self, tmp_path):
        top = {"kind": "random", "n": 4, "p_e": 0.8, "d_n": 1.0, "mode": "mixed"}
        out = tmp_path / "zero.csv"
        records = run_strength_sweep(top, [0.0], trials=2, methods=["gibbs_original", "mf"],
                                     out=str(out), settings=tiny_settings(sweeps=4000),
                                     master_seed=6)
        for rec in records:
            assert rec.error < 0.05

    def test_parallel_matches_serial(self, tmp_path):
        top = {"kind": "random", "n": 4, "p_e": 0.8, "d_n": 1.0, "mode": "mixed"}
        serial = tmp_path / "serial.csv"
        parallel = tmp_path / "parallel.csv"
        run_strength_sweep(top, [1.0], trials=2, methods=["mf"], out=str(serial),
                           settings=tiny_settings(), master_seed=7, threads=1)
        run_strength_sweep(top, [1.0], trials=2, methods=["mf"], out=str(parallel),
                           settings=tiny_settings(), master_seed=7, threads=2)
        ra = list(csv.DictReader(open(serial)))
        rb = list(csv.DictReader(open(parallel)))
        for a, b in zip(ra, rb):
            assert a["mean_error"] == b["mean_error"]


class TestTimeSweep:
    def test_checkpoints_monotone_and_schema(self, tmp_path):
        top = {"kind": "random", "n": 4, "p_e": 0.8, "d_n": 1.0, "mode": "mixed"}
        out = tmp_path / "time.csv"
        records = run_time_sweep(top, 1.0, ["gibbs_original", "mf"], str(out),
                                 settings=tiny_settings(), master_seed=8,
                                 original_limit=500, projected_limit=200)
        rows = list(csv.DictReader(open(out)))
        gibbs_cps = [int(r["checkpoint"]) for r in rows if r["method"] == "gibbs_original"]
        assert gibbs_cps == sorted(gibbs_cps)
        assert any(r["method"] == "mf" and r["checkpoint"] == "0" for r in rows)

    def test_error_curve_converges(self):
        m = gen_random_graph(3, 0.8, 1.0, 0.5, seed=9)
        _, truth = brute_force(m)
        curve = error_curve(m, truth, [100, 5000], seed=1)
        assert curve[-1][1] < curve[0][1] + 0.02
        assert curve[-1][1] < 0.05

    def test_default_checkpoints(self):
        cps = default_checkpoints(30000)
        assert cps[0] >= 10 and cps[-1] == 30000
        assert all(a < b for a, b in zip(cps, cps[1:]))


class TestCli:
    def run_cli(self, *argv):
        return subprocess.run([sys.executable, "-m", "fastmix.cli", *argv],
                              capture_output=True, text=True, check=True)

    def test_gen_bound_project_sample_pipeline(self, tmp_path):
        model = tmp_path / "m.json"
        self.run_cli("gen", "--topology", "random", "--n", "4", "--pe", "0.8",
                     "--de", "2.0", "--seed", "3", "--out", str(model))
        out = self.run_cli("bound", "--model", str(model), "--variant", "inf_corollary",
                           "--norm", "inf", "--epsilon", "0.01")
        payload = json.loads(out.stdout)
        assert payload["norm_value"] > 0

        proj = tmp_path / "proj.json"
        self.run_cli("project", "--model", str(model), "--norm", "inf", "--c", "1.0",
                     "--mode", "exact", "--out", str(proj))
        saved = json.loads(open(proj).read())
        assert saved["converged"]
        assert "z" in saved and "gap" in saved

        marg = tmp_path / "marg.json"
        self.run_cli("sample", "--model", str(model), "--sweeps", "500",
                     "--scan", "systematic", "--seed", "1", "--out", str(marg))
        payload = json.loads(open(marg).read())
        assert payload["count"] == 450  # 10% burn-in

    def test_project_div_and_evaluate(self, tmp_path):
        model = tmp_path / "m.json"
        self.run_cli("gen", "--topology", "random", "--n", "4", "--pe", "0.8",
                     "--de", "1.5", "--seed", "4", "--out", str(model))
        theta = tmp_path / "theta.json"
        self.run_cli("project-div", "--model", str(model), "--divergence", "reversed",
                     "--c", "1.0", "--steps", "2", "--pool", "20", "--seed", "0",
                     "--out", str(theta))
        res = tmp_path / "eval.csv"
        self.run_cli("evaluate", "--model", str(model), "--methods", "mf,lbp",
                     "--out", str(res))
        rows = list(csv.DictReader(open(res)))
        assert {r["method"] for r in rows} == {"mf", "lbp"}

    def test_sweep_strength_with_figure(self, tmp_path):
        out = tmp_path / "sweep.csv"
        self.run_cli("sweep-strength", "--topology", "random", "--n", "4", "--pe", "0.8",
                     "--strengths", "0,1", "--trials", "2", "--methods", "mf,lbp",
                     "--seed", "2", "--out", str(out))
        assert out.exists()
        assert (tmp_path / "sweep.png").exists()
        rows = list(csv.DictReader(open(out)))
        assert len(rows) == 4

    def test_sweep_time_with_figure(self, tmp_path):
        out = tmp_path / "time.csv"
        self.run_cli("sweep-time", "--topology", "random", "--n", "4", "--pe", "0.8",
                     "--de", "1.0", "--methods", "gibbs,mf", "--seed", "2",
                     "--original-limit", "300", "--projected-limit", "200",
                     "--out", str(out))
        assert out.exists()
        assert (tmp_path / "time.png").exists()

    def test_plot_subcommand(self, tmp_path):
        out = tmp_path / "sweep.csv"
        self.run_cli("sweep-strength", "--topology", "random", "--n", "4", "--pe", "0.8",
                     "--strengths", "0", "--trials", "2", "--methods", "mf",
                     "--seed", "2", "--out", str(out), "--no-plot")
        assert not (tmp_path / "sweep.png").exists()
        fig = tmp_path / "fig.png"
        self.run_cli("plot", "--csv", str(out), "--out", str(fig))
        assert fig.exists()
