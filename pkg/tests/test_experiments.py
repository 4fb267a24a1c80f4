import json
import math
from pathlib import Path

import numpy as np
import pytest

from syncnet import io
from syncnet.cli import main
from syncnet.coupling import TANH
from syncnet.dynamics import ScalarNetwork, simulate
from syncnet.experiments import (ClusterReport, ConfigError, ExperimentConfig,
                                 adjacency_agreement, count_distinct, quadrant_field, resolve_k,
                                 run_cluster, run_experiment, run_montecarlo,
                                 run_noise_contrast, run_topology_scan, run_trace,
                                 split_clusters, trace_network)
from syncnet.graph import gen_ring

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def small_trace(**kw):
    base = dict(experiment="trace", seed=5,
                topology={"kind": "ring", "n": 8, "degree": 2},
                model={"kind": "vector", "xi": [1.0, -1.0], "n_obs": 3},
                coupling={"f": "tanh"}, K="auto*1.5", t_end=10.0, dt="auto")
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfig:
    def test_load_examples(self):
        for path in sorted(CONFIGS.glob("*.yaml")):
            assert ExperimentConfig.load(path).experiment

    @pytest.mark.parametrize("change", [
        {"experiment": "nope"}, {"topology": {"kind": "torus"}}, {"K": "big*2"}, {"K": -1.0},
        {"dt": 0.0}, {"t_end": -1.0}, {"trials": 0}, {"coupling": {"f": "relu"}},
        {"model": {"kind": "matrix"}}, {"coupling": {"f": "tanh", "noise_var": -0.1}}])
    def test_rejects_invalid(self, change):
        with pytest.raises(ConfigError):
            small_trace(**change)

    def test_unknown_key(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("experiment: trace\nbogus: 1\n")
        with pytest.raises(ConfigError, match="bogus"):
            ExperimentConfig.load(p)

    def test_overrides(self):
        cfg = ExperimentConfig.load(CONFIGS / "trace_vector.yaml", seed=99, out=None)
        assert cfg.seed == 99


class TestResolveK:
    def _net(self, f=TANH):
        return ScalarNetwork(gen_ring(6, 2), np.arange(6.0), 1.0, 0.0, f)

    def test_auto_is_above_upper_bound(self):
        from syncnet.bounds import coupling_bounds
        net = self._net()
        k_u = coupling_bounds(net).k_u_upper
        for factor in (1.01, 1.5, 3.0):
            assert resolve_k(f"auto*{factor}", net) > k_u
        assert resolve_k("auto×2", net) == pytest.approx(2 * k_u)

    def test_auto_needs_bounded_certified(self):
        from syncnet.coupling import LINEAR, SIN
        with pytest.raises(ConfigError, match="unbounded"):
            resolve_k("auto*2", self._net(LINEAR))
        with pytest.raises(ConfigError, match="certified"):
            resolve_k("auto*2", self._net(SIN))
        assert resolve_k("auto*2", self._net(SIN), allow_uncertified=True) > 0

    def test_numeric_and_rate(self):
        net = self._net()
        assert resolve_k(2.5, net) == 2.5
        assert resolve_k("rate*2", net) == pytest.approx(2.0 / 1.0)


class TestTrace:
    def test_noise_free_converges(self, tmp_path):
        res = run_trace(small_trace(), out=tmp_path)
        s = res.summary
        assert s["synchronized"] and s["max_error_vs_ml"] < 1e-6
        assert s["conservation_deviation"] < 1e-9
        assert s["lyapunov_max_increase"] <= 1e-10
        for name in ("trace.csv", "summary.json", "topology.txt", "observations.csv"):
            assert (tmp_path / name).exists()

    def test_decoupled(self):
        s = run_trace(small_trace(K=0.0)).summary
        assert not s["synchronized"]
        assert s["distinct_final_derivatives"] == 16

    def test_noisy_tail_near_ml(self):
        s = run_trace(small_trace(coupling={"f": "tanh", "noise_var": 0.1}, t_end=20.0)).summary
        assert s["tail_max_z"] < 3.0


class TestSmallRunners:
    def test_montecarlo_table(self, tmp_path):
        cfg = ExperimentConfig(experiment="montecarlo", topology={"kind": "ring", "degree": 4},
                               model={"kind": "vector", "xi": [1.0, 2.0], "n_obs": 4},
                               coupling={"f": "tanh"}, K="rate*4", t_end=1.0, trials=4,
                               options={"n_values": [8, 16]})
        s = run_montecarlo(cfg, out=tmp_path).summary
        assert [r["n"] for r in s["rows"]] == [8, 16]
        assert all(0.8 < r["ratio"] < 1.25 for r in s["rows"])
        assert len(io.read_table(tmp_path / "variance.csv")) == 2

    def test_montecarlo_threads_match_serial(self):
        cfg = ExperimentConfig(experiment="montecarlo", topology={"kind": "ring", "degree": 4},
                               model={"kind": "vector", "xi": [1.0, 2.0], "n_obs": 4},
                               coupling={"f": "tanh"}, K="rate*4", t_end=0.5, trials=3,
                               options={"n_values": [8]})
        serial = run_montecarlo(cfg).summary
        cfg.options["jobs"] = 3
        assert run_montecarlo(cfg).summary == serial

    def test_noise_contrast_zero_noise(self):
        cfg = ExperimentConfig(experiment="noise-contrast",
                               topology={"kind": "ring", "n": 8, "degree": 2},
                               coupling={"f": "linear", "noise_var": 0.0}, K=2.0, t_end=30.0,
                               dt=0.01, trials=5, options={"steps": 20, "window": 2.0,
                                                           "window_start": 10.0,
                                                           "bootstrap": 50})
        s = run_noise_contrast(cfg).summary
        assert s["max_variance_a"] == 0.0 and s["max_variance_b"] == 0.0

    def test_noise_contrast_needs_linear(self):
        cfg = ExperimentConfig(experiment="noise-contrast",
                               topology={"kind": "ring", "n": 8, "degree": 2},
                               coupling={"f": "tanh"}, K=1.0, dt=0.01)
        with pytest.raises(ConfigError):
            run_noise_contrast(cfg)

    def test_topology_scan_ring(self):
        cfg = ExperimentConfig.load(CONFIGS / "topology_ring.yaml")
        cfg.options["measure_sync"] = False
        s = run_topology_scan(cfg).summary
        assert s["eq_violations"] == 0
        for r in s["rows"]:
            assert r["lambda2"] == pytest.approx(r["lambda2_formula"], abs=1e-9)

    def test_topology_scan_family_check(self):
        cfg = ExperimentConfig(experiment="topology-scan",
                               topology={"kind": "erdos_renyi", "p": 0.3})
        with pytest.raises(ConfigError):
            run_topology_scan(cfg)


class TestCluster:
    def test_helpers(self):
        labels, count = split_clusters([0.0, 5.0, 0.1, 5.05, 9.0], 0.5)
        assert count == 3 and labels.tolist() == [0, 1, 0, 1, 2]
        field, regions = quadrant_field(4, 4, [0, 1, 2, 3], 0.0, np.random.default_rng(0))
        assert regions.tolist()[0] == [0, 0, 1, 1] and field[3, 3] == 3.0
        assert adjacency_agreement(regions.ravel(), regions) == 1.0
        assert count_distinct([1.0, 1.0, 2.0]) == 2
        with pytest.raises(ValueError):
            ClusterReport(field, field, 0, 0.1, regions, regions, 1.0)

    def _cfg(self, **kw):
        base = dict(experiment="cluster", seed=2,
                    topology={"kind": "grid", "rows": 8, "cols": 8, "radius": 2.0},
                    coupling={"f": "tanh"}, t_end=5.0, dt=0.01)
        base.update(kw)
        return ExperimentConfig(**base)

    def test_decoupled_counts_every_value(self):
        s = run_cluster(self._cfg(K=0.0, t_end=0.5)).summary
        assert s["cluster_count"] == s["distinct_omega"] == 64

    def test_strong_coupling_single_cluster(self, tmp_path):
        s = run_cluster(self._cfg(K="auto*1.2", dt="auto", t_end=2.0), out=tmp_path).summary
        assert s["cluster_count"] == 1
        assert io.read_grid(tmp_path / "field_after.csv").shape == (8, 8)

    def test_needs_grid(self):
        with pytest.raises(ConfigError):
            run_cluster(self._cfg(topology={"kind": "ring", "n": 8, "degree": 2}))


class TestIO:
    def test_trajectory_round_trip(self, tmp_path):
        net = ScalarNetwork(gen_ring(5, 2), np.random.default_rng(0).normal(size=5), 1.0, 1.3,
                            TANH)
        traj = simulate(net, 1.0, 0.01)
        io.write_trajectory_csv(traj, tmp_path / "t.csv")
        t, s, d = io.read_trajectory_csv(tmp_path / "t.csv")
        assert np.array_equal(t, traj.times) and np.array_equal(s, traj.states)
        assert np.array_equal(d, traj.derivs)
        header = (tmp_path / "t.csv").read_text().splitlines()[0].split(",")
        assert header[:2] == ["t", "theta_1"] and header[-1] == "dtheta_5"

    def test_vector_trajectory_round_trip(self, tmp_path):
        res = run_trace(small_trace(t_end=1.0))
        traj = res.extra["trajectory"]
        io.write_trajectory_csv(traj, tmp_path / "v.csv")
        _, s, d = io.read_trajectory_csv(tmp_path / "v.csv", dim=2)
        assert np.array_equal(s, traj.states) and np.array_equal(d, traj.derivs)

    def test_json_round_trip(self, tmp_path):
        record = {"a": np.float64(0.1) + np.float64(0.2), "b": [np.int64(3), math.inf],
                  "c": np.arange(3.0), "d": None, "e": np.bool_(True)}
        io.write_json(record, tmp_path / "s.json")
        back = io.read_json(tmp_path / "s.json")
        assert back == {"a": 0.30000000000000004, "b": [3, "inf"], "c": [0.0, 1.0, 2.0],
                        "d": None, "e": True}

    def test_table_round_trip(self, tmp_path):
        rows = [{"n": 8, "v": 1 / 3, "ok": True, "x": None}, {"n": 16, "v": 2e-300,
                                                               "ok": False, "x": None}]
        io.write_table(rows, tmp_path / "t.csv")
        assert io.read_table(tmp_path / "t.csv") == rows

    def test_summary_round_trip(self, tmp_path):
        res = run_trace(small_trace(t_end=2.0), out=tmp_path)
        assert io.read_json(tmp_path / "summary.json") == io.jsonable(res.summary)


class TestDeterminism:
    @pytest.mark.parametrize("name", ["trace", "cluster"])
    def test_identical_bytes(self, tmp_path, name):
        cfg = small_trace(t_end=3.0) if name == "trace" else ExperimentConfig(
            experiment="cluster", seed=1, topology={"kind": "grid", "rows": 6, "cols": 6},
            coupling={"f": "tanh"}, K="lower*0.5", t_end=2.0, dt=0.01)
        run_experiment(cfg, out=tmp_path / "a")
        run_experiment(cfg, out=tmp_path / "b")
        files = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert files
        for f in files:
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_noisy_trace_identical(self, tmp_path):
        cfg = small_trace(t_end=2.0, coupling={"f": "tanh", "noise_var": 0.1})
        a = run_trace(cfg).extra["trajectory"]
        b = run_trace(cfg).extra["trajectory"]
        assert np.array_equal(a.states, b.states)


class TestCLI:
    def test_trace_run(self, tmp_path, capsys):
        cfg = tmp_path / "c.yaml"
        cfg.write_text((CONFIGS / "trace_vector.yaml").read_text().replace("t_end: 20.0",
                                                                          "t_end: 2.0"))
        assert main(["trace", "--config", str(cfg), "--out", str(tmp_path / "o"),
                     "--seed", "4"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["status"] == "ok" and out["summary"]["seed"] == 4
        assert (tmp_path / "o" / "summary.json").exists()

    def test_bounds_subcommand(self, capsys):
        assert main(["bounds", "--config", str(CONFIGS / "trace_vector.yaml")]) == 0
        rec = json.loads(capsys.readouterr().out)
        assert {"k_l_lower", "k_u_upper", "lambda2", "d_max", "g", "f_max"} <= set(rec)
        cfg = ExperimentConfig.load(CONFIGS / "trace_vector.yaml")
        assert rec["K"] == pytest.approx(trace_network(cfg)[1].K)

    def test_error_record(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("experiment: trace\ntopology: {kind: torus}\n")
        code = main(["trace", "--config", str(bad), "--out", str(tmp_path)])
        assert code != 0
        err = json.loads(capsys.readouterr().err)
        assert err["status"] == "error" and err["error"] == "ConfigError"

    def test_missing_file(self, tmp_path, capsys):
        assert main(["trace", "--config", str(tmp_path / "none.yaml"), "--out", "x"]) != 0
        assert json.loads(capsys.readouterr().err)["status"] == "error"
