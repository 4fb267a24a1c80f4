"""Experiment configuration and runners behind the ``syncnet`` CLI.

Every runner is a pure function of its ``ExperimentConfig``: all randomness is
derived from ``config.seed`` through ``numpy.random.SeedSequence`` so that two
runs with the same config write byte-identical files.
"""
from __future__ import annotations

import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from . import io
from .bounds import coupling_bounds
from .coupling import get_coupling
from .dynamics import (ScalarNetwork, VectorNetwork, conservation_check, lyapunov_series, simulate,
                       solve_equilibrium, solve_equilibrium_vector, suggest_dt)
from .estimation import (ScalarObservationModel, average_consensus_baseline,
                         centralized_ml_scalar, centralized_ml_vector, configure_scalar,
                         configure_vector, draw_scalar, draw_vector, random_vector_model)
from .graph import (Topology, algebraic_connectivity, fiedler_lower_bound, gen_erdos_renyi,
                    gen_grid, gen_ring, gen_scale_free,
                    read_edge_list, ring_lambda2, ring_lambda2_approx, weighted_laplacian,
                    write_edge_list)

EXPERIMENTS = ("trace", "montecarlo", "noise-contrast", "topology-scan", "cluster")
TOPOLOGY_KINDS = ("ring", "grid", "scale_free", "erdos_renyi", "file")
_K_PATTERN = re.compile(r"^\s*(auto|lower|rate)\s*[*×x]\s*([0-9.eE+-]+)\s*$")


class ConfigError(ValueError):
    """Invalid or unresolvable experiment configuration."""


@dataclass
class ExperimentConfig:
    """Parsed experiment description.

    ``K`` is a number or one of ``"auto*F"`` (F times the upper critical
    bound), ``"lower*F"`` (F times the lower critical bound) and ``"rate*F"``
    (F times the ratio of the largest local information to the algebraic
    connectivity). ``dt`` is a positive number or ``"auto"``. ``options``
    holds experiment-specific settings.
    """

    experiment: str
    topology: dict = field(default_factory=lambda: {"kind": "ring", "n": 16, "degree": 4})
    model: dict = field(default_factory=lambda: {"kind": "scalar", "xi": 1.0})
    coupling: dict = field(default_factory=lambda: {"f": "tanh"})
    K: float | str = "auto*1.5"
    t_end: float = 10.0
    dt: float | str = "auto"
    trials: int = 1
    seed: int = 0
    out: str | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        kind = self.topology.get("kind")
        if kind not in TOPOLOGY_KINDS:
            raise ConfigError(f"unknown topology kind {kind!r}; choose from {TOPOLOGY_KINDS}")
        if self.model.get("kind", "scalar") not in ("scalar", "vector"):
            raise ConfigError("model.kind must be 'scalar' or 'vector'")
        try:
            get_coupling(self.coupling.get("f", "tanh"))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.coupling.get("noise_var", 0.0) < 0:
            raise ConfigError("coupling.noise_var must be nonnegative")
        if isinstance(self.K, str):
            if not _K_PATTERN.match(self.K):
                raise ConfigError(f"cannot parse K = {self.K!r}")
        elif not (isinstance(self.K, (int, float)) and self.K >= 0):
            raise ConfigError("K must be a nonnegative number or a keyword*factor string")
        if not (self.dt == "auto" or (isinstance(self.dt, (int, float)) and self.dt > 0)):
            raise ConfigError("dt must be a positive number or 'auto'")
        if not self.t_end > 0:
            raise ConfigError("t_end must be positive")
        if int(self.trials) < 1:
            raise ConfigError("trials must be at least 1")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        if "experiment" not in data:
            raise ConfigError("config needs an 'experiment' entry")
        return cls(**data)

    @classmethod
    def load(cls, path, **overrides) -> "ExperimentConfig":
        try:
            data = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a key-value mapping")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


# ----------------------------------------------------------------- resolution

def _seed_int(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def build_topology(spec: dict, seed=0, n: int | None = None) -> Topology:
    kind = spec.get("kind")
    size = n if n is not None else spec.get("n")
    if kind == "ring":
        return gen_ring(int(size), int(spec.get("degree", 4)))
    if kind == "grid":
        return gen_grid(int(spec["rows"]), int(spec["cols"]), float(spec.get("radius", 2.0)))
    if kind == "scale_free":
        return gen_scale_free(int(size), int(spec.get("m0", 3)), int(spec.get("m", 3)), seed)
    if kind == "erdos_renyi":
        return gen_erdos_renyi(int(size), float(spec["p"]), seed)
    if kind == "file":
        return read_edge_list(spec["path"])
    raise ConfigError(f"unknown topology kind {kind!r}")


def _scalar_model(spec: dict, n: int) -> ScalarObservationModel:
    b = np.broadcast_to(np.asarray(spec.get("b", 1.0), dtype=float), (n,))
    s2 = np.broadcast_to(np.asarray(spec.get("sigma2", 1.0), dtype=float), (n,))
    return ScalarObservationModel(b.copy(), s2.copy(), float(spec.get("xi", 1.0)))


def build_network(cfg: ExperimentConfig, topology: Topology, ss: np.random.SeedSequence,
                  theta0_range: float = 0.0):
    """Draw a model and observations, then return ``(network, centralized ML, model, x)``.

    The returned network still carries ``K = 0``; see ``resolve_k``.
    """
    model_ss, obs_ss, init_ss = ss.spawn(3)
    spec = cfg.model
    f = get_coupling(cfg.coupling.get("f", "tanh"))
    noise_std = math.sqrt(float(cfg.coupling.get("noise_var", 0.0)))
    init = np.random.default_rng(init_ss)
    n = topology.n
    if spec.get("kind", "scalar") == "vector":
        xi = np.asarray(spec.get("xi", [1.0, 2.0, 3.0]), dtype=float)
        model = random_vector_model(n, xi.shape[0], int(spec.get("n_obs", 2 * xi.shape[0])),
                                    xi, float(spec.get("noise_var", 1.0)),
                                    np.random.default_rng(model_ss))
        x = draw_vector(model, obs_ss)
        theta0 = init.uniform(-theta0_range, theta0_range, (n, model.dim))
        net = configure_vector(model, x, 0.0, f, topology, noise_std, theta0)
        ml = centralized_ml_vector(model, x)
    else:
        model = _scalar_model(spec, n)
        x = draw_scalar(model, obs_ss)
        theta0 = init.uniform(-theta0_range, theta0_range, n)
        net = configure_scalar(model, x, 0.0, f, topology, noise_std, theta0)
        ml = centralized_ml_scalar(model, x)
    return net, ml, model, x


def resolve_k(spec, net, allow_uncertified: bool = False) -> float:
    """Turn a numeric or ``keyword*factor`` coupling gain into a number."""
    if not isinstance(spec, str):
        return float(spec)
    m = _K_PATTERN.match(spec)
    if not m:
        raise ConfigError(f"cannot parse K = {spec!r}")
    mode, factor = m.group(1), float(m.group(2))
    lam2 = algebraic_connectivity(weighted_laplacian(net.topology))
    if mode == "rate":
        if isinstance(net, VectorNetwork):
            scale = float(np.linalg.eigvalsh(net.Q).max())
        else:
            scale = float(net.c.max())
        return factor * scale / lam2
    if not net.f.bounded:
        raise ConfigError(f"K = {spec!r} needs a bounded coupling function; "
                          f"{net.f.name!r} is unbounded, set K explicitly")
    if not net.f.satisfies_a2 and not allow_uncertified:
        raise ConfigError(f"bounds for {net.f.name!r} are not certified; set "
                          "coupling.allow_uncertified: true or give K explicitly")
    b = coupling_bounds(net)
    base = b.k_u_upper if mode == "auto" else b.k_l_lower
    # identical local estimates give a zero bound; any positive gain then works
    return factor * base if base > 0 else factor


def resolve_dt(cfg: ExperimentConfig, net) -> float:
    if cfg.dt == "auto":
        return suggest_dt(net, dt_max=float(cfg.options.get("dt_max", 0.01)))
    return float(cfg.dt)


def _prepare(cfg, topology, ss, theta0_range=0.0):
    net, ml, model, x = build_network(cfg, topology, ss, theta0_range)
    allow = bool(cfg.coupling.get("allow_uncertified", False))
    net = net.replace(K=resolve_k(cfg.K, net, allow))
    return net, ml, model, x


def _pool_map(fn, items, jobs):
    items = list(items)
    if jobs <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _out_dir(cfg, out):
    target = out if out is not None else cfg.out
    if target is None:
        return None
    path = Path(target)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _bootstrap_slope(x, samples, n_boot, rng):
    """Percentile CI of the slope of the across-sample variance versus ``x``.

    ``samples`` has shape (n_samples, len(x)); resampling is over rows.
    """
    slopes = np.empty(n_boot)
    n = samples.shape[0]
    for b in range(n_boot):
        pick = samples[rng.integers(0, n, n)]
        slopes[b] = np.polyfit(x, pick.var(axis=0, ddof=1), 1)[0]
    return float(np.quantile(slopes, 0.025)), float(np.quantile(slopes, 0.975))


# --------------------------------------------------------------------- trace

@dataclass
class RunResult:
    summary: dict
    tables: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)


def count_distinct(values, rel_tol=1e-9) -> int:
    v = np.sort(np.asarray(values, dtype=float).ravel())
    tol = rel_tol * (1.0 + np.abs(v).max())
    return int(1 + np.count_nonzero(np.diff(v) > tol))


def trace_network(cfg: ExperimentConfig):
    """Topology, configured network, centralized ML, observations and noise seed of a trace run."""
    topo_ss, net_ss, noise_ss = np.random.SeedSequence(cfg.seed).spawn(3)
    topology = build_topology(cfg.topology, _seed_int(topo_ss))
    net, ml, _, x = _prepare(cfg, topology, net_ss,
                             float(cfg.options.get("theta0_range", 1.0)))
    return topology, net, ml, x, noise_ss


def run_trace(cfg: ExperimentConfig, out=None) -> RunResult:
    """One simulation with its centralized reference and diagnostics."""
    opts = cfg.options
    topology, net, ml, x, noise_ss = trace_network(cfg)
    dt = resolve_dt(cfg, net)
    traj = simulate(net, cfg.t_end, dt, seed=_seed_int(noise_ss),
                    eps=float(opts.get("eps", 1e-6)), sample_every=opts.get("sample_every"))
    final = traj.derivs[-1]
    tail = traj.derivs[traj.times >= (1.0 - float(opts.get("tail_fraction", 0.2))) * traj.t_end]
    tail_mean = tail.mean(axis=0)
    tail_std = tail.std(axis=0, ddof=1) if tail.shape[0] > 1 else np.zeros_like(tail_mean)
    summary = {
        "experiment": "trace",
        "seed": cfg.seed,
        "n_nodes": topology.n,
        "dim": net.dim if isinstance(net, VectorNetwork) else 1,
        "coupling": net.f.name,
        "K": net.K,
        "dt": dt,
        "t_end": traj.t_end,
        "noise_var": net.noise_std ** 2,
        "bounds": coupling_bounds(net).to_dict(),
        "synchronized": traj.synchronized,
        "sync_time": traj.sync_time,
        "predicted_state": traj.predicted,
        "centralized_ml": ml,
        "final_derivatives": final,
        "max_error_vs_ml": float(np.abs(final - ml).max()),
        "distinct_final_derivatives": count_distinct(final),
        "conservation_deviation": conservation_check(net, traj),
        "tail_mean": tail_mean,
        "tail_std": tail_std,
        "tail_max_z": float(np.max(np.abs(tail_mean - ml) / np.maximum(tail_std, 1e-300)))
        if net.noise_std > 0 else None,
    }
    if net.noise_std == 0 and net.K > 0 and traj.synchronized:
        solver = solve_equilibrium_vector if isinstance(net, VectorNetwork) else solve_equilibrium
        try:
            eq = solver(net)
            v = lyapunov_series(net, traj, eq.psi)
            summary["lyapunov_max_increase"] = float(np.max(np.diff(v), initial=0.0))
        except RuntimeError as exc:  # fixed point not reached
            summary["lyapunov_max_increase"] = None
            summary["equilibrium_error"] = str(exc)
    path = _out_dir(cfg, out)
    if path is not None:
        io.write_trajectory_csv(traj, path / "trace.csv")
        write_edge_list(topology, path / "topology.txt")
        obs = np.atleast_2d(np.asarray(x).T).T if np.ndim(x) == 1 else x
        io.write_table([{f"x_{k + 1}": v for k, v in enumerate(np.atleast_1d(row))}
                        for row in obs], path / "observations.csv")
        io.write_json(summary, path / "summary.json")
    return RunResult(summary, extra={"trajectory": traj, "network": net})


# ----------------------------------------------------------------- montecarlo

def _montecarlo_trial(cfg, n, trial, topology):
    ss = np.random.SeedSequence([cfg.seed, n, trial])
    net_ss, noise_ss = ss.spawn(2)
    net, ml, model, _ = _prepare(cfg, topology, net_ss,
                                 float(cfg.options.get("theta0_range", 1.0)))
    dt = resolve_dt(cfg, net)
    n_steps = int(round(cfg.t_end / dt))
    traj = simulate(net, cfg.t_end, dt, seed=_seed_int(noise_ss), sample_every=n_steps)
    xi = model.xi
    dec = np.mean((traj.derivs[-1] - xi) ** 2)
    cen = np.mean((np.asarray(ml) - xi) ** 2)
    return float(dec), float(cen), float(np.abs(traj.derivs[-1] - ml).max())


def run_montecarlo(cfg: ExperimentConfig, out=None) -> RunResult:
    """Decentralized and centralized estimator variance at time ``t_end`` versus N."""
    n_values = [int(v) for v in cfg.options.get("n_values", [8, 16, 32, 64])]
    jobs = int(cfg.options.get("jobs", 1))
    rows = []
    for n in n_values:
        topology = build_topology(cfg.topology, 0, n=n)
        res = _pool_map(lambda t: _montecarlo_trial(cfg, n, t, topology),
                        range(int(cfg.trials)), jobs)
        dec, cen, gap = (np.array(col) for col in zip(*res))
        rows.append({"n": n, "trials": int(cfg.trials),
                     "var_decentralized": float(dec.mean()),
                     "var_centralized": float(cen.mean()),
                     "ratio": float(cen.mean() / dec.mean()),
                     "max_gap_to_ml": float(gap.max())})
    logn = np.log([r["n"] for r in rows])
    slope_dec = slope_cen = None
    if len(rows) > 1:
        slope_dec = float(np.polyfit(logn, np.log([r["var_decentralized"] for r in rows]), 1)[0])
        slope_cen = float(np.polyfit(logn, np.log([r["var_centralized"] for r in rows]), 1)[0])
    summary = {"experiment": "montecarlo", "seed": cfg.seed,
               "coupling": cfg.coupling.get("f", "tanh"), "t_end": cfg.t_end,
               "slope_decentralized": slope_dec, "slope_centralized": slope_cen,
               "rows": rows}
    path = _out_dir(cfg, out)
    if path is not None:
        io.write_table(rows, path / "variance.csv")
        write_edge_list(build_topology(cfg.topology, 0, n=n_values[-1]), path / "topology.txt")
        io.write_json(summary, path / "summary.json")
    return RunResult(summary, {"variance": rows})


# ------------------------------------------------------------- noise contrast

def run_noise_contrast(cfg: ExperimentConfig, out=None) -> RunResult:
    """Running mean of noisy discrete consensus against windowed ODE rates.

    Series A is the across-seed variance of the network average of the
    Metropolis consensus iteration. Series B is the across-seed variance of
    ``(theta_i(t) - theta_i(t - w)) / w`` for the continuous system, averaged
    over nodes, evaluated at consecutive window ends ``t``.
    """
    opts = cfg.options
    root = np.random.SeedSequence(cfg.seed)
    topo_ss, net_ss, seeds_ss, boot_ss = root.spawn(4)
    topology = build_topology(cfg.topology, _seed_int(topo_ss))
    net, _, _, x = _prepare(cfg, topology, net_ss)
    if net.f.name != "linear":
        raise ConfigError("noise-contrast compares against the linear-coupling analysis; "
                          "set coupling.f: linear")
    noise_var = net.noise_std ** 2
    steps = int(opts.get("steps", 200))
    window = float(opts.get("window", 5.0))
    start = float(opts.get("window_start", 4 * window))
    dt = resolve_dt(cfg, net)
    per_window = int(round(window / dt))
    if per_window < 1 or abs(per_window * dt - window) > 1e-9 * window:
        raise ConfigError("window must be a multiple of dt")
    seeds = [_seed_int(s) for s in seeds_ss.spawn(int(cfg.trials))]

    def trial(seed):
        _, mean = average_consensus_baseline(topology, np.ravel(x), steps, net.noise_std, seed)
        traj = simulate(net, cfg.t_end, dt, seed=seed, sample_every=per_window)
        rates = np.diff(traj.states, axis=0) / window
        return mean, traj.times[1:], rates

    res = _pool_map(trial, seeds, int(opts.get("jobs", 1)))
    means = np.array([r[0] for r in res])
    ends = res[0][1]
    keep = ends >= start - 1e-9
    ends = ends[keep]
    rates = np.array([r[2][keep] for r in res])          # (seeds, windows, N)
    # centring on the first seed is exact for identical samples (zero noise)
    means = means - means[0]
    rates = rates - rates[0]
    var_a = means.var(axis=0, ddof=1)
    var_b = rates.var(axis=0, ddof=1).reshape(len(ends), -1).mean(axis=1)
    n_idx = np.arange(steps + 1, dtype=float)
    slope_a = float(np.polyfit(n_idx, var_a, 1)[0])
    slope_b = float(np.polyfit(ends, var_b, 1)[0])
    boot = np.random.default_rng(boot_ss)
    n_boot = int(opts.get("bootstrap", 1000))
    # node-averaged variance is linear in per-node variances, so resample seeds
    node_flat = rates.reshape(rates.shape[0], len(ends), -1)
    slopes = np.empty(n_boot)
    for b in range(n_boot):
        pick = node_flat[boot.integers(0, node_flat.shape[0], node_flat.shape[0])]
        slopes[b] = np.polyfit(ends, pick.var(axis=0, ddof=1).mean(axis=1), 1)[0]
    ci_b = (float(np.quantile(slopes, 0.025)), float(np.quantile(slopes, 0.975)))
    ci_a = _bootstrap_slope(n_idx, means, n_boot, boot)
    series_a = [{"n": int(k), "variance": float(v)} for k, v in zip(n_idx, var_a)]
    series_b = [{"t": float(t), "variance": float(v)} for t, v in zip(ends, var_b)]
    summary = {"experiment": "noise-contrast", "seed": cfg.seed, "n_nodes": topology.n,
               "noise_var": noise_var, "K": net.K, "dt": dt, "window": window,
               "seeds": len(seeds),
               "slope_a": slope_a, "slope_a_expected": noise_var / topology.n,
               "slope_a_ci": ci_a, "slope_b": slope_b, "slope_b_ci": ci_b,
               "slope_b_ci_contains_zero": bool(ci_b[0] <= 0.0 <= ci_b[1]),
               "max_variance_a": float(var_a.max()), "max_variance_b": float(var_b.max())}
    path = _out_dir(cfg, out)
    if path is not None:
        io.write_table(series_a, path / "series_a.csv")
        io.write_table(series_b, path / "series_b.csv")
        write_edge_list(topology, path / "topology.txt")
        io.write_json(summary, path / "summary.json")
    return RunResult(summary, {"series_a": series_a, "series_b": series_b})


# -------------------------------------------------------------- topology scan

def run_topology_scan(cfg: ExperimentConfig, out=None) -> RunResult:
    """Algebraic connectivity, its reference values and sync time versus N."""
    opts = cfg.options
    kind = cfg.topology.get("kind")
    if kind not in ("ring", "scale_free"):
        raise ConfigError("topology-scan supports ring and scale_free families")
    n_values = [int(v) for v in opts.get("n_values", [16, 32, 64, 128])]
    graphs = 1 if kind == "ring" else int(cfg.trials)
    measure = bool(opts.get("measure_sync", True))
    rows = []
    violations = 0
    for n in n_values:
        lam, bound, sync_times = [], [], []
        for g in range(graphs):
            ss = np.random.SeedSequence([cfg.seed, n, g])
            topo_ss, net_ss, noise_ss = ss.spawn(3)
            topo = build_topology(cfg.topology, _seed_int(topo_ss), n=n)
            lam.append(algebraic_connectivity(weighted_laplacian(topo)))
            bound.append(fiedler_lower_bound(topo))
            if lam[-1] < bound[-1] - 1e-12:
                violations += 1
            if measure:
                net, _, _, _ = _prepare(cfg, topo, net_ss)
                traj = simulate(net, cfg.t_end, resolve_dt(cfg, net), seed=_seed_int(noise_ss))
                sync_times.append(traj.sync_time if traj.synchronized else math.nan)
        row = {"n": n, "graphs": graphs, "lambda2": float(np.mean(lam)),
               "lambda2_min": float(np.min(lam)), "fiedler_bound_max": float(np.max(bound))}
        if kind == "ring":
            d = int(cfg.topology.get("degree", 4))
            row["lambda2_formula"] = ring_lambda2(n, d)
            row["lambda2_approx"] = ring_lambda2_approx(n, d)
        if measure:
            st = np.array(sync_times, dtype=float)
            row["synchronized"] = int(np.count_nonzero(np.isfinite(st)))
            row["sync_time"] = float(np.nanmean(st)) if np.isfinite(st).any() else None
        rows.append(row)
    ratios = [rows[k + 1]["lambda2"] / rows[k]["lambda2"] for k in range(len(rows) - 1)]
    summary = {"experiment": "topology-scan", "seed": cfg.seed, "family": kind,
               "eq_violations": violations, "lambda2_ratios": ratios, "rows": rows}
    path = _out_dir(cfg, out)
    if path is not None:
        io.write_table(rows, path / "scan.csv")
        last = build_topology(cfg.topology, _seed_int(
            np.random.SeedSequence([cfg.seed, n_values[-1], 0]).spawn(3)[0]), n=n_values[-1])
        write_edge_list(last, path / "topology.txt")
        io.write_json(summary, path / "summary.json")
    return RunResult(summary, {"scan": rows})


# -------------------------------------------------------------------- cluster

@dataclass
class ClusterReport:
    field_before: np.ndarray
    field_after: np.ndarray
    cluster_count: int
    gap_threshold: float
    labels: np.ndarray
    regions: np.ndarray
    contiguity: float

    def __post_init__(self):
        if self.cluster_count < 1:
            raise ValueError("cluster_count must be at least 1")


def quadrant_field(rows, cols, levels, noise_std, rng):
    """Piecewise-constant four-region field plus Gaussian noise; returns (field, regions)."""
    if len(levels) != 4:
        raise ConfigError("cluster field needs four region levels")
    r, c = np.divmod(np.arange(rows * cols), cols)
    regions = (2 * (r >= rows // 2) + (c >= cols // 2)).reshape(rows, cols)
    field_ = np.asarray(levels, dtype=float)[regions]
    return field_ + noise_std * rng.standard_normal((rows, cols)), regions


def split_clusters(values, threshold):
    """Label 1-D values by splitting the sorted sequence at gaps above ``threshold``."""
    v = np.asarray(values, dtype=float).ravel()
    order = np.argsort(v, kind="stable")
    cuts = np.concatenate([[0], np.cumsum(np.diff(v[order]) > threshold)])
    labels = np.empty(v.shape[0], dtype=int)
    labels[order] = cuts
    return labels, int(cuts[-1]) + 1


def jitter_scale(traj, tail_fraction=0.1) -> float:
    """Median over nodes of the temporal std of the rate over the last part of a run."""
    tail = traj.derivs[traj.times >= (1.0 - tail_fraction) * traj.t_end]
    if tail.shape[0] < 2:
        return 0.0
    return float(np.median(tail.std(axis=0).ravel()))


def default_gap_threshold(traj) -> float:
    snap = traj.derivs[-1]
    floor = 1e-8 * (1.0 + float(np.abs(snap).max()))
    return max(10.0 * jitter_scale(traj), floor)


def adjacency_agreement(labels, regions) -> float:
    """Share of 4-neighbour grid pairs on which cluster and region partitions agree."""
    lab = np.asarray(labels).reshape(regions.shape)
    same_c = np.concatenate([(lab[:, 1:] == lab[:, :-1]).ravel(),
                             (lab[1:, :] == lab[:-1, :]).ravel()])
    same_r = np.concatenate([(regions[:, 1:] == regions[:, :-1]).ravel(),
                             (regions[1:, :] == regions[:-1, :]).ravel()])
    return float(np.mean(same_c == same_r))


def run_cluster(cfg: ExperimentConfig, out=None) -> RunResult:
    """Sub-threshold clustering on a grid with a four-region synthetic field."""
    opts = cfg.options
    if cfg.topology.get("kind") != "grid":
        raise ConfigError("cluster runs need a grid topology")
    rows, cols = int(cfg.topology["rows"]), int(cfg.topology["cols"])
    topology = build_topology(cfg.topology)
    root = np.random.SeedSequence(cfg.seed)
    field_ss, noise_ss = root.spawn(2)
    before, regions = quadrant_field(rows, cols, opts.get("levels", [0.0, 2.0, 4.0, 6.0]),
                                     float(opts.get("field_noise", 0.1)),
                                     np.random.default_rng(field_ss))
    f = get_coupling(cfg.coupling.get("f", "tanh"))
    net = ScalarNetwork(topology, before.ravel(), 1.0, 0.0, f,
                        math.sqrt(float(cfg.coupling.get("noise_var", 0.0))))
    net = net.replace(K=resolve_k(cfg.K, net, bool(cfg.coupling.get("allow_uncertified"))))
    dt = resolve_dt(cfg, net)
    traj = simulate(net, cfg.t_end, dt, seed=_seed_int(noise_ss))
    threshold = opts.get("gap_threshold")
    threshold = default_gap_threshold(traj) if threshold is None else float(threshold)
    after = traj.derivs[-1].reshape(rows, cols)
    labels, count = split_clusters(after, threshold)
    report = ClusterReport(before, after, count, threshold, labels.reshape(rows, cols),
                           regions, adjacency_agreement(labels, regions))
    b = coupling_bounds(net)
    summary = {"experiment": "cluster", "seed": cfg.seed, "rows": rows, "cols": cols,
               "K": net.K, "dt": dt, "t_end": traj.t_end, "k_l_lower": b.k_l_lower,
               "k_u_upper": b.k_u_upper, "cluster_count": count, "gap_threshold": threshold,
               "contiguity": report.contiguity, "synchronized": traj.synchronized,
               "distinct_omega": count_distinct(before)}
    path = _out_dir(cfg, out)
    if path is not None:
        io.write_grid(before, path / "field_before.csv")
        io.write_grid(after, path / "field_after.csv")
        io.write_grid(report.labels, path / "labels.csv")
        write_edge_list(topology, path / "topology.txt")
        io.write_json(summary, path / "summary.json")
    return RunResult(summary, extra={"report": report, "trajectory": traj})


RUNNERS = {"trace": run_trace, "montecarlo": run_montecarlo,
           "noise-contrast": run_noise_contrast, "topology-scan": run_topology_scan,
           "cluster": run_cluster}


def run_experiment(cfg: ExperimentConfig, out=None) -> RunResult:
    return RUNNERS[cfg.experiment](cfg, out)


__all__ = ["ConfigError", "ExperimentConfig", "ClusterReport", "RunResult", "RUNNERS",
           "build_topology", "build_network", "trace_network", "resolve_k", "resolve_dt", "run_trace",
           "run_montecarlo", "run_noise_contrast", "run_topology_scan", "run_cluster",
           "run_experiment", "split_clusters", "quadrant_field", "adjacency_agreement",
           "count_distinct"]
