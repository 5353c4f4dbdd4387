"""Experiment pipeline: generate models, project, sample, score marginals
against ground truth, and write CSV reports.

Ground truth uses brute-force enumeration whenever the joint state space is
small enough and a pooled reference Gibbs run (with standard errors in the
metadata) otherwise.  All sweeps are deterministic given the master seed;
wall-clock columns are informational only and excluded from that guarantee.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .baselines import FixedPointConfig, loopy_bp, mean_field
from .divergence import PGDConfig, make_grid_chains, make_spanning_trees, pgd_project
from .exact import BRUTE_FORCE_CAP, MarginalTable, brute_force
from .gibbs import GibbsChain, SamplePool, estimate_marginals
from .mrf import PairwiseMRF, gen_ising_grid, gen_potts_grid, gen_random_graph
from .normball import NormBall
from .projection import project_exact

__all__ = [
    "METHODS",
    "ExperimentRecord",
    "MethodSettings",
    "marginal_error",
    "ground_truth",
    "run_method",
    "evaluate_model",
    "run_strength_sweep",
    "run_time_sweep",
    "error_curve",
    "default_checkpoints",
    "STRENGTH_COLUMNS",
    "TIME_COLUMNS",
]

METHODS = ("gibbs_original", "euclidean+gibbs", "piecewise+gibbs", "reversed+gibbs", "mf", "lbp")

STRENGTH_COLUMNS = [
    "seed", "topology", "mode", "d_n", "d_e", "method",
    "trials", "samples", "mean_error", "se_error", "mean_seconds",
]
TIME_COLUMNS = [
    "seed", "topology", "mode", "d_n", "d_e", "method",
    "checkpoint", "error", "seconds",
]


def marginal_error(truth, est) -> float:
    """Mean absolute marginal difference: binary variables compare the
    probability of state 1; multi-state models average over all states."""
    p_nodes, q_nodes = truth.node, est.node
    if len(p_nodes) != len(q_nodes):
        raise ValueError("marginal tables cover different variable sets")
    errs = []
    for p, q in zip(p_nodes, q_nodes):
        p, q = np.asarray(p), np.asarray(q)
        if p.shape != q.shape:
            raise ValueError("marginal tables cover different state spaces")
        if len(p) == 2:
            errs.append(abs(p[1] - q[1]))
        else:
            errs.extend(np.abs(p - q))
    return float(np.mean(errs))


@dataclass
class MethodSettings:
    """Shared knobs for the projection + sampling methods."""

    norm: str = "inf"
    radius: float = 2.5
    alpha: float = 1.0
    proj_mode: str = "dense"
    steps: int = 60
    step_size: float = 0.1
    pool_size: int = 500
    sweeps: int = 30_000
    burn_frac: float = 0.1
    grid_shape: tuple = None  # (rows, cols) when the model is a grid


@dataclass
class ExperimentRecord:
    """One scored run: model descriptor, method, error, and bookkeeping."""

    topology: str
    mode: str
    d_n: float
    d_e: float
    seed: int
    method: str
    samples: int
    error: float
    stderr: float = 0.0
    seconds: float = 0.0
    trials: int = 1

    def __post_init__(self):
        if not 0.0 <= self.error <= 1.0:
            raise ValueError("marginal error must lie in [0, 1]")
        if self.stderr < 0.0 or not np.isfinite(self.stderr):
            raise ValueError("standard error must be finite and nonnegative")


def ground_truth(m: PairwiseMRF, cap=BRUTE_FORCE_CAP, ref_chains=100,
                 ref_sweeps=100_000, seed=0) -> MarginalTable:
    """Exact marginals when enumerable, else a pooled reference Gibbs
    estimate with per-cell standard errors in the metadata."""
    if m.n_states() <= cap:
        _, marg = brute_force(m, cap=cap)
        marg.meta["source"] = "brute_force"
        return marg
    burn = max(1, ref_sweeps // 10)
    pool = SamplePool(m, size=ref_chains, seed=seed, burn_in=burn)
    counts = [np.zeros(c) for c in m.cards]
    recorded = 0
    for _ in range(ref_sweeps - burn):
        pool.advance()
        for i in range(m.n):
            counts[i] += np.bincount(pool.states[i], minlength=m.cards[i])
        recorded += pool.size
    node = [c / recorded for c in counts]
    se = [np.sqrt(p * (1 - p) / recorded) for p in node]
    return MarginalTable(node=node, meta={"source": "reference_gibbs",
                                          "samples": recorded, "stderr": se})


def _family_for(m: PairwiseMRF, settings: MethodSettings, seed):
    if settings.grid_shape is not None:
        return make_grid_chains(*settings.grid_shape, model=m)
    return make_spanning_trees(m, seed=seed)


def _sampled_marginals(m, sweeps, seed, burn_frac):
    chain = GibbsChain(m, seed=seed, scan="systematic")
    return estimate_marginals(chain, sweeps=sweeps, burn_in=int(sweeps * burn_frac))


def project_for_method(m: PairwiseMRF, method: str, settings: MethodSettings, seed: int):
    """The projected model a sampling method draws from, feasibility-checked
    against the ball before any sampling happens."""
    from .dependency import bound_matrix, matrix_norm
    from .errors import NumericError

    ball = NormBall(settings.norm, settings.radius)
    if method == "euclidean+gibbs":
        res = project_exact(m, ball, alpha=settings.alpha, mode=settings.proj_mode)
        theta, converged = res.theta, res.converged
    else:
        divergence = "piecewise_kl" if method.startswith("piecewise") else "reversed_kl"
        config = PGDConfig(
            divergence=divergence,
            step_size=settings.step_size,
            steps=settings.steps,
            pool_size=settings.pool_size,
            family=_family_for(m, settings, seed) if divergence == "piecewise_kl" else None,
            norm=settings.norm,
            radius=settings.radius,
            alpha=settings.alpha,
            mode=settings.proj_mode,
            seed=seed,
        )
        res = pgd_project(m, config)
        theta, converged = res.theta, res.converged_projections
    achieved = matrix_norm(bound_matrix(theta).matrix, settings.norm)
    if achieved > settings.radius + 1e-4:
        raise NumericError(
            f"projected model violates the mixing certificate: "
            f"{achieved:.6f} > {settings.radius}"
        )
    return theta, converged


def run_method(m: PairwiseMRF, method: str, settings: MethodSettings, seed: int):
    """Produce marginals for one method; returns (marginals, info dict)."""
    if method == "gibbs_original":
        est = _sampled_marginals(m, settings.sweeps, seed, settings.burn_frac)
        return est, {"samples": est.count}
    if method in ("euclidean+gibbs", "piecewise+gibbs", "reversed+gibbs"):
        theta, converged = project_for_method(m, method, settings, seed)
        est = _sampled_marginals(theta, settings.sweeps, seed, settings.burn_frac)
        return est, {"samples": est.count, "projection_converged": converged}
    if method == "mf":
        return mean_field(m, FixedPointConfig(seed=seed)), {"samples": 0}
    if method == "lbp":
        return loopy_bp(m, FixedPointConfig(seed=seed)), {"samples": 0}
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")


def _make_model(topology: dict, d_e: float, seed: int):
    kind = topology["kind"]
    d_n = topology.get("d_n", 1.0)
    mode = topology.get("mode", "mixed")
    if kind == "grid":
        m = gen_ising_grid(topology["rows"], topology["cols"], d_n, d_e, mode, seed)
        label = f"grid{topology['rows']}x{topology['cols']}"
        shape = (topology["rows"], topology["cols"])
    elif kind == "random":
        m = gen_random_graph(topology["n"], topology["p_e"], d_n, d_e, mode, seed)
        label = f"random{topology['n']}_pe{topology['p_e']:g}"
        shape = None
    elif kind == "potts":
        m = gen_potts_grid(topology["rows"], topology["cols"], topology["states"],
                           d_n, d_e, mode, seed)
        label = f"potts{topology['states']}_{topology['rows']}x{topology['cols']}"
        shape = (topology["rows"], topology["cols"])
    else:
        raise ValueError(f"unknown topology kind {topology['kind']!r}")
    return m, label, shape


def evaluate_model(m: PairwiseMRF, methods, settings: MethodSettings = None, seed=0,
                   truth=None, label="model"):
    """Score each method against ground truth on one model."""
    settings = settings or MethodSettings()
    if truth is None:
        truth = ground_truth(m, seed=seed + 10_000)
    records = []
    for method in methods:
        t0 = time.perf_counter()
        est, info = run_method(m, method, settings, seed)
        records.append(ExperimentRecord(
            topology=label, mode="-", d_n=float("nan"), d_e=float("nan"), seed=seed,
            method=method, samples=info.get("samples", 0),
            error=marginal_error(truth, est), seconds=time.perf_counter() - t0,
        ))
    return records


def _strength_trial(args):
    topology, d_e, trial_seed, methods, settings_dict = args
    settings = MethodSettings(**settings_dict)
    m, label, shape = _make_model(topology, d_e, trial_seed)
    settings.grid_shape = shape
    truth = ground_truth(m, seed=trial_seed + 10_000)
    out = {}
    for method in methods:
        t0 = time.perf_counter()
        est, info = run_method(m, method, settings, trial_seed)
        out[method] = (marginal_error(truth, est), info.get("samples", 0),
                       time.perf_counter() - t0)
    return out


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def _strength_row(rec: ExperimentRecord):
    return {
        "seed": rec.seed, "topology": rec.topology, "mode": rec.mode,
        "d_n": rec.d_n, "d_e": rec.d_e, "method": rec.method, "trials": rec.trials,
        "samples": rec.samples, "mean_error": rec.error, "se_error": rec.stderr,
        "mean_seconds": rec.seconds,
    }


def _time_row(rec: ExperimentRecord):
    return {
        "seed": rec.seed, "topology": rec.topology, "mode": rec.mode,
        "d_n": rec.d_n, "d_e": rec.d_e, "method": rec.method,
        "checkpoint": rec.samples, "error": rec.error, "seconds": rec.seconds,
    }


def trial_seed_for(master_seed: int, trial: int) -> int:
    return master_seed * 1_000_003 + 7919 * trial


def run_strength_sweep(topology: dict, strengths, trials, methods, out,
                       settings: MethodSettings = None, master_seed=0, threads=1):
    """Mean marginal error per (interaction strength, method), averaged over
    seeded trials, with the standard error across trials."""
    settings = settings or MethodSettings()
    settings_dict = {k: getattr(settings, k) for k in settings.__dataclass_fields__}
    records = []
    for d_e in strengths:
        tasks = [
            (topology, float(d_e), trial_seed_for(master_seed, t), methods, settings_dict)
            for t in range(trials)
        ]
        try:
            if threads > 1:
                with ProcessPoolExecutor(max_workers=threads) as pool:
                    results = list(pool.map(_strength_trial, tasks))
            else:
                results = [_strength_trial(t) for t in tasks]
        except Exception as exc:
            # flush what finished, marked, before propagating
            rows = [_strength_row(r) for r in records]
            rows.append({c: "" for c in STRENGTH_COLUMNS}
                        | {"d_e": float(d_e), "method": f"FAILED:{type(exc).__name__}"})
            _write_csv(out, STRENGTH_COLUMNS, rows)
            raise
        _, label, _ = _make_model(topology, float(d_e), master_seed)
        for method in methods:
            errs = np.array([r[method][0] for r in results])
            records.append(ExperimentRecord(
                topology=label, mode=topology.get("mode", "mixed"),
                d_n=topology.get("d_n", 1.0), d_e=float(d_e), seed=master_seed,
                method=method, trials=trials,
                samples=int(np.mean([r[method][1] for r in results])),
                error=float(errs.mean()),
                stderr=float(errs.std(ddof=1) / np.sqrt(len(errs))) if len(errs) > 1 else 0.0,
                seconds=float(np.mean([r[method][2] for r in results])),
            ))
    _write_csv(out, STRENGTH_COLUMNS, [_strength_row(r) for r in records])
    return records


def error_curve(m: PairwiseMRF, truth, checkpoints, seed=0):
    """Marginal error of the running empirical estimate at each checkpoint."""
    chain = GibbsChain(m, seed=seed, scan="systematic")
    counts = [np.zeros(c) for c in m.cards]
    done = 0
    out = []
    t0 = time.perf_counter()
    for target in sorted(checkpoints):
        while done < target:
            chain.sweep()
            for i in range(m.n):
                counts[i][chain.state[i]] += 1
            done += 1
        est = MarginalTable(node=[c / max(done, 1) for c in counts])
        out.append((target, marginal_error(truth, est), time.perf_counter() - t0))
    return out


def default_checkpoints(limit, points=12):
    ticks = np.unique(np.geomspace(10, limit, points).astype(int))
    return [int(t) for t in ticks]


def run_time_sweep(topology: dict, d_e, methods, out, settings: MethodSettings = None,
                   master_seed=0, original_limit=1_000_000, projected_limit=30_000,
                   checkpoints=None):
    """Error versus sample count: running estimates for the sampling methods
    (the original-parameter chain gets a longer budget), one fixed row for
    the variational baselines."""
    settings = settings or MethodSettings()
    m, label, shape = _make_model(topology, d_e, master_seed)
    settings.grid_shape = shape
    truth = ground_truth(m, seed=master_seed + 10_000)
    records = []

    def add(method, checkpoint, error, seconds):
        records.append(ExperimentRecord(
            topology=label, mode=topology.get("mode", "mixed"),
            d_n=topology.get("d_n", 1.0), d_e=float(d_e), seed=master_seed,
            method=method, samples=checkpoint, error=error, seconds=seconds,
        ))

    for method in methods:
        if method == "gibbs_original":
            cps = checkpoints or default_checkpoints(original_limit)
            for cp, err, sec in error_curve(m, truth, cps, seed=master_seed):
                add(method, cp, err, sec)
        elif method in ("euclidean+gibbs", "piecewise+gibbs", "reversed+gibbs"):
            t0 = time.perf_counter()
            proj, _ = project_for_method(m, method, settings, master_seed)
            setup = time.perf_counter() - t0
            cps = checkpoints or default_checkpoints(projected_limit)
            for cp, err, sec in error_curve(proj, truth, cps, seed=master_seed):
                add(method, cp, err, setup + sec)
        elif method in ("mf", "lbp"):
            t0 = time.perf_counter()
            est, _ = run_method(m, method, settings, master_seed)
            add(method, 0, marginal_error(truth, est), time.perf_counter() - t0)
        else:
            raise ValueError(f"unknown method {method!r}")
    _write_csv(out, TIME_COLUMNS, [_time_row(r) for r in records])
    return records
