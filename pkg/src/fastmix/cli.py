"""Command-line interface.

Subcommands: gen, bound, project, project-div, sample, evaluate,
sweep-strength, sweep-time, plot.  Sweeps write CSV and, unless --no-plot is
given, a rendered figure next to it.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .baselines import FixedPointConfig
from .dependency import bound_matrix, matrix_norm, mixing_time_bound
from .divergence import PGDConfig, make_grid_chains, pgd_project
from .experiments import (
    METHODS,
    MethodSettings,
    evaluate_model,
    run_strength_sweep,
    run_time_sweep,
)
from .gibbs import GibbsChain, estimate_marginals
from .mrf import (
    gen_ising_grid,
    gen_potts_grid,
    gen_random_graph,
    load_model,
    model_to_dict,
    save_model,
)
from .normball import NormBall
from .projection import ProjectionProblem, default_anchor, project_exact, project_smoothed

METHOD_ALIASES = {
    "gibbs": "gibbs_original",
    "euclidean": "euclidean+gibbs",
    "piecewise": "piecewise+gibbs",
    "reversed": "reversed+gibbs",
}


def _resolve_methods(spec: str):
    out = []
    for token in spec.split(","):
        token = token.strip()
        if not token:
            continue
        method = METHOD_ALIASES.get(token, token)
        if method not in METHODS:
            raise SystemExit(f"unknown method {token!r}; choose from {METHODS}")
        out.append(method)
    return out


def _common(parser):
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument("--threads", type=int, default=1, help="parallel trial workers")
    parser.add_argument("--out", type=str, default=None, help="output path")
    return parser


def _topology_args(parser):
    parser.add_argument("--topology", choices=["grid", "random", "potts"], default="grid")
    parser.add_argument("--rows", type=int, default=4)
    parser.add_argument("--cols", type=int, default=4)
    parser.add_argument("--n", type=int, default=10, help="random-graph node count")
    parser.add_argument("--pe", type=float, default=0.5, help="random-graph edge probability")
    parser.add_argument("--states", type=int, default=3, help="state count for potts")
    parser.add_argument("--dn", type=float, default=1.0, help="univariate strength")
    parser.add_argument("--mode", choices=["mixed", "attractive"], default="mixed")


def _topology_dict(args):
    top = {"kind": args.topology, "d_n": args.dn, "mode": args.mode}
    if args.topology == "grid":
        top.update(rows=args.rows, cols=args.cols)
    elif args.topology == "random":
        top.update(n=args.n, p_e=args.pe)
    else:
        top.update(rows=args.rows, cols=args.cols, states=args.states)
    return top


def _settings(args):
    s = MethodSettings(
        norm=args.norm,
        radius=args.c,
        alpha=getattr(args, "alpha", 1.0),
        steps=getattr(args, "steps", 60),
        step_size=getattr(args, "step_size", 0.1),
        pool_size=getattr(args, "pool", 500),
        sweeps=getattr(args, "sweeps", 30_000),
    )
    return s


def cmd_gen(args):
    if args.topology == "grid":
        m = gen_ising_grid(args.rows, args.cols, args.dn, args.de, args.mode, args.seed)
    elif args.topology == "random":
        m = gen_random_graph(args.n, args.pe, args.dn, args.de, args.mode, args.seed)
    else:
        m = gen_potts_grid(args.rows, args.cols, args.states, args.dn, args.de,
                           args.mode, args.seed)
    out = args.out or "model.json"
    save_model(m, out)
    print(f"wrote {out}: n={m.n}, pairwise edges={len(m.pairwise_edges)}")


def cmd_bound(args):
    m = load_model(args.model)
    bound = bound_matrix(m, args.variant)
    budget = mixing_time_bound(bound.matrix, args.norm, args.epsilon)
    payload = {
        "variant": args.variant,
        "norm": args.norm,
        "norm_value": budget.norm_value,
        "epsilon": args.epsilon,
        "tau": budget.tau if np.isfinite(budget.tau) else "unbounded",
        "matrix": bound.matrix.tolist(),
    }
    text = json.dumps(payload, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)


def cmd_project(args):
    m = load_model(args.model)
    ball = NormBall(args.norm, args.c)
    if args.mode == "exact":
        res = project_exact(m, ball, alpha=args.alpha, mode=args.zmode)
    else:
        problem = ProjectionProblem(m, ball, default_anchor(m, ball),
                                    alpha=args.alpha, mode=args.zmode)
        res = project_smoothed(problem)
    payload = {
        "model": model_to_dict(res.theta),
        "z": res.z.tolist(),
        "gap": res.gap,
        "iterations": res.iterations,
        "outer_iterations": res.outer_iterations,
        "converged": res.converged,
        "ball": {"norm": args.norm, "radius": args.c},
        "alpha": args.alpha,
    }
    out = args.out or "projection.json"
    with open(out, "w") as fh:
        json.dump(payload, fh)
    norm_after = matrix_norm(bound_matrix(res.theta).matrix, args.norm)
    print(f"wrote {out}: gap={res.gap:.3g}, iterations={res.iterations}, "
          f"converged={res.converged}, bound norm after={norm_after:.4f}")


def cmd_project_div(args):
    m = load_model(args.model)
    family = None
    if args.divergence == "piecewise" and args.grid_rows and args.grid_cols:
        family = make_grid_chains(args.grid_rows, args.grid_cols, model=m)
    config = PGDConfig(
        divergence="piecewise_kl" if args.divergence == "piecewise" else "reversed_kl",
        step_size=args.step_size,
        steps=args.steps,
        pool_size=args.pool,
        family=family,
        norm=args.norm,
        radius=args.c,
        alpha=args.alpha,
        seed=args.seed,
    )
    res = pgd_project(m, config)
    out = args.out or "theta.json"
    save_model(res.theta, out)
    msg = f"wrote {out}: projections converged={res.converged_projections}"
    if res.divergence_trace:
        msg += f", divergence {res.divergence_trace[0]:.4f} -> {res.divergence_trace[-1]:.4f}"
    print(msg)


def cmd_sample(args):
    m = load_model(args.model)
    chain = GibbsChain(m, seed=args.seed, scan=args.scan)
    burn = args.burn_in if args.burn_in is not None else args.sweeps // 10
    est = estimate_marginals(chain, sweeps=args.sweeps, burn_in=burn)
    payload = {
        "node": [p.tolist() for p in est.node],
        "stderr": [s.tolist() for s in est.stderr],
        "count": est.count,
        "scan": args.scan,
        "burn_in": burn,
    }
    out = args.out or "marginals.json"
    with open(out, "w") as fh:
        json.dump(payload, fh)
    print(f"wrote {out}: {est.count} samples over {m.n} variables")


def cmd_evaluate(args):
    m = load_model(args.model)
    methods = _resolve_methods(args.methods)
    settings = _settings(args)
    records = evaluate_model(m, methods, settings, seed=args.seed, label=args.model)
    for rec in records:
        print(f"{rec.method:18s} error={rec.error:.5f} samples={rec.samples}"
              f" seconds={rec.seconds:.2f}")
    if args.out:
        import csv as _csv

        with open(args.out, "w", newline="") as fh:
            w = _csv.writer(fh)
            w.writerow(["model", "seed", "method", "samples", "error", "seconds"])
            for rec in records:
                w.writerow([args.model, rec.seed, rec.method, rec.samples,
                            f"{rec.error:.10g}", f"{rec.seconds:.10g}"])
        print(f"wrote {args.out}")


def _maybe_plot(args, csv_path):
    if getattr(args, "no_plot", False):
        return
    from .plots import plot_csv

    fig_path = csv_path.rsplit(".", 1)[0] + ".png"
    plot_csv(csv_path, fig_path)
    print(f"wrote {fig_path}")


def cmd_sweep_strength(args):
    strengths = [float(s) for s in args.strengths.split(",")]
    methods = _resolve_methods(args.methods)
    out = args.out or "strength_sweep.csv"
    run_strength_sweep(
        _topology_dict(args), strengths, args.trials, methods, out,
        settings=_settings(args), master_seed=args.seed, threads=args.threads,
    )
    print(f"wrote {out}")
    _maybe_plot(args, out)


def cmd_sweep_time(args):
    methods = _resolve_methods(args.methods)
    out = args.out or "time_sweep.csv"
    run_time_sweep(
        _topology_dict(args), args.de, methods, out,
        settings=_settings(args), master_seed=args.seed,
        original_limit=args.original_limit, projected_limit=args.projected_limit,
    )
    print(f"wrote {out}")
    _maybe_plot(args, out)


def cmd_plot(args):
    from .plots import plot_csv

    out = args.out or args.csv.rsplit(".", 1)[0] + ".png"
    plot_csv(args.csv, out)
    print(f"wrote {out}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fastmix",
        description="Dependency bounds, fast-mixing projections, and marginal "
                    "inference benchmarks for discrete pairwise MRFs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = _common(sub.add_parser("gen", help="generate a synthetic model"))
    _topology_args(p)
    p.add_argument("--de", type=float, default=2.0, help="interaction strength")
    p.set_defaults(func=cmd_gen)

    p = _common(sub.add_parser("bound", help="dependency bound matrix and mixing budget"))
    p.add_argument("--model", required=True)
    p.add_argument("--variant", default="inf_corollary",
                   choices=["inf_corollary", "one_corollary", "quarter_range",
                            "sigmoid_range", "exact"])
    p.add_argument("--norm", choices=["inf", "spectral"], default="inf")
    p.add_argument("--epsilon", type=float, default=0.01)
    p.set_defaults(func=cmd_bound)

    p = _common(sub.add_parser("project", help="Euclidean projection onto the fast-mixing set"))
    p.add_argument("--model", required=True)
    p.add_argument("--norm", choices=["inf", "spectral"], default="inf")
    p.add_argument("--c", type=float, default=2.5, help="ball radius")
    p.add_argument("--alpha", type=float, default=1.0, help="smoothing weight")
    p.add_argument("--mode", choices=["smoothed", "exact"], default="exact")
    p.add_argument("--zmode", choices=["dense", "sparse"], default="dense",
                   help="dependency surrogate representation")
    p.set_defaults(func=cmd_project)

    p = _common(sub.add_parser("project-div", help="divergence projection by PGD"))
    p.add_argument("--model", required=True)
    p.add_argument("--divergence", choices=["piecewise", "reversed"], required=True)
    p.add_argument("--norm", choices=["inf", "spectral"], default="inf")
    p.add_argument("--c", type=float, default=2.5)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=60)
    p.add_argument("--lambda", dest="step_size", type=float, default=0.1,
                   help="gradient step size")
    p.add_argument("--pool", type=int, default=500, help="sample pool size")
    p.add_argument("--grid-rows", type=int, default=None,
                   help="use row/column chains of this grid for piecewise KL")
    p.add_argument("--grid-cols", type=int, default=None)
    p.set_defaults(func=cmd_project_div)

    p = _common(sub.add_parser("sample", help="Gibbs sampling marginal estimates"))
    p.add_argument("--model", required=True)
    p.add_argument("--sweeps", type=int, default=30_000)
    p.add_argument("--burn-in", type=int, default=None, help="default: 10%% of sweeps")
    p.add_argument("--scan", choices=["systematic", "random"], default="systematic")
    p.set_defaults(func=cmd_sample)

    p = _common(sub.add_parser("evaluate", help="score methods against ground truth"))
    p.add_argument("--model", required=True)
    p.add_argument("--methods", default="gibbs,mf,lbp")
    p.add_argument("--norm", choices=["inf", "spectral"], default="inf")
    p.add_argument("--c", type=float, default=2.5)
    p.add_argument("--sweeps", type=int, default=30_000)
    p.add_argument("--steps", type=int, default=60)
    p.add_argument("--step-size", type=float, default=0.1)
    p.add_argument("--pool", type=int, default=500)
    p.set_defaults(func=cmd_evaluate)

    p = _common(sub.add_parser("sweep-strength",
                               help="marginal error vs interaction strength"))
    _topology_args(p)
    p.add_argument("--strengths", default="0,0.5,1,1.5,2,2.5,3,3.5,4")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--methods", default="gibbs,reversed,mf,lbp")
    p.add_argument("--norm", choices=["inf", "spectral"], default="inf")
    p.add_argument("--c", type=float, default=2.5)
    p.add_argument("--sweeps", type=int, default=30_000)
    p.add_argument("--steps", type=int, default=60)
    p.add_argument("--step-size", type=float, default=0.1)
    p.add_argument("--pool", type=int, default=500)
    p.add_argument("--no-plot", action="store_true", help="skip the figure")
    p.set_defaults(func=cmd_sweep_strength)

    p = _common(sub.add_parser("sweep-time", help="marginal error vs sample count"))
    _topology_args(p)
    p.add_argument("--de", type=float, default=3.0)
    p.add_argument("--methods", default="gibbs,reversed,mf,lbp")
    p.add_argument("--norm", choices=["inf", "spectral"], default="inf")
    p.add_argument("--c", type=float, default=2.5)
    p.add_argument("--steps", type=int, default=60)
    p.add_argument("--step-size", type=float, default=0.1)
    p.add_argument("--pool", type=int, default=500)
    p.add_argument("--original-limit", type=int, default=1_000_000)
    p.add_argument("--projected-limit", type=int, default=30_000)
    p.add_argument("--no-plot", action="store_true", help="skip the figure")
    p.set_defaults(func=cmd_sweep_time)

    p = _common(sub.add_parser("plot", help="render a sweep CSV to a figure"))
    p.add_argument("--csv", required=True)
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
