"""Dev scratch: pool-noise vs exact-gradient PGD + win statistics. Not shipped."""
import sys

import numpy as np

sys.path.insert(0, "tests")

from fastmix.divergence import PGDConfig, grad_reversed_kl_exact, pgd_project
from fastmix.exact import brute_force, exact_kl
from fastmix.experiments import MethodSettings, marginal_error
from fastmix.gibbs import GibbsChain, estimate_marginals
from fastmix.mrf import gen_random_graph, params_vector, with_params_vector
from fastmix.normball import NormBall
from fastmix.projection import ProjectionProblem, default_anchor, project_smoothed


def pgd_exact_gradient(psi, steps=60, lam=0.1, c=2.5):
    ball = NormBall("inf", c)
    res = project_smoothed(ProjectionProblem(psi, ball, default_anchor(psi, ball)))
    theta, Z, dual = res.theta, res.z, res.dual
    for _ in range(steps):
        grad = grad_reversed_kl_exact(psi, theta)
        stepped = with_params_vector(theta, params_vector(theta) - lam * grad)
        res = project_smoothed(ProjectionProblem(stepped, ball, Z), dual0=dual)
        theta, Z, dual = res.theta, res.z, res.dual
    return theta


mode = sys.argv[1] if len(sys.argv) > 1 else "exactgrad"

if mode == "exactgrad":
    for trial in (0, 3, 5, 6, 8, 9):
        seed = 900 + trial
        psi = gen_random_graph(10, 0.5, d_n=1.0, d_e=3.0, mode="mixed", seed=seed)
        _, truth = brute_force(psi)
        th_exact = pgd_exact_gradient(psi)
        _, marg = brute_force(th_exact)
        bias_exact = marginal_error(truth, marg)
        cfg = PGDConfig(divergence="reversed_kl", steps=60, step_size=0.1,
                        pool_size=500, norm="inf", radius=2.5, seed=seed)
        th_pool = pgd_project(psi, cfg).theta
        _, margp = brute_force(th_pool)
        bias_pool = marginal_error(truth, margp)
        print(f"t{trial}: bias exact-grad {bias_exact:.4f} | pool-grad {bias_pool:.4f} | "
              f"KL(theta||psi) exact {exact_kl(th_exact, psi):.3f} pool {exact_kl(th_pool, psi):.3f}",
              flush=True)
else:
    wins_g = wins_m = 0
    trials = 30
    for trial in range(trials):
        seed = int(sys.argv[2]) + trial if len(sys.argv) > 2 else trial
        psi = gen_random_graph(10, 0.5, d_n=1.0, d_e=3.0, mode="mixed", seed=seed)
        _, truth = brute_force(psi)
        cfg = PGDConfig(divergence="reversed_kl", steps=60, step_size=0.1,
                        pool_size=500, norm="inf", radius=2.5, seed=seed)
        th = pgd_project(psi, cfg).theta
        e_rev = marginal_error(truth, estimate_marginals(GibbsChain(th, seed=seed), 30000, 3000))
        e_g = marginal_error(truth, estimate_marginals(GibbsChain(psi, seed=seed), 30000, 3000))
        from fastmix.baselines import FixedPointConfig, mean_field
        e_m = marginal_error(truth, mean_field(psi, FixedPointConfig(seed=seed)))
        wins_g += e_rev < e_g
        wins_m += e_rev < e_m
        print(f"s{seed}: rev {e_rev:.4f} gibbs {e_g:.4f} mf {e_m:.4f} "
              f"({int(e_rev < e_g)}/{int(e_rev < e_m)})", flush=True)
    print(f"wins vs gibbs: {wins_g}/{trials}, vs mf: {wins_m}/{trials}")
