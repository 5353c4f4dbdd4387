"""Dev scratch for the qualitative criterion. Not shipped."""
import sys
import time

import numpy as np

sys.path.insert(0, "tests")

from fastmix.dependency import bound_matrix, matrix_norm
from fastmix.exact import brute_force, exact_kl
from fastmix.experiments import MethodSettings, marginal_error, run_method, project_for_method
from fastmix.gibbs import GibbsChain, estimate_marginals
from fastmix.mrf import gen_random_graph

settings = MethodSettings(norm="inf", radius=2.5, steps=60, step_size=0.1,
                          pool_size=500, sweeps=30_000, burn_frac=0.1)

for trial in range(10):
    seed = 900 + trial
    m = gen_random_graph(10, 0.5, d_n=1.0, d_e=3.0, mode="mixed", seed=seed)
    _, truth = brute_force(m)
    t0 = time.time()
    theta_rev, conv = project_for_method(m, "reversed+gibbs", settings, seed)
    t_proj = time.time() - t0
    _, marg_rev_exact = brute_force(theta_rev)
    bias = marginal_error(truth, marg_rev_exact)
    est_rev = estimate_marginals(GibbsChain(theta_rev, seed=seed), 30_000, 3_000)
    e_rev = marginal_error(truth, est_rev)
    est_g = estimate_marginals(GibbsChain(m, seed=seed), 30_000, 3_000)
    e_g = marginal_error(truth, est_g)
    # how much of gibbs error is mixing vs noise: longer run
    est_g_long = estimate_marginals(GibbsChain(m, seed=seed + 1), 200_000, 20_000)
    e_g_long = marginal_error(truth, est_g_long)
    est_mf, _ = run_method(m, "mf", settings, seed)
    e_mf = marginal_error(truth, est_mf)
    norm_orig = matrix_norm(bound_matrix(m).matrix, "inf")
    norm_rev = matrix_norm(bound_matrix(theta_rev).matrix, "inf")
    print(f"t{trial}: rev {e_rev:.4f} (bias {bias:.4f}) | gibbs {e_g:.4f} (long {e_g_long:.4f})"
          f" | mf {e_mf:.4f} | R:{norm_orig:.2f}->{norm_rev:.2f} conv={conv} {t_proj:.0f}s")
