"""Dev scratch: cross-check dual solver vs primal oracles. Not shipped."""
import sys
import time

import numpy as np

sys.path.insert(0, "tests")
from helpers import random_model
from primal_oracle import primal_cvxpy, primal_pgd

from fastmix.normball import NormBall
from fastmix.projection import ProjectionProblem, project_smoothed


def make_problem(seed, norm):
    rng = np.random.default_rng(seed)
    psi = random_model(rng, n=4, max_card=2, scale=2.0, p_edge=0.8)
    ball = NormBall(norm, 1.0)
    n = psi.n
    Y = np.abs(rng.normal(scale=0.5, size=(n, n)))
    Y = 0.5 * (Y + Y.T)
    np.fill_diagonal(Y, 0.0)
    return ProjectionProblem(psi=psi, ball=ball, anchor=Y, alpha=1.0)


def table_dist(t1, t2):
    return max(np.abs(t1[e] - t2[e]).max() for e in t1)


for norm in ("inf", "spectral"):
    for seed in range(5):
        prob = make_problem(seed, norm)
        t0 = time.time()
        ref_T, ref_Z, ref_val = primal_cvxpy(prob)
        t1 = time.time()
        pgd_T, pgd_Z, pgd_val = primal_pgd(prob)
        t2 = time.time()
        res = project_smoothed(prob, gtol=1e-9, max_iter=2000)
        t3 = time.time()
        dual_T = {e: res.theta.potential(*e) for e in prob.psi.pairwise_edges}
        print(
            f"{norm} seed={seed} cvx={ref_val:.8f} pgd={pgd_val:.8f} dual_primal={res.primal_value:.8f} "
            f"gap={res.gap:.2e} dT(pgd,cvx)={table_dist(pgd_T, ref_T):.2e} "
            f"dT(dual,cvx)={table_dist(dual_T, ref_T):.2e} dZ={np.abs(res.z - ref_Z).max():.2e} "
            f"times cvx={t1-t0:.2f}s pgd={t2-t1:.2f}s dual={t3-t2:.2f}s it={res.iterations}"
        )
