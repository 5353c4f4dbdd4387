"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with `pytest tests/test_acceptance.py -v -s`)."""

import time

import numpy as np
import pytest

from fastmix.dependency import (
    bound_edge,
    bound_matrix,
    exact_dependency,
    matrix_norm,
    mixing_time_bound,
)
from fastmix.divergence import (
    grad_piecewise_kl,
    grad_reversed_kl_exact,
    make_spanning_trees,
    restricted_kl,
)
from fastmix.exact import brute_force, gibbs_transition_operator, tree_marginals, tv_to_stationarity
from fastmix.experiments import MethodSettings, marginal_error, run_method
from fastmix.gibbs import GibbsChain, estimate_marginals
from fastmix.mrf import (
    PairwiseMRF,
    gen_ising_grid,
    gen_random_graph,
    params_vector,
    with_params_vector,
)
from fastmix.normball import NormBall, project_ball
from fastmix.projection import (
    DualState,
    ProjectionProblem,
    _Layout,
    dual_value_and_gradient,
    project_exact,
    project_smoothed,
)

from helpers import enum_kl, ising_edge, random_model, random_tree_model, restrict_model
from primal_oracle import primal_pgd


def report(num, label, started):
    print(f"\n[criterion {num:2d}] PASS ({time.time() - started:.1f}s): {label}")


def test_criterion_01_bound_soundness_chain():
    started = time.time()
    rng = np.random.default_rng(101)
    checked = 0
    for _ in range(200):
        m = random_model(rng, max_n=5, max_card=3, scale=3.0)
        for (i, j) in m.pairwise_edges:
            for (p, q) in ((i, j), (j, i)):
                t = m.potential(p, q)
                exact = exact_dependency(m, p, q)
                sig = bound_edge(t, "sigmoid_range")
                quarter = bound_edge(t, "quarter_range")
                inf_c = bound_edge(t, "inf_corollary")
                one_c = bound_edge(t, "one_corollary")
                assert exact <= sig + 1e-12
                assert sig <= quarter + 1e-12
                assert quarter <= min(inf_c, one_c) + 1e-12
                checked += 1
    assert checked > 200
    assert time.time() - started < 60.0
    report(1, f"bound chain sound on 200 random models ({checked} oriented edges)", started)


def test_criterion_02_ising_edge_closed_forms():
    started = time.time()
    for beta in (0.1, 0.5, 1.0, 2.0):
        t = ising_edge(beta)
        assert bound_edge(t, "inf_corollary") == pytest.approx(beta, abs=1e-10)
        assert bound_edge(t, "sigmoid_range") == pytest.approx(np.tanh(beta), abs=1e-10)
        pair = PairwiseMRF((2, 2), ((0, 1),), (t,))
        assert exact_dependency(pair, 0, 1) == pytest.approx(np.tanh(beta), abs=1e-10)
    report(2, "Ising edge: inf bound = beta, sigmoid bound = exact = tanh(beta)", started)


def test_criterion_03_mixing_certificate():
    started = time.time()
    ball = NormBall("inf", 0.9)
    for seed in range(5):
        psi = gen_ising_grid(3, 3, d_n=1.0, d_e=1.5, mode="mixed", seed=200 + seed)
        res = project_exact(psi, ball)
        assert res.converged
        R = bound_matrix(res.theta).matrix
        budget = mixing_time_bound(R, "inf", 0.01)
        assert budget.norm_value <= 0.9 + 1e-4
        assert budget.bounded
        t_star = int(np.ceil(budget.tau))
        op = gibbs_transition_operator(res.theta, scan="random")
        d = tv_to_stationarity(op, t_star)
        assert d <= 0.01
    assert time.time() - started < 300.0
    report(3, "exact d(ceil(tau(0.01))) <= 0.01 on five projected 3x3 grids", started)


def test_criterion_04_norm_ball_projections():
    started = time.time()
    rng = np.random.default_rng(104)
    for norm in ("inf", "spectral"):
        ball = NormBall(norm, 1.3)
        for _ in range(50):
            A = rng.normal(scale=rng.uniform(0.3, 3.0), size=(6, 6))
            Z = project_ball(A, ball)
            assert matrix_norm(Z, norm) <= ball.radius + 1e-10
            np.testing.assert_allclose(project_ball(Z, ball), Z, atol=1e-12)
            base = np.linalg.norm(Z - A)
            for _ in range(1000):
                W = project_ball(Z + rng.normal(scale=0.25, size=(6, 6)), ball)
                assert np.linalg.norm(W - A) >= base - 1e-9
    report(4, "ball projections feasible, idempotent, optimal vs 1000 probes x 50 x 2 norms", started)


def _acceptance_problem(seed, norm):
    rng = np.random.default_rng(seed)
    psi = random_model(rng, n=4, max_card=2, scale=2.0, p_edge=0.8)
    Y = np.abs(rng.normal(scale=0.5, size=(4, 4)))
    Y = 0.5 * (Y + Y.T)
    np.fill_diagonal(Y, 0.0)
    return ProjectionProblem(psi, NormBall(norm, 1.0), Y, alpha=1.0)


def _random_dual(problem, seed, scale=0.4):
    rng = np.random.default_rng(seed)
    d = DualState.zeros(problem)
    for o in d.pos:
        d.pos[o] = np.abs(rng.normal(scale=scale, size=d.pos[o].shape))
        d.neg[o] = np.abs(rng.normal(scale=scale, size=d.neg[o].shape))
    d.sym = {e: float(rng.normal(scale=scale)) for e in d.sym}
    if d.off is not None:
        from fastmix.projection import support_mask

        d.off = rng.normal(scale=scale, size=d.off.shape)
        d.off[support_mask(problem.psi)] = 0.0
    return d


def test_criterion_05_dual_projection_correctness():
    started = time.time()
    count = 0
    for norm in ("inf", "spectral"):
        for seed in range(25):
            prob = _acceptance_problem(500 + seed, norm)
            res = project_smoothed(prob, gtol=1e-8, max_iter=1000)

            assert res.gap <= 1e-4 * (1.0 + res.primal_value)

            tables, Z_oracle, _ = primal_pgd(prob)
            for e in prob.psi.pairwise_edges:
                np.testing.assert_allclose(res.theta.potential(*e), tables[e], atol=1e-3)

            layout = _Layout(prob)
            dual = _random_dual(prob, 600 + seed)
            x0 = layout.pack(dual)
            _, grad, _, _ = dual_value_and_gradient(prob, dual)
            ga = layout.pack(grad)
            h = 1e-6
            gfd = np.zeros_like(x0)
            for k in range(len(x0)):
                xp, xm = x0.copy(), x0.copy()
                xp[k] += h
                xm[k] -= h
                gp, _, _, _ = dual_value_and_gradient(prob, layout.unpack(xp))
                gm, _, _, _ = dual_value_and_gradient(prob, layout.unpack(xm))
                gfd[k] = (gp - gm) / (2 * h)
            np.testing.assert_allclose(ga, gfd, rtol=1e-5, atol=1e-8)
            count += 1
    assert count == 50
    report(5, "gap <= 1e-4(1+primal), theta matches primal solver to 1e-3, "
              "gradients match central differences (50 problems)", started)


def test_criterion_06_exact_projection_fixed_point():
    started = time.time()
    solved = 0
    for norm in ("inf", "spectral"):
        for seed in range(10):
            rng = np.random.default_rng(700 + seed)
            psi = random_model(rng, n=4, max_card=2, scale=2.5, p_edge=0.8)
            ball = NormBall(norm, 1.0)
            if matrix_norm(bound_matrix(psi).matrix, norm) <= 1.0:
                psi = psi.replace_potentials([3.0 * t for t in psi.potentials])
            assert matrix_norm(bound_matrix(psi).matrix, norm) > 1.0
            res = project_exact(psi, ball)  # tol 1e-6, <= 100 smoothed solves
            assert res.converged
            assert res.outer_iterations <= 100
            achieved = matrix_norm(bound_matrix(res.theta).matrix, norm)
            assert achieved == pytest.approx(1.0, abs=1e-4)
            solved += 1
    assert solved == 20
    report(6, "fixed point reached within 100 iterations, constraint active, on 20 problems", started)


def test_criterion_07_divergence_gradients():
    started = time.time()
    rng = np.random.default_rng(107)

    psi = gen_random_graph(5, 0.6, 1.0, 1.5, seed=71)
    theta = with_params_vector(
        psi, params_vector(psi) + rng.normal(scale=0.5, size=params_vector(psi).size)
    )
    family = make_spanning_trees(psi, seed=3)
    values = sorted(restricted_kl(psi, theta, mem)[0] for mem in family.members)
    assert len(values) == 1 or values[-1] - values[-2] > 1e-3  # away from argmax ties

    def piecewise_value(v):
        th = with_params_vector(theta, v)
        return max(enum_kl(restrict_model(psi, mem), restrict_model(th, mem))
                   for mem in family.members)

    _, grad = grad_piecewise_kl(psi, theta, family)
    v0 = params_vector(theta)
    h = 1e-5
    for k in range(len(v0)):
        vp, vm = v0.copy(), v0.copy()
        vp[k] += h
        vm[k] -= h
        fd = (piecewise_value(vp) - piecewise_value(vm)) / (2 * h)
        np.testing.assert_allclose(grad[k], fd, rtol=1e-5, atol=1e-7)

    def reversed_value(v):
        return enum_kl(with_params_vector(theta, v), psi)

    grad_r = grad_reversed_kl_exact(psi, theta)
    for k in range(len(v0)):
        vp, vm = v0.copy(), v0.copy()
        vp[k] += h
        vm[k] -= h
        fd = (reversed_value(vp) - reversed_value(vm)) / (2 * h)
        np.testing.assert_allclose(grad_r[k], fd, rtol=1e-5, atol=1e-7)

    at_min = grad_reversed_kl_exact(psi, psi)
    np.testing.assert_allclose(at_min, 0.0, atol=1e-10)
    report(7, "piecewise and reversed KL gradients match enumerated finite differences;"
              " reversed gradient vanishes at the target", started)


def test_criterion_08_norm_relations():
    started = time.time()
    rng = np.random.default_rng(108)
    for _ in range(100):
        B = rng.uniform(0.0, 1.0, size=(7, 7))
        M = 0.5 * (B + B.T)
        assert matrix_norm(M, "spectral") <= matrix_norm(M, "inf") + 1e-10

    r = 0.23
    side = 4
    n = side * side
    A = np.zeros((n, n))
    for a in range(side):
        for b in range(side):
            i = a * side + b
            for da, db in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                j = ((a + da) % side) * side + (b + db) % side
                A[i, j] = 1.0
    assert np.all(A.sum(axis=1) == 4)  # 4-regular torus
    assert matrix_norm(r * A, "inf") == pytest.approx(4 * r, abs=1e-12)
    assert matrix_norm(r * A, "spectral") == pytest.approx(4 * r, abs=1e-10)
    report(8, "spectral <= inf on 100 symmetric matrices; torus adjacency norms equal r*d", started)


def test_criterion_09_qualitative_error_ordering():
    started = time.time()
    settings = MethodSettings(norm="inf", radius=2.5, steps=60, step_size=0.1,
                              pool_size=500, sweeps=30_000, burn_frac=0.1)
    wins_vs_gibbs = 0
    wins_vs_mf = 0
    trials = 10
    for trial in range(trials):
        seed = 900 + trial
        m = gen_random_graph(10, 0.5, d_n=1.0, d_e=3.0, mode="mixed", seed=seed)
        _, truth = brute_force(m)
        est_rev, _ = run_method(m, "reversed+gibbs", settings, seed)
        est_gibbs, _ = run_method(m, "gibbs_original", settings, seed)
        est_mf, _ = run_method(m, "mf", settings, seed)
        e_rev = marginal_error(truth, est_rev)
        e_gibbs = marginal_error(truth, est_gibbs)
        e_mf = marginal_error(truth, est_mf)
        wins_vs_gibbs += e_rev < e_gibbs
        wins_vs_mf += e_rev < e_mf
        print(f"  trial {trial}: reversed {e_rev:.4f} | gibbs {e_gibbs:.4f} | mf {e_mf:.4f}")
    assert wins_vs_gibbs >= 7, f"reversed beat original Gibbs in only {wins_vs_gibbs}/10"
    assert wins_vs_mf >= 7, f"reversed beat mean field in only {wins_vs_mf}/10"
    assert time.time() - started < 1800.0
    report(9, f"reversed-KL projection beat Gibbs {wins_vs_gibbs}/10 and MF {wins_vs_mf}/10", started)


def test_criterion_10_oracle_coherence():
    started = time.time()
    rng = np.random.default_rng(110)
    for _ in range(50):
        n = int(rng.integers(2, 9))
        m = random_tree_model(rng, n)
        keep = [e for e in m.pairwise_edges if rng.uniform() > 0.3]
        sub = [(i, i) for i in range(n)] + keep
        logz_t, marg_t = tree_marginals(m, subgraph=sub)
        sub_model = PairwiseMRF(
            m.cards,
            tuple((i, i) for i in range(n)) + tuple(keep),
            tuple(m.potentials[:n]) + tuple(m.potential(i, j) for (i, j) in keep),
        )
        logz_b, marg_b = brute_force(sub_model)
        assert abs(logz_t - logz_b) < 1e-10
        for p, q in zip(marg_t.node, marg_b.node):
            np.testing.assert_allclose(p, q, atol=1e-10)

    # Gibbs vs brute force: 1e5 sweeps per fixture, batch-means standard
    # errors (20 contiguous segments) so chain autocorrelation is priced in.
    # With ~180 cells a 3-SE bound leaves little multiplicity headroom; the
    # seeds are fixed, so the check is deterministic.
    worst = 0.0
    batches = 20
    for k in range(20):
        m = random_model(np.random.default_rng(400 + k), n=3, max_card=3,
                         scale=0.6, p_edge=0.9)
        _, truth = brute_force(m)
        chain = GibbsChain(m, seed=17 + k)
        estimate_marginals(chain, sweeps=10_000, burn_in=0)  # burn-in
        segs = [estimate_marginals(chain, sweeps=4_500, burn_in=0) for _ in range(batches)]
        for i in range(m.n):
            means = np.stack([seg.node[i] for seg in segs])
            p_hat = means.mean(axis=0)
            se = means.std(axis=0, ddof=1) / np.sqrt(batches)
            dev = np.abs(p_hat - truth.node[i]) / np.maximum(3 * se, 1e-12)
            worst = max(worst, float(dev.max()))
            assert np.all(np.abs(p_hat - truth.node[i]) <= 3 * se), (k, i, p_hat, se)
    report(10, f"trees match brute force on 50 forests; Gibbs within 3 batch-means SE on"
               f" 20 fixtures after 1e5 sweeps (worst deviation {worst:.2f} of allowed)", started)
