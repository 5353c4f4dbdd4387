"""Variational baselines: naive mean field and loopy belief propagation.

Mean field runs exact coordinate ascent on a fully factorized family in a
seeded random site order (each update is the exact minimizer, so the KL to
the model never increases).  Loopy BP runs damped synchronous sum-product
in the log domain; on forests it reproduces exact marginals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .exact import BRUTE_FORCE_CAP, MarginalTable, brute_force
from .mrf import PairwiseMRF

__all__ = ["FixedPointConfig", "mean_field", "mean_field_pass", "loopy_bp", "factorized_kl"]


@dataclass(frozen=True)
class FixedPointConfig:
    max_iter: int = 1000
    damping: float = 0.5  # used by loopy BP; mean field takes exact steps
    tol: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")


def _softmax(v):
    e = np.exp(v - np.max(v))
    return e / e.sum()


def mean_field_pass(m: PairwiseMRF, q, order):
    """One asynchronous coordinate-ascent pass in the given site order;
    returns the largest single-site change."""
    delta = 0.0
    for i in order:
        logits = m.unary(i).copy()
        for k, t in m.neighbors(i):
            logits += t @ q[k]
        new = _softmax(logits)
        delta = max(delta, float(np.abs(new - q[i]).max()))
        q[i] = new
    return delta


def mean_field(m: PairwiseMRF, config: FixedPointConfig = FixedPointConfig()) -> MarginalTable:
    """Fully factorized fixed point q_i ~ exp(sum_k E_q[theta_ik[:, X_k]])."""
    rng = np.random.default_rng(config.seed)
    q = [np.full(c, 1.0 / c) for c in m.cards]
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iter + 1):
        order = rng.permutation(m.n)
        delta = mean_field_pass(m, q, order)
        if delta < config.tol:
            converged = True
            break
    edge = {(i, j): np.outer(q[i], q[j]) for (i, j) in m.pairwise_edges}
    meta = {"converged": converged, "iterations": iterations}
    if m.n_states() <= 2 ** 16:
        meta["kl_to_model"] = factorized_kl(q, m)
    return MarginalTable(node=q, edge=edge, meta=meta)


def factorized_kl(q, m: PairwiseMRF, cap=BRUTE_FORCE_CAP) -> float:
    """KL(q || p) for a factorized q: negative entropy minus the expected
    unnormalized log probability plus the exact log-partition value."""
    neg_entropy = sum(float(np.sum(p * np.log(np.maximum(p, 1e-300)))) for p in q)
    expect = 0.0
    for (i, j), t in zip(m.edges, m.potentials):
        if i == j:
            expect += float(np.dot(q[i], t[:, 0]))
        else:
            expect += float(q[i] @ t @ q[j])
    logz, _ = brute_force(m, cap=cap)
    return neg_entropy - expect + logz


def loopy_bp(m: PairwiseMRF, config: FixedPointConfig = FixedPointConfig()) -> MarginalTable:
    """Damped synchronous sum-product on the pairwise graph."""
    messages = {}
    neighbors = {i: [] for i in range(m.n)}
    for (i, j) in m.pairwise_edges:
        messages[(i, j)] = np.zeros(m.cards[j])
        messages[(j, i)] = np.zeros(m.cards[i])
        neighbors[i].append(j)
        neighbors[j].append(i)

    converged = False
    iterations = 0
    for iterations in range(1, config.max_iter + 1):
        delta = 0.0
        new_messages = {}
        for (src, dst) in messages:
            t = m.potential(src, dst)  # (L_src, L_dst)
            pre = m.unary(src).copy()
            for k in neighbors[src]:
                if k != dst:
                    pre += messages[(k, src)]
            out = logsumexp(t + pre[:, None], axis=0)
            out -= logsumexp(out)
            mixed = config.damping * messages[(src, dst)] + (1 - config.damping) * out
            delta = max(delta, float(np.abs(mixed - messages[(src, dst)]).max()))
            new_messages[(src, dst)] = mixed
        messages = new_messages
        if delta < config.tol:
            converged = True
            break

    node = []
    for i in range(m.n):
        b = m.unary(i).copy()
        for k in neighbors[i]:
            b += messages[(k, i)]
        node.append(_softmax(b))
    edge = {}
    for (i, j) in m.pairwise_edges:
        pre_i = m.unary(i).copy()
        for k in neighbors[i]:
            if k != j:
                pre_i += messages[(k, i)]
        pre_j = m.unary(j).copy()
        for k in neighbors[j]:
            if k != i:
                pre_j += messages[(k, j)]
        lb = m.potential(i, j) + pre_i[:, None] + pre_j[None, :]
        b = np.exp(lb - lb.max())
        edge[(i, j)] = b / b.sum()
    return MarginalTable(node=node, edge=edge,
                         meta={"converged": converged, "iterations": iterations})
