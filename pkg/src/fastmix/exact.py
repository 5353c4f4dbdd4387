"""Exact inference oracles for small models.

Brute-force enumeration supplies the log-partition value, exact marginals
and exact KL divergences on models whose joint state space fits in memory.
Tree-structured (forest) models get exact two-pass sum-product marginals at
any size.  The exact single-site Gibbs transition operator over the joint
state space supports mixing-time diagnostics.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import CapacityError
from .mrf import PairwiseMRF

__all__ = [
    "MarginalTable",
    "TransitionOperator",
    "BRUTE_FORCE_CAP",
    "OPERATOR_CAP",
    "enumerate_configs",
    "log_weights",
    "brute_force",
    "tree_marginals",
    "exact_kl",
    "gibbs_transition_operator",
    "total_variation",
    "tv_to_stationarity",
    "distance_curve",
]

BRUTE_FORCE_CAP = 2 ** 20
OPERATOR_CAP = 2 ** 12


@dataclass
class MarginalTable:
    """Exact or approximate per-variable and per-edge marginals.

    ``node[i]`` is the probability vector of X_i; ``edge[(i, j)]`` (i < j)
    the joint table of (X_i, X_j) for pairwise edges where available.
    """

    node: list
    edge: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def validate(self, atol=1e-10):
        for p in self.node:
            if np.any(np.asarray(p) < -atol):
                raise ValueError("negative node marginal")
            if abs(float(np.sum(p)) - 1.0) > atol:
                raise ValueError("node marginal does not sum to 1")
        for (i, j), t in self.edge.items():
            t = np.asarray(t)
            if np.any(t < -atol):
                raise ValueError("negative edge marginal")
            if abs(float(t.sum()) - 1.0) > atol:
                raise ValueError("edge marginal does not sum to 1")
            if not np.allclose(t.sum(axis=1), self.node[i], atol=atol):
                raise ValueError(f"edge ({i},{j}) rows disagree with node {i}")
            if not np.allclose(t.sum(axis=0), self.node[j], atol=atol):
                raise ValueError(f"edge ({i},{j}) cols disagree with node {j}")
        return self


@dataclass
class TransitionOperator:
    """Dense single-site Gibbs kernel over the joint configuration space."""

    matrix: np.ndarray
    stationary: np.ndarray
    scan: str

    def validate(self, atol=1e-10):
        rows = self.matrix.sum(axis=1)
        if not np.allclose(rows, 1.0, atol=1e-12):
            raise ValueError("transition rows must sum to 1")
        fixed = self.stationary @ self.matrix
        if not np.allclose(fixed, self.stationary, atol=atol):
            raise ValueError("stationary vector is not a fixed point")
        return self


def _check_cap(m: PairwiseMRF, cap):
    size = m.n_states()
    if size > cap:
        raise CapacityError(f"joint state space {size} exceeds cap {cap}")
    return size


def enumerate_configs(cards):
    """All joint configurations as an (N, n) int array, last variable fastest."""
    grids = np.meshgrid(*[np.arange(c) for c in cards], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def log_weights(m: PairwiseMRF, configs=None):
    """Unnormalized log probability of every configuration."""
    if configs is None:
        configs = enumerate_configs(m.cards)
    lw = np.zeros(len(configs))
    for (i, j), t in zip(m.edges, m.potentials):
        lw += t[configs[:, i], configs[:, j]]
    return lw


def _marginals_from_dist(m: PairwiseMRF, configs, p) -> MarginalTable:
    node = []
    for i in range(m.n):
        node.append(np.bincount(configs[:, i], weights=p, minlength=m.cards[i]))
    edge = {}
    for (i, j) in m.pairwise_edges:
        t = np.zeros((m.cards[i], m.cards[j]))
        np.add.at(t, (configs[:, i], configs[:, j]), p)
        edge[(i, j)] = t
    return MarginalTable(node=node, edge=edge)


def brute_force(m: PairwiseMRF, cap=BRUTE_FORCE_CAP):
    """Exact log-partition value and marginals by full enumeration."""
    _check_cap(m, cap)
    configs = enumerate_configs(m.cards)
    lw = log_weights(m, configs)
    logz = float(logsumexp(lw))
    p = np.exp(lw - logz)
    return logz, _marginals_from_dist(m, configs, p)


def exact_kl(p_model: PairwiseMRF, q_model: PairwiseMRF, cap=BRUTE_FORCE_CAP) -> float:
    """KL(p || q) by enumeration; both models share one variable space."""
    if p_model.cards != q_model.cards:
        raise ValueError("models must share the variable space")
    _check_cap(p_model, cap)
    configs = enumerate_configs(p_model.cards)
    lp = log_weights(p_model, configs)
    lq = log_weights(q_model, configs)
    lp -= logsumexp(lp)
    lq -= logsumexp(lq)
    p = np.exp(lp)
    return float(np.sum(p * (lp - lq)))


# -- exact sum-product on forests ----------------------------------------------


def _forest_structure(m: PairwiseMRF, subgraph):
    """Validate the pairwise part of ``subgraph`` is a forest; return adjacency."""
    adj = {i: [] for i in range(m.n)}
    parent = list(range(m.n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for (i, j) in subgraph:
        if i == j:
            continue
        if not m.has_edge(i, j):
            raise ValueError(f"({i},{j}) is not an edge of the model")
        ri, rj = find(i), find(j)
        if ri == rj:
            raise ValueError("subgraph contains a cycle")
        parent[ri] = rj
        adj[i].append(j)
        adj[j].append(i)
    return adj


def tree_marginals(m: PairwiseMRF, subgraph=None, unary_nodes=None):
    """Exact log-partition value and marginals of the model restricted to a
    cycle-free edge subset.

    ``subgraph`` defaults to all pairwise edges (the model itself must then be
    a forest).  Self-edges listed in ``subgraph`` select which univariate terms
    participate; with ``subgraph=None`` all of them do.  ``unary_nodes``
    overrides that selection explicitly.
    """
    if subgraph is None:
        pair = list(m.pairwise_edges)
        nodes_with_unary = set(range(m.n))
    else:
        pair = [tuple(e) for e in subgraph if e[0] != e[1]]
        nodes_with_unary = {e[0] for e in subgraph if e[0] == e[1]}
    if unary_nodes is not None:
        nodes_with_unary = set(unary_nodes)
    adj = _forest_structure(m, pair)

    unary = [
        m.unary(i) if i in nodes_with_unary else np.zeros(m.cards[i])
        for i in range(m.n)
    ]

    # Rooted message passing, log domain, messages normalized each step with
    # the shifts folded into the log-partition accumulator.
    logz = 0.0
    msg = {}  # (src, dst) -> log message vector over dst states
    order = []  # (child, parent) in upward order
    visited = [False] * m.n
    roots = []
    for r in range(m.n):
        if visited[r]:
            continue
        roots.append(r)
        stack = [(r, -1)]
        comp = []
        while stack:
            v, par = stack.pop()
            visited[v] = True
            comp.append((v, par))
            for w in adj[v]:
                if w != par:
                    stack.append((w, v))
        for v, par in reversed(comp):
            if par < 0:
                continue
            belief = unary[v].copy()
            for w in adj[v]:
                if w != par:
                    belief = belief + msg[(w, v)]
            t = m.potential(v, par)  # (L_v, L_par)
            out = logsumexp(t + belief[:, None], axis=0)
            shift = logsumexp(out)
            msg[(v, par)] = out - shift
            logz += shift
        order.extend(comp)  # preorder: parents handled before children going down

    for r in roots:
        belief = unary[r].copy()
        for w in adj[r]:
            belief = belief + msg[(w, r)]
        logz += logsumexp(belief)

    # Downward pass.
    for v, par in order:
        if par < 0:
            continue
        belief = unary[par].copy()
        for w in adj[par]:
            belief = belief + msg[(w, par)]
        pre = belief - msg[(v, par)]
        t = m.potential(par, v)  # (L_par, L_v)
        out = logsumexp(t + pre[:, None], axis=0)
        msg[(par, v)] = out - logsumexp(out)

    node = []
    for i in range(m.n):
        belief = unary[i].copy()
        for w in adj[i]:
            belief = belief + msg[(w, i)]
        node.append(np.exp(belief - logsumexp(belief)))

    edge = {}
    for (i, j) in pair:
        a, b = (i, j) if i < j else (j, i)
        t = m.potential(a, b)
        pre_a = unary[a].copy()
        for w in adj[a]:
            if w != b:
                pre_a = pre_a + msg[(w, a)]
        pre_b = unary[b].copy()
        for w in adj[b]:
            if w != a:
                pre_b = pre_b + msg[(w, b)]
        lb = t + pre_a[:, None] + pre_b[None, :]
        edge[(a, b)] = np.exp(lb - logsumexp(lb))
    return float(logz), MarginalTable(node=node, edge=edge)


# -- exact Gibbs transition operator --------------------------------------------


def _site_kernel(m: PairwiseMRF, configs, index_of, i):
    """Dense kernel resampling site i from its exact conditional."""
    from .gibbs import conditional

    size = len(configs)
    P = np.zeros((size, size))
    for s in range(size):
        x = configs[s]
        cond = conditional(m, x, i)
        y = x.copy()
        for v in range(m.cards[i]):
            y[i] = v
            P[s, index_of(y)] = cond[v]
    return P


def gibbs_transition_operator(m: PairwiseMRF, scan="random", cap=OPERATOR_CAP):
    """Exact single-site Gibbs operator over the joint state space.

    ``random`` averages the per-site kernels (one uniformly random site per
    step); ``systematic`` composes them in index order (one full pass).
    """
    size = _check_cap(m, cap)
    configs = enumerate_configs(m.cards)
    strides = np.ones(m.n, dtype=int)
    for i in range(m.n - 2, -1, -1):
        strides[i] = strides[i + 1] * m.cards[i + 1]

    def index_of(x):
        return int(np.dot(x, strides))

    kernels = [_site_kernel(m, configs, index_of, i) for i in range(m.n)]
    if scan == "random":
        P = sum(kernels) / m.n
    elif scan == "systematic":
        P = kernels[0]
        for K in kernels[1:]:
            P = P @ K
    else:
        raise ValueError(f"unknown scan policy {scan!r}")

    lw = log_weights(m, configs)
    stationary = np.exp(lw - logsumexp(lw))
    return TransitionOperator(matrix=P, stationary=stationary, scan=scan)


def total_variation(p, q) -> float:
    """Half the l1 distance between two finite distributions."""
    return 0.5 * float(np.sum(np.abs(np.asarray(p) - np.asarray(q))))


def tv_to_stationarity(op: TransitionOperator, t: int) -> float:
    """Worst-start total variation distance to stationarity after t steps."""
    Pt = np.linalg.matrix_power(op.matrix, t)
    return float(0.5 * np.max(np.abs(Pt - op.stationary[None, :]).sum(axis=1)))


def distance_curve(op: TransitionOperator, t_max: int) -> np.ndarray:
    """Worst-start TV distance for t = 0..t_max (inclusive)."""
    out = np.empty(t_max + 1)
    Pt = np.eye(len(op.stationary))
    for t in range(t_max + 1):
        out[t] = 0.5 * np.max(np.abs(Pt - op.stationary[None, :]).sum(axis=1))
        if t < t_max:
            Pt = Pt @ op.matrix
    return out
