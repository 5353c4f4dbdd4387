"""Shared test utilities: random model factories and slow, independent
enumeration oracles (pure python loops, no shared code with the package's
vectorized implementations)."""

import itertools
import math

import numpy as np

from fastmix.mrf import PairwiseMRF


def ising_edge(beta):
    return np.array([[beta, -beta], [-beta, beta]])


def random_model(rng, n=None, max_n=5, max_card=3, scale=3.0, p_edge=0.6,
                 binary=False, with_unary=True):
    """Random small model: every pair is an edge with prob p_edge, entries
    Uniform[-scale, scale]; binary restricts all cardinalities to 2."""
    if n is None:
        n = int(rng.integers(2, max_n + 1))
    if binary:
        cards = [2] * n
    else:
        cards = [int(rng.integers(2, max_card + 1)) for _ in range(n)]
    edges, pots = [], []
    if with_unary:
        for i in range(n):
            col = rng.uniform(-scale, scale, size=cards[i])
            edges.append((i, i))
            pots.append(np.tile(col[:, None], (1, cards[i])))
    added = False
    for i in range(n):
        for j in range(i + 1, n):
            if rng.uniform() < p_edge:
                edges.append((i, j))
                pots.append(rng.uniform(-scale, scale, size=(cards[i], cards[j])))
                added = True
    if not added:  # keep at least one pairwise edge so bounds are nontrivial
        edges.append((0, 1))
        pots.append(rng.uniform(-scale, scale, size=(cards[0], cards[1])))
    return PairwiseMRF(tuple(cards), tuple(edges), tuple(pots))


def random_tree_model(rng, n, card=2, scale=1.5):
    """Random spanning-tree-structured model with unary terms."""
    cards = [card] * n
    edges = [(i, i) for i in range(n)]
    pots = [np.tile(rng.uniform(-scale, scale, size=card)[:, None], (1, card))
            for _ in range(n)]
    nodes = list(range(n))
    rng.shuffle(nodes)
    for k in range(1, n):
        a = nodes[int(rng.integers(0, k))]
        b = nodes[k]
        i, j = min(a, b), max(a, b)
        edges.append((i, j))
        pots.append(rng.uniform(-scale, scale, size=(card, card)))
    return PairwiseMRF(tuple(cards), tuple(edges), tuple(pots))


def enum_configs(m):
    return itertools.product(*[range(c) for c in m.cards])


def enum_energy(m, x):
    total = 0.0
    for (i, j), t in zip(m.edges, m.potentials):
        total += float(t[x[i], x[j]])
    return total


def enum_log_partition(m):
    energies = [enum_energy(m, x) for x in enum_configs(m)]
    shift = max(energies)
    return shift + math.log(math.fsum(math.exp(e - shift) for e in energies))


def enum_distribution(m):
    """dict config -> probability, by direct summation."""
    logz = enum_log_partition(m)
    return {x: math.exp(enum_energy(m, x) - logz) for x in enum_configs(m)}


def enum_node_marginals(m):
    dist = enum_distribution(m)
    node = [np.zeros(c) for c in m.cards]
    for x, p in dist.items():
        for i, xi in enumerate(x):
            node[i][xi] += p
    return node


def enum_edge_marginal(m, i, j):
    dist = enum_distribution(m)
    t = np.zeros((m.cards[i], m.cards[j]))
    for x, p in dist.items():
        t[x[i], x[j]] += p
    return t


def enum_kl(pm, qm):
    dp = enum_distribution(pm)
    dq = enum_distribution(qm)
    return math.fsum(p * (math.log(p) - math.log(dq[x])) for x, p in dp.items() if p > 0)


def enum_conditional(m, x, i):
    """Conditional of X_i from the joint distribution, by enumeration."""
    x = list(x)
    weights = []
    for v in range(m.cards[i]):
        x[i] = v
        weights.append(math.exp(enum_energy(m, x)))
    total = math.fsum(weights)
    return np.array([w / total for w in weights])


def restrict_model(m, member):
    """Model keeping only the member's pairwise edges plus the self-edges of
    the nodes the member touches (for subgraph-divergence oracles)."""
    nodes = {i for e in member for i in e}
    member_set = {(min(i, j), max(i, j)) for (i, j) in member}
    edges, pots = [], []
    for (i, j), t in zip(m.edges, m.potentials):
        if (i == j and i in nodes) or (i != j and (i, j) in member_set):
            edges.append((i, j))
            pots.append(t)
    return PairwiseMRF(m.cards, tuple(edges), tuple(pots))


def enum_dependency(m, i, j):
    """Worst-case TV change of the conditional of X_i between configurations
    differing only at coordinate j, straight from the definition."""
    others = [k for k in range(m.n) if k != i and k != j]
    best = 0.0
    for rest in itertools.product(*[range(m.cards[k]) for k in others]):
        x = [0] * m.n
        for k, v in zip(others, rest):
            x[k] = v
        conds = []
        for xj in range(m.cards[j]):
            x[j] = xj
            conds.append(enum_conditional(m, x, i))
        for a in range(len(conds)):
            for b in range(a + 1, len(conds)):
                tv = 0.5 * float(np.abs(conds[a] - conds[b]).sum())
                best = max(best, tv)
    return best
