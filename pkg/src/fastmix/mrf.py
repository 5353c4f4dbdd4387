"""Discrete pairwise Markov random fields in edge-potential form.

A model over variables x_1..x_n (variable i taking values in {0..L_i-1})
is parameterized by a set of edges (i, j) with i <= j and one real table
per edge, so that

    p(x) ~ exp( sum_{(i,j)} theta_ij[x_i, x_j] ).

Self-edges (i, i) carry univariate terms; their tables must have identical
columns so that only the per-state vector matters.  Querying the reversed
orientation (j, i) of a stored edge returns the transposed table.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PairwiseMRF",
    "unnormalized_log_prob",
    "feature_inner",
    "feature_vector",
    "potentials_flat",
    "params_vector",
    "with_params_vector",
    "params_distance",
    "gen_ising_grid",
    "gen_random_graph",
    "gen_potts_grid",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
]


@dataclass(frozen=True)
class PairwiseMRF:
    """Immutable pairwise MRF with per-edge potential tables.

    Attributes
    ----------
    cards : tuple of int
        Cardinality L_i >= 2 of each variable.
    edges : tuple of (i, j)
        Ordered pairs with i <= j, no duplicates.  Pairs with i == j are
        self-edges encoding univariate terms.
    potentials : tuple of ndarray
        One (L_i, L_j) table per edge, aligned with ``edges``.
    """

    cards: tuple
    edges: tuple
    potentials: tuple
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cards = tuple(int(c) for c in self.cards)
        edges = tuple((int(i), int(j)) for i, j in self.edges)
        pots = tuple(np.asarray(t, dtype=float) for t in self.potentials)
        if any(c < 2 for c in cards):
            raise ValueError("every variable needs cardinality >= 2")
        if len(edges) != len(pots):
            raise ValueError("edges and potentials must align")
        n = len(cards)
        seen = set()
        for (i, j), t in zip(edges, pots):
            if not (0 <= i <= j < n):
                raise ValueError(f"edge ({i},{j}) out of range for n={n}")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i},{j})")
            seen.add((i, j))
            if t.shape != (cards[i], cards[j]):
                raise ValueError(
                    f"potential for edge ({i},{j}) has shape {t.shape},"
                    f" expected {(cards[i], cards[j])}"
                )
            if i == j and not np.allclose(t, t[:, :1], atol=0.0):
                raise ValueError(f"self-edge ({i},{i}) must have identical columns")
        for t in pots:
            t.setflags(write=False)
        object.__setattr__(self, "cards", cards)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "potentials", pots)
        object.__setattr__(self, "_index", {e: k for k, e in enumerate(edges)})

    @property
    def n(self):
        return len(self.cards)

    @property
    def pairwise_edges(self):
        return tuple(e for e in self.edges if e[0] != e[1])

    def has_edge(self, i, j):
        return (min(i, j), max(i, j)) in self._index

    def potential(self, i, j):
        """Oriented table for (i, j); the reversed orientation is transposed."""
        if (i, j) in self._index:
            return self.potentials[self._index[(i, j)]]
        if (j, i) in self._index:
            return self.potentials[self._index[(j, i)]].T
        raise KeyError(f"no edge between {i} and {j}")

    def unary(self, i):
        """Univariate log-potential vector of variable i (zeros without a self-edge)."""
        if (i, i) in self._index:
            return self.potentials[self._index[(i, i)]][:, 0]
        return np.zeros(self.cards[i])

    def neighbors(self, i):
        """Pairwise neighbors of i, each with the table oriented as (L_i, L_k)."""
        out = []
        for (a, b), t in zip(self.edges, self.potentials):
            if a == b:
                continue
            if a == i:
                out.append((b, t))
            elif b == i:
                out.append((a, t.T))
        return out

    def n_states(self):
        """Total number of joint configurations, as a python int."""
        out = 1
        for c in self.cards:
            out *= c
        return out

    def replace_potentials(self, new_potentials):
        return PairwiseMRF(self.cards, self.edges, tuple(new_potentials))


def unnormalized_log_prob(m: PairwiseMRF, x) -> float:
    """sum_{(i,j)} theta_ij[x_i, x_j], each stored edge used exactly once."""
    x = np.asarray(x, dtype=int)
    if x.shape != (m.n,):
        raise ValueError(f"configuration must have length {m.n}")
    if np.any(x < 0) or np.any(x >= np.asarray(m.cards)):
        raise ValueError("state index out of range")
    total = 0.0
    for (i, j), t in zip(m.edges, m.potentials):
        total += t[x[i], x[j]]
    return float(total)


def feature_inner(m: PairwiseMRF, other: PairwiseMRF, x) -> float:
    """Inner product f(x) . (theta - psi) of the indicator features with a
    parameter difference, computed without materializing the indicator vector."""
    return unnormalized_log_prob(m, x) - unnormalized_log_prob(other, x)


def potentials_flat(m: PairwiseMRF) -> np.ndarray:
    """All potential tables raveled and concatenated (the flattened theta the
    indicator features pair with)."""
    if not m.potentials:
        return np.zeros(0)
    return np.concatenate([t.ravel() for t in m.potentials])


def feature_vector(m: PairwiseMRF, x) -> np.ndarray:
    """Indicator sufficient statistics: one entry per (edge, a, b) cell, so
    that feature_vector(m, x) . potentials_flat(m) equals the unnormalized
    log probability of x."""
    x = np.asarray(x, dtype=int)
    if x.shape != (m.n,):
        raise ValueError(f"configuration must have length {m.n}")
    parts = []
    for (i, j), t in zip(m.edges, m.potentials):
        block = np.zeros(t.shape)
        block[x[i], x[j]] = 1.0
        parts.append(block.ravel())
    if not parts:
        return np.zeros(0)
    return np.concatenate(parts)


# -- flat parameter packing -------------------------------------------------
#
# Pairwise tables contribute all L_i * L_j entries; a self-edge contributes
# only its L_i-vector (the shared column), so packed vectors stay in the
# valid parameterization under arbitrary arithmetic.


def _packed_sizes(m: PairwiseMRF):
    sizes = []
    for (i, j), t in zip(m.edges, m.potentials):
        sizes.append(m.cards[i] if i == j else t.size)
    return sizes


def params_vector(m: PairwiseMRF) -> np.ndarray:
    parts = []
    for (i, j), t in zip(m.edges, m.potentials):
        parts.append(t[:, 0] if i == j else t.ravel())
    if not parts:
        return np.zeros(0)
    return np.concatenate(parts)


def with_params_vector(m: PairwiseMRF, v) -> PairwiseMRF:
    v = np.asarray(v, dtype=float)
    sizes = _packed_sizes(m)
    if v.shape != (sum(sizes),):
        raise ValueError("parameter vector has wrong length")
    offsets = np.cumsum([0] + sizes)
    pots = []
    for k, ((i, j), t) in enumerate(zip(m.edges, m.potentials)):
        chunk = v[offsets[k]:offsets[k + 1]]
        if i == j:
            pots.append(np.tile(chunk[:, None], (1, m.cards[j])))
        else:
            pots.append(chunk.reshape(t.shape))
    return m.replace_potentials(pots)


def params_distance(a: PairwiseMRF, b: PairwiseMRF) -> float:
    """Euclidean distance between two models with the same structure."""
    if a.edges != b.edges or a.cards != b.cards:
        raise ValueError("models must share structure")
    return float(np.linalg.norm(params_vector(a) - params_vector(b)))


# -- synthetic model families -------------------------------------------------


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _ising_unary(u):
    # column vector (u, -u) replicated so both columns agree
    col = np.array([u, -u])
    return np.tile(col[:, None], (1, 2))


def _ising_pairwise(w):
    return np.array([[w, -w], [-w, w]])


def _draw_coupling(rng, d_e, mode):
    if mode == "mixed":
        return rng.uniform(-d_e, d_e)
    if mode == "attractive":
        return rng.uniform(0.0, d_e)
    raise ValueError(f"unknown interaction mode {mode!r}")


def grid_edges(rows, cols):
    """4-connected grid pairs, node index r*cols + c; right edges then down."""
    edges = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols:
                edges.append((i, i + 1))
            if r + 1 < rows:
                edges.append((i, i + cols))
    return edges


def gen_ising_grid(rows, cols, d_n, d_e, mode="mixed", seed=0) -> PairwiseMRF:
    """Binary model on a 4-connected rows x cols grid.

    Univariate strengths are Uniform[-d_n, d_n]; couplings w are
    Uniform[-d_e, d_e] for ``mixed`` or Uniform[0, d_e] for ``attractive``,
    encoded as [[w, -w], [-w, w]].
    """
    if d_n < 0 or d_e < 0:
        raise ValueError("strengths must be nonnegative")
    rng = _as_rng(seed)
    n = rows * cols
    edges = [(i, i) for i in range(n)]
    pots = [_ising_unary(rng.uniform(-d_n, d_n)) for _ in range(n)]
    for i, j in grid_edges(rows, cols):
        edges.append((i, j))
        pots.append(_ising_pairwise(_draw_coupling(rng, d_e, mode)))
    return PairwiseMRF((2,) * n, tuple(edges), tuple(pots))


def gen_random_graph(n, p_e, d_n, d_e, mode="mixed", seed=0) -> PairwiseMRF:
    """Binary model where each of the n(n-1)/2 pairs is an edge with prob p_e."""
    if not 0.0 <= p_e <= 1.0:
        raise ValueError("p_e must lie in [0, 1]")
    if d_n < 0 or d_e < 0:
        raise ValueError("strengths must be nonnegative")
    rng = _as_rng(seed)
    edges = [(i, i) for i in range(n)]
    pots = [_ising_unary(rng.uniform(-d_n, d_n)) for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if rng.uniform() < p_e:
                edges.append((i, j))
                pots.append(_ising_pairwise(_draw_coupling(rng, d_e, mode)))
    return PairwiseMRF((2,) * n, tuple(edges), tuple(pots))


def gen_potts_grid(rows, cols, L, d_n, d_e, mode="mixed", seed=0) -> PairwiseMRF:
    """L-state model on a grid: couplings w * identity, univariate vectors
    drawn per state from Uniform[-d_n, d_n]."""
    if L < 2:
        raise ValueError("need at least two states")
    if d_n < 0 or d_e < 0:
        raise ValueError("strengths must be nonnegative")
    rng = _as_rng(seed)
    n = rows * cols
    edges = [(i, i) for i in range(n)]
    pots = []
    for _ in range(n):
        col = rng.uniform(-d_n, d_n, size=L)
        pots.append(np.tile(col[:, None], (1, L)))
    for i, j in grid_edges(rows, cols):
        edges.append((i, j))
        pots.append(_draw_coupling(rng, d_e, mode) * np.eye(L))
    return PairwiseMRF((L,) * n, tuple(edges), tuple(pots))


# -- JSON model format ---------------------------------------------------------


def model_to_dict(m: PairwiseMRF) -> dict:
    return {
        "n": m.n,
        "cards": list(m.cards),
        "edges": [
            {"i": i, "j": j, "table": t.tolist()}
            for (i, j), t in zip(m.edges, m.potentials)
        ],
    }


def model_from_dict(d: dict) -> PairwiseMRF:
    n = int(d["n"])
    cards = tuple(int(c) for c in d["cards"])
    if len(cards) != n:
        raise ValueError("cards length disagrees with n")
    edges = []
    pots = []
    for e in d["edges"]:
        edges.append((int(e["i"]), int(e["j"])))
        pots.append(np.asarray(e["table"], dtype=float))
    return PairwiseMRF(cards, tuple(edges), tuple(pots))


def save_model(m: PairwiseMRF, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(m), fh)


def load_model(path) -> PairwiseMRF:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
