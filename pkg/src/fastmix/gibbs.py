"""Univariate Gibbs sampling with exact softmax conditionals.

The conditional of one site given the rest is the softmax of the summed
neighbor table columns plus the univariate vector; all exponentials are
max-shifted.  Chains use counter-based (Philox) random streams so that runs
are reproducible and pools of chains advance deterministically, one stream
lane per chain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mrf import PairwiseMRF

__all__ = [
    "conditional",
    "counter_rng",
    "GibbsChain",
    "SamplePool",
    "MarginalEstimate",
    "sweep",
    "estimate_marginals",
]


def counter_rng(seed, stream=0) -> np.random.Generator:
    """Philox generator keyed by (seed, stream)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((int(seed), int(stream)))))


def _site_structs(m: PairwiseMRF):
    """Per-site (unary vector, [(neighbor, oriented table), ...]) lists."""
    unary = [m.unary(i) for i in range(m.n)]
    nbrs = [[] for _ in range(m.n)]
    for (a, b), t in zip(m.edges, m.potentials):
        if a == b:
            continue
        nbrs[a].append((b, t))
        nbrs[b].append((a, np.ascontiguousarray(t.T)))
    return unary, nbrs


def conditional(m: PairwiseMRF, x, i) -> np.ndarray:
    """Exact conditional distribution of X_i given the other coordinates of x."""
    x = np.asarray(x, dtype=int)
    logits = m.unary(i).copy()
    for k, t in m.neighbors(i):
        logits += t[:, x[k]]
    logits -= logits.max()
    p = np.exp(logits)
    return p / p.sum()


@dataclass
class GibbsChain:
    """Single-site Gibbs chain with its own counter-based random stream."""

    model: PairwiseMRF
    seed: int = 0
    scan: str = "systematic"
    state: np.ndarray = None
    sweeps_done: int = 0
    _rng: np.random.Generator = field(init=False, repr=False)
    _unary: list = field(init=False, repr=False)
    _nbrs: list = field(init=False, repr=False)

    def __post_init__(self):
        if self.scan not in ("systematic", "random"):
            raise ValueError(f"unknown scan policy {self.scan!r}")
        self._rng = counter_rng(self.seed)
        self._unary, self._nbrs = _site_structs(self.model)
        if self.state is None:
            cards = np.asarray(self.model.cards)
            self.state = self._rng.integers(0, cards, size=self.model.n)
        else:
            self.state = np.asarray(self.state, dtype=int).copy()
            if np.any(self.state < 0) or np.any(self.state >= np.asarray(self.model.cards)):
                raise ValueError("initial state out of range")

    def _update_site(self, i):
        logits = self._unary[i] + 0.0
        x = self.state
        for k, t in self._nbrs[i]:
            logits = logits + t[:, x[k]]
        logits -= logits.max()
        p = np.exp(logits)
        cum = np.cumsum(p)
        r = self._rng.random() * cum[-1]
        x[i] = min(int(np.searchsorted(cum, r)), len(cum) - 1)

    def sweep(self):
        """One pass: all sites in order (systematic) or n random sites (random)."""
        n = self.model.n
        if self.scan == "systematic":
            for i in range(n):
                self._update_site(i)
        else:
            for i in self._rng.integers(0, n, size=n):
                self._update_site(int(i))
        self.sweeps_done += 1
        return self


def sweep(chain: GibbsChain) -> GibbsChain:
    return chain.sweep()


@dataclass
class MarginalEstimate:
    """Empirical per-variable state frequencies with binomial standard errors."""

    node: list
    count: int
    stderr: list

    def validate(self, atol=1e-10):
        for p in self.node:
            if abs(float(np.sum(p)) - 1.0) > atol:
                raise ValueError("frequencies must sum to 1")
        return self


def estimate_marginals(chain: GibbsChain, sweeps: int, burn_in: int = 0) -> MarginalEstimate:
    """Run the chain, recording one sample per sweep after burn-in."""
    if not sweeps > burn_in >= 0:
        raise ValueError("need sweeps > burn_in >= 0")
    m = chain.model
    counts = [np.zeros(c) for c in m.cards]
    recorded = 0
    for t in range(sweeps):
        chain.sweep()
        if t < burn_in:
            continue
        for i in range(m.n):
            counts[i][chain.state[i]] += 1
        recorded += 1
    node = [c / recorded for c in counts]
    stderr = [np.sqrt(p * (1.0 - p) / recorded) for p in node]
    return MarginalEstimate(node=node, count=recorded, stderr=stderr)


class SamplePool:
    """A fixed-size set of persistent Gibbs chains advanced in lock step.

    States are stored as an (n, size) array; each systematic pass updates
    every site of every chain with one vectorized draw per site, lane s of
    the counter-based stream feeding chain s.
    """

    def __init__(self, model: PairwiseMRF, size: int, seed: int = 0, burn_in: int = 0):
        if size < 1:
            raise ValueError("pool needs at least one chain")
        self.size = size
        self.model = model
        self._rng = counter_rng(seed, stream=1)
        cards = np.asarray(model.cards)
        self.states = self._rng.integers(0, cards[:, None], size=(model.n, size))
        for _ in range(burn_in):
            self.advance()

    def advance(self, model: PairwiseMRF = None):
        """One systematic pass over all sites for every chain."""
        if model is not None:
            if model.cards != self.model.cards:
                raise ValueError("replacement model must share the variable space")
            self.model = model
        unary, nbrs = _site_structs(self.model)
        X = self.states
        for i in range(self.model.n):
            logits = np.repeat(unary[i][:, None], self.size, axis=1)
            for k, t in nbrs[i]:
                logits += t[:, X[k]]
            logits -= logits.max(axis=0)
            p = np.exp(logits)
            cum = np.cumsum(p, axis=0)
            r = self._rng.random(self.size) * cum[-1]
            X[i] = np.minimum((r[None, :] > cum).sum(axis=0), len(cum) - 1)
        return self

    def node_frequencies(self):
        """Empirical univariate marginals across the pool."""
        out = []
        for i, c in enumerate(self.model.cards):
            out.append(np.bincount(self.states[i], minlength=c) / self.size)
        return out
