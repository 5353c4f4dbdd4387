"""Divergence minimization over the fast-mixing set by projected gradient
descent.

Each step takes a gradient of the chosen divergence D(psi, theta) with
respect to theta and re-projects with the smoothed Euclidean operator,
threading the dependency surrogate Z (as the anchor) and the dual variables
through successive projections.

Two gradient providers are built in: the piecewise KL divergence
max_T KL(psi_T || theta_T) over a family of forest subgraphs, evaluated
exactly by tree inference, and the reversed KL divergence KL(theta || psi),
whose gradient is estimated from a pool of persistent Gibbs chains (or
computed exactly by enumeration on small models).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .exact import BRUTE_FORCE_CAP, enumerate_configs, log_weights, tree_marginals
from .gibbs import SamplePool
from .mrf import PairwiseMRF, params_vector, with_params_vector
from .normball import NormBall
from .projection import ProjectionProblem, default_anchor, project_smoothed

__all__ = [
    "SubgraphFamily",
    "PGDConfig",
    "PGDResult",
    "make_grid_chains",
    "make_spanning_trees",
    "restricted_kl",
    "grad_piecewise_kl",
    "grad_reversed_kl_exact",
    "grad_reversed_kl",
    "pgd_project",
]


@dataclass(frozen=True)
class SubgraphFamily:
    """A list of forest edge-subsets whose union covers the pairwise edges."""

    members: tuple

    def __post_init__(self):
        members = tuple(tuple(tuple(e) for e in member) for member in self.members)
        object.__setattr__(self, "members", members)

    def covers(self, m: PairwiseMRF) -> bool:
        alledges = set(m.pairwise_edges)
        seen = set()
        for member in self.members:
            seen.update(member)
        return seen >= alledges

    def validate(self, m: PairwiseMRF):
        for member in self.members:
            seen = set()
            parent = list(range(m.n))

            def find(a):
                while parent[a] != a:
                    parent[a] = parent[parent[a]]
                    a = parent[a]
                return a

            for (i, j) in member:
                if i == j or not m.has_edge(i, j):
                    raise ValueError(f"({i},{j}) is not a pairwise edge of the model")
                if (i, j) in seen:
                    raise ValueError(f"duplicate edge ({i},{j}) in subgraph")
                seen.add((i, j))
                ri, rj = find(i), find(j)
                if ri == rj:
                    raise ValueError("subgraph member contains a cycle")
                parent[ri] = rj
        if not self.covers(m):
            raise ValueError("subgraph family does not cover all pairwise edges")
        return self


def make_grid_chains(rows, cols, model: PairwiseMRF = None) -> SubgraphFamily:
    """One chain per grid row and per grid column (node id r*cols + c)."""
    members = []
    for r in range(rows):
        chain = [(r * cols + c, r * cols + c + 1) for c in range(cols - 1)]
        if chain:
            members.append(chain)
    for c in range(cols):
        chain = [(r * cols + c, (r + 1) * cols + c) for r in range(rows - 1)]
        if chain:
            members.append(chain)
    fam = SubgraphFamily(tuple(members))
    if model is not None:
        expected = {e for member in fam.members for e in member}
        if set(model.pairwise_edges) != expected:
            raise ValueError("model is not the rows x cols grid these chains assume")
        fam.validate(model)
    return fam


def make_spanning_trees(m: PairwiseMRF, seed=0, max_draws=1000) -> SubgraphFamily:
    """Random-weight Kruskal spanning forests drawn until every pairwise edge
    is covered; deterministic under the seed."""
    rng = np.random.default_rng(seed)
    edges = list(m.pairwise_edges)
    if not edges:
        return SubgraphFamily(())
    members = []
    uncovered = set(edges)
    for _ in range(max_draws):
        weights = rng.uniform(size=len(edges))
        order = np.argsort(weights)
        parent = list(range(m.n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        tree = []
        for k in order:
            i, j = edges[k]
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[ri] = rj
                tree.append(edges[k])
        members.append(tuple(sorted(tree)))
        uncovered -= set(tree)
        if not uncovered:
            break
    else:
        raise RuntimeError("edge coverage not reached; graph may be degenerate")
    return SubgraphFamily(tuple(members)).validate(m)


def _member_subgraph(m: PairwiseMRF, member):
    """Member edges plus the self-edges of the nodes the member touches."""
    nodes = {i for e in member for i in e}
    selfs = [(i, i) for i in sorted(nodes) if m.has_edge(i, i)]
    return list(member) + selfs


def restricted_kl(psi: PairwiseMRF, theta: PairwiseMRF, member):
    """KL between the two models restricted to one forest subgraph, with the
    marginals needed for its gradient."""
    sub = _member_subgraph(psi, member)
    logz_p, marg_p = tree_marginals(psi, subgraph=sub)
    logz_q, marg_q = tree_marginals(theta, subgraph=sub)
    value = logz_q - logz_p
    nodes = {i for e in member for i in e}
    for (i, j) in member:
        a, b = min(i, j), max(i, j)
        value += float(np.sum(marg_p.edge[(a, b)] * (psi.potential(a, b) - theta.potential(a, b))))
    for i in sorted(nodes):
        if psi.has_edge(i, i):
            value += float(np.dot(marg_p.node[i], psi.unary(i) - theta.unary(i)))
    return value, marg_p, marg_q


def _grad_tables_from_marginals(m: PairwiseMRF, member, marg_q, marg_p):
    """Gradient of KL(psi_T || theta_T) in theta's potential layout:
    mu_T(theta) - mu_T(psi) on the member's coordinates, zero elsewhere."""
    nodes = {i for e in member for i in e}
    member_set = {(min(i, j), max(i, j)) for (i, j) in member}
    tabs = []
    for (i, j), t in zip(m.edges, m.potentials):
        if i == j and i in nodes:
            col = marg_q.node[i] - marg_p.node[i]
            tabs.append(np.tile(col[:, None], (1, t.shape[1])))
        elif i != j and (i, j) in member_set:
            tabs.append(marg_q.edge[(i, j)] - marg_p.edge[(i, j)])
        else:
            tabs.append(np.zeros_like(t))
    return tabs


def grad_piecewise_kl(psi: PairwiseMRF, theta: PairwiseMRF, family: SubgraphFamily):
    """Value and gradient of max_T KL(psi_T || theta_T); the gradient lives on
    the argmax subgraph's coordinates (ties broken by lowest index)."""
    if not family.members:
        raise ValueError("empty subgraph family")
    best_val, best_data = -np.inf, None
    for idx, member in enumerate(family.members):
        value, marg_p, marg_q = restricted_kl(psi, theta, member)
        if value > best_val + 1e-15:
            best_val, best_data = value, (member, marg_p, marg_q)
    member, marg_p, marg_q = best_data
    tabs = _grad_tables_from_marginals(theta, member, marg_q, marg_p)
    grad = params_vector(theta.replace_potentials(tabs))
    return best_val, grad


def _weighted_feature_gradient(theta: PairwiseMRF, X, w):
    """mean_s w_s (f(x_s) - f_bar) in theta's potential layout, where f_bar is
    the empirical feature mean over the columns of X (shape (n, S))."""
    S = X.shape[1]
    wc = w - w.mean()  # centering absorbs the -mean(w) * f_bar term
    tabs = []
    for (i, j), t in zip(theta.edges, theta.potentials):
        if i == j:
            g = np.zeros(t.shape[0])
            np.add.at(g, X[i], wc / S)
            tabs.append(np.tile(g[:, None], (1, t.shape[1])))
        else:
            g = np.zeros_like(t)
            np.add.at(g, (X[i], X[j]), wc / S)
            tabs.append(g)
    return params_vector(theta.replace_potentials(tabs))


def grad_reversed_kl_exact(psi: PairwiseMRF, theta: PairwiseMRF, cap=BRUTE_FORCE_CAP):
    """Exact gradient of KL(theta || psi) by enumeration:
    E[(f . (theta - psi)) (f - mu(theta))]."""
    if psi.cards != theta.cards:
        raise ValueError("models must share the variable space")
    if theta.n_states() > cap:
        from .errors import CapacityError

        raise CapacityError("state space too large for exact expectations")
    configs = enumerate_configs(theta.cards)
    lw_t = log_weights(theta, configs)
    lw_p = log_weights(psi, configs)
    p = np.exp(lw_t - logsumexp(lw_t))
    w = lw_t - lw_p  # f(x) . (theta - psi), up to no constant
    wbar = float(np.dot(p, w))
    tabs = []
    for (i, j), t in zip(theta.edges, theta.potentials):
        if i == j:
            g = np.zeros(t.shape[0])
            np.add.at(g, configs[:, i], p * w)
            mu = np.zeros(t.shape[0])
            np.add.at(mu, configs[:, i], p)
            g -= wbar * mu
            tabs.append(np.tile(g[:, None], (1, t.shape[1])))
        else:
            g = np.zeros_like(t)
            np.add.at(g, (configs[:, i], configs[:, j]), p * w)
            mu = np.zeros_like(t)
            np.add.at(mu, (configs[:, i], configs[:, j]), p)
            g -= wbar * mu
            tabs.append(g)
    return params_vector(theta.replace_potentials(tabs))


def grad_reversed_kl(psi: PairwiseMRF, theta: PairwiseMRF, pool: SamplePool):
    """Monte-Carlo gradient of KL(theta || psi) from the sample pool; the pool
    advances one systematic Gibbs pass under theta per call."""
    if pool.size < 1:
        raise ValueError("empty sample pool")
    pool.advance(theta)
    X = pool.states
    lw_t = _pool_log_weights(theta, X)
    lw_p = _pool_log_weights(psi, X)
    return _weighted_feature_gradient(theta, X, lw_t - lw_p)


def _pool_log_weights(m: PairwiseMRF, X):
    lw = np.zeros(X.shape[1])
    for (i, j), t in zip(m.edges, m.potentials):
        lw += t[X[i], X[j]]
    return lw


@dataclass
class PGDConfig:
    """Settings for projected gradient descent in a divergence."""

    divergence: str = "reversed_kl"  # "piecewise_kl" | "reversed_kl"
    step_size: float = 0.1
    steps: int = 60
    pool_size: int = 500
    pool_burn_in: int = 50
    family: SubgraphFamily = None
    norm: str = "inf"
    radius: float = 2.5
    alpha: float = 1.0
    mode: str = "dense"
    seed: int = 0
    solver_gtol: float = 1e-6
    solver_max_iter: int = 500

    def __post_init__(self):
        if self.divergence not in ("piecewise_kl", "reversed_kl"):
            raise ValueError(f"unknown divergence {self.divergence!r}")
        if not self.step_size > 0:
            raise ValueError("step size must be positive")
        if self.steps < 1:
            raise ValueError("need at least one step")
        if self.divergence == "reversed_kl" and self.pool_size < 1:
            raise ValueError("reversed KL needs a nonempty pool")


@dataclass
class PGDResult:
    theta: PairwiseMRF
    z: np.ndarray
    converged_projections: bool
    divergence_trace: list = field(default_factory=list)


def pgd_project(psi: PairwiseMRF, config: PGDConfig) -> PGDResult:
    """Projected gradient descent: step against the divergence gradient, then
    re-project onto the fast-mixing set, threading Z and the dual variables."""
    ball = NormBall(config.norm, config.radius)
    if config.divergence == "piecewise_kl":
        family = config.family
        if family is None:
            family = make_spanning_trees(psi, seed=config.seed)
        family.validate(psi)

    res = project_smoothed(
        ProjectionProblem(psi, ball, default_anchor(psi, ball), config.alpha, config.mode),
        gtol=config.solver_gtol,
        max_iter=config.solver_max_iter,
    )
    theta, Z, dual = res.theta, res.z, res.dual
    all_converged = res.converged

    pool = None
    if config.divergence == "reversed_kl":
        pool = SamplePool(theta, config.pool_size, seed=config.seed,
                          burn_in=config.pool_burn_in)

    trace = []
    for _ in range(config.steps):
        if config.divergence == "piecewise_kl":
            value, grad = grad_piecewise_kl(psi, theta, family)
            trace.append(value)
        else:
            grad = grad_reversed_kl(psi, theta, pool)
        stepped = with_params_vector(theta, params_vector(theta) - config.step_size * grad)
        res = project_smoothed(
            ProjectionProblem(stepped, ball, Z, config.alpha, config.mode),
            dual0=dual,
            gtol=config.solver_gtol,
            max_iter=config.solver_max_iter,
        )
        theta, Z, dual = res.theta, res.z, res.dual
        all_converged = all_converged and res.converged
    return PGDResult(theta=theta, z=Z, converged_projections=all_converged,
                     divergence_trace=trace)
