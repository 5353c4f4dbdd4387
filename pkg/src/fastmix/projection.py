"""Euclidean projection onto the fast-mixing parameter set.

The projection of parameters psi is the nearest theta whose dependency
bound matrix fits in a norm ball.  The smoothed operator

    argmin_{theta, Z}  ||theta - psi||^2 + alpha ||Z - Y||_F^2
    s.t.  Z_pq >= (theta_pq[c,a] - theta_pq[c,b]) / 2  for all a, b, c
          and both orientations (p,q) of every pairwise edge,
          Z symmetric on edges, zero off edges, ||Z|| <= c_ball

is solved through its Lagrangian dual, which is smooth thanks to the
quadratic anchor term: both inner minimizations have closed forms (the
theta-minimizer is linear in the multipliers, the Z-minimizer is a norm-ball
projection) and the dual gradient is available at the inner minimizers.
The exact (non-smoothed) projection follows by re-anchoring: iterating
Y <- Z is the proximal-point recursion for the unsmoothed problem.

Multiplier layout per ordered orientation (p, q) with table M of shape
(L_p, L_q): nonneg arrays indexed (a, b, c), a and b over columns of M
(states of the conditioning variable q), c over rows (states of p).
``pos[(p,q)][a,b,c]`` multiplies the slack Z_pq - (M[c,a]-M[c,b])/2 and
``neg`` the mirrored sign.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .dependency import bound_edge, matrix_norm
from .mrf import PairwiseMRF, params_distance
from .normball import NormBall, project_ball

__all__ = [
    "ProjectionProblem",
    "DualState",
    "ProjectionResult",
    "default_anchor",
    "solve_h2",
    "solve_h1",
    "lambda_matrix",
    "dual_value_and_gradient",
    "primal_value",
    "constraint_violation",
    "project_smoothed",
    "project_exact",
]


def support_mask(m: PairwiseMRF) -> np.ndarray:
    """Boolean (n, n) mask of both orientations of the pairwise edges."""
    S = np.zeros((m.n, m.n), dtype=bool)
    for (i, j) in m.pairwise_edges:
        S[i, j] = S[j, i] = True
    return S


@dataclass(frozen=True)
class ProjectionProblem:
    """One smoothed projection instance.

    ``anchor`` is the (n, n) matrix Y the dependency surrogate Z is pulled
    toward; ``alpha`` the smoothing weight.  ``sparse`` mode drops the
    off-support multipliers and keeps Z on the edge support (inf ball only,
    where the ball projection preserves sparsity).
    """

    psi: PairwiseMRF
    ball: NormBall
    anchor: np.ndarray
    alpha: float = 1.0
    mode: str = "dense"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.mode not in ("dense", "sparse"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "sparse" and self.ball.norm != "inf":
            raise ValueError("sparse mode requires the inf-norm ball")
        n = self.psi.n
        Y = np.asarray(self.anchor, dtype=float)
        if Y.shape != (n, n):
            raise ValueError(f"anchor must be {n}x{n}")
        if self.mode == "sparse":
            Y = np.where(support_mask(self.psi), Y, 0.0)
        Y = Y.copy()
        Y.setflags(write=False)
        object.__setattr__(self, "anchor", Y)

    @property
    def orientations(self):
        out = []
        for (i, j) in self.psi.pairwise_edges:
            out.append((i, j))
            out.append((j, i))
        return out


def default_anchor(psi: PairwiseMRF, ball: NormBall) -> np.ndarray:
    """Dependency bound of psi clipped into the ball."""
    from .dependency import bound_matrix

    return project_ball(bound_matrix(psi).matrix, ball)


@dataclass
class DualState:
    """Dual variables: ``pos``/``neg`` per orientation, one antisymmetric
    pairing multiplier per stored edge, off-support multipliers in dense mode."""

    pos: dict
    neg: dict
    sym: dict
    off: np.ndarray = None

    @classmethod
    def zeros(cls, problem: ProjectionProblem) -> "DualState":
        m = problem.psi
        pos = {}
        for (p, q) in problem.orientations:
            pos[(p, q)] = np.zeros((m.cards[q], m.cards[q], m.cards[p]))
        neg = {k: v.copy() for k, v in pos.items()}
        sym = {e: 0.0 for e in m.pairwise_edges}
        off = None
        if problem.mode == "dense":
            off = np.zeros((m.n, m.n))
        return cls(pos=pos, neg=neg, sym=sym, off=off)

    def copy(self) -> "DualState":
        return DualState(
            pos={k: v.copy() for k, v in self.pos.items()},
            neg={k: v.copy() for k, v in self.neg.items()},
            sym=dict(self.sym),
            off=None if self.off is None else self.off.copy(),
        )


class _Layout:
    """Flat packing of a DualState for the box-constrained solver."""

    def __init__(self, problem: ProjectionProblem):
        self.problem = problem
        m = problem.psi
        self.orients = problem.orientations
        self.shapes = [
            (m.cards[q], m.cards[q], m.cards[p]) for (p, q) in self.orients
        ]
        self.edges = list(m.pairwise_edges)
        sizes = [2 * int(np.prod(s)) for s in self.shapes]  # pos + neg per orientation
        self.n_cone = sum(sizes)
        self.n_sym = len(self.edges)
        if problem.mode == "dense":
            self.offmask = ~support_mask(m)
            self.n_off = int(self.offmask.sum())
        else:
            self.offmask = None
            self.n_off = 0
        self.size = self.n_cone + self.n_sym + self.n_off

    def bounds(self):
        return [(0.0, None)] * self.n_cone + [(None, None)] * (self.n_sym + self.n_off)

    def pack(self, dual: DualState) -> np.ndarray:
        parts = []
        for (p, q) in self.orients:
            parts.append(dual.pos[(p, q)].ravel())
            parts.append(dual.neg[(p, q)].ravel())
        parts.append(np.array([dual.sym[e] for e in self.edges]))
        if self.n_off:
            parts.append(dual.off[self.offmask])
        return np.concatenate(parts) if parts else np.zeros(0)

    def unpack(self, x: np.ndarray) -> DualState:
        pos, neg = {}, {}
        k = 0
        for (p, q), shape in zip(self.orients, self.shapes):
            sz = int(np.prod(shape))
            pos[(p, q)] = x[k:k + sz].reshape(shape)
            k += sz
            neg[(p, q)] = x[k:k + sz].reshape(shape)
            k += sz
        sym = {e: float(x[k + t]) for t, e in enumerate(self.edges)}
        k += self.n_sym
        off = None
        if self.offmask is not None:
            n = self.problem.psi.n
            off = np.zeros((n, n))
            off[self.offmask] = x[k:k + self.n_off]
        return DualState(pos=pos, neg=neg, sym=sym, off=off)


def _h2_adjust(pos, neg):
    """Adjustment G with G[c,a] = (sum_b s[a,b,c] - sum_b s[b,a,c]) / 2."""
    s = pos - neg
    return 0.5 * (s.sum(axis=1) - s.sum(axis=0)).T


def solve_h2(psi: PairwiseMRF, dual: DualState):
    """Closed-form minimizer of the theta subproblem (linear in the
    multipliers, cost linear in the size of psi); self-edges stay put."""
    pots = []
    for (i, j), t in zip(psi.edges, psi.potentials):
        if i == j:
            pots.append(t)
            continue
        G1 = _h2_adjust(dual.pos[(i, j)], dual.neg[(i, j)])
        G2 = _h2_adjust(dual.pos[(j, i)], dual.neg[(j, i)])
        pots.append(t - 0.5 * (G1 + G2.T))
    return psi.replace_potentials(pots)


def lambda_matrix(problem: ProjectionProblem, dual: DualState) -> np.ndarray:
    n = problem.psi.n
    L = np.zeros((n, n))
    for (p, q) in problem.orientations:
        L[p, q] += dual.pos[(p, q)].sum() + dual.neg[(p, q)].sum()
    for (i, j), g in dual.sym.items():
        L[i, j] += g
        L[j, i] -= g
    if problem.mode == "dense" and dual.off is not None:
        off_mask = ~support_mask(problem.psi)
        L[off_mask] += dual.off[off_mask]
    return L


def solve_h1(problem: ProjectionProblem, Lam: np.ndarray) -> np.ndarray:
    """Minimizer of the Z subproblem: ball projection of Y + Lambda/(2 alpha)."""
    target = problem.anchor + Lam / (2.0 * problem.alpha)
    if problem.mode == "sparse":
        target = np.where(support_mask(problem.psi), target, 0.0)
    return project_ball(target, problem.ball)


def _column_pair_halfdiffs(table: np.ndarray) -> np.ndarray:
    """D[a,b,c] = (table[c,a] - table[c,b]) / 2."""
    TA = table.T  # (cols, rows) -> TA[a, c]
    return 0.5 * (TA[:, None, :] - TA[None, :, :])


def dual_value_and_gradient(problem: ProjectionProblem, dual: DualState):
    """Dual value g = min h1 + min h2 and its exact gradient at the inner
    minimizers (theta_hat, Z_hat)."""
    psi = problem.psi
    theta = solve_h2(psi, dual)
    Lam = lambda_matrix(problem, dual)
    Z = solve_h1(problem, Lam)

    g = -float(np.sum(Z * Lam)) + problem.alpha * float(np.sum((Z - problem.anchor) ** 2))
    grad_pos, grad_neg = {}, {}
    for (p, q) in problem.orientations:
        M = theta.potential(p, q)
        D = _column_pair_halfdiffs(M)
        g += float(np.sum((dual.pos[(p, q)] - dual.neg[(p, q)]) * D))
        grad_pos[(p, q)] = D - Z[p, q]
        grad_neg[(p, q)] = -D - Z[p, q]
    for t_new, t_old in zip(theta.potentials, psi.potentials):
        g += float(np.sum((t_new - t_old) ** 2))
    grad_sym = {(i, j): float(Z[j, i] - Z[i, j]) for (i, j) in dual.sym}
    grad_off = None
    if problem.mode == "dense":
        grad_off = np.where(support_mask(psi), 0.0, -Z)
    grad = DualState(pos=grad_pos, neg=grad_neg, sym=grad_sym, off=grad_off)
    return g, grad, theta, Z


def primal_value(problem: ProjectionProblem, theta: PairwiseMRF, Z: np.ndarray) -> float:
    dist = sum(
        float(np.sum((t - s) ** 2))
        for t, s in zip(theta.potentials, problem.psi.potentials)
    )
    return dist + problem.alpha * float(np.sum((Z - problem.anchor) ** 2))


def constraint_violation(problem: ProjectionProblem, theta: PairwiseMRF, Z: np.ndarray) -> float:
    """Worst violation of Z_pq >= bound(theta_pq) over constrained pairs."""
    worst = 0.0
    for (p, q) in problem.orientations:
        worst = max(worst, bound_edge(theta.potential(p, q), "inf_corollary") - Z[p, q])
    return float(worst)


@dataclass
class ProjectionResult:
    theta: PairwiseMRF
    z: np.ndarray
    dual: DualState
    dual_value: float
    primal_value: float
    gap: float
    iterations: int
    converged: bool
    ball_norm: float = None
    outer_iterations: int = 1
    g_trace: list = field(default_factory=list)


def _feasible_reference(problem: ProjectionProblem):
    """A cheap primal-feasible point (zeroed pairwise tables) for weak-duality checks."""
    pots = [
        t if i == j else np.zeros_like(t)
        for (i, j), t in zip(problem.psi.edges, problem.psi.potentials)
    ]
    theta0 = problem.psi.replace_potentials(pots)
    Z0 = project_ball(np.maximum(problem.anchor, 0.0), problem.ball)
    if problem.mode == "sparse":
        Z0 = np.where(support_mask(problem.psi), Z0, 0.0)
    return primal_value(problem, theta0, Z0)


def project_smoothed(
    problem: ProjectionProblem,
    dual0: DualState = None,
    gtol: float = 1e-6,
    max_iter: int = 500,
    trace: bool = False,
    debug: bool = False,
) -> ProjectionResult:
    """Maximize the dual with box-constrained quasi-Newton steps and recover
    the projected parameters and the dependency surrogate Z."""
    layout = _Layout(problem)
    x0 = layout.pack(dual0 if dual0 is not None else DualState.zeros(problem)).copy()
    x0[:layout.n_cone] = np.maximum(x0[:layout.n_cone], 0.0)

    def fun(x):
        g, grad, _, _ = dual_value_and_gradient(problem, layout.unpack(x))
        return -g, -layout.pack(grad)

    g_trace = []
    ref = _feasible_reference(problem) if debug else None

    def callback(xk):
        if trace or debug:
            gk, _, _, _ = dual_value_and_gradient(problem, layout.unpack(xk))
            if trace:
                g_trace.append(gk)
            if debug and gk > ref + 1e-9:
                raise AssertionError(f"dual value {gk} exceeds feasible primal {ref}")

    res = minimize(
        fun,
        x0,
        jac=True,
        method="L-BFGS-B",
        bounds=layout.bounds(),
        callback=callback if (trace or debug) else None,
        options={"maxiter": max_iter, "gtol": gtol, "ftol": 1e-16, "maxcor": 30,
                 "maxfun": 10 * max_iter * max(layout.size, 1)},
    )
    dual = layout.unpack(res.x)
    g, _, theta, Z = dual_value_and_gradient(problem, dual)
    pv = primal_value(problem, theta, Z)
    return ProjectionResult(
        theta=theta,
        z=Z,
        dual=dual,
        dual_value=g,
        primal_value=pv,
        gap=pv - g,
        iterations=int(res.nit),
        converged=bool(res.status == 0),
        ball_norm=matrix_norm(Z, problem.ball.norm),
        g_trace=g_trace,
    )


def project_exact(
    psi: PairwiseMRF,
    ball: NormBall,
    alpha: float = 1.0,
    tol: float = 1e-6,
    max_outer: int = 100,
    mode: str = "dense",
    anchor0: np.ndarray = None,
    gtol: float = 1e-9,
    max_iter: int = 2000,
) -> ProjectionResult:
    """Exact Euclidean projection by re-anchoring the smoothed operator
    (proximal-point recursion on Y) until theta stops moving."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    Y = anchor0 if anchor0 is not None else default_anchor(psi, ball)
    prev = psi  # theta stalling at psi certifies psi itself is feasible
    dual = None
    result = None
    for k in range(1, max_outer + 1):
        problem = ProjectionProblem(psi=psi, ball=ball, anchor=Y, alpha=alpha, mode=mode)
        result = project_smoothed(problem, dual0=dual, gtol=gtol, max_iter=max_iter)
        result.outer_iterations = k
        if params_distance(prev, result.theta) <= tol:
            result.converged = True
            return result
        prev = result.theta
        Y = result.z
        dual = result.dual
    result.converged = False
    return result
