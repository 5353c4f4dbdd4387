"""Dependency-matrix bounds and mixing-time certificates.

Entry (i, j) of the dependency matrix is the worst-case total-variation
change of the conditional of X_i when only x_j changes.  For a pairwise
model it admits a chain of computable upper bounds built from column
differences of the edge table; if any sub-multiplicative norm of the matrix
is below 1, single-site Gibbs sampling mixes in O(n log n) steps.
"""

from __future__ import annotations

import itertools
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, NumericError
from .mrf import PairwiseMRF

__all__ = [
    "VARIANTS",
    "DependencyBound",
    "MixingBudget",
    "bound_edge",
    "bound_matrix",
    "exact_dependency",
    "matrix_norm",
    "mixing_time_bound",
]

VARIANTS = ("inf_corollary", "one_corollary", "quarter_range", "sigmoid_range", "exact")

EXACT_NEIGHBOR_CAP = 10 ** 6


@dataclass(frozen=True)
class DependencyBound:
    """Symmetric nonnegative bound matrix with its defining variant."""

    matrix: np.ndarray
    variant: str
    model: PairwiseMRF = None

    def norm(self, norm="inf"):
        return matrix_norm(self.matrix, norm)


@dataclass(frozen=True)
class MixingBudget:
    """Iteration bound tau(eps) implied by a norm of the dependency matrix."""

    epsilon: float
    norm_value: float
    norm: str
    tau: float  # inf when norm_value >= 1

    @property
    def bounded(self):
        return np.isfinite(self.tau)


def _column_diff_stat(t: np.ndarray, reducer):
    """max over ordered column pairs (a, b) of reducer(t[:, a] - t[:, b])."""
    t = np.asarray(t, dtype=float)
    best = 0.0
    for a in range(t.shape[1]):
        diff = t[:, a][:, None] - t  # (rows, cols): diff[:, b] = t[:,a] - t[:,b]
        best = max(best, reducer(diff))
    return best


def _range_cols(diff):
    return float(np.max(diff.max(axis=0) - diff.min(axis=0)))


def bound_edge(theta_ij, variant="inf_corollary") -> float:
    """Upper bound on the dependency induced by a single edge table.

    Variants, each a max over ordered column pairs (a, b) of the table with
    d = theta[:, a] - theta[:, b]:

    - ``inf_corollary``:  ||d||_inf / 2
    - ``one_corollary``:  ||d||_1 / 4
    - ``quarter_range``:  (max(d) - min(d)) / 4
    - ``sigmoid_range``:  |2 sigma((max(d) - min(d)) / 2) - 1| = tanh(range/4)
    """
    t = np.asarray(theta_ij, dtype=float)
    if t.ndim != 2:
        raise ValueError("edge potential must be a matrix")
    if variant == "inf_corollary":
        return 0.5 * _column_diff_stat(t, lambda d: float(np.max(np.abs(d))))
    if variant == "one_corollary":
        return 0.25 * _column_diff_stat(t, lambda d: float(np.max(np.abs(d).sum(axis=0))))
    if variant == "quarter_range":
        return 0.25 * _column_diff_stat(t, _range_cols)
    if variant == "sigmoid_range":
        rng = _column_diff_stat(t, _range_cols)
        return float(np.tanh(rng / 4.0))
    raise ValueError(f"unknown bound variant {variant!r}")


def bound_matrix(m: PairwiseMRF, variant="inf_corollary", cap=EXACT_NEIGHBOR_CAP) -> DependencyBound:
    """Symmetric dependency bound matrix: entry (i, j) takes the worse of the
    two orientations of the edge table; zero on the diagonal and off edges."""
    R = np.zeros((m.n, m.n))
    for (i, j) in m.pairwise_edges:
        t = m.potential(i, j)
        if variant == "exact":
            v = max(exact_dependency(m, i, j, cap=cap), exact_dependency(m, j, i, cap=cap))
        else:
            v = max(bound_edge(t, variant), bound_edge(t.T, variant))
        R[i, j] = R[j, i] = v
    return DependencyBound(matrix=R, variant=variant, model=m)


def _softmax(v):
    e = np.exp(v - np.max(v))
    return e / e.sum()


def exact_dependency(m: PairwiseMRF, i, j, cap=EXACT_NEIGHBOR_CAP) -> float:
    """Exact worst-case TV change of the conditional of X_i as x_j varies,
    maximized over all joint settings of the remaining neighbors of i."""
    if i == j:
        return 0.0
    if not m.has_edge(i, j):
        return 0.0
    t_ij = m.potential(i, j)  # (L_i, L_j)
    others = [(k, t) for k, t in m.neighbors(i) if k != j]
    combos = 1
    for k, _ in others:
        combos *= m.cards[k]
    if combos > cap:
        raise CapacityError(f"{combos} neighbor settings exceed cap {cap}")

    base = m.unary(i)
    best = 0.0
    for assign in itertools.product(*[range(m.cards[k]) for k, _ in others]):
        s = base.copy()
        for (k, t), xk in zip(others, assign):
            s += t[:, xk]
        probs = np.stack([_softmax(t_ij[:, b] + s) for b in range(t_ij.shape[1])], axis=1)
        for a in range(probs.shape[1]):
            tv = 0.5 * np.abs(probs[:, a][:, None] - probs).sum(axis=0).max()
            best = max(best, float(tv))
    return best


def matrix_norm(M, norm="inf", tol=1e-10, max_iter=10 ** 4, svd_below=64) -> float:
    """Matrix norm: ``inf`` is the max row l1 sum, ``spectral`` the largest
    singular value (dense SVD for small matrices, else power iteration on
    M^T M seeded deterministically from the entries)."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("expected a square matrix")
    if norm == "inf":
        return float(np.abs(M).sum(axis=1).max()) if M.size else 0.0
    if norm != "spectral":
        raise ValueError(f"unknown norm {norm!r}")
    n = M.shape[0]
    if n < svd_below:
        return float(np.linalg.svd(M, compute_uv=False)[0]) if n else 0.0
    fro = np.linalg.norm(M)
    if fro == 0.0:
        return 0.0
    seed = zlib.crc32(M.tobytes())
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    sigma = 0.0
    for it in range(max_iter):
        w = M.T @ (M @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v_new = w / nw
        sigma_new = np.sqrt(nw)
        if abs(sigma_new - sigma) <= tol * max(sigma_new, 1.0):
            return float(sigma_new)
        sigma, v = sigma_new, v_new
    raise NumericError(
        f"power iteration did not converge in {max_iter} steps"
        f" (last sigma={sigma:.6g})"
    )


def mixing_time_bound(M, norm="inf", epsilon=0.01) -> MixingBudget:
    """Iteration bound n/(1-||R||) * ln(n/eps) for single-site random updates;
    unbounded when the norm reaches 1."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    M = np.asarray(M, dtype=float)
    value = matrix_norm(M, norm)
    n = M.shape[0]
    if value >= 1.0:
        tau = np.inf
    else:
        tau = n / (1.0 - value) * np.log(n / epsilon)
    return MixingBudget(epsilon=float(epsilon), norm_value=float(value), norm=norm, tau=float(tau))
