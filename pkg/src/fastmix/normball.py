"""Euclidean projections onto l1 vector balls and matrix norm balls.

The induced-inf-norm ball projection is the row-wise l1 projection (it
preserves sparsity); the spectral-norm ball projection clips singular
values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError

__all__ = ["NormBall", "project_l1", "project_inf_ball", "project_spectral_ball", "project_ball"]


@dataclass(frozen=True)
class NormBall:
    """A matrix norm ball {A : ||A|| <= radius}, norm in {"inf", "spectral"}."""

    norm: str
    radius: float

    def __post_init__(self):
        if self.norm not in ("inf", "spectral"):
            raise ValueError(f"unknown norm {self.norm!r}")
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    def project(self, A):
        return project_ball(A, self)


def project_l1(a, c) -> np.ndarray:
    """Nearest point to ``a`` in the l1 ball of radius c (sort-based threshold).

    Equals ``a`` when already feasible; otherwise soft-thresholds at the
    unique level for which the result has l1 norm exactly c.
    """
    if not c > 0:
        raise ValueError("radius must be positive")
    a = np.asarray(a, dtype=float)
    mag = np.abs(a)
    if mag.sum() <= c:
        return a.copy()
    u = np.sort(mag)[::-1]
    cum = np.cumsum(u) - c
    k = np.arange(1, len(u) + 1)
    rho = np.max(np.nonzero(u * k > cum)[0]) + 1
    tau = cum[rho - 1] / rho
    return np.sign(a) * np.maximum(mag - tau, 0.0)


def project_inf_ball(A, c) -> np.ndarray:
    """Row-wise l1 projection (vectorized over rows); zero rows and zero
    entries are preserved."""
    if not c > 0:
        raise ValueError("radius must be positive")
    A = np.asarray(A, dtype=float)
    mag = np.abs(A)
    over = mag.sum(axis=1) > c
    out = A.copy()
    if not over.any():
        return out
    M = mag[over]
    u = np.sort(M, axis=1)[:, ::-1]
    cum = np.cumsum(u, axis=1) - c
    k = np.arange(1, M.shape[1] + 1)
    valid = u * k > cum
    rho = M.shape[1] - 1 - np.argmax(valid[:, ::-1], axis=1)  # last valid index
    tau = cum[np.arange(len(M)), rho] / (rho + 1)
    out[over] = np.sign(A[over]) * np.maximum(M - tau[:, None], 0.0)
    return out


def project_spectral_ball(A, c) -> np.ndarray:
    """Clip the singular values of A at c."""
    if not c > 0:
        raise ValueError("radius must be positive")
    A = np.asarray(A, dtype=float)
    try:
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD failed: {exc}") from exc
    return (U * np.minimum(s, c)) @ Vt


def project_ball(A, ball: NormBall) -> np.ndarray:
    if ball.norm == "inf":
        return project_inf_ball(A, ball.radius)
    return project_spectral_ball(A, ball.radius)
