"""Weighted sample moments.

Means and (cross-)covariances under exponentially decaying sample
weights, plus the block-diagonal covariance used by per-group variance
constraints.  Weights are normalized to sum to one, so ``weighted_cov``
is the population-style (biased) estimator; constraint targets and
moments must share this convention, and equal weights reproduce the
plain 1/s covariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .blockops import BlockStructure
from .errors import DegenerateSampleError, StructureError

__all__ = [
    "WeightVector",
    "exp_decay_weights",
    "weighted_mean",
    "weighted_cov",
    "MomentSet",
    "build_moment_set",
]


@dataclass(frozen=True)
class WeightVector:
    """Normalized nonnegative sample weights, oldest row first."""

    values: np.ndarray
    half_life: float | None = None  # periods; None means equal weights

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.size == 0:
            raise DegenerateSampleError("weight vector for an empty sample")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise DegenerateSampleError("weights must be finite and nonnegative")
        total = v.sum()
        if total <= 0:
            raise DegenerateSampleError("weights must have positive total")
        object.__setattr__(self, "values", v / total)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def effective_size(self) -> float:
        """Weight-effective sample size, 1 / sum(w^2)."""
        return float(1.0 / np.sum(self.values**2))


def exp_decay_weights(s: int, half_life: float | None) -> WeightVector:
    """Exponentially decaying weights over ``s`` rows, oldest first.

    Row t (t = 0 oldest) gets raw weight ``2 ** (-(s - 1 - t) / half_life)``
    before normalization, so the newest row always carries the largest
    weight and the weight halves every ``half_life`` periods going back.
    ``half_life=None`` or infinity yields equal weights.
    """
    if s < 1:
        raise DegenerateSampleError("cannot build weights for an empty sample")
    if half_life is None or math.isinf(half_life):
        return WeightVector(np.full(s, 1.0 / s), half_life=None)
    if half_life <= 0:
        raise DegenerateSampleError(f"half_life must be positive, got {half_life}")
    ages = np.arange(s - 1, -1, -1, dtype=float)  # newest row has age 0
    raw = np.power(2.0, -ages / float(half_life))
    return WeightVector(raw, half_life=float(half_life))


def _check_rows(M: np.ndarray, w: WeightVector, name: str) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M.reshape(-1, 1)
    if M.shape[0] != len(w):
        raise StructureError(
            f"{name} has {M.shape[0]} rows but there are {len(w)} weights"
        )
    return M


def weighted_mean(M: np.ndarray, w: WeightVector) -> np.ndarray:
    """Column-wise weighted average; returns a (k,) vector."""
    M = _check_rows(M, w, "sample matrix")
    return w.values @ M


def weighted_cov(A: np.ndarray, B: np.ndarray, w: WeightVector) -> np.ndarray:
    """Weighted cross-covariance (A - mean)' diag(w) (B - mean).

    Population-style: with equal weights this is the 1/s covariance.
    ``weighted_cov(A, A, w)`` is symmetric PSD by construction, and
    swapping the arguments returns the exact bitwise transpose: the
    weights enter as sqrt(w) on both sides (so products commute) and the
    narrower matrix is always the left factor of the underlying product.
    """
    A = _check_rows(A, w, "first sample matrix")
    B = _check_rows(B, w, "second sample matrix")
    if len(w) < 2:
        raise DegenerateSampleError("covariance needs at least two rows")
    root = np.sqrt(w.values)[:, None]
    Ac = (A - weighted_mean(A, w)) * root
    Bc = (B - weighted_mean(B, w)) * root
    if B.shape[1] < A.shape[1]:
        return (Bc.T @ Ac).T
    return Ac.T @ Bc


@dataclass(frozen=True)
class MomentSet:
    """All weighted means and covariance blocks for one fit window.

    ``x_structure`` carries one block per (variable group, version), in
    group-major / declared-version order; ``cov_x_blockdiag`` keeps
    exactly those diagonal blocks of ``cov_x`` and zeroes every
    cross-version and cross-group block.
    """

    mean_y: np.ndarray
    mean_a: np.ndarray
    mean_x: np.ndarray
    cov_y: np.ndarray
    cov_a: np.ndarray
    cov_x: np.ndarray
    cov_ya: np.ndarray
    cov_yx: np.ndarray
    cov_ax: np.ndarray
    cov_x_blockdiag: np.ndarray
    x_structure: BlockStructure | None
    weights: WeightVector = field(repr=False)

    @property
    def cov_ay(self) -> np.ndarray:
        return self.cov_ya.T

    @property
    def cov_xy(self) -> np.ndarray:
        return self.cov_yx.T

    @property
    def cov_xa(self) -> np.ndarray:
        return self.cov_ax.T

    @property
    def n(self) -> int:
        return self.cov_y.shape[0]

    def x_version_block(self, index: int) -> np.ndarray:
        """Covariance of one (group, version) column block of X."""
        if self.x_structure is None:
            raise StructureError("moment set has no exogenous block structure")
        sl = self.x_structure.slices()[index]
        return self.cov_x[sl, sl]


def _reject_degenerate_columns(M: np.ndarray, w: WeightVector, name: str) -> None:
    if M.shape[1] == 0:
        return
    var = np.diag(weighted_cov(M, M, w))
    scale = np.maximum(1.0, np.max(np.abs(M), axis=0) ** 2)
    bad = np.nonzero(var <= 1e-20 * scale)[0]
    if bad.size:
        raise DegenerateSampleError(
            f"zero-variance column(s) {bad.tolist()} in {name}; "
            "covariance would be singular"
        )


def build_moment_set(
    Y: np.ndarray,
    A: np.ndarray | None,
    X: np.ndarray | None,
    w: WeightVector,
    x_structure: BlockStructure | None = None,
) -> MomentSet:
    """Compute every mean and covariance block a fit needs, once.

    ``A`` (autoregressive versions) and ``X`` (exogenous versions) may be
    absent; zero-width matrices keep all downstream algebra uniform.
    ``x_structure`` must list one block per (group, version) and match
    X's column count.
    """
    Y = _check_rows(Y, w, "Y")
    A = _check_rows(A, w, "A") if A is not None else np.zeros((len(w), 0))
    X = _check_rows(X, w, "X") if X is not None else np.zeros((len(w), 0))
    if X.shape[1] > 0:
        if x_structure is None:
            raise StructureError("X columns present but no block structure given")
        if x_structure.total != X.shape[1]:
            raise StructureError(
                f"X has {X.shape[1]} columns but structure totals {x_structure.total}"
            )
    _reject_degenerate_columns(Y, w, "Y")
    _reject_degenerate_columns(A, w, "A")
    _reject_degenerate_columns(X, w, "X")

    cov_x = weighted_cov(X, X, w)
    blockdiag = np.zeros_like(cov_x)
    if x_structure is not None and X.shape[1] > 0:
        for sl in x_structure.slices():
            blockdiag[sl, sl] = cov_x[sl, sl]

    return MomentSet(
        mean_y=weighted_mean(Y, w),
        mean_a=weighted_mean(A, w) if A.shape[1] else np.zeros(0),
        mean_x=weighted_mean(X, w) if X.shape[1] else np.zeros(0),
        cov_y=weighted_cov(Y, Y, w),
        cov_a=weighted_cov(A, A, w),
        cov_x=cov_x,
        cov_ya=weighted_cov(Y, A, w),
        cov_yx=weighted_cov(Y, X, w),
        cov_ax=weighted_cov(A, X, w),
        cov_x_blockdiag=blockdiag,
        x_structure=x_structure if X.shape[1] else None,
        weights=w,
    )
