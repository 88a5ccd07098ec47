"""Closed-form and reduced solvers for the latent-ARX special cases.

* ``fit_lsr`` - latent shock regression: an observed dependent on
  several lagged versions of one latent combination; alternates two
  conditional least-squares solves (F + m slope parameters instead of
  the F*m of an unrestricted lead-lag regression).
* ``fit_lvmr`` / ``cca_decompose`` - latent-variable multiple
  regression, whose fixed point is the top canonical pair of CCA.
* ``fit_lar1`` / ``caa_decompose`` - first-order latent autoregression;
  under covariance stationarity its solutions are the eigenpairs of
  ``0.5 * cov_y^{-1} (cov_ay + cov_ya)``, a canonical decomposition of
  the directions of first-order autocorrelation.
* ``trivial_sdm`` - the degenerate no-regressor cases: minimum-variance
  weights and the extreme principal-component directions.

``fit_lar1`` runs half-step (relaxation 0.5) updates: with that exact
factor the per-iteration growth of any off-target eigendirection is
|phi_i / phi_target|, so the strongest-autocorrelation pair is the only
locally stable fixed point even when autocorrelations of mixed sign are
present (the raw iteration is unstable there).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DegenerateSampleError, NumericalError, SpecError, StructureError
from .moments import WeightVector, weighted_cov, weighted_mean

__all__ = [
    "LsrResult",
    "LvmrResult",
    "Lar1Result",
    "CcaPairs",
    "CaaDecomposition",
    "fit_lsr",
    "fit_lvmr",
    "cca_decompose",
    "fit_lar1",
    "caa_decompose",
    "trivial_sdm",
    "circular_lag_pair",
]

_SIGN_EPS = 1e-12


def _equal_weights(s: int) -> WeightVector:
    return WeightVector(np.full(s, 1.0 / s))


def _leading_entry(v: np.ndarray) -> float:
    scale = np.max(np.abs(v)) if v.size else 0.0
    if scale == 0.0:
        return 0.0
    for x in v:
        if abs(x) > _SIGN_EPS * scale:
            return float(x)
    return 0.0


def _sign_fix(v: np.ndarray) -> np.ndarray:
    return -v if _leading_entry(v) < 0 else v


def _check_spd(name: str, M: np.ndarray) -> None:
    if M.size == 0:
        raise DegenerateSampleError(f"{name} is empty")
    if not np.all(np.isfinite(M)):
        raise NumericalError(f"{name} contains non-finite entries")
    eig = np.linalg.eigvalsh(0.5 * (M + M.T))
    if eig[0] <= 1e-12 * max(eig[-1], 1e-300):
        raise DegenerateSampleError(f"{name} is singular or not positive definite")


# ---------------------------------------------------------------------------
# latent shock regression


@dataclass(frozen=True)
class LsrResult:
    omega: np.ndarray  # (m,), unit length, leading entry positive
    beta: np.ndarray  # (F,)
    c: float
    iterations: int
    converged: bool


def fit_lsr(
    y: np.ndarray,
    X: np.ndarray,
    versions: int,
    proxies: int,
    weights: WeightVector | None = None,
    max_iter: int = 500,
    tol: float = 1e-12,
) -> LsrResult:
    """Alternating least squares for the latent shock regression.

    ``X`` must hold ``versions`` column blocks of ``proxies`` columns
    each (version-major), every block being one lagged copy of the same
    proxy set.  The scale split between ``beta`` and ``omega`` is not
    identified, so ``omega`` is normalized to unit length with its
    leading entry positive and ``beta`` absorbs the scale.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    X = np.asarray(X, dtype=float)
    if X.shape[1] != versions * proxies:
        raise StructureError(
            f"X has {X.shape[1]} columns, expected versions*proxies = "
            f"{versions * proxies}"
        )
    if X.shape[0] != y.shape[0]:
        raise StructureError("y and X row counts differ")
    w = weights if weights is not None else _equal_weights(y.shape[0])
    cov_x = weighted_cov(X, X, w)
    cov_xy = weighted_cov(X, y, w).reshape(-1)

    omega = np.full(proxies, 1.0 / np.sqrt(proxies))
    beta = np.zeros(versions)
    converged = False
    iterations = 0
    eye_f = np.eye(versions)
    eye_m = np.eye(proxies)
    for iterations in range(1, max_iter + 1):
        F_o = np.kron(eye_f, omega.reshape(-1, 1))  # (F*m, F)
        beta_new = np.linalg.lstsq(F_o.T @ cov_x @ F_o, F_o.T @ cov_xy, rcond=None)[0]
        B_i = np.kron(beta_new.reshape(-1, 1), eye_m)  # (F*m, m)
        omega_new = np.linalg.lstsq(B_i.T @ cov_x @ B_i, B_i.T @ cov_xy, rcond=None)[0]
        norm = np.linalg.norm(omega_new)
        if norm > 0:
            beta_new = beta_new * norm
            omega_new = omega_new / norm
            if _leading_entry(omega_new) < 0:
                omega_new = -omega_new
                beta_new = -beta_new
        delta = max(
            float(np.max(np.abs(omega_new - omega))),
            float(np.max(np.abs(beta_new - beta))),
        )
        omega, beta = omega_new, beta_new
        if delta <= tol:
            converged = True
            break

    coef = np.kron(beta, omega)
    c = float(weighted_mean(y, w)[0] - weighted_mean(X, w) @ coef)
    return LsrResult(omega=omega, beta=beta, c=c, iterations=iterations, converged=converged)


# ---------------------------------------------------------------------------
# latent-variable multiple regression and CCA


@dataclass(frozen=True)
class LvmrResult:
    w: np.ndarray
    omega: np.ndarray
    rho_y: float
    c: float
    iterations: int
    converged: bool

    @property
    def canonical_correlation(self) -> float:
        """At the fixed point rho_y equals the squared top canonical
        correlation when the dependent variance target is one."""
        return float(np.sqrt(max(self.rho_y, 0.0)))


def fit_lvmr(
    Y: np.ndarray,
    X: np.ndarray,
    sigma_y2: float = 1.0,
    weights: WeightVector | None = None,
    max_iter: int = 20000,
    tol: float = 1e-13,
) -> LvmrResult:
    """Fixed point of the latent-variable multiple regression updates.

    Alternates the two cross-regressions with the dependent combination
    rescaled onto its variance constraint; converges to the top
    canonical pair because all squared canonical correlations are
    nonnegative, making the dominant direction the only stable one.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if Y.ndim == 2 and Y.shape[0] == 1:
        Y = Y.T
    if X.ndim == 2 and X.shape[0] == 1:
        X = X.T
    if Y.shape[0] != X.shape[0]:
        raise StructureError("Y and X row counts differ")
    if sigma_y2 <= 0:
        raise DegenerateSampleError("variance target must be positive")
    w_vec = weights if weights is not None else _equal_weights(Y.shape[0])
    cov_y = weighted_cov(Y, Y, w_vec)
    cov_x = weighted_cov(X, X, w_vec)
    cov_yx = weighted_cov(Y, X, w_vec)
    _check_spd("cov_y", cov_y)
    _check_spd("cov_x", cov_x)

    n = cov_y.shape[0]
    ones = np.ones(n)
    q = float(ones @ cov_y @ ones)
    w = ones * np.sqrt(sigma_y2 / q) if q > 0 else None
    if w is None:
        w = np.zeros(n)
        w[0] = np.sqrt(sigma_y2 / cov_y[0, 0])

    omega = np.zeros(cov_x.shape[0])
    rho_y = 1.0
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        omega_new = np.linalg.solve(cov_x, cov_yx.T @ w)
        rho_y = float(w @ cov_yx @ omega_new / sigma_y2)
        if abs(rho_y) < 1e-300:
            raise DegenerateSampleError("dependent and regressors are uncorrelated")
        w_raw = np.linalg.solve(cov_y, cov_yx @ omega_new) / rho_y
        var = float(w_raw @ cov_y @ w_raw)
        if var <= 0:
            raise DegenerateSampleError("dependent combination lost all variance")
        w_new = w_raw * np.sqrt(sigma_y2 / var)
        w_new = _sign_fix(w_new)
        delta = float(np.max(np.abs(w_new - w)))
        w = w_new
        omega = omega_new
        if delta <= tol * np.sqrt(sigma_y2):
            converged = True
            break
    omega = np.linalg.solve(cov_x, cov_yx.T @ w)
    rho_y = float(w @ cov_yx @ omega / sigma_y2)
    mean_y = weighted_mean(Y, w_vec)
    mean_x = weighted_mean(X, w_vec)
    c = float(mean_y @ w - mean_x @ omega)
    return LvmrResult(
        w=w, omega=omega, rho_y=rho_y, c=c, iterations=iterations, converged=converged
    )


@dataclass(frozen=True)
class CcaPairs:
    """Canonical pairs ordered by descending squared correlation."""

    eigenvalues: np.ndarray  # squared canonical correlations, in [0, 1]
    weights: np.ndarray  # columns normalized to w' cov_y w = 1


def cca_decompose(
    cov_y: np.ndarray, cov_x: np.ndarray, cov_yx: np.ndarray
) -> CcaPairs:
    """Eigendecomposition of cov_y^{-1} cov_yx cov_x^{-1} cov_xy.

    Solved on the symmetric whitened similarity transform, so the
    eigenvalues are real by construction and land in [0, 1] up to
    rounding.  Eigenvector columns satisfy w' cov_y w = 1 with the
    leading significant entry positive.
    """
    cov_y = np.asarray(cov_y, dtype=float)
    cov_x = np.asarray(cov_x, dtype=float)
    cov_yx = np.asarray(cov_yx, dtype=float)
    _check_spd("cov_y", cov_y)
    _check_spd("cov_x", cov_x)
    K = cov_yx @ np.linalg.solve(cov_x, cov_yx.T)
    vals, vecs = scipy.linalg.eigh(K, cov_y)
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order]
    if vals[0] > 1.0 + 1e-10 or vals[-1] < -1e-10:
        raise NumericalError(
            f"squared canonical correlations outside [0,1]: {vals}"
        )
    vals = np.clip(vals, 0.0, None)
    for j in range(vecs.shape[1]):
        vecs[:, j] = _sign_fix(vecs[:, j])
    return CcaPairs(eigenvalues=vals, weights=vecs)


# ---------------------------------------------------------------------------
# first-order latent autoregression and CAA


@dataclass(frozen=True)
class Lar1Result:
    w: np.ndarray
    phi: float
    rho_y: float
    iterations: int
    converged: bool


def fit_lar1(
    Y: np.ndarray,
    A: np.ndarray,
    sigma_y2: float = 1.0,
    weights: WeightVector | None = None,
    max_iter: int = 20000,
    tol: float = 1e-12,
    relax: float = 0.5,
) -> Lar1Result:
    """Fixed point of the first-order latent autoregression updates.

    ``A`` holds the one-period-back values of the same proxies as ``Y``.
    The default half-step relaxation makes the strongest-|phi| direction
    the unique attractor; see the module docstring.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if Y.shape != A.shape:
        raise StructureError("Y and A must have identical shapes")
    if sigma_y2 <= 0:
        raise DegenerateSampleError("variance target must be positive")
    w_vec = weights if weights is not None else _equal_weights(Y.shape[0])
    cov_y = weighted_cov(Y, Y, w_vec)
    cov_a = weighted_cov(A, A, w_vec)
    cov_ay = weighted_cov(A, Y, w_vec)
    cov_ya = cov_ay.T
    _check_spd("cov_y", cov_y)

    n = cov_y.shape[0]
    ones = np.ones(n)
    q = float(ones @ cov_y @ ones)
    w = ones * np.sqrt(sigma_y2 / max(q, 1e-300))

    phi = 0.0
    rho_y = 1.0
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        denom = float(w @ cov_a @ w)
        if denom <= 0:
            raise DegenerateSampleError("lagged combination lost all variance")
        phi = float(w @ cov_ay @ w) / denom
        core = (cov_ay + cov_ya - phi * cov_a) @ w
        rho_y = phi * float(w @ core) / sigma_y2
        if abs(rho_y) < 1e-300:
            # no autocorrelation signal at all; stay at the start point
            break
        w_raw = phi * np.linalg.solve(cov_y, core) / rho_y
        w_mix = relax * w_raw + (1.0 - relax) * w
        var = float(w_mix @ cov_y @ w_mix)
        if var <= 0:
            raise DegenerateSampleError("dependent combination lost all variance")
        w_new = _sign_fix(w_mix * np.sqrt(sigma_y2 / var))
        delta = float(np.max(np.abs(w_new - w)))
        w = w_new
        if delta <= tol * np.sqrt(sigma_y2):
            converged = True
            break
    denom = float(w @ cov_a @ w)
    phi = float(w @ cov_ay @ w) / denom
    rho_y = phi * float(w @ (cov_ay + cov_ya - phi * cov_a) @ w) / sigma_y2
    return Lar1Result(w=w, phi=phi, rho_y=rho_y, iterations=iterations, converged=converged)


@dataclass(frozen=True)
class CaaDecomposition:
    """All first-order autocorrelation directions of a stationary panel."""

    eigenvalues: np.ndarray  # autocorrelation coefficients, |phi| descending
    weights: np.ndarray  # columns normalized to w' cov_y w = 1
    matrix: np.ndarray  # 0.5 * cov_y^{-1} (cov_ay + cov_ya)
    stationarity_gap: float  # relative ||cov_y - cov_a||


def caa_decompose(
    cov_y: np.ndarray,
    cov_a: np.ndarray,
    cov_ay: np.ndarray,
    stationarity_warn: float = 1e-6,
) -> CaaDecomposition:
    """Eigendecomposition of ``0.5 * cov_y^{-1} (cov_ay + cov_ya)``.

    The symmetrized cross-covariance makes this a generalized symmetric
    eigenproblem, so the autocorrelation coefficients are real.  The
    decomposition equals the fixed points of the first-order latent
    autoregression only under covariance stationarity (cov_y == cov_a);
    a gap beyond ``stationarity_warn`` raises a warning, not an error.
    """
    cov_y = np.asarray(cov_y, dtype=float)
    cov_a = np.asarray(cov_a, dtype=float)
    cov_ay = np.asarray(cov_ay, dtype=float)
    _check_spd("cov_y", cov_y)
    gap = float(
        np.linalg.norm(cov_y - cov_a) / max(np.linalg.norm(cov_y), 1e-300)
    )
    if gap > stationarity_warn:
        warnings.warn(
            f"proxy vector looks non-stationary: relative covariance gap {gap:.3e}",
            RuntimeWarning,
            stacklevel=2,
        )
    C = 0.5 * (cov_ay + cov_ay.T)
    vals, vecs = scipy.linalg.eigh(C, cov_y)
    order = np.argsort(-np.abs(vals), kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    for j in range(vecs.shape[1]):
        vecs[:, j] = _sign_fix(vecs[:, j])
    matrix = np.linalg.solve(cov_y, C)
    return CaaDecomposition(
        eigenvalues=vals, weights=vecs, matrix=matrix, stationarity_gap=gap
    )


def circular_lag_pair(Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Wrap a sample so current and lagged matrices share their moments.

    Returns ``(Y, A)`` where row t of ``A`` is row t-1 of ``Y`` with the
    first row wrapping to the last.  Both matrices contain the same rows,
    so their equal-weight means and covariances agree exactly; useful
    for exercising the stationary-case identities.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    return Y, np.roll(Y, 1, axis=0)


# ---------------------------------------------------------------------------
# trivial supervised diffusion models


def trivial_sdm(cov_y: np.ndarray, mode: str) -> np.ndarray:
    """Weight vectors of the no-regressor variance problems.

    ``min_variance_portfolio``: minimize w' cov w subject to weights
    summing to one.  ``pca_min`` / ``pca_max``: unit-length directions
    of least / greatest variance.
    """
    cov_y = np.asarray(cov_y, dtype=float)
    _check_spd("cov_y", cov_y)
    if mode == "min_variance_portfolio":
        ones = np.ones(cov_y.shape[0])
        base = np.linalg.solve(cov_y, ones)
        return base / float(ones @ base)
    if mode in ("pca_min", "pca_max"):
        vals, vecs = np.linalg.eigh(cov_y)
        idx = 0 if mode == "pca_min" else -1
        return _sign_fix(vecs[:, idx])
    raise SpecError(f"unknown trivial SDM mode {mode!r}")
