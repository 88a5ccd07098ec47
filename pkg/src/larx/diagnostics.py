"""Conditional diagnostics for fitted latent-ARX models.

Each coefficient vector of a fit solves an ordinary regression problem
whose inputs are built from the other three vectors.  ``ols_view``
materializes that regression, refits it by weighted least squares and
reports how far the fit's own coefficients are from the OLS solution.

For the version (``beta``), autoregressive (``phi``) and exogenous
weight (``omega``) vectors the agreement is exact at any unconstrained
fixed point.  For the dependent weights (``w``) it additionally
requires the scaling-constraint multiplier to vanish, which happens
exactly when the fit has zero residual variance; on noisy data the gap
is reported, never asserted.

``conditional_stderr`` attaches classical weighted-OLS standard errors
to a view.  Both the coefficients and the errors are conditional on the
other vectors being held fixed, so they understate full model
uncertainty; they are meant for heuristic feature screening only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blockops import kr_identity_vec, kr_vec_identity
from .clarx import (
    FitResult,
    Multipliers,
    lagrangian_partials,
    objective_value,
)
from .design import Dataset, ModelSpec
from .errors import NumericalError, SpecError
from .moments import MomentSet, WeightVector

__all__ = [
    "OlsView",
    "ols_view",
    "conditional_stderr",
    "lagrangian_gradient",
    "lagrangian_value",
    "finite_difference_gradient",
]


@dataclass(frozen=True)
class OlsView:
    which: str
    dependent: np.ndarray  # (s,)
    regressors: np.ndarray  # (s, p)
    weights: WeightVector
    ols_intercept: float
    ols_coefficients: np.ndarray
    fit_coefficients: np.ndarray

    @property
    def agreement_gap(self) -> float:
        return float(np.max(np.abs(self.ols_coefficients - self.fit_coefficients)))


def _weighted_ols(
    a: np.ndarray, B: np.ndarray, w: WeightVector
) -> tuple[float, np.ndarray, np.ndarray]:
    """Weighted least squares with intercept.

    Returns (intercept, slopes, residuals); raises if the normal matrix
    is numerically singular.
    """
    design = np.column_stack([np.ones(B.shape[0]), B])
    WD = design * w.values[:, None]
    normal = WD.T @ design
    cond = np.linalg.cond(normal)
    if not np.isfinite(cond) or cond > 1e12:
        raise NumericalError(
            f"conditional regression is singular (condition number {cond:.3e})"
        )
    coef = np.linalg.solve(normal, WD.T @ a)
    resid = a - design @ coef
    return float(coef[0]), coef[1:], resid


def ols_view(fit: FitResult, dataset: Dataset, which: str) -> OlsView:
    """Build and solve the conditional regression for one coefficient."""
    spec = fit.spec
    Y, A, X = dataset.Y, dataset.A, dataset.X
    w_hat = fit.w
    state = fit.state
    n = spec.n

    if which == "w":
        if not spec.dependent.latent:
            raise SpecError("the dependent weight vector is not estimated")
        a = X @ state.beta_kr_omega if spec.k_groups else np.zeros(dataset.nrows)
        P = (
            np.kron(fit.phi.reshape(-1, 1), np.eye(n))
            if spec.n_ar_versions
            else np.zeros((0, n))
        )
        B = Y - A @ P
        fit_coef = fit.w
    elif which == "phi":
        if spec.n_ar_versions == 0:
            raise SpecError("the model has no autoregressive versions")
        a = Y @ w_hat
        if spec.k_groups:
            a = a - X @ state.beta_kr_omega
        B = A @ np.kron(np.eye(spec.n_ar_versions), w_hat.reshape(-1, 1))
        fit_coef = fit.phi
    elif which in ("omega", "beta"):
        if spec.k_groups == 0:
            raise SpecError("the model has no exogenous groups")
        a = Y @ w_hat
        if spec.n_ar_versions:
            a = a - A @ state.phi_kron_w
        assert fit.beta is not None and fit.omega is not None
        if which == "omega":
            B = X @ kr_vec_identity(fit.beta, fit.omega.structure)
            fit_coef = fit.omega.data
        else:
            B = X @ kr_identity_vec(fit.beta.structure, fit.omega)
            fit_coef = fit.beta.data
    else:
        raise SpecError(f"unknown coefficient name {which!r}")

    c0, slopes, _ = _weighted_ols(a, B, dataset.weights)
    return OlsView(
        which=which,
        dependent=a,
        regressors=B,
        weights=dataset.weights,
        ols_intercept=c0,
        ols_coefficients=slopes,
        fit_coefficients=np.asarray(fit_coef, dtype=float).copy(),
    )


def conditional_stderr(view: OlsView) -> np.ndarray:
    """Classical standard errors of the view's slope coefficients.

    Uses the effective-sample formulation of weighted OLS: the weight
    matrix is scaled to the weight-effective sample size (1 / sum w^2),
    which also supplies the degrees-of-freedom correction.  Errors are
    conditional on the other coefficient vectors.
    """
    B = view.regressors
    w = view.weights
    s_eff = w.effective_size
    design = np.column_stack([np.ones(B.shape[0]), B])
    p = design.shape[1]
    if s_eff <= p:
        raise NumericalError(
            f"effective sample {s_eff:.2f} too small for {p} parameters"
        )
    c0, slopes, resid = _weighted_ols(view.dependent, B, w)
    msr = float(np.sum(w.values * resid**2))
    sigma2 = msr * s_eff / (s_eff - p)
    normal = s_eff * (design * w.values[:, None]).T @ design
    cov = sigma2 * np.linalg.inv(normal)
    return np.sqrt(np.diag(cov)[1:])


# ---------------------------------------------------------------------------
# first-order-condition verification


def lagrangian_value(
    m: MomentSet, state, mult: Multipliers, spec: ModelSpec
) -> float:
    """Constrained objective at a state with multipliers held fixed."""
    val = objective_value(m, state)
    if spec.dependent.latent:
        assert spec.dependent.variance_target is not None
        lam_y = mult.rho_y - 1.0
        val += lam_y * (
            float(state.w @ m.cov_y @ state.w) - spec.dependent.variance_target
        )
        if spec.dependent.sum_target is not None:
            val += 2.0 * mult.rho_l * (
                float(np.sum(state.w)) - spec.dependent.sum_target
            )
    if state.omega is not None:
        from .clarx import _x_block_index  # local import to avoid cycle noise

        for idx, g in enumerate(spec.exogenous):
            ob = state.omega.blocks()[idx]
            if g.latent and g.variance_target is not None and len(mult.lambda_x):
                cov = m.x_version_block(_x_block_index(spec, idx, g.constrained_version))
                val += mult.lambda_x[idx] * (float(ob @ cov @ ob) - g.variance_target)
            if g.latent and g.sum_target is not None and len(mult.lambda_p):
                val += mult.lambda_p[idx] * (float(np.sum(ob)) - g.sum_target)
    return float(val)


def lagrangian_gradient(
    fit_or_state, m: MomentSet, spec: ModelSpec, mult: Multipliers | None = None
) -> dict[str, float]:
    """Norms of the analytic stationarity conditions at a state.

    Accepts either a FitResult (multipliers taken from it) or a raw
    FitState with explicit multipliers.  At a converged constrained fit
    every norm is at the solver tolerance.
    """
    if isinstance(fit_or_state, FitResult):
        state = fit_or_state.state
        mult = fit_or_state.multipliers
    else:
        state = fit_or_state
        if mult is None:
            raise SpecError("multipliers are required with a raw state")
    grads = lagrangian_partials(m, state, mult, spec)
    return {k: float(np.linalg.norm(v)) for k, v in grads.items()}


def finite_difference_gradient(
    m: MomentSet,
    state,
    mult: Multipliers,
    spec: ModelSpec,
    rel_step: float = 1e-6,
) -> dict[str, np.ndarray]:
    """Central-difference gradient of the fixed-multiplier objective.

    Steps are scaled per coordinate block; serves as the independent
    check of the analytic derivatives.
    """
    from dataclasses import replace as _replace

    out: dict[str, np.ndarray] = {}

    def central(build, base: np.ndarray) -> np.ndarray:
        scale = max(float(np.max(np.abs(base))), 1.0)
        h = rel_step * scale
        g = np.zeros(base.size)
        for i in range(base.size):
            up = base.copy()
            dn = base.copy()
            up[i] += h
            dn[i] -= h
            g[i] = (
                lagrangian_value(m, build(up), mult, spec)
                - lagrangian_value(m, build(dn), mult, spec)
            ) / (2.0 * h)
        return g

    if spec.dependent.latent:
        out["w"] = central(lambda v: _replace(state, w=v), state.w)
    if spec.n_ar_versions:
        out["phi"] = central(lambda v: _replace(state, phi=v), state.phi)
    if spec.k_groups:
        assert state.beta is not None and state.omega is not None
        out["beta"] = central(
            lambda v: _replace(state, beta=state.beta.with_data(v)), state.beta.data
        )
        out["omega"] = central(
            lambda v: _replace(state, omega=state.omega.with_data(v)),
            state.omega.data,
        )
    return out
