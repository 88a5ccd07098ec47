"""Constrained latent-variable ARX estimator.

The model ties an estimated linear combination of dependent proxies to
lagged versions of itself and of latent exogenous combinations:

    Y w = c + A (phi kron w) + X (beta (*) omega) + eps

subject to variance and sum-of-weights constraints on ``w`` and on each
``omega_j``.  Estimation runs a fixed-point iteration over the
closed-form conditional updates of each coefficient vector and each
Lagrange multiplier; every update is a small dense linear solve.

Conventions baked into the iteration:

* update order per pass: beta, phi, (explanatory multipliers, omega),
  (dependent multipliers, w); shorthand quantities are recomputed from
  the freshest state before each step;
* after its update, ``w`` is rescaled onto its variance constraint, and
  each variance-constrained ``omega_j`` likewise (the fixed point lies
  on the constraint manifold, so projection never moves it);
* scale-free ``omega_j`` blocks are renormalized to unit length with the
  matching ``beta_j`` absorbing the scale, which pins the otherwise
  arbitrary split of the product ``beta_j kron omega_j``;
* signs are aligned deterministically: the identified quantities are
  invariant, so a convention is required for reproducible output.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .blockops import (
    BlockVec,
    bvec_direct_sum,
    khatri_rao_vec,
    kr_identity_vec,
    kr_vec_identity,
)
from .design import Dataset, ModelSpec
from .errors import (
    DegenerateConstraintError,
    DegenerateSampleError,
    SingularMultiplierError,
    SpecError,
    StructureError,
)
from .moments import MomentSet, build_moment_set

__all__ = [
    "FitState",
    "Shorthands",
    "Multipliers",
    "FitResult",
    "compute_shorthands",
    "update_beta",
    "update_phi",
    "update_phi_beta_joint",
    "update_omega",
    "update_w",
    "update_dependent_multipliers",
    "update_explanatory_multipliers",
    "intercept",
    "objective_value",
    "lagrangian_partials",
    "constraint_residuals",
    "initial_state",
    "fit",
    "predict",
]

_COND_LIMIT = 1e12
_SIGN_EPS = 1e-12


def _solve(A: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, bool]:
    """Dense solve with a pseudo-inverse fallback on bad conditioning.

    Returns the solution and a flag saying whether the fallback ran.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    if A.shape[0] == 0:
        return np.zeros(A.shape[1] if A.ndim == 2 else 0), False
    if np.all(np.isfinite(A)):
        cond = np.linalg.cond(A)
        if np.isfinite(cond) and cond < _COND_LIMIT:
            return np.linalg.solve(A, b), False
    return np.linalg.pinv(A) @ b, True


@dataclass(frozen=True)
class FitState:
    """Current coefficient vectors during iteration."""

    w: np.ndarray
    omega: BlockVec | None
    phi: np.ndarray
    beta: BlockVec | None

    @property
    def beta_kr_omega(self) -> np.ndarray:
        if self.omega is None or self.beta is None:
            return np.zeros(0)
        return khatri_rao_vec(self.beta, self.omega).data

    @property
    def phi_kron_w(self) -> np.ndarray:
        return np.kron(self.phi, self.w)


@dataclass(frozen=True)
class Multipliers:
    rho_y: float = 1.0
    rho_l: float = 0.0
    lambda_x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    lambda_p: np.ndarray = field(default_factory=lambda: np.zeros(0))


@dataclass(frozen=True)
class Shorthands:
    """Intermediate quantities shared by the update equations."""

    v1: np.ndarray  # (n,)
    v2: np.ndarray  # (n,)
    v3: np.ndarray  # (M,)
    v4: np.ndarray  # (M,)
    theta: np.ndarray  # (K,K) diag of variance targets (inactive rows 0)
    L: np.ndarray  # (K,K) diag of sum targets (inactive rows 0)
    M1: np.ndarray  # (K,K) diag of group proxy counts
    M2: np.ndarray  # (M,M) block-diag covariances of constrained versions
    u: BlockVec | None  # constrained-version indicator, beta structure
    omega_ds: np.ndarray  # (M,K)
    one_omega_ds: np.ndarray  # (M,K)
    b_kr_o: np.ndarray  # (Xcols,)
    beta_id_omega: np.ndarray  # (Xcols, M)  beta (*) I_omega
    id_beta_omega: np.ndarray  # (Xcols, B)  I_beta (*) omega
    p_kron_id: np.ndarray  # (V_a*n, n)
    id_kron_w: np.ndarray  # (V_a*n, V_a)


def compute_shorthands(m: MomentSet, state: FitState, spec: ModelSpec) -> Shorthands:
    n = spec.n
    K = spec.k_groups
    va = spec.n_ar_versions
    if state.w.shape[0] != n:
        raise StructureError("w length does not match the spec")

    P = np.kron(state.phi.reshape(-1, 1), np.eye(n)) if va else np.zeros((0, n))
    Wk = np.kron(np.eye(va), state.w.reshape(-1, 1)) if va else np.zeros((0, 0))

    if va:
        v1 = (P.T @ m.cov_ay + m.cov_ya @ P - P.T @ m.cov_a @ P) @ state.w
    else:
        v1 = np.zeros(n)

    if K:
        omega, beta = state.omega, state.beta
        assert omega is not None and beta is not None
        bo = khatri_rao_vec(beta, omega).data
        BIo = kr_vec_identity(beta, omega.structure)
        IBo = kr_identity_vec(beta.structure, omega)
        v2 = (m.cov_yx - P.T @ m.cov_ax) @ bo
        v3 = BIo.T @ (m.cov_xy - m.cov_xa @ P) @ state.w
        v4 = BIo.T @ m.cov_x @ bo
        u = BlockVec.from_blocks(
            [
                np.eye(g.n_versions)[:, g.constrained_version]
                for g in spec.exogenous
            ]
        )
        U = kr_vec_identity(u, omega.structure)
        M2 = U.T @ m.cov_x_blockdiag @ U
        omega_ds = bvec_direct_sum(omega)
        one_ds = bvec_direct_sum(BlockVec.ones_like_structure(omega.structure))
        M1 = np.diag([float(g.m) for g in spec.exogenous])
        theta = np.diag(
            [
                g.variance_target if (g.latent and g.variance_target is not None) else 0.0
                for g in spec.exogenous
            ]
        )
        Lmat = np.diag(
            [
                g.sum_target if (g.latent and g.sum_target is not None) else 0.0
                for g in spec.exogenous
            ]
        )
    else:
        bo = np.zeros(0)
        BIo = np.zeros((0, 0))
        IBo = np.zeros((0, 0))
        v2 = np.zeros(n)
        v3 = np.zeros(0)
        v4 = np.zeros(0)
        u = None
        M2 = np.zeros((0, 0))
        omega_ds = np.zeros((0, 0))
        one_ds = np.zeros((0, 0))
        M1 = np.zeros((0, 0))
        theta = np.zeros((0, 0))
        Lmat = np.zeros((0, 0))

    return Shorthands(
        v1=v1,
        v2=v2,
        v3=v3,
        v4=v4,
        theta=theta,
        L=Lmat,
        M1=M1,
        M2=M2,
        u=u,
        omega_ds=omega_ds,
        one_omega_ds=one_ds,
        b_kr_o=bo,
        beta_id_omega=BIo,
        id_beta_omega=IBo,
        p_kron_id=P,
        id_kron_w=Wk,
    )


# ---------------------------------------------------------------------------
# coefficient updates


def update_beta(m: MomentSet, state: FitState, spec: ModelSpec) -> tuple[BlockVec, bool]:
    """Conditional least-squares update of the version coefficients."""
    assert state.beta is not None and state.omega is not None
    sh = compute_shorthands(m, state, spec)
    IBo = sh.id_beta_omega
    normal = IBo.T @ m.cov_x @ IBo
    rhs = IBo.T @ (m.cov_xy @ state.w - m.cov_xa @ state.phi_kron_w)
    sol, used_pinv = _solve(normal, rhs)
    return state.beta.with_data(sol), used_pinv


def update_phi(m: MomentSet, state: FitState, spec: ModelSpec) -> tuple[np.ndarray, bool]:
    """Conditional least-squares update of the autoregressive coefficients."""
    if spec.n_ar_versions == 0:
        return np.zeros(0), False
    sh = compute_shorthands(m, state, spec)
    Wk = sh.id_kron_w
    normal = Wk.T @ m.cov_a @ Wk
    rhs = Wk.T @ (m.cov_ay @ state.w - m.cov_ax @ state.beta_kr_omega)
    return _solve(normal, rhs)


def update_phi_beta_joint(
    m: MomentSet, state: FitState, spec: ModelSpec
) -> tuple[np.ndarray, BlockVec | None, bool]:
    """Joint conditional least-squares update of (phi, beta).

    For fixed weight vectors the model is linear in phi and beta
    together, so one solve of the stacked normal equations satisfies
    both single-vector conditions simultaneously.  Updating the pair
    sequentially has the same fixed points but crawls along a flat
    valley when the autoregressive and exogenous blocks are collinear;
    the joint step removes that mode.
    """
    va, K = spec.n_ar_versions, spec.k_groups
    sh = compute_shorthands(m, state, spec)
    Wk, IBo = sh.id_kron_w, sh.id_beta_omega
    top = np.hstack([Wk.T @ m.cov_a @ Wk, Wk.T @ m.cov_ax @ IBo])
    bottom = np.hstack([IBo.T @ m.cov_xa @ Wk, IBo.T @ m.cov_x @ IBo])
    normal = np.vstack([top, bottom]) if va or K else np.zeros((0, 0))
    rhs = np.concatenate([Wk.T @ m.cov_ay @ state.w, IBo.T @ m.cov_xy @ state.w])
    sol, used_pinv = _solve(normal, rhs)
    phi = sol[:va]
    beta = state.beta.with_data(sol[va:]) if state.beta is not None else None
    return phi, beta, used_pinv


def update_omega(
    m: MomentSet,
    state: FitState,
    mult: Multipliers,
    spec: ModelSpec,
    shorthands: Shorthands | None = None,
) -> tuple[BlockVec, bool]:
    """Update of the exogenous weight vectors with multiplier terms."""
    assert state.omega is not None
    sh = shorthands if shorthands is not None else compute_shorthands(m, state, spec)
    BIo = sh.beta_id_omega
    m_sizes = [g.m for g in spec.exogenous]
    lam_diag = np.diag(np.repeat(mult.lambda_x, m_sizes)) if len(mult.lambda_x) else 0.0
    bracket = BIo.T @ m.cov_x @ BIo
    if len(mult.lambda_x):
        bracket = bracket + sh.M2 @ lam_diag
    rhs = sh.v3
    if len(mult.lambda_p):
        rhs = rhs - 0.5 * sh.one_omega_ds @ mult.lambda_p
    sol, used_pinv = _solve(bracket, rhs)
    return state.omega.with_data(sol), used_pinv


def update_w(
    m: MomentSet,
    state: FitState,
    mult: Multipliers,
    spec: ModelSpec,
    shorthands: Shorthands | None = None,
) -> np.ndarray:
    """Update of the dependent weight vector given its multipliers."""
    sh = shorthands if shorthands is not None else compute_shorthands(m, state, spec)
    if abs(mult.rho_y) < 1e-13 or not np.isfinite(mult.rho_y):
        raise SingularMultiplierError(
            f"dependent scaling multiplier vanished (rho_y={mult.rho_y!r})"
        )
    rhs = sh.v1 + sh.v2
    base, _ = _solve(m.cov_y, rhs)
    if mult.rho_l != 0.0:
        ones, _ = _solve(m.cov_y, np.ones(spec.n))
        base = base - mult.rho_l * ones
    return base / mult.rho_y


def update_dependent_multipliers(
    m: MomentSet,
    state: FitState,
    spec: ModelSpec,
    shorthands: Shorthands | None = None,
) -> tuple[float, float]:
    """Multipliers of the dependent variance and sum constraints."""
    sh = shorthands if shorthands is not None else compute_shorthands(m, state, spec)
    r = sh.v1 + sh.v2
    sigma2 = spec.dependent.variance_target
    assert sigma2 is not None
    n = spec.n
    l_y = spec.dependent.sum_target
    if l_y is None:
        return float(state.w @ r / sigma2), 0.0
    ones = np.ones(n)
    sigw = m.cov_y @ state.w
    den = n * sigma2 - l_y * (ones @ sigw)
    if abs(den) < 1e-14 * max(1.0, n * sigma2):
        raise DegenerateConstraintError(
            "dependent constraint system is degenerate: "
            "n*sigma_y^2 equals l_y * 1'cov_y w"
        )
    rho_y = float((n * state.w - l_y * ones) @ r / den)
    rho_l = float((ones @ r - rho_y * (ones @ sigw)) / n)
    return rho_y, rho_l


def update_explanatory_multipliers(
    m: MomentSet,
    state: FitState,
    spec: ModelSpec,
    shorthands: Shorthands | None = None,
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Multipliers of the per-group variance and sum constraints.

    Groups without a given constraint have their multiplier entries
    forced to zero by masking rows of the fixed-shape linear system,
    rather than by solving a reduced system.
    """
    K = spec.k_groups
    if K == 0:
        return np.zeros(0), np.zeros(0), False
    sh = shorthands if shorthands is not None else compute_shorthands(m, state, spec)
    act_x = np.array(
        [g.latent and g.variance_target is not None for g in spec.exogenous]
    )
    act_p = np.array(
        [g.latent and g.sum_target is not None for g in spec.exogenous]
    )
    if not act_x.any() and not act_p.any():
        return np.zeros(K), np.zeros(K), False

    d = sh.v3 - sh.v4
    A = sh.M1 @ sh.theta - sh.L @ sh.one_omega_ds.T @ sh.M2 @ sh.omega_ds
    b = (sh.omega_ds @ sh.M1 - sh.one_omega_ds @ sh.L).T @ d
    for j in range(K):
        if not act_x[j]:
            A[j, :] = 0.0
            A[:, j] = 0.0
            A[j, j] = 1.0
            b[j] = 0.0
    lambda_x, used_pinv = _solve(A, b)
    lambda_x = np.where(act_x, lambda_x, 0.0)

    m1_diag = np.diag(sh.M1)
    lambda_p = 2.0 * (sh.one_omega_ds.T @ (d - sh.M2 @ sh.omega_ds @ lambda_x)) / m1_diag
    lambda_p = np.where(act_p, lambda_p, 0.0)
    return lambda_x, lambda_p, used_pinv


def intercept(m: MomentSet, state: FitState) -> float:
    """Intercept that zeroes the weighted residual mean."""
    c = m.mean_y @ state.w
    if m.mean_a.size:
        c -= m.mean_a @ state.phi_kron_w
    if m.mean_x.size:
        c -= m.mean_x @ state.beta_kr_omega
    return float(c)


def objective_value(m: MomentSet, state: FitState) -> float:
    """Weighted residual variance implied by the state (intercept at its
    optimum), expressed through the moment blocks."""
    w = state.w
    p = state.phi_kron_w
    b = state.beta_kr_omega
    val = w @ m.cov_y @ w
    val += p @ m.cov_a @ p
    val += b @ m.cov_x @ b
    val -= 2.0 * (w @ m.cov_ya @ p)
    val -= 2.0 * (w @ m.cov_yx @ b)
    val += 2.0 * (p @ m.cov_ax @ b)
    return float(val)


def _mask_inactive_multipliers(mult: Multipliers, spec: ModelSpec) -> Multipliers:
    """Zero multiplier entries whose constraints the spec does not declare."""
    rho_l = mult.rho_l if spec.dependent.sum_target is not None else 0.0
    lam_x = np.array(
        [
            v if (g.latent and g.variance_target is not None) else 0.0
            for g, v in zip(spec.exogenous, np.atleast_1d(mult.lambda_x))
        ]
    ) if spec.k_groups else np.zeros(0)
    lam_p = np.array(
        [
            v if (g.latent and g.sum_target is not None) else 0.0
            for g, v in zip(spec.exogenous, np.atleast_1d(mult.lambda_p))
        ]
    ) if spec.k_groups else np.zeros(0)
    return Multipliers(rho_y=mult.rho_y, rho_l=rho_l, lambda_x=lam_x, lambda_p=lam_p)


def lagrangian_partials(
    m: MomentSet, state: FitState, mult: Multipliers, spec: ModelSpec
) -> dict[str, np.ndarray]:
    """Analytic partial derivatives of the constrained objective.

    All four vanish at a converged constrained fit; they are the
    stationarity side of the first-order conditions.  Multiplier entries
    for constraints the spec does not declare are ignored.
    """
    mult = _mask_inactive_multipliers(mult, spec)
    sh = compute_shorthands(m, state, spec)
    out: dict[str, np.ndarray] = {}
    if spec.dependent.latent:
        out["w"] = 2.0 * (
            mult.rho_y * (m.cov_y @ state.w) - (sh.v1 + sh.v2) + mult.rho_l
        )
    if spec.n_ar_versions:
        Wk = sh.id_kron_w
        out["phi"] = 2.0 * (
            Wk.T @ m.cov_a @ Wk @ state.phi
            - Wk.T @ (m.cov_ay @ state.w - m.cov_ax @ sh.b_kr_o)
        )
    if spec.k_groups:
        IBo = sh.id_beta_omega
        assert state.beta is not None
        out["beta"] = 2.0 * (
            IBo.T @ m.cov_x @ IBo @ state.beta.data
            - IBo.T @ (m.cov_xy @ state.w - m.cov_xa @ state.phi_kron_w)
        )
        grad_o = 2.0 * (sh.v4 - sh.v3)
        if len(mult.lambda_x):
            grad_o = grad_o + 2.0 * sh.M2 @ sh.omega_ds @ mult.lambda_x
        if len(mult.lambda_p):
            grad_o = grad_o + sh.one_omega_ds @ mult.lambda_p
        out["omega"] = grad_o
    return out


# ---------------------------------------------------------------------------
# fit driver


@dataclass(frozen=True)
class FitResult:
    w: np.ndarray
    omega: BlockVec | None
    phi: np.ndarray
    beta: BlockVec | None
    c: float
    rho_y: float
    rho_l: float
    lambda_x: np.ndarray
    lambda_p: np.ndarray
    iterations: int
    converged: bool
    objective: float
    objective_initial: float
    constraint_residuals: dict[str, float]
    pinv_used: bool
    relaxation: float
    spec: ModelSpec

    @property
    def state(self) -> FitState:
        return FitState(w=self.w, omega=self.omega, phi=self.phi, beta=self.beta)

    @property
    def multipliers(self) -> Multipliers:
        return Multipliers(
            rho_y=self.rho_y,
            rho_l=self.rho_l,
            lambda_x=self.lambda_x,
            lambda_p=self.lambda_p,
        )


def _first_significant(v: np.ndarray) -> float:
    scale = np.max(np.abs(v)) if v.size else 0.0
    if scale == 0.0:
        return 0.0
    for x in v:
        if abs(x) > _SIGN_EPS * scale:
            return float(x)
    return 0.0


def _feasible_equal_weights(cov: np.ndarray, target_var: float) -> np.ndarray:
    """Equal weights rescaled onto the variance target; falls back to a
    basis direction if the equal-weight combination has no variance."""
    n = cov.shape[0]
    ones = np.ones(n)
    q = float(ones @ cov @ ones)
    if q > 1e-12 * max(np.trace(cov), 1e-300):
        return ones * np.sqrt(target_var / q)
    j = int(np.argmax(np.diag(cov)))
    e = np.zeros(n)
    e[j] = np.sqrt(target_var / cov[j, j])
    return e


def initial_state(m: MomentSet, spec: ModelSpec) -> FitState:
    """Deterministic, constraint-feasible starting point."""
    if spec.dependent.latent:
        assert spec.dependent.variance_target is not None
        w0 = _feasible_equal_weights(m.cov_y, spec.dependent.variance_target)
    else:
        w0 = np.ones(1)
    omega0 = None
    if spec.k_groups:
        blocks = []
        for idx, g in enumerate(spec.exogenous):
            if g.latent and g.variance_target is not None:
                block_index = _x_block_index(spec, idx, g.constrained_version)
                cov = m.x_version_block(block_index)
                blocks.append(_feasible_equal_weights(cov, g.variance_target))
            else:
                blocks.append(np.ones(g.m) / np.sqrt(g.m))
        omega0 = BlockVec.from_blocks(blocks)
    phi0 = np.zeros(spec.n_ar_versions)
    beta0 = None
    if spec.k_groups:
        assert spec.beta_structure is not None
        beta0 = BlockVec(np.zeros(spec.beta_structure.total), spec.beta_structure)
    return FitState(w=w0, omega=omega0, phi=phi0, beta=beta0)


def _x_block_index(spec: ModelSpec, group_index: int, version_index: int) -> int:
    idx = 0
    for j, g in enumerate(spec.exogenous):
        if j == group_index:
            return idx + version_index
        idx += g.n_versions
    raise SpecError(f"group index {group_index} out of range")


def _project_constraints(
    v: np.ndarray,
    cov: np.ndarray,
    variance_target: float,
    sum_target: float | None,
) -> np.ndarray:
    """Map an iterate onto its constraint set.

    With only a variance constraint this is a pure rescale.  With a sum
    constraint as well, the iterate is shifted along ``cov^{-1} 1`` (the
    minimum-variance direction) and rescaled so both constraints hold
    exactly; a variance-only rescale would leave the sum unenforced and
    admits spurious fixed points.  True fixed points are feasible, so
    the projection never moves them.
    """
    var = float(v @ cov @ v)
    if sum_target is None:
        if var <= 0:
            raise DegenerateSampleError("weight vector lost all variance")
        return v * np.sqrt(variance_target / var)
    b = np.linalg.solve(cov, np.ones(v.shape[0]))
    B1 = float(np.sum(b))  # 1' cov^{-1} 1 > 0 for SPD cov
    S = float(np.sum(v))
    if sum_target == 0.0:
        shifted = v - (S / B1) * b
        var = float(shifted @ cov @ shifted)
        if var <= 0:
            raise DegenerateSampleError("weight vector lost all variance")
        return shifted * np.sqrt(variance_target / var)
    l, sigma2 = sum_target, variance_target
    # solve for the shift delta in  v + delta * b,  then rescale by k:
    # sum:      k (S + delta B1) = l
    # variance: k^2 (var + 2 delta S + delta^2 B1) = sigma2
    a2 = l * l * B1 - sigma2 * B1 * B1
    a1 = 2.0 * (l * l * S - sigma2 * S * B1)
    a0 = l * l * var - sigma2 * S * S
    delta = None
    if abs(a2) > 1e-300:
        disc = a1 * a1 - 4.0 * a2 * a0
        if disc >= 0:
            r1 = (-a1 + np.sqrt(disc)) / (2.0 * a2)
            r2 = (-a1 - np.sqrt(disc)) / (2.0 * a2)
            delta = r1 if abs(r1) <= abs(r2) else r2
    elif abs(a1) > 1e-300:
        delta = -a0 / a1
    if delta is None or not np.isfinite(delta) or abs(S + delta * B1) < 1e-300:
        # infeasible direction this pass; fall back to the variance rescale
        if var <= 0:
            raise DegenerateSampleError("weight vector lost all variance")
        return v * np.sqrt(variance_target / var)
    shifted = v + delta * b
    return shifted * (l / (S + delta * B1))


def _project_w(w: np.ndarray, m: MomentSet, spec: ModelSpec) -> np.ndarray:
    target = spec.dependent.variance_target
    assert target is not None
    return _project_constraints(w, m.cov_y, target, spec.dependent.sum_target)


def _check_constraint_feasibility(m: MomentSet, spec: ModelSpec) -> None:
    """Reject variance/sum target pairs whose constraint sets are empty.

    On the plane 1'v = l the smallest reachable variance is
    l^2 / (1' cov^{-1} 1); a variance target below that admits no
    solution and the iteration could only chase it forever.
    """

    def check(name: str, cov: np.ndarray, var_target: float, sum_target: float | None):
        if sum_target is None or sum_target == 0.0:
            return
        b = np.linalg.solve(cov, np.ones(cov.shape[0]))
        min_var = sum_target**2 / float(np.sum(b))
        if var_target < min_var * (1.0 - 1e-12):
            raise DegenerateConstraintError(
                f"{name}: variance target {var_target:.6g} is below the "
                f"minimum {min_var:.6g} attainable with sum target {sum_target:.6g}"
            )

    if spec.dependent.latent and spec.dependent.variance_target is not None:
        check("dependent", m.cov_y, spec.dependent.variance_target, spec.dependent.sum_target)
    for idx, g in enumerate(spec.exogenous):
        if g.latent and g.variance_target is not None:
            cov = m.x_version_block(_x_block_index(spec, idx, g.constrained_version))
            check(f"group {g.name!r}", cov, g.variance_target, g.sum_target)


def _normalize_omega(
    omega: BlockVec, beta: BlockVec, m: MomentSet, spec: ModelSpec
) -> tuple[BlockVec, BlockVec]:
    """Per-group scale handling after an omega update.

    Variance-constrained groups are projected onto their constraint.
    Scale-free groups are renormalized to unit length with the scale
    moved into beta, and their sign pinned, so the (beta_j, omega_j)
    split of the identified product is deterministic.
    """
    o_blocks = omega.blocks()
    b_blocks = beta.blocks()
    for idx, g in enumerate(spec.exogenous):
        ob = o_blocks[idx]
        if g.latent and g.variance_target is not None:
            block_index = _x_block_index(spec, idx, g.constrained_version)
            cov = m.x_version_block(block_index)
            o_blocks[idx] = _project_constraints(
                ob, cov, g.variance_target, g.sum_target
            )
        elif g.latent and g.sum_target is not None and g.sum_target != 0.0:
            total = float(np.sum(ob))
            if abs(total) > 1e-300:
                o_blocks[idx] = ob * (g.sum_target / total)
        else:
            # scale-free block (possibly zero-sum constrained): pin the
            # split by renormalizing, with beta absorbing the scale
            if g.latent and g.sum_target == 0.0:
                ob = ob - np.mean(ob)
            norm = float(np.linalg.norm(ob))
            if norm <= 0:
                continue
            o_blocks[idx] = ob / norm
            b_blocks[idx] = b_blocks[idx] * norm
        if g.sum_target is None or g.sum_target == 0.0:
            lead = _first_significant(o_blocks[idx])
            if lead < 0:
                o_blocks[idx] = -o_blocks[idx]
                b_blocks[idx] = -b_blocks[idx]
    return BlockVec.from_blocks(o_blocks), BlockVec.from_blocks(b_blocks)


def constraint_residuals(
    m: MomentSet, state: FitState, spec: ModelSpec
) -> dict[str, float]:
    """Absolute violations of every declared constraint."""
    out: dict[str, float] = {}
    if spec.dependent.latent:
        assert spec.dependent.variance_target is not None
        var = float(state.w @ m.cov_y @ state.w)
        out["dependent_variance"] = abs(var - spec.dependent.variance_target)
        if spec.dependent.sum_target is not None:
            out["dependent_sum"] = abs(float(np.sum(state.w)) - spec.dependent.sum_target)
    if state.omega is not None:
        for idx, g in enumerate(spec.exogenous):
            ob = state.omega.blocks()[idx]
            if g.latent and g.variance_target is not None:
                cov = m.x_version_block(_x_block_index(spec, idx, g.constrained_version))
                out[f"variance:{g.name}"] = abs(float(ob @ cov @ ob) - g.variance_target)
            if g.latent and g.sum_target is not None:
                out[f"sum:{g.name}"] = abs(float(np.sum(ob)) - g.sum_target)
    return out


def _align_signs(
    state: FitState, mult: Multipliers, spec: ModelSpec
) -> tuple[FitState, Multipliers]:
    """Deterministic sign convention for the sign-unidentified directions."""
    w, beta, rho_l = state.w, state.beta, mult.rho_l
    free_sign = spec.dependent.latent and (
        spec.dependent.sum_target is None or spec.dependent.sum_target == 0.0
    )
    if free_sign:
        total = float(np.sum(w))
        lead = total if abs(total) > _SIGN_EPS * max(1.0, np.max(np.abs(w))) else _first_significant(w)
        if lead < 0:
            w = -w
            beta = beta.with_data(-beta.data) if beta is not None else None
            rho_l = -rho_l
    return (
        FitState(w=w, omega=state.omega, phi=state.phi, beta=beta),
        replace(mult, rho_l=rho_l),
    )


def _fit_once(
    m: MomentSet, spec: ModelSpec, relax: float
) -> tuple[FitState, Multipliers, int, bool, float, float, bool]:
    opts = spec.solver
    state = initial_state(m, spec)
    mult = Multipliers(
        lambda_x=np.zeros(spec.k_groups), lambda_p=np.zeros(spec.k_groups)
    )
    obj_initial = objective_value(m, state)
    obj_prev = obj_initial
    pinv_any = False
    converged = False
    iterations = 0
    osc_count = 0  # objective increases signal an oscillating plain iteration

    for iterations in range(1, opts.max_iter + 1):
        prev = state

        if spec.k_groups or spec.n_ar_versions:
            phi_new, beta_new, p1 = update_phi_beta_joint(m, state, spec)
            state = replace(state, phi=phi_new, beta=beta_new)
            pinv_any |= p1

        if spec.k_groups:
            sh = compute_shorthands(m, state, spec)
            lam_x, lam_p, p3 = update_explanatory_multipliers(m, state, spec, sh)
            mult = replace(mult, lambda_x=lam_x, lambda_p=lam_p)
            pinv_any |= p3
            omega_new, p4 = update_omega(m, state, mult, spec, sh)
            pinv_any |= p4
            if relax != 1.0:
                omega_new = omega_new.with_data(
                    relax * omega_new.data + (1.0 - relax) * prev.omega.data
                )
            assert state.beta is not None
            omega_new, beta_adj = _normalize_omega(omega_new, state.beta, m, spec)
            state = replace(state, omega=omega_new, beta=beta_adj)

        if spec.dependent.latent:
            sh = compute_shorthands(m, state, spec)
            rho_y, rho_l = update_dependent_multipliers(m, state, spec, sh)
            mult = replace(mult, rho_y=rho_y, rho_l=rho_l)
            w_new = update_w(m, state, mult, spec, sh)
            if relax != 1.0:
                w_new = relax * w_new + (1.0 - relax) * prev.w
            w_new = _project_w(w_new, m, spec)
            state = replace(state, w=w_new)

        delta = float(np.max(np.abs(state.w - prev.w))) if state.w.size else 0.0
        if spec.n_ar_versions:
            delta = max(delta, float(np.max(np.abs(state.phi - prev.phi))))
        if spec.k_groups:
            delta = max(delta, float(np.max(np.abs(state.omega.data - prev.omega.data))))
            delta = max(delta, float(np.max(np.abs(state.beta.data - prev.beta.data))))

        obj = objective_value(m, state)
        if delta <= opts.tol or abs(obj_prev - obj) <= opts.tol_objective * max(abs(obj), 1e-300):
            obj_prev = obj
            converged = True
            break
        if obj > obj_prev + 1e-12 * max(abs(obj_prev), 1.0):
            osc_count += 1
            if relax == 1.0 and osc_count >= 10:
                obj_prev = obj
                break  # oscillating; hand over to the relaxed retry
        obj_prev = obj

    return state, mult, iterations, converged, obj_initial, obj_prev, pinv_any


def fit(dataset: Dataset, spec: ModelSpec | None = None) -> FitResult:
    """Estimate the model by fixed-point iteration.

    Non-convergence is reported through the ``converged`` flag rather
    than an exception so rolling evaluations can skip bad windows.  If
    the plain iteration stalls, one deterministic retry with relaxed
    (half-step) updates is attempted; relaxation moves no fixed point.
    """
    spec = dataset.spec if spec is None else spec
    if spec.n_ar_versions == 0 and spec.k_groups == 0:
        raise SpecError("nothing to fit: no lags and no exogenous groups")
    if spec.dependent.latent and spec.n < 1:
        raise SpecError("latent dependent needs proxies")
    if not spec.dependent.latent and dataset.Y.shape[1] != 1:
        raise SpecError("non-latent dependent must have exactly one column")
    dof = dataset.nrows - spec.n_parameters()
    if dof < spec.sample.min_dof:
        raise DegenerateSampleError(
            f"{dataset.nrows} rows leave {dof} degrees of freedom, "
            f"below the required {spec.sample.min_dof}"
        )

    m = build_moment_set(
        dataset.Y, dataset.A, dataset.X, dataset.weights, spec.x_structure
    )
    _check_constraint_feasibility(m, spec)

    relax = spec.solver.relax
    state, mult, iters, converged, obj0, obj, pinv_any = _fit_once(m, spec, relax)
    if not converged and relax == 1.0:
        state, mult, iters2, converged, obj0, obj, pinv2 = _fit_once(m, spec, 0.5)
        iters += iters2
        pinv_any |= pinv2
        relax = 0.5

    state, mult = _align_signs(state, mult, spec)
    c = intercept(m, state)
    residuals = constraint_residuals(m, state, spec)

    return FitResult(
        w=state.w,
        omega=state.omega,
        phi=state.phi,
        beta=state.beta,
        c=c,
        rho_y=mult.rho_y,
        rho_l=mult.rho_l,
        lambda_x=mult.lambda_x,
        lambda_p=mult.lambda_p,
        iterations=iters,
        converged=converged,
        objective=obj,
        objective_initial=obj0,
        constraint_residuals=residuals,
        pinv_used=pinv_any,
        relaxation=relax,
        spec=spec,
    )


def predict(
    fit_result: FitResult, dataset: Dataset
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Latent dependent, fitted values and residuals on a dataset."""
    spec = fit_result.spec
    if dataset.Y.shape[1] != fit_result.w.shape[0]:
        raise StructureError("dataset dependent width does not match the fit")
    if dataset.A.shape[1] != spec.n * spec.n_ar_versions:
        raise StructureError("dataset AR width does not match the fit")
    x_struct = spec.x_structure
    if dataset.X.shape[1] != (x_struct.total if x_struct else 0):
        raise StructureError("dataset exogenous width does not match the fit")
    latent = dataset.Y @ fit_result.w
    fitted = np.full(dataset.nrows, fit_result.c)
    if spec.n_ar_versions:
        fitted += dataset.A @ fit_result.state.phi_kron_w
    if spec.k_groups:
        fitted += dataset.X @ fit_result.state.beta_kr_omega
    return latent, fitted, latent - fitted
