"""Sample design: turn raw series into aligned regression matrices.

Takes a table of (already transformed) series plus a declarative model
specification and produces the dependent matrix Y, the autoregressive
version matrix A, and the exogenous version matrix X, aligned row by
row, with outlier rows removed and decay weights recomputed on the
surviving rows.

Alignment is strict inner-join on dates; nothing is interpolated.
Quarterly periods are keyed by their calendar quarter-end date.
"""

from __future__ import annotations

import calendar
import datetime as dt
from dataclasses import dataclass, field, replace

import numpy as np

from .blockops import BlockStructure
from .errors import (
    DataError,
    DegenerateSampleError,
    InsufficientHistoryError,
    SpecError,
)
from .moments import WeightVector, exp_decay_weights

__all__ = [
    "SeriesTable",
    "DependentSpec",
    "ExogenousGroup",
    "SolverOptions",
    "SampleOptions",
    "ModelSpec",
    "Dataset",
    "log_returns",
    "quarter_end_sample",
    "quarter_end_date",
    "build_versions",
    "assemble_dataset",
]


# ---------------------------------------------------------------------------
# series table


@dataclass(frozen=True)
class SeriesTable:
    """Named real-valued series over a strictly ascending date axis."""

    dates: tuple[dt.date, ...]
    columns: dict[str, np.ndarray]
    frequency: str = "quarterly"  # "quarterly" | "monthly"

    def __post_init__(self):
        n = len(self.dates)
        if any(
            self.dates[i] >= self.dates[i + 1] for i in range(n - 1)
        ):
            raise DataError("dates must be strictly ascending")
        cols = {}
        for name, values in self.columns.items():
            v = np.asarray(values, dtype=float).reshape(-1)
            if v.shape[0] != n:
                raise DataError(
                    f"column {name!r} has {v.shape[0]} rows, expected {n}"
                )
            cols[name] = v
        object.__setattr__(self, "columns", cols)
        if self.frequency not in ("quarterly", "monthly"):
            raise DataError(f"unknown frequency {self.frequency!r}")

    @property
    def nrows(self) -> int:
        return len(self.dates)

    def names(self) -> list[str]:
        return list(self.columns)

    def matrix(self, names: list[str]) -> np.ndarray:
        missing = [n for n in names if n not in self.columns]
        if missing:
            raise DataError(f"unknown series name(s): {missing}")
        return np.column_stack([self.columns[n] for n in names])

    def select_rows(self, idx: np.ndarray) -> "SeriesTable":
        return SeriesTable(
            dates=tuple(self.dates[i] for i in np.asarray(idx, dtype=int)),
            columns={k: v[idx] for k, v in self.columns.items()},
            frequency=self.frequency,
        )

    def drop_missing(self) -> "SeriesTable":
        """Inner-join alignment: drop rows where any column is missing."""
        if not self.columns:
            return self
        mask = np.ones(self.nrows, dtype=bool)
        for v in self.columns.values():
            mask &= np.isfinite(v)
        return self.select_rows(np.nonzero(mask)[0])

    def merge(self, other: "SeriesTable") -> "SeriesTable":
        """Inner join on dates; both tables must share a frequency."""
        if self.frequency != other.frequency:
            raise DataError(
                "cannot merge tables with different frequencies "
                f"({self.frequency} vs {other.frequency})"
            )
        dup = set(self.columns) & set(other.columns)
        if dup:
            raise DataError(f"duplicate series names on merge: {sorted(dup)}")
        common = sorted(set(self.dates) & set(other.dates))
        if not common:
            raise DataError("tables share no dates; nothing to align")
        idx_a = {d: i for i, d in enumerate(self.dates)}
        idx_b = {d: i for i, d in enumerate(other.dates)}
        ia = np.array([idx_a[d] for d in common], dtype=int)
        ib = np.array([idx_b[d] for d in common], dtype=int)
        cols = {k: v[ia] for k, v in self.columns.items()}
        cols.update({k: v[ib] for k, v in other.columns.items()})
        return SeriesTable(tuple(common), cols, self.frequency)


def log_returns(levels: np.ndarray) -> np.ndarray:
    """First difference of logs; shrinks the series by one observation."""
    levels = np.asarray(levels, dtype=float).reshape(-1)
    if levels.shape[0] < 2:
        raise DataError("log returns need at least two observations")
    if np.any(levels <= 0) or not np.all(np.isfinite(levels)):
        bad = int(np.nonzero(~(levels > 0) | ~np.isfinite(levels))[0][0])
        raise DataError(f"nonpositive level at position {bad}; cannot take logs")
    return np.diff(np.log(levels))


def log_return_table(table: SeriesTable, names: list[str] | None = None) -> SeriesTable:
    """Apply log returns to the given columns (all by default), dropping
    the first row so every column stays aligned."""
    names = table.names() if names is None else names
    cols = {}
    for k, v in table.columns.items():
        cols[k] = log_returns(v) if k in names else v[1:]
    return SeriesTable(table.dates[1:], cols, table.frequency)


def quarter_end_date(d: dt.date) -> dt.date:
    """Calendar quarter-end date of the quarter containing ``d``."""
    month = 3 * ((d.month - 1) // 3 + 1)
    return dt.date(d.year, month, calendar.monthrange(d.year, month)[1])


def quarter_end_sample(monthly: SeriesTable) -> SeriesTable:
    """Keep the last monthly observation of each complete calendar quarter.

    The surviving rows are re-keyed by quarter-end date.  A trailing
    quarter with fewer than three months is dropped, not an error.
    """
    if monthly.frequency != "monthly":
        raise DataError("quarter_end_sample expects a monthly table")
    by_quarter: dict[dt.date, list[int]] = {}
    for i, d in enumerate(monthly.dates):
        by_quarter.setdefault(quarter_end_date(d), []).append(i)
    keep_dates, keep_idx = [], []
    for q in sorted(by_quarter):
        rows = by_quarter[q]
        if len(rows) == 3:  # complete quarter only
            keep_dates.append(q)
            keep_idx.append(rows[-1])
    if not keep_dates:
        raise DataError("no complete quarter in the monthly sample")
    idx = np.array(keep_idx, dtype=int)
    return SeriesTable(
        tuple(keep_dates),
        {k: v[idx] for k, v in monthly.columns.items()},
        "quarterly",
    )


def canonical_quarterly(table: SeriesTable) -> SeriesTable:
    """Re-key a quarterly table to quarter-end dates (e.g. from the
    quarter-start convention used by macro data providers)."""
    if table.frequency != "quarterly":
        raise DataError("canonical_quarterly expects a quarterly table")
    new_dates = tuple(quarter_end_date(d) for d in table.dates)
    if len(set(new_dates)) != len(new_dates):
        raise DataError("two rows fall in the same quarter")
    return SeriesTable(new_dates, dict(table.columns), "quarterly")


# ---------------------------------------------------------------------------
# model specification


@dataclass(frozen=True)
class DependentSpec:
    proxies: tuple[str, ...]
    latent: bool = True
    variance_target: float | None = None  # required when latent
    sum_target: float | None = None

    def __post_init__(self):
        if not self.proxies:
            raise SpecError("dependent needs at least one proxy")
        if self.latent:
            if self.variance_target is None:
                raise SpecError(
                    "a latent dependent requires a variance target "
                    "(the scaling constraint)"
                )
            if self.variance_target <= 0:
                raise SpecError("variance target must be strictly positive")
        elif len(self.proxies) != 1:
            raise SpecError("a non-latent dependent must have exactly one proxy")

    @property
    def n(self) -> int:
        return len(self.proxies)


@dataclass(frozen=True)
class ExogenousGroup:
    name: str
    proxies: tuple[str, ...]
    lags: tuple[int, ...]
    latent: bool = True
    variance_target: float | None = None
    sum_target: float | None = None
    constrained_version: int = 0  # index into ``lags``

    def __post_init__(self):
        if not self.proxies:
            raise SpecError(f"group {self.name!r} needs at least one proxy")
        if not self.lags:
            raise SpecError(f"group {self.name!r} needs at least one lag")
        if any(l < 0 for l in self.lags):
            raise SpecError(f"group {self.name!r} has a negative lag")
        if len(set(self.lags)) != len(self.lags):
            raise SpecError(f"group {self.name!r} repeats a lag")
        if not (0 <= self.constrained_version < len(self.lags)):
            raise SpecError(
                f"group {self.name!r}: constrained version "
                f"{self.constrained_version} is not a declared version"
            )
        if self.variance_target is not None and self.variance_target <= 0:
            raise SpecError(f"group {self.name!r}: variance target must be > 0")
        if not self.latent and len(self.proxies) != 1:
            raise SpecError(
                f"group {self.name!r}: a non-latent group must have one proxy"
            )

    @property
    def m(self) -> int:
        return len(self.proxies)

    @property
    def n_versions(self) -> int:
        return len(self.lags)


@dataclass(frozen=True)
class SolverOptions:
    max_iter: int = 500
    tol: float = 1e-10
    tol_objective: float = 1e-12
    relax: float = 1.0  # update relaxation; fit retries at 0.5 if needed
    seed: int = 0


@dataclass(frozen=True)
class SampleOptions:
    half_life: float | None = None  # periods; None = equal weights
    min_dof: int = 0
    outliers: tuple[dt.date, ...] = ()
    forecast_start: dt.date | None = None


@dataclass(frozen=True)
class ModelSpec:
    dependent: DependentSpec
    ar_lags: tuple[int, ...] = ()
    exogenous: tuple[ExogenousGroup, ...] = ()
    solver: SolverOptions = field(default_factory=SolverOptions)
    sample: SampleOptions = field(default_factory=SampleOptions)

    def __post_init__(self):
        if any(l < 1 for l in self.ar_lags):
            raise SpecError("autoregressive lags must be >= 1")
        if len(set(self.ar_lags)) != len(self.ar_lags):
            raise SpecError("autoregressive lags repeat")
        names = [g.name for g in self.exogenous]
        if len(set(names)) != len(names):
            raise SpecError("exogenous group names repeat")
        if not self.ar_lags and not self.exogenous:
            raise SpecError("nothing to fit: no lags and no exogenous groups")

    @property
    def n(self) -> int:
        return self.dependent.n

    @property
    def n_ar_versions(self) -> int:
        return len(self.ar_lags)

    @property
    def k_groups(self) -> int:
        return len(self.exogenous)

    @property
    def omega_structure(self) -> BlockStructure | None:
        if not self.exogenous:
            return None
        return BlockStructure(tuple(g.m for g in self.exogenous))

    @property
    def beta_structure(self) -> BlockStructure | None:
        if not self.exogenous:
            return None
        return BlockStructure(tuple(g.n_versions for g in self.exogenous))

    @property
    def x_structure(self) -> BlockStructure | None:
        """One block per (group, version), version-major within a group."""
        if not self.exogenous:
            return None
        return BlockStructure(
            tuple(g.m for g in self.exogenous for _ in g.lags)
        )

    @property
    def max_lag(self) -> int:
        lags = list(self.ar_lags)
        for g in self.exogenous:
            lags.extend(g.lags)
        return max(lags) if lags else 0

    def n_parameters(self) -> int:
        """Estimated quantities for the degrees-of-freedom rule: one per
        coefficient, plus one per active Lagrange multiplier."""
        p = 1 + self.n_ar_versions  # intercept + phi
        p += sum(g.n_versions for g in self.exogenous)  # beta
        if self.dependent.latent:
            p += self.n  # w
            p += 1  # scaling-constraint multiplier
            if self.dependent.sum_target is not None:
                p += 1
        for g in self.exogenous:
            if g.latent:
                p += g.m  # omega_j
                if g.variance_target is not None:
                    p += 1
                if g.sum_target is not None:
                    p += 1
        return p

    def with_sample(self, **changes) -> "ModelSpec":
        return replace(self, sample=replace(self.sample, **changes))


# ---------------------------------------------------------------------------
# version matrices and dataset assembly


def build_versions(series_matrix: np.ndarray, lags: tuple[int, ...]) -> np.ndarray:
    """Stack lagged copies of the input columns, one column block per lag.

    Row t of the result (t counted from ``max(lags)``) holds, for each
    lag tau in declared order, the input row ``t - tau``.  The usable
    sample shrinks by ``max(lags)`` rows.
    """
    M = np.asarray(series_matrix, dtype=float)
    if M.ndim == 1:
        M = M.reshape(-1, 1)
    if not lags:
        raise SpecError("at least one lag is required")
    s = M.shape[0]
    maxlag = max(lags)
    if maxlag >= s:
        raise InsufficientHistoryError(
            f"lag {maxlag} needs more history than the {s}-row sample"
        )
    rows = s - maxlag
    return np.hstack([M[maxlag - tau : maxlag - tau + rows, :] for tau in lags])


@dataclass(frozen=True)
class Dataset:
    """Aligned sample matrices for one model specification."""

    Y: np.ndarray
    A: np.ndarray  # s x (n * V_a); zero-width when V_a = 0
    X: np.ndarray  # s x sum_j(m_j * V_j); zero-width when K = 0
    weights: WeightVector
    dates: tuple[dt.date, ...]
    spec: ModelSpec

    @property
    def nrows(self) -> int:
        return self.Y.shape[0]

    def row_design(self, i: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.Y[i], self.A[i], self.X[i]

    def subset(self, idx: np.ndarray, half_life: float | None = "unchanged") -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        hl = self.spec.sample.half_life if half_life == "unchanged" else half_life
        return Dataset(
            Y=self.Y[idx],
            A=self.A[idx],
            X=self.X[idx],
            weights=exp_decay_weights(idx.size, hl),
            dates=tuple(self.dates[i] for i in idx),
            spec=self.spec,
        )


def assemble_dataset(spec: ModelSpec, table: SeriesTable) -> Dataset:
    """Align Y, A and X on common usable rows and drop outlier rows.

    A row is dropped when its own date, or the date referenced by any of
    its lagged regressors, falls in an outlier window; contaminated lags
    would otherwise reintroduce the outlier.  Weights are recomputed on
    the surviving rows.
    """
    needed = list(spec.dependent.proxies)
    for g in spec.exogenous:
        needed.extend(g.proxies)
    seen = set()
    needed = [n for n in needed if not (n in seen or seen.add(n))]
    full = table.matrix(needed)
    if not np.all(np.isfinite(full)):
        raise DataError("series contain missing values after alignment")
    col = {name: i for i, name in enumerate(needed)}

    maxlag = spec.max_lag
    s_total = table.nrows
    if maxlag >= s_total:
        raise InsufficientHistoryError(
            f"max lag {maxlag} exceeds the {s_total}-row aligned sample"
        )
    rows = np.arange(maxlag, s_total)

    outliers = set(spec.sample.outliers)
    if outliers:
        ref_lags = sorted({0, *spec.ar_lags, *(l for g in spec.exogenous for l in g.lags)})
        keep = []
        for t in rows:
            dates_hit = (table.dates[t - tau] for tau in ref_lags)
            if not any(d in outliers for d in dates_hit):
                keep.append(t)
        rows = np.array(keep, dtype=int)
    if rows.size < 2:
        raise DegenerateSampleError("no usable rows survive alignment")

    y_idx = [col[p] for p in spec.dependent.proxies]
    Y = full[rows[:, None], y_idx]

    if spec.ar_lags:
        A = np.hstack([full[rows - tau][:, y_idx] for tau in spec.ar_lags])
    else:
        A = np.zeros((rows.size, 0))

    x_parts = []
    for g in spec.exogenous:
        g_idx = [col[p] for p in g.proxies]
        for tau in g.lags:
            x_parts.append(full[rows - tau][:, g_idx])
    X = np.hstack(x_parts) if x_parts else np.zeros((rows.size, 0))

    weights = exp_decay_weights(rows.size, spec.sample.half_life)
    dates = tuple(table.dates[t] for t in rows)
    return Dataset(Y=Y, A=A, X=X, weights=weights, dates=dates, spec=spec)


def full_sample_variance(values: np.ndarray) -> float:
    """Unweighted population variance, the convention used for
    'full_sample' constraint targets."""
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.size < 2:
        raise DegenerateSampleError("variance needs at least two observations")
    return float(np.mean((v - v.mean()) ** 2))
