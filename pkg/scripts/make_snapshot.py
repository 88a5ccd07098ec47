#!/usr/bin/env python3
"""Generate the vendored data snapshot under data/.

The real study's inputs (FRED national accounts, Investing.com sector
indices) cannot be redistributed, so the repository ships a calibrated
synthetic snapshot with the same shape: quarterly GDP expenditure
component levels and monthly S&P-style sector index levels, sharing a
latent structure in which sector rotations carry growth information
beyond the aggregate index and the expenditure mix measures activity
with component-specific noise.

Headline moments are calibrated to the published study: quarterly GDP
growth variance near 1.24e-4 and quarterly index log-return variance
near 6.348e-3, with a COVID-sized outlier pair in 2020Q2/Q3.

Deterministic: a fixed seed always reproduces identical CSVs.
"""

import calendar
import datetime as dt
import os

import numpy as np

SEED = 20251020
START_YEAR = 1989
START_MONTH = 10  # monthly data begins 1989-10, quarterly 1989Q4
N_MONTHS = 432  # through 2025-09
OUT_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data")

# (name, rotation loading, unused legacy vol); loadings are chosen so the
# cap-weighted rotation exposure of the aggregate index is nearly zero
SECTORS = [
    ("energy", -1.3, 0.102),
    ("materials", -0.6, 0.094),
    ("industrials", 0.7, 0.085),
    ("financials", 0.7, 0.096),
    ("healthcare", -1.0, 0.078),
    ("discretionary", 1.2, 0.090),
    ("staples", -1.3, 0.065),
    ("telecom", -0.5, 0.088),
    ("tech", 0.8, 0.110),
    ("utilities", -1.2, 0.070),
]
CAP_WEIGHTS = np.array([0.07, 0.03, 0.09, 0.13, 0.12, 0.11, 0.07, 0.08, 0.22, 0.08])

COMPONENTS = [
    ("cons", 0.85, 0.0039, 0.0050),
    ("inv", 3.80, 0.0201, 0.0035),
    ("govt", -0.55, 0.0075, 0.0045),
    ("exp", 1.60, 0.0143, 0.0080),
    ("imp", 2.30, 0.0125, 0.0090),
]
ACCOUNTING = np.array([0.675, 0.175, 0.180, 0.110, -0.140])

ROTATION_SIGNAL = 1.7  # weight of the rotation factor in the market signal
MARKET_SD_M = 0.0460  # monthly common factor sd
ROT_SD_M = 0.0180  # monthly rotation factor sd
IDIO_SD_M = 0.0130  # monthly sector idiosyncratic sd
PHI_AR = (0.22, 0.08)
BETA_LAGS = np.array([0.0612, 0.0446, 0.0288, 0.0140])
ACTIVITY_NOISE = 0.00350  # structural noise sd of latent activity growth


def month_end(year: int, month: int) -> dt.date:
    return dt.date(year, month, calendar.monthrange(year, month)[1])


def month_iter(start_year: int, start_month: int, count: int):
    y, m = start_year, start_month
    for _ in range(count):
        yield y, m
        m += 1
        if m > 12:
            m, y = 1, y + 1


def main() -> None:
    rng = np.random.default_rng(SEED)
    months = list(month_iter(START_YEAR, START_MONTH, N_MONTHS))
    n_quarters = N_MONTHS // 3

    # monthly factors; mild persistence in the rotation factor
    mkt = rng.normal(0.0068, MARKET_SD_M, size=N_MONTHS)
    rot = np.zeros(N_MONTHS)
    shocks = rng.normal(0.0, ROT_SD_M, size=N_MONTHS)
    for t in range(N_MONTHS):
        rot[t] = (0.25 * rot[t - 1] if t else 0.0) + shocks[t]

    # monthly sector log-returns and levels
    sector_returns = {}
    for (name, rot_load, _vol), cap in zip(SECTORS, CAP_WEIGHTS):
        idio = rng.normal(0.0, IDIO_SD_M, size=N_MONTHS)
        sector_returns[name] = mkt + rot_load * rot + idio

    # the 2020 crash/rebound shows up in the common factor
    crash = {(2020, 2): -0.09, (2020, 3): -0.14, (2020, 4): 0.11, (2020, 11): 0.05}
    for (yy, mm), bump in crash.items():
        idx = months.index((yy, mm))
        for name in sector_returns:
            sector_returns[name][idx] += bump
        mkt[idx] += bump

    spx_returns = sum(
        cap * sector_returns[name] for (name, _r, _v), cap in zip(SECTORS, CAP_WEIGHTS)
    )

    # quarterly aggregates of the factors drive the activity process
    mkt_q = mkt.reshape(n_quarters, 3).sum(axis=1)
    rot_q = rot.reshape(n_quarters, 3).sum(axis=1)
    signal_q = mkt_q + ROTATION_SIGNAL * rot_q  # the latent market growth signal

    activity = np.zeros(n_quarters)
    noise_a = rng.normal(0.0, ACTIVITY_NOISE, size=n_quarters)
    drift = 0.0042
    for t in range(n_quarters):
        val = drift + noise_a[t]
        for k, phi in enumerate(PHI_AR, start=1):
            if t - k >= 0:
                val += phi * (activity[t - k] - drift / (1 - sum(PHI_AR)))
        for k, b in enumerate(BETA_LAGS):
            if t - k >= 0:
                val += b * (signal_q[t - k] - 3 * 0.0068)
        activity[t] = val

    # COVID outlier quarters: 2020Q2 collapse, 2020Q3 rebound
    qdates = [month_end(y, m) for (y, m) in months][2::3]
    q_index = {d: i for i, d in enumerate(qdates)}
    activity[q_index[dt.date(2020, 6, 30)]] -= 0.086
    activity[q_index[dt.date(2020, 9, 30)]] += 0.079

    # expenditure component growths: loadings on activity plus noise
    comp_growth = {}
    for name, load, idio_sd, mu in COMPONENTS:
        idio = rng.normal(0.0, idio_sd, size=n_quarters)
        comp_growth[name] = mu + load * (activity - activity.mean()) + idio

    growth_matrix = np.column_stack([comp_growth[n] for n, *_ in COMPONENTS])
    gdp_growth = growth_matrix @ ACCOUNTING

    # levels
    quarterly_cols = {"gdpc1": 10000.0 * np.exp(np.concatenate([[0.0], np.cumsum(gdp_growth)]))[1:]}
    for name, *_ in COMPONENTS:
        quarterly_cols[name] = 1000.0 * np.exp(np.cumsum(comp_growth[name]))
    monthly_cols = {"spx": 100.0 * np.exp(np.cumsum(spx_returns))}
    for name, *_ in SECTORS:
        monthly_cols[name] = 100.0 * np.exp(np.cumsum(sector_returns[name]))

    os.makedirs(OUT_DIR, exist_ok=True)
    _write_quarterly(qdates, quarterly_cols)
    _write_monthly(months, monthly_cols)
    _report(gdp_growth, spx_returns, qdates)


def _write_quarterly(qdates, cols) -> None:
    # quarter-start date keys, mirroring the national-accounts convention
    path = os.path.join(OUT_DIR, "gdp_components.csv")
    names = list(cols)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("date," + ",".join(names) + "\n")
        for i, d in enumerate(qdates):
            qstart = dt.date(d.year, d.month - 2, 1)
            cells = ",".join(repr(float(cols[n][i])) for n in names)
            fh.write(f"{qstart.isoformat()},{cells}\n")
    print(f"wrote {path}")


def _write_monthly(months, cols) -> None:
    path = os.path.join(OUT_DIR, "spx_sectors.csv")
    names = list(cols)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("date," + ",".join(names) + "\n")
        for i, (y, m) in enumerate(months):
            cells = ",".join(repr(float(cols[n][i])) for n in names)
            fh.write(f"{month_end(y, m).isoformat()},{cells}\n")
    print(f"wrote {path}")


def _report(gdp_growth, spx_monthly, qdates) -> None:
    outl = {dt.date(2020, 6, 30), dt.date(2020, 9, 30)}
    keep = np.array([d not in outl for d in qdates])
    g = gdp_growth[keep]
    spx_q = spx_monthly.reshape(-1, 3).sum(axis=1)[keep]
    print(f"gdp growth var (ex outliers): {np.var(g):.6e}  target 1.24e-04")
    print(f"spx return var (ex outliers): {np.var(spx_q):.6e}  target 6.348e-03")


if __name__ == "__main__":
    main()
