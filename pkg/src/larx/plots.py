"""Figure rendering for report outputs.

Every report path that writes delimited output also renders a matching
PNG next to it.  Rendering goes through the Agg backend with pinned
metadata so repeated runs produce byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.dates as mdates
import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_forecast", "render_fit_series", "render_caa_spectrum"]

_SAVE_KWARGS = {"dpi": 110, "metadata": {"Software": "larx"}}

plt.rcParams.update(
    {
        "figure.figsize": (9.0, 4.5),
        "axes.grid": True,
        "grid.alpha": 0.3,
        "font.size": 9,
        "axes.titlesize": 10,
        "legend.frameon": False,
    }
)


def render_forecast(run, path: str) -> None:
    """Actuals, one-step forecasts and the naive benchmark over time."""
    used = run.usable()
    dates = [r.date for r in used]
    fig, ax = plt.subplots()
    ax.plot(dates, [r.actual for r in used], color="black", lw=1.2, label="actual")
    ax.plot(dates, [r.forecast for r in used], color="tab:blue", lw=1.2, label="forecast")
    ax.plot(
        dates,
        [r.benchmark for r in used],
        color="tab:gray",
        lw=1.0,
        ls="--",
        label="benchmark",
    )
    ax.xaxis.set_major_locator(mdates.AutoDateLocator())
    ax.set_title(f"{run.label}: out-of-sample forecasts")
    try:
        ax.text(
            0.02,
            0.95,
            f"OOS R$^2$ = {run.oos_r2 * 100:.1f}%",
            transform=ax.transAxes,
            va="top",
            bbox={"boxstyle": "round", "fc": "0.92", "ec": "0.7"},
        )
    except Exception:
        pass
    ax.legend(loc="lower left", ncol=3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def render_fit_series(dates, latent, fitted, label: str, path: str) -> None:
    """In-sample latent dependent against its fitted values."""
    fig, ax = plt.subplots()
    ax.plot(dates, latent, color="black", lw=1.2, label="latent dependent")
    ax.plot(dates, fitted, color="tab:blue", lw=1.2, label="fitted")
    resid = np.asarray(latent) - np.asarray(fitted)
    ax.fill_between(dates, resid, 0, color="tab:red", alpha=0.25, label="residual")
    ax.set_title(f"{label}: in-sample fit")
    ax.legend(loc="lower left", ncol=3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def render_caa_spectrum(eigenvalues, path: str) -> None:
    """Autocorrelation coefficients of the canonical directions."""
    vals = np.asarray(eigenvalues, dtype=float)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.bar(np.arange(1, vals.size + 1), vals, color="tab:blue", width=0.6)
    ax.axhline(0.0, color="black", lw=0.8)
    ax.set_xlabel("direction (strongest first)")
    ax.set_ylabel("autocorrelation coefficient")
    ax.set_title("canonical autocorrelation spectrum")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)
