"""Command-line front end.

Subcommands::

    larx fit      --config cfg.json [--data csv]... [--out dir] [--format json|csv]
    larx forecast --config cfg.json ...
    larx caa      --config cfg.json ...
    larx synth    --config cfg.json ...
    larx check    --config cfg.json ...

A config is a single JSON document describing data files, transforms,
the model, sampling options and outputs; see the README for the schema.
Every run resolves its configuration fully (constraint-target tokens
included) and echoes the resolved form into its JSON report, so a
report can be re-run byte-identically.  All randomness flows from the
single ``solver.seed``.

Errors exit nonzero after printing a machine-readable JSON object
``{"error": <stable code>, "message": ...}``.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .checks import run_checks
from .clarx import fit as clarx_fit, predict
from .design import (
    DependentSpec,
    ExogenousGroup,
    ModelSpec,
    SampleOptions,
    SeriesTable,
    SolverOptions,
    assemble_dataset,
    canonical_quarterly,
    full_sample_variance,
    log_return_table,
    quarter_end_sample,
)
from .diagnostics import conditional_stderr, ols_view
from .errors import DataError, LarxError, SpecError
from .harness import rolling_oos_forecast, synth_generate
from .moments import weighted_cov
from .special import caa_decompose

__all__ = ["load_csv", "build_run_config", "run", "main"]

VARIANTS = ("baseline", "latent_x", "latent_y", "latent_both")


# ---------------------------------------------------------------------------
# CSV ingestion


def load_csv(path: str) -> SeriesTable:
    """Read a ``date,<name>,...`` CSV into a series table.

    Dates are ISO-8601 and must be strictly ascending; empty cells
    become missing values that inner-join alignment later drops.  Parse
    failures name the offending cell.
    """
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        if not header or header[0].lower() != "date":
            raise DataError(f"{path}: first header column must be 'date'")
        names = header[1:]
        if not names:
            raise DataError(f"{path}: no series columns")
        if len(set(names)) != len(names):
            raise DataError(f"{path}: duplicate series names in header")
        dates: list[dt.date] = []
        values: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}"
                )
            try:
                d = dt.date.fromisoformat(row[0].strip())
            except ValueError:
                raise DataError(
                    f"{path}:{lineno}: unparseable date {row[0]!r}"
                ) from None
            if dates:
                if d == dates[-1]:
                    raise DataError(f"{path}:{lineno}: duplicate date {d.isoformat()}")
                if d < dates[-1]:
                    raise DataError(
                        f"{path}:{lineno}: dates out of order ({d.isoformat()} "
                        f"after {dates[-1].isoformat()})"
                    )
            parsed = []
            for name, cell in zip(names, row[1:]):
                cell = cell.strip()
                if cell == "":
                    parsed.append(math.nan)
                    continue
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}:{lineno}: unparseable value {cell!r} "
                        f"in column {name!r}"
                    ) from None
            dates.append(d)
            values.append(parsed)
    if not dates:
        raise DataError(f"{path}: no data rows")
    arr = np.array(values, dtype=float)
    columns = {name: arr[:, i] for i, name in enumerate(names)}
    freq = _infer_frequency(dates)
    return SeriesTable(tuple(dates), columns, freq)


def _infer_frequency(dates: list[dt.date]) -> str:
    if len(dates) < 2:
        return "quarterly"
    gaps = [(b - a).days for a, b in zip(dates, dates[1:])]
    return "monthly" if float(np.median(gaps)) <= 45.0 else "quarterly"


def write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(c) for c in row])


def _format_cell(c) -> str:
    if c is None:
        return ""
    if isinstance(c, float):
        return repr(c)
    if isinstance(c, dt.date):
        return c.isoformat()
    return str(c)


def write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


# ---------------------------------------------------------------------------
# configuration


class RunConfig:
    """Fully resolved run configuration."""

    def __init__(self, raw: dict, base_dir: str):
        self.raw = raw
        self.base_dir = base_dir
        self.label = str(raw.get("label", "model"))
        data = raw.get("data", [])
        if isinstance(data, str):
            data = [data]
        self.data_paths = [self._resolve_path(p) for p in data]
        transform = raw.get("transform", {})
        self.to_quarterly = bool(transform.get("quarterly", True))
        self.log_returns = transform.get("log_returns", False)
        self.output = raw.get("output", {})
        self.plots = bool(self.output.get("plots", True))
        self.model_raw = raw.get("model")
        self.sample_raw = raw.get("sample", {})
        self.solver_raw = raw.get("solver", {})
        self.synth_raw = raw.get("synth", {})

    def _resolve_path(self, p: str) -> str:
        return p if os.path.isabs(p) else os.path.join(self.base_dir, p)

    def solver_options(self) -> SolverOptions:
        s = self.solver_raw
        return SolverOptions(
            max_iter=int(s.get("max_iter", 500)),
            tol=float(s.get("tol", 1e-10)),
            tol_objective=float(s.get("tol_objective", 1e-12)),
            relax=float(s.get("relax", 1.0)),
            seed=int(s.get("seed", 0)),
        )

    def sample_options(self) -> SampleOptions:
        s = self.sample_raw
        outliers = tuple(dt.date.fromisoformat(x) for x in s.get("outliers", []))
        fs = s.get("forecast_start")
        return SampleOptions(
            half_life=None if s.get("half_life") in (None, "inf") else float(s["half_life"]),
            min_dof=int(s.get("min_dof", 0)),
            outliers=outliers,
            forecast_start=dt.date.fromisoformat(fs) if fs else None,
        )


def build_run_config(config_path: str, extra_data: list[str], out_dir: str | None) -> RunConfig:
    try:
        with open(config_path, encoding="utf-8") as handle:
            raw = json.load(handle)
    except OSError as exc:
        raise DataError(f"cannot read config {config_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{config_path}: invalid JSON ({exc})") from exc
    if "config" in raw and "model" not in raw:
        raw = raw["config"]  # accept a previously emitted report
    cfg = RunConfig(raw, os.path.dirname(os.path.abspath(config_path)))
    for p in extra_data:
        cfg.data_paths.append(os.path.abspath(p))
    if out_dir:
        cfg.output = dict(cfg.output)
    cfg.out_dir = os.path.abspath(out_dir or cfg.output.get("dir", "."))
    return cfg


def load_table(cfg: RunConfig) -> SeriesTable:
    """Load, quarterize, merge and transform the configured data."""
    if not cfg.data_paths:
        raise DataError("no data files configured")
    tables = []
    for p in cfg.data_paths:
        t = load_csv(p)
        if cfg.to_quarterly:
            t = quarter_end_sample(t) if t.frequency == "monthly" else canonical_quarterly(t)
        tables.append(t)
    merged = tables[0]
    for t in tables[1:]:
        merged = merged.merge(t)
    merged = merged.drop_missing()
    if cfg.log_returns:
        names = None if cfg.log_returns is True or cfg.log_returns == "all" else list(cfg.log_returns)
        _require_contiguous(merged)
        merged = log_return_table(merged, names)
    return merged


def _require_contiguous(table: SeriesTable) -> None:
    """Refuse to difference across gaps in the period grid."""
    from .design import quarter_end_date

    if table.frequency != "quarterly":
        return
    for a, b in zip(table.dates, table.dates[1:]):
        expected = quarter_end_date(a + dt.timedelta(days=1))
        if b != expected:
            raise DataError(
                f"gap in quarterly series between {a.isoformat()} and "
                f"{b.isoformat()}; refusing to take returns across it"
            )


def _resolve_target(token, table: SeriesTable, proxies: tuple[str, ...], outliers) -> float | None:
    """Resolve a variance-target literal or 'full_sample[:column]' token
    against the outlier-removed transformed sample."""
    if token is None:
        return None
    if isinstance(token, (int, float)):
        return float(token)
    if isinstance(token, str):
        if token == "full_sample":
            if len(proxies) != 1:
                raise SpecError(
                    "plain 'full_sample' needs a single proxy; use "
                    "'full_sample:<column>' for multi-proxy groups"
                )
            column = proxies[0]
        elif token.startswith("full_sample:"):
            column = token.split(":", 1)[1]
        else:
            raise SpecError(f"unknown variance target token {token!r}")
        if column not in table.columns:
            raise SpecError(f"variance target column {column!r} not in the data")
        keep = [i for i, d in enumerate(table.dates) if d not in set(outliers)]
        return full_sample_variance(table.columns[column][keep])
    raise SpecError(f"bad variance target {token!r}")


def build_model_spec(cfg: RunConfig, table: SeriesTable) -> tuple[ModelSpec, dict]:
    """Construct the model from config, resolving target tokens.

    Returns the spec plus a resolved-config echo in which every token
    has been replaced by its literal value.
    """
    raw = cfg.model_raw
    if not raw:
        raise SpecError("config has no 'model' section")
    variant = raw.get("variant", "latent_both")
    if variant not in VARIANTS:
        raise SpecError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    dep_latent = variant in ("latent_y", "latent_both")
    x_latent = variant in ("latent_x", "latent_both")
    sample = cfg.sample_options()

    dep_raw = raw.get("dependent", {})
    proxies = tuple(dep_raw.get("proxies", ()))
    var_target = (
        _resolve_target(dep_raw.get("variance_target"), table, proxies, sample.outliers)
        if dep_latent
        else None
    )
    dependent = DependentSpec(
        proxies=proxies,
        latent=dep_latent,
        variance_target=var_target,
        sum_target=dep_raw.get("sum_target"),
    )

    groups = []
    resolved_groups = []
    for g_raw in raw.get("exogenous", []):
        g_proxies = tuple(g_raw.get("proxies", ()))
        lags = tuple(int(l) for l in g_raw.get("lags", ()))
        g_var = (
            _resolve_target(g_raw.get("variance_target"), table, g_proxies, sample.outliers)
            if x_latent
            else None
        )
        constrained_lag = g_raw.get("constrained_lag", lags[0] if lags else 0)
        if constrained_lag not in lags:
            raise SpecError(
                f"group {g_raw.get('name')!r}: constrained_lag {constrained_lag} "
                f"is not one of its lags {lags}"
            )
        group = ExogenousGroup(
            name=str(g_raw.get("name", f"group{len(groups)}")),
            proxies=g_proxies,
            lags=lags,
            latent=x_latent,
            variance_target=g_var,
            sum_target=g_raw.get("sum_target") if x_latent else None,
            constrained_version=lags.index(constrained_lag),
        )
        groups.append(group)
        resolved_groups.append(
            {
                "name": group.name,
                "proxies": list(g_proxies),
                "lags": list(lags),
                "variance_target": g_var,
                "sum_target": group.sum_target,
                "constrained_lag": constrained_lag,
            }
        )

    spec = ModelSpec(
        dependent=dependent,
        ar_lags=tuple(int(l) for l in raw.get("ar_lags", ())),
        exogenous=tuple(groups),
        solver=cfg.solver_options(),
        sample=sample,
    )
    resolved = {
        "label": cfg.label,
        "data": [os.path.relpath(p, cfg.base_dir) for p in cfg.data_paths],
        "transform": {"quarterly": cfg.to_quarterly, "log_returns": cfg.log_returns},
        "model": {
            "variant": variant,
            "dependent": {
                "proxies": list(proxies),
                "variance_target": var_target,
                "sum_target": dependent.sum_target,
            },
            "ar_lags": list(spec.ar_lags),
            "exogenous": resolved_groups,
        },
        "sample": {
            "half_life": sample.half_life,
            "min_dof": sample.min_dof,
            "outliers": [d.isoformat() for d in sample.outliers],
            "forecast_start": sample.forecast_start.isoformat()
            if sample.forecast_start
            else None,
        },
        "solver": {
            "max_iter": spec.solver.max_iter,
            "tol": spec.solver.tol,
            "tol_objective": spec.solver.tol_objective,
            "relax": spec.solver.relax,
            "seed": spec.solver.seed,
        },
        "output": {"plots": cfg.plots},
        "synth": cfg.synth_raw,
    }
    return spec, resolved


# ---------------------------------------------------------------------------
# commands


def _emit_fit_report(cfg, spec, resolved, dataset, result, fmt):
    payload = {
        "command": "fit",
        "label": cfg.label,
        "config": resolved,
        "coefficients": _coefficients_dict(result, spec),
        "multipliers": {
            "rho_y": result.rho_y,
            "rho_l": result.rho_l,
            "lambda_x": {g.name: float(v) for g, v in zip(spec.exogenous, result.lambda_x)},
            "lambda_p": {g.name: float(v) for g, v in zip(spec.exogenous, result.lambda_p)},
        },
        "convergence": {
            "iterations": result.iterations,
            "converged": result.converged,
            "objective": result.objective,
            "objective_initial": result.objective_initial,
            "relaxation": result.relaxation,
            "pinv_used": result.pinv_used,
        },
        "constraint_residuals": result.constraint_residuals,
        "sample": {
            "rows": dataset.nrows,
            "first_date": dataset.dates[0].isoformat(),
            "last_date": dataset.dates[-1].isoformat(),
            "parameters": spec.n_parameters(),
        },
        "ols_views": _ols_views_dict(result, dataset, spec),
    }
    latent, fitted, resid = predict(result, dataset)
    artifacts = []
    if fmt in ("json", "both"):
        p = os.path.join(cfg.out_dir, "fit_report.json")
        write_json(p, payload)
        artifacts.append(p)
    if fmt in ("csv", "both"):
        p = os.path.join(cfg.out_dir, "fit_series.csv")
        write_csv(
            p,
            ["date", "latent_dependent", "fitted", "residual"],
            [
                [d, float(l), float(f), float(r)]
                for d, l, f, r in zip(dataset.dates, latent, fitted, resid)
            ],
        )
        artifacts.append(p)
    if cfg.plots:
        from .plots import render_fit_series

        p = os.path.join(cfg.out_dir, "fit_series.png")
        render_fit_series(list(dataset.dates), latent, fitted, cfg.label, p)
        artifacts.append(p)
    return payload, artifacts


def _coefficients_dict(result, spec) -> dict:
    coeff = {"c": result.c, "w": {}, "phi": {}, "omega": {}, "beta": {}}
    for name, val in zip(spec.dependent.proxies, result.w):
        coeff["w"][name] = float(val)
    for lag, val in zip(spec.ar_lags, result.phi):
        coeff["phi"][f"lag{lag}"] = float(val)
    if result.omega is not None:
        for g, block in zip(spec.exogenous, result.omega.blocks()):
            coeff["omega"][g.name] = {p: float(v) for p, v in zip(g.proxies, block)}
    if result.beta is not None:
        for g, block in zip(spec.exogenous, result.beta.blocks()):
            coeff["beta"][g.name] = {f"lag{l}": float(v) for l, v in zip(g.lags, block)}
    return coeff


def _ols_views_dict(result, dataset, spec) -> dict:
    views = {}
    names = []
    if spec.dependent.latent:
        names.append("w")
    if spec.n_ar_versions:
        names.append("phi")
    if spec.k_groups:
        names.extend(["omega", "beta"])
    for which in names:
        try:
            view = ols_view(result, dataset, which)
            stderr = conditional_stderr(view)
            views[which] = {
                "agreement_gap": view.agreement_gap,
                "ols_coefficients": [float(v) for v in view.ols_coefficients],
                "conditional_stderr": [float(v) for v in stderr],
            }
        except LarxError as exc:
            views[which] = {"error": exc.code, "message": str(exc)}
    return views


def _cmd_fit(cfg: RunConfig, fmt: str) -> dict:
    table = load_table(cfg)
    spec, resolved = build_model_spec(cfg, table)
    dataset = assemble_dataset(spec, table)
    result = clarx_fit(dataset)
    payload, artifacts = _emit_fit_report(cfg, spec, resolved, dataset, result, fmt)
    print(
        f"fit {cfg.label}: converged={result.converged} "
        f"iterations={result.iterations} objective={result.objective:.6g}"
    )
    for a in artifacts:
        print(f"wrote {a}")
    return payload


def _cmd_forecast(cfg: RunConfig, fmt: str) -> dict:
    table = load_table(cfg)
    spec, resolved = build_model_spec(cfg, table)
    run = rolling_oos_forecast(table, spec, label=cfg.label)
    used = run.usable()
    payload = {
        "command": "forecast",
        "label": cfg.label,
        "config": resolved,
        "oos_r2": run.oos_r2,
        "windows": len(run.records),
        "usable_windows": len(used),
        "skipped_windows": len(run.records) - len(used),
        "first_forecast": used[0].date.isoformat(),
        "last_forecast": used[-1].date.isoformat(),
    }
    artifacts = []
    if fmt in ("json", "both"):
        p = os.path.join(cfg.out_dir, "forecast_summary.json")
        write_json(p, payload)
        artifacts.append(p)
    if fmt in ("csv", "both"):
        p = os.path.join(cfg.out_dir, "forecast.csv")
        write_csv(
            p,
            ["date", "actual", "forecast", "benchmark", "skipped", "reason"],
            [
                [
                    r.date,
                    r.actual,
                    r.forecast,
                    r.benchmark,
                    "true" if r.skipped else "false",
                    r.reason,
                ]
                for r in run.records
            ],
        )
        artifacts.append(p)
    if cfg.plots:
        from .plots import render_forecast

        p = os.path.join(cfg.out_dir, "forecast.png")
        render_forecast(run, p)
        artifacts.append(p)
    print(f"forecast {cfg.label}: OOS R^2 = {run.oos_r2 * 100:.1f}% over {len(used)} windows")
    for a in artifacts:
        print(f"wrote {a}")
    return payload


def _cmd_caa(cfg: RunConfig, fmt: str) -> dict:
    import warnings as _warnings

    table = load_table(cfg)
    spec, resolved = build_model_spec(cfg, table)
    proxies = spec.dependent.proxies
    M = table.matrix(list(proxies))
    Y, A = M[1:], M[:-1]
    from .moments import exp_decay_weights

    w = exp_decay_weights(Y.shape[0], spec.sample.half_life)
    with _warnings.catch_warnings(record=True) as caught:
        _warnings.simplefilter("always")
        decomp = caa_decompose(
            weighted_cov(Y, Y, w), weighted_cov(A, A, w), weighted_cov(A, Y, w)
        )
    payload = {
        "command": "caa",
        "label": cfg.label,
        "config": resolved,
        "autocorrelations": [float(v) for v in decomp.eigenvalues],
        "stationarity_gap": decomp.stationarity_gap,
        "warnings": [str(c.message) for c in caught],
    }
    artifacts = []
    if fmt in ("json", "both"):
        p = os.path.join(cfg.out_dir, "caa_summary.json")
        write_json(p, payload)
        artifacts.append(p)
    if fmt in ("csv", "both"):
        p = os.path.join(cfg.out_dir, "caa_pairs.csv")
        rows = []
        for rank in range(decomp.eigenvalues.size):
            rows.append(
                [rank + 1, float(decomp.eigenvalues[rank])]
                + [float(v) for v in decomp.weights[:, rank]]
            )
        write_csv(p, ["rank", "autocorrelation", *proxies], rows)
        artifacts.append(p)
    if cfg.plots:
        from .plots import render_caa_spectrum

        p = os.path.join(cfg.out_dir, "caa.png")
        render_caa_spectrum(decomp.eigenvalues, p)
        artifacts.append(p)
    print(
        f"caa {cfg.label}: {decomp.eigenvalues.size} directions, "
        f"strongest autocorrelation {decomp.eigenvalues[0]:.4f}"
    )
    for a in artifacts:
        print(f"wrote {a}")
    return payload


def _cmd_synth(cfg: RunConfig, fmt: str) -> dict:
    synth = cfg.synth_raw or {}
    # synth generates data for the configured (latent) model shape;
    # targets must be literals, there is no sample to resolve against
    spec, resolved = build_model_spec(cfg, _SynthTargetTable())
    seed = spec.solver.seed
    table, truth = synth_generate(
        spec,
        noise_sd=float(synth.get("noise_sd", 0.0)),
        eps_sd=float(synth.get("eps_sd", 0.0)),
        n_rows=int(synth.get("rows", 300)),
        seed=seed,
    )
    artifacts = []
    payload = {
        "command": "synth",
        "label": cfg.label,
        "config": resolved,
        "truth": {
            "w": [float(v) for v in truth.w],
            "omega": {
                g.name: [float(v) for v in block]
                for g, block in zip(spec.exogenous, truth.omega_blocks)
            },
            "phi": [float(v) for v in truth.phi],
            "beta": {
                g.name: [float(v) for v in block]
                for g, block in zip(spec.exogenous, truth.beta_blocks)
            },
            "c": truth.c,
            "noise_sd": truth.noise_sd,
            "eps_sd": truth.eps_sd,
            "seed": truth.seed,
        },
    }
    if fmt in ("json", "both"):
        p = os.path.join(cfg.out_dir, "synth_truth.json")
        write_json(p, payload)
        artifacts.append(p)
    if fmt in ("csv", "both"):
        p = os.path.join(cfg.out_dir, "synth_data.csv")
        names = table.names()
        rows = [
            [d] + [float(table.columns[n][i]) for n in names]
            for i, d in enumerate(table.dates)
        ]
        write_csv(p, ["date", *names], rows)
        artifacts.append(p)
    print(f"synth {cfg.label}: {table.nrows} rows, seed {seed}")
    for a in artifacts:
        print(f"wrote {a}")
    return payload


class _SynthTargetTable:
    """Stand-in table for synth configs: targets must be literals."""

    columns: dict = {}
    dates: tuple = ()

    def matrix(self, names):  # pragma: no cover - defensive
        raise SpecError("synth configs must use literal variance targets")


def _cmd_check(cfg: RunConfig, fmt: str) -> dict:
    seed = cfg.solver_options().seed
    results = run_checks(seed)
    all_passed = all(r["passed"] for r in results)
    payload = {
        "command": "check",
        "seed": seed,
        "all_passed": all_passed,
        "checks": results,
    }
    for r in results:
        status = "PASS" if r["passed"] else "FAIL"
        print(f"[{status}] {r['name']}: {r['detail']}")
    if fmt in ("json", "both"):
        p = os.path.join(cfg.out_dir, "check_report.json")
        write_json(p, payload)
        print(f"wrote {p}")
    if not all_passed:
        raise LarxError("one or more property checks failed")
    return payload


COMMANDS = {
    "fit": _cmd_fit,
    "forecast": _cmd_forecast,
    "caa": _cmd_caa,
    "synth": _cmd_synth,
    "check": _cmd_check,
}


def run(command: str, cfg: RunConfig, fmt: str = "both") -> dict:
    """Dispatch a command; returns the report payload."""
    if command not in COMMANDS:
        raise SpecError(f"unknown command {command!r}")
    os.makedirs(cfg.out_dir, exist_ok=True)
    return COMMANDS[command](cfg, fmt)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="larx",
        description="latent-variable time-series regression toolkit",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=(name != "check"), default=None)
        p.add_argument("--data", action="append", default=[])
        p.add_argument("--out", default=None)
        p.add_argument("--format", choices=["json", "csv", "both"], default="both")
    args = parser.parse_args(argv)
    try:
        if args.config is None:
            cfg = RunConfig({}, os.getcwd())
            cfg.out_dir = os.path.abspath(args.out or ".")
        else:
            cfg = build_run_config(args.config, args.data, args.out)
        run(args.command, cfg, args.format)
    except LarxError as exc:
        print(json.dumps({"error": exc.code, "message": str(exc)}), file=sys.stdout)
        return 1
    except Exception as exc:  # noqa: BLE001 - the CLI boundary
        print(
            json.dumps({"error": "internal_error", "message": f"{type(exc).__name__}: {exc}"}),
            file=sys.stdout,
        )
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
