import hashlib
import json
import os

import numpy as np
import pytest

from larx.cli import build_run_config, load_csv, main, run
from larx.errors import DataError

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIGS = os.path.join(REPO, "configs")


def sha256(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestLoadCsv:
    def test_small_file(self, tmp_path):
        p = write(tmp_path, "a.csv", "date,alpha\n2020-03-31,1.5\n2020-06-30,2.5\n2020-09-30,3\n")
        t = load_csv(p)
        assert t.names() == ["alpha"]
        assert t.nrows == 3
        assert t.frequency == "quarterly"
        assert np.array_equal(t.columns["alpha"], [1.5, 2.5, 3.0])

    def test_monthly_frequency_inferred(self, tmp_path):
        rows = "\n".join(f"2020-{m:02d}-28,{m}" for m in range(1, 9))
        t = load_csv(write(tmp_path, "m.csv", "date,v\n" + rows + "\n"))
        assert t.frequency == "monthly"

    def test_out_of_order_dates_named(self, tmp_path):
        p = write(tmp_path, "bad.csv", "date,v\n2020-06-30,1\n2020-03-31,2\n")
        with pytest.raises(DataError) as err:
            load_csv(p)
        assert "out of order" in str(err.value)
        assert ":3:" in str(err.value)  # offending line named

    def test_duplicate_dates_rejected(self, tmp_path):
        p = write(tmp_path, "dup.csv", "date,v\n2020-03-31,1\n2020-03-31,2\n")
        with pytest.raises(DataError) as err:
            load_csv(p)
        assert "duplicate" in str(err.value)

    def test_unparseable_cell_names_cell(self, tmp_path):
        p = write(tmp_path, "bad.csv", "date,v,u\n2020-03-31,1.0,oops\n")
        with pytest.raises(DataError) as err:
            load_csv(p)
        msg = str(err.value)
        assert "oops" in msg and "'u'" in msg and ":2:" in msg

    def test_empty_cells_become_missing(self, tmp_path):
        p = write(tmp_path, "m.csv", "date,v,u\n2020-03-31,1.0,\n2020-06-30,2.0,5\n")
        t = load_csv(p)
        assert np.isnan(t.columns["u"][0])

    def test_missing_header_rejected(self, tmp_path):
        with pytest.raises(DataError):
            load_csv(write(tmp_path, "h.csv", "time,v\n2020-03-31,1\n"))


class TestVendoredPipeline:
    def test_mixed_frequency_alignment(self):
        cfg = build_run_config(os.path.join(CONFIGS, "larx_c.json"), [], "/tmp/x")
        from larx.cli import load_table

        table = cfg and load_table(cfg)
        assert table.frequency == "quarterly"
        # quarterly GDP keyed at quarter start joins the sampled monthly
        # sectors keyed at quarter end; log returns eat one row
        assert table.nrows == 143
        assert "gdpc1" in table.columns and "tech" in table.columns

    def test_fit_command(self, tmp_path):
        cfg = build_run_config(
            os.path.join(CONFIGS, "larx_c.json"), [], str(tmp_path)
        )
        payload = run("fit", cfg, "both")
        assert payload["convergence"]["converged"]
        assert (tmp_path / "fit_report.json").exists()
        assert (tmp_path / "fit_series.csv").exists()
        assert (tmp_path / "fit_series.png").exists()
        report = json.loads((tmp_path / "fit_report.json").read_text())
        # resolved config echoes literal targets
        dep_target = report["config"]["model"]["dependent"]["variance_target"]
        assert isinstance(dep_target, float) and dep_target > 0

    def test_fit_report_roundtrip_reproduces(self, tmp_path):
        cfg = build_run_config(
            os.path.join(CONFIGS, "larx_b.json"), [], str(tmp_path / "one")
        )
        payload = run("fit", cfg, "json")
        echoed = dict(payload["config"])
        echoed["data"] = [
            os.path.join(CONFIGS, p) for p in echoed["data"]
        ]
        cfg_path = tmp_path / "echo.json"
        cfg_path.write_text(json.dumps(echoed))
        cfg2 = build_run_config(str(cfg_path), [], str(tmp_path / "two"))
        payload2 = run("fit", cfg2, "json")
        assert payload["coefficients"] == payload2["coefficients"]
        assert payload["multipliers"] == payload2["multipliers"]

    def test_forecast_outputs_and_csv_schema(self, tmp_path):
        cfg = build_run_config(
            os.path.join(CONFIGS, "baseline.json"), [], str(tmp_path)
        )
        payload = run("forecast", cfg, "both")
        assert 0.0 < payload["oos_r2"] < 1.0
        header = (tmp_path / "forecast.csv").read_text().splitlines()[0]
        assert header == "date,actual,forecast,benchmark,skipped,reason"

    def test_baseline_forecast_coverage_matches_dof_rule(self, tmp_path):
        # 40 required degrees of freedom on top of 7 estimated parameters:
        # with usable quarterly rows starting 1990Q4, the first baseline
        # forecast lands in 2002Q3 (the published coverage start)
        cfg = build_run_config(os.path.join(CONFIGS, "baseline.json"), [], str(tmp_path))
        from larx.cli import build_model_spec, load_table
        from larx.harness import rolling_oos_forecast

        table = load_table(cfg)
        spec, _ = build_model_spec(cfg, table)
        assert spec.n_parameters() == 7
        run_out = rolling_oos_forecast(table, spec, "baseline")
        first = run_out.usable()[0].date
        assert first.isoformat() == "2002-09-30"

    def test_reversed_designs_parse_and_fit(self, tmp_path):
        from larx.cli import build_model_spec, load_table
        from larx.clarx import fit as clarx_fit
        from larx.design import assemble_dataset

        cfg = build_run_config(
            os.path.join(CONFIGS, "larx_c_rev.json"), [], str(tmp_path)
        )
        table = load_table(cfg)
        spec, _ = build_model_spec(cfg, table)
        assert spec.n == 10  # sector panel as the dependent
        assert spec.exogenous[0].m == 5
        res = clarx_fit(assemble_dataset(spec, table))
        assert res.converged

    def test_caa_command(self, tmp_path):
        cfg = build_run_config(os.path.join(CONFIGS, "larx_c.json"), [], str(tmp_path))
        payload = run("caa", cfg, "both")
        assert len(payload["autocorrelations"]) == 5
        header = (tmp_path / "caa_pairs.csv").read_text().splitlines()[0]
        assert header.startswith("rank,autocorrelation,cons,")

    def test_unknown_proxy_is_clean_error(self, tmp_path):
        raw = json.loads(open(os.path.join(CONFIGS, "baseline.json")).read())
        raw["model"]["dependent"]["proxies"] = ["nope"]
        p = tmp_path / "bad.json"
        p.write_text(json.dumps(raw))
        # config paths resolve relative to the config file location
        rc = main(["fit", "--config", str(p), "--out", str(tmp_path)])
        assert rc == 1

    def test_exit_codes_and_error_json(self, tmp_path, capsys):
        rc = main(["fit", "--config", str(tmp_path / "missing.json")])
        out = capsys.readouterr().out.strip().splitlines()[-1]
        err = json.loads(out)
        assert rc == 1
        assert err["error"] == "data_error"


class TestDeterminism:
    def test_synth_byte_identical(self, tmp_path):
        cfg_doc = {
            "label": "syn",
            "model": {
                "variant": "latent_both",
                "dependent": {"proxies": ["p1", "p2"], "variance_target": 1.0},
                "ar_lags": [1],
                "exogenous": [
                    {
                        "name": "g",
                        "proxies": ["q1", "q2", "q3"],
                        "lags": [0, 1],
                        "variance_target": 1.0,
                    }
                ],
            },
            "solver": {"seed": 11},
            "synth": {"noise_sd": 0.01, "rows": 70},
            "output": {"plots": False},
        }
        p = tmp_path / "syn.json"
        p.write_text(json.dumps(cfg_doc))
        hashes = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            cfg = build_run_config(str(p), [], str(out))
            run("synth", cfg, "both")
            hashes.append(
                (sha256(out / "synth_data.csv"), sha256(out / "synth_truth.json"))
            )
        assert hashes[0] == hashes[1]

    def test_forecast_byte_identical(self, tmp_path):
        hashes = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            cfg = build_run_config(os.path.join(CONFIGS, "larx_a.json"), [], str(out))
            run("forecast", cfg, "both")
            hashes.append(
                tuple(
                    sha256(out / f)
                    for f in ("forecast.csv", "forecast_summary.json", "forecast.png")
                )
            )
        assert hashes[0] == hashes[1]

    def test_check_command_passes_and_is_deterministic(self, tmp_path):
        outs = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            rc = main(["check", "--out", str(out)])
            assert rc == 0
            outs.append(sha256(out / "check_report.json"))
        assert outs[0] == outs[1]
