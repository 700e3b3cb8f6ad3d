"""End-to-end command-line tests: files in, files out, exit codes."""

import datetime as dt
import json

import numpy as np
import pytest

from synthctl import logistic_predict
from synthctl.cli import main

START = dt.date(2021, 3, 1)


def _dates(n):
    return [(START + dt.timedelta(days=i)).isoformat() for i in range(n)]


def _long_csv(path, series_by_unit):
    lines = ["unit,date,value"]
    for unit, series in series_by_unit.items():
        for day, value in zip(_dates(len(series)), series):
            lines.append(f"{unit},{day},{float(value)!r}")
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def _wide_csv(path, header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(str(c) for c in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def _study_files(tmp_path, n_donors=4, T=40, seed=0):
    rng = np.random.default_rng(seed)
    donors = {f"{20000 + 2 * j:05d}": 30 + rng.normal(0, 1, T).cumsum()
              for j in range(n_donors)}
    w = rng.dirichlet(np.ones(n_donors))
    treated = sum(wi * np.array(s) for wi, s in zip(w, donors.values()))
    series = {"10001": treated, **donors}
    outcomes = _long_csv(tmp_path / "outcomes.csv", series)
    units = list(series)
    X = rng.normal(size=(len(units), 3))
    predictors = _wide_csv(tmp_path / "predictors.csv", ["unit", "a", "b", "c"],
                           [[u, *map(str, X[i])] for i, u in enumerate(units)])
    return outcomes, predictors


def test_fit_writes_result_and_curve(tmp_path):
    outcomes, predictors = _study_files(tmp_path)
    out = tmp_path / "out"
    code = main(["fit", "--outcomes", outcomes, "--predictors", predictors,
                 "--treated", "10001", "--t0", _dates(40)[25],
                 "--out", str(out), "--seed", "7"])
    assert code == 0
    result = json.loads((out / "result.json").read_text())
    assert result["treated"] == "10001"
    assert sum(result["w"].values()) == pytest.approx(1.0, abs=1e-8)
    assert set(result["mspe"]) == {"train", "validation", "pre"}
    curve = (out / "curve.csv").read_text().splitlines()
    assert curve[0] == "date,actual,synthetic,gap"
    assert len(curve) == 41


def test_fit_identity_donor_reproduces_actual(tmp_path):
    series = {"10001": np.linspace(5, 25, 30), "20002": np.linspace(5, 25, 30)}
    outcomes = _long_csv(tmp_path / "o.csv", series)
    out = tmp_path / "out"
    code = main(["fit", "--outcomes", outcomes, "--treated", "10001",
                 "--t0", _dates(30)[20], "--out", str(out)])
    assert code == 0
    for line in (out / "curve.csv").read_text().splitlines()[1:]:
        _, actual, synthetic, gap = line.split(",")
        assert actual == synthetic
        assert float(gap) == 0.0


def test_fit_missing_predictor_file_exits_2(tmp_path, capsys):
    outcomes, _ = _study_files(tmp_path)
    code = main(["fit", "--outcomes", outcomes,
                 "--predictors", str(tmp_path / "nope.csv"),
                 "--treated", "10001", "--t0", _dates(40)[25],
                 "--out", str(tmp_path / "out")])
    assert code == 2
    assert "nope.csv" in capsys.readouterr().err


def test_fit_missing_required_flag_exits_2(tmp_path, capsys):
    outcomes, _ = _study_files(tmp_path)
    code = main(["fit", "--outcomes", outcomes, "--t0", _dates(40)[25]])
    assert code == 2
    assert "--treated" in capsys.readouterr().err


def test_fit_bad_flag_value_exits_2(tmp_path, capsys):
    outcomes, _ = _study_files(tmp_path)
    code = main(["fit", "--outcomes", outcomes, "--treated", "10001",
                 "--t0", _dates(40)[25], "--l1", "abc"])
    assert code == 2
    assert "--l1" in capsys.readouterr().err


def test_fit_seed_repeat_is_byte_identical(tmp_path):
    outcomes, predictors = _study_files(tmp_path, seed=3)
    outs = []
    for run in ("r1", "r2"):
        out = tmp_path / run
        code = main(["fit", "--outcomes", outcomes, "--predictors", predictors,
                     "--treated", "10001", "--t0", _dates(40)[25],
                     "--out", str(out), "--seed", "7"])
        assert code == 0
        outs.append((out / "result.json").read_bytes())
    assert outs[0] == outs[1]


def test_config_file_supplies_options_and_flags_win(tmp_path):
    outcomes, predictors = _study_files(tmp_path, seed=4)
    cfg_out = tmp_path / "from_config"
    flag_out = tmp_path / "from_flag"
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        f"treated=10001\nt0={_dates(40)[25]}\nout={cfg_out}\nseed=7\n"
        "# comment line\n"
    )
    assert main(["fit", "--outcomes", outcomes, "--config", str(cfg)]) == 0
    assert (cfg_out / "result.json").exists()
    assert main(["fit", "--outcomes", outcomes, "--config", str(cfg),
                 "--out", str(flag_out)]) == 0
    assert (flag_out / "result.json").exists()


def test_config_file_unknown_key_exits_2(tmp_path, capsys):
    outcomes, _ = _study_files(tmp_path)
    cfg = tmp_path / "run.cfg"
    cfg.write_text("treated=10001\nwhatever=1\n")
    code = main(["fit", "--outcomes", outcomes, "--config", str(cfg)])
    assert code == 2
    assert "whatever" in capsys.readouterr().err


def test_placebo_outputs_and_parallel_determinism(tmp_path):
    outcomes, predictors = _study_files(tmp_path, n_donors=4, seed=5)
    payloads = []
    for jobs, name in (("1", "j1"), ("2", "j2")):
        out = tmp_path / name
        code = main(["placebo", "--outcomes", outcomes, "--predictors", predictors,
                     "--treated", "10001", "--t0", _dates(40)[25],
                     "--out", str(out), "--seed", "11", "--jobs", jobs])
        assert code == 0
        payloads.append(((out / "placebo.json").read_bytes(),
                         (out / "pvalues.csv").read_bytes()))
    assert payloads[0] == payloads[1]
    doc = json.loads(payloads[0][0])
    assert doc["treated"] == "10001"
    assert 0.0 <= doc["p_value"] <= 1.0
    assert len(doc["entries"]) == 5
    header, row = payloads[0][1].decode().splitlines()
    assert header == "treated,p_value,n_valid,n_skipped"
    assert row.startswith("10001,")


def test_sweep_writes_sorted_rows(tmp_path):
    outcomes, predictors = _study_files(tmp_path, T=60, seed=6)
    out = tmp_path / "out"
    code = main(["sweep", "--outcomes", outcomes, "--predictors", predictors,
                 "--treated", "10001", "--t0", _dates(60)[40],
                 "--t-fit", "20,10", "--out", str(out)])
    assert code == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0] == "t_fit,pre_deviation,p_value"
    assert [int(l.split(",")[0]) for l in lines[1:]] == [10, 20]


def test_logistic_fits_and_failures(tmp_path):
    T = 60
    t = np.arange(T, dtype=float)
    series = {
        f"{40000 + 2 * i:05d}": logistic_predict(k, 0.15, 1.0, t)
        for i, k in enumerate((50.0, 60.0, 70.0, 80.0))
    }
    series["49999"] = np.full(T, 25.0)  # constant: flagged, not fitted
    outcomes = _long_csv(tmp_path / "o.csv", series)
    units = list(series)
    themes = _wide_csv(tmp_path / "themes.csv", ["unit", "theme1", "global"],
                       [[u, str(0.1 * i), str(0.05 * i)]
                        for i, u in enumerate(units)])
    out = tmp_path / "out"
    code = main(["logistic", "--outcomes", outcomes, "--predictors", themes,
                 "--out", str(out), "--seed", "3"])
    assert code == 0
    fits = (out / "fits.csv").read_text().splitlines()
    assert fits[0] == "unit,K,nu,p0,sse,quadrant"
    assert len(fits) == 5  # four fitted units
    failures = (out / "fit_failures.csv").read_text().splitlines()
    assert len(failures) == 2
    assert failures[1].startswith("49999,")
    regression = (out / "ccvi_regression.csv").read_text().splitlines()
    assert regression[0] == "theme,param,slope,corr"
    assert len(regression) == 5  # 2 themes x {K, nu}
    deciles = (out / "deciles.csv").read_text().splitlines()
    assert deciles[0] == "theme,param,bin,mean,std"


def test_logistic_majority_failure_exits_3(tmp_path, capsys):
    T = 30
    series = {"50001": np.full(T, 10.0), "50003": np.full(T, 20.0)}
    outcomes = _long_csv(tmp_path / "o.csv", series)
    themes = _wide_csv(tmp_path / "t.csv", ["unit", "theme1"],
                       [["50001", "0.2"], ["50003", "0.4"]])
    out = tmp_path / "out"
    code = main(["logistic", "--outcomes", outcomes, "--predictors", themes,
                 "--out", str(out)])
    assert code == 3
    failures = (out / "fit_failures.csv").read_text().splitlines()
    assert len(failures) == 3  # both units listed, files still written


def test_select_predictors_cli(tmp_path):
    rng = np.random.default_rng(2)
    units = [f"{60000 + 2 * i:05d}" for i in range(30)]
    X = rng.normal(size=(30, 4))
    predictors = _wide_csv(tmp_path / "p.csv", ["unit", "a", "b", "c", "d"],
                           [[u, *map(str, X[i])] for i, u in enumerate(units)])
    blocks = _wide_csv(tmp_path / "b.csv", ["block", "predictor"],
                       [["demo", "a"], ["demo", "b"], ["econ", "c"], ["econ", "d"]])
    out = tmp_path / "out"
    code = main(["select-predictors", "--predictors", predictors,
                 "--blocks", blocks, "--out", str(out)])
    assert code == 0
    lines = (out / "selected.csv").read_text().splitlines()
    assert lines[0] == "block,predictor"
    assert len(lines) == 5  # two per block


def test_ingest_cleans_and_reports(tmp_path):
    good = np.linspace(1, 20, 21)
    bad = good.copy()
    bad[5:10] = 0.0  # five zeros after the first positive: 25% bad
    outcomes = _long_csv(tmp_path / "o.csv", {"70001": good, "70003": bad})
    out = tmp_path / "out"
    code = main(["ingest", "--outcomes", outcomes, "--out", str(out)])
    assert code == 0
    dropped = (out / "dropped.csv").read_text().splitlines()
    assert len(dropped) == 2
    assert dropped[1].startswith("70003,")
    clean = (out / "panel_clean.csv").read_text().splitlines()
    assert clean[0] == "unit,date,value"
    assert len(clean) == 22  # one kept unit, 21 days


def test_fit_cluster_filter_falls_back_when_empty(tmp_path, capsys):
    outcomes, predictors = _study_files(tmp_path, seed=8)
    clusters = _wide_csv(tmp_path / "c.csv", ["fips", "cluster"],
                         [["10001", "Solo"], ["20000", "Other"],
                          ["20002", "Other"], ["20004", "Other"],
                          ["20006", "Other"]])
    out = tmp_path / "out"
    code = main(["fit", "--outcomes", outcomes, "--treated", "10001",
                 "--t0", _dates(40)[25], "--filter", "cluster",
                 "--clusters", clusters, "--out", str(out)])
    assert code == 0
    assert "cluster filter left no donors" in capsys.readouterr().err


def test_fit_uniform_v_mode(tmp_path):
    outcomes, predictors = _study_files(tmp_path, seed=9)
    out = tmp_path / "out"
    code = main(["fit", "--outcomes", outcomes, "--predictors", predictors,
                 "--treated", "10001", "--t0", _dates(40)[25],
                 "--v-mode", "uniform", "--out", str(out)])
    assert code == 0
    result = json.loads((out / "result.json").read_text())
    v = list(result["v"].values())
    assert v == pytest.approx([0.25, 0.25, 0.25, 0.25])
