import math

import pytest

from repmarket.core import GlobalParams
from repmarket.metrics import HEADLINE, INDICATORS
from repmarket.runner import (ConfigError, ScenarioConfig, collect_reports, compare, comparison_columns,
                              load_config, read_aggregate, run_all, run_scenario)

TINY = GlobalParams(n_providers=40, n_buyers=50, n_steps=14)


def _config(tmp_path, **kw):
    kw.setdefault("params", TINY)
    kw.setdefault("seeds", (0, 1))
    return ScenarioConfig(out_dir=tmp_path, **kw)


def test_config_validation():
    with pytest.raises(ConfigError):
        ScenarioConfig(engine="eigentrust")
    with pytest.raises(ConfigError):
        ScenarioConfig(seeds=())


def test_zero_steps_gives_empty_report():
    result = run_scenario(ScenarioConfig(engine="timedecay", params=TINY.replace(n_steps=0), seeds=(0,)))
    report = result.reports[0]
    assert report.success_rate == 0.0 and report.n_transactions == 0


def test_outputs_written_and_reproducible(tmp_path):
    run_scenario(_config(tmp_path / "a", engine="betapt"))
    run_scenario(_config(tmp_path / "b", engine="betapt"))
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    names = {p.name for p in files}
    assert {"report.txt", "series_quality.csv", "series_revenue.csv", "transactions.log"} <= names
    for rel in files:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes(), rel


def test_series_files_are_step_keyed(tmp_path):
    run_scenario(_config(tmp_path, engine="timedecay"))
    lines = (tmp_path / "timedecay" / "series_quality.csv").read_text().splitlines()
    assert lines[0] == "step,value"
    assert [int(line.split(",")[0]) for line in lines[1:]] == [14]


def test_aggregate_report_round_trip(tmp_path):
    result = run_scenario(_config(tmp_path, engine="peertrust"))
    engine, agg = read_aggregate(tmp_path / "peertrust" / "report.txt")
    assert engine == "peertrust"
    for key in INDICATORS:
        assert agg[key][0] == pytest.approx(result.aggregate[key][0], nan_ok=True)


def test_parallel_matches_serial(tmp_path):
    serial = run_scenario(_config(tmp_path / "s", engine="powertrust"))
    parallel = run_scenario(_config(tmp_path / "p", engine="powertrust", n_jobs=2))
    assert [r.welfare for r in serial.reports] == [r.welfare for r in parallel.reports]


def test_unwritable_output_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ConfigError):
        run_scenario(ScenarioConfig(engine="blind", params=TINY, seeds=(0,), out_dir=blocker / "sub"))


def test_irl_weights_override_utility_coefficients(tmp_path):
    weights = tmp_path / "w.txt"
    weights.write_text("l = 0.1\no = 0.2\nu = 0.3\n")
    cfg = ScenarioConfig(engine="blind", params=TINY, seeds=(0,), irl_weights=weights)
    p = cfg.resolved_params()
    assert (p.l, p.o, p.u) == (0.1, 0.2, 0.3)
    weights.write_text("l = 0.1\n")
    with pytest.raises(ConfigError):
        cfg.resolved_params()


def test_load_config_splits_runner_settings(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("engine = pagerank\nseeds = 3\nn_buyers = 7\n")
    runner, params = load_config(path)
    assert runner == {"engine": "pagerank", "seeds": (0, 1, 2)}
    assert params.n_buyers == 7
    path.write_text("n_buyers = many\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_run_all_shares_seeds_and_writes_comparison(tmp_path):
    results = run_all(["timedecay", "blind"], _config(tmp_path))
    assert set(results) == {"timedecay", "blind"}
    rows = (tmp_path / "comparison.csv").read_text().splitlines()
    assert rows[0].split(",") == comparison_columns()
    assert len(rows) == 3
    found = collect_reports([tmp_path])
    assert set(found) == {"timedecay", "blind"}


def test_compare_rows():
    agg = {k: (float(i + 1), 0.0) for i, k in enumerate(INDICATORS)}
    rows = compare({"x": agg, "y": dict(agg), "blind": {k: (0.5, 0.0) for k in INDICATORS}})
    assert len(rows) == 3
    x, y, blind = rows
    assert {k: v for k, v in x.items() if k != "engine"}.keys() == {k: v for k, v in y.items()
                                                                    if k != "engine"}.keys()
    assert [x[k] for k in INDICATORS] == [y[k] for k in INDICATORS]
    # the blind row carries every indicator like any other
    assert all(not math.isnan(blind[k]) for k in INDICATORS)
    for key in HEADLINE:
        assert blind[f"{key}_rank"] == 3
