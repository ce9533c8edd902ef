import numpy as np

from repmarket.cli import main
from repmarket.irl import ACTIONS, IrlModel, read_lou, sample_traces


def _config(tmp_path, extra=""):
    path = tmp_path / "run.cfg"
    path.write_text("n_providers = 30\nn_buyers = 40\nn_steps = 12\nseeds = 2\n" + extra)
    return path


def test_simulate_and_compare(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(_config(tmp_path)), "--engine", "all", "--out", str(out)]) == 0
    assert (out / "comparison.csv").exists()
    assert (out / "betapt" / "seed_1" / "transactions.log").exists()
    capsys.readouterr()
    table = tmp_path / "table.csv"
    assert main(["compare", "--in", str(out / "blind"), str(out / "pagerank"), "--out", str(table)]) == 0
    text = capsys.readouterr().out
    assert text == table.read_text()
    assert len(text.splitlines()) == 3


def test_simulate_single_engine_with_seed_override(tmp_path):
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(_config(tmp_path)), "--engine", "timedecay", "--seeds", "1",
                 "--out", str(out)]) == 0
    assert sorted(p.name for p in (out / "timedecay").iterdir() if p.is_dir()) == ["seed_0"]


def test_config_errors_exit_with_one(tmp_path, capsys):
    assert main(["simulate", "--config", str(_config(tmp_path, "bogus = 1\n"))]) == 1
    assert main(["simulate", "--config", str(tmp_path / "missing.cfg")]) == 1
    assert main(["simulate", "--config", str(_config(tmp_path)), "--engine", "eigentrust"]) == 1
    assert main(["compare", "--in", str(tmp_path)]) == 1
    assert "error:" in capsys.readouterr().err


def test_pagerank_nonconvergence_exits_with_two(tmp_path):
    cfg = _config(tmp_path, "pagerank_max_iter = 1\n")
    assert main(["simulate", "--config", str(cfg), "--engine", "pagerank", "--out", str(tmp_path / "o")]) == 2


def _trace_file(tmp_path):
    model = IrlModel()
    rng = np.random.default_rng(0)
    traces = sample_traces(model, np.r_[np.linspace(-1, 1, 7), np.zeros(10)], 200, 20, rng)
    path = tmp_path / "events.csv"
    lines = ["user_id,order,action"]
    for u, trace in enumerate(traces):
        lines += [f"user{u},{t},{ACTIONS[a]}" for t, a in enumerate(trace)]
    path.write_text("\n".join(lines) + "\n")
    return path


def test_irl_fit_writes_weights(tmp_path):
    weights = tmp_path / "weights.txt"
    assert main(["irl", "fit", "--traces", str(_trace_file(tmp_path)), "--out", str(weights)]) == 0
    lou = read_lou(weights)
    assert all(0.0 <= v <= 1.0 for v in lou.values())
    # weights rise with the action index in the teacher, so votes outrank creation
    assert lou["o"] > lou["l"]


def test_irl_fit_iteration_cap_exits_with_two(tmp_path):
    weights = tmp_path / "weights.txt"
    assert main(["irl", "fit", "--traces", str(_trace_file(tmp_path)), "--out", str(weights),
                 "--max-iter", "2"]) == 2
    assert weights.exists()


def test_irl_fit_bad_trace_file(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("u,1,Upvote\n")
    assert main(["irl", "fit", "--traces", str(path), "--out", str(tmp_path / "w")]) == 1
