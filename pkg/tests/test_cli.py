"""Command-line behavior: formats, determinism, exit codes."""

import io
import json
import math

import pytest

from convlab.calibrate import synthesize_drift_stream, write_events_jsonl
from convlab.cli import main, parse_deltas


def run_cli(capsys, *args):
    code = main(list(args))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# ---------------------------------------------------------------------------
# delta grid parsing
# ---------------------------------------------------------------------------


def test_parse_deltas_range_is_inclusive():
    assert parse_deltas("0.1:0.3:0.1") == [0.1, 0.2, 0.3]
    assert parse_deltas("0.1:0.9:0.1") == [round(0.1 * i, 1) for i in range(1, 10)]
    assert parse_deltas("0.5:0.5:0.1") == [0.5]


def test_parse_deltas_comma_list():
    assert parse_deltas("0.2,0.5,0.8") == [0.2, 0.5, 0.8]
    assert parse_deltas(" 0.3 ") == [0.3]


@pytest.mark.parametrize(
    "text", ["0.1:0.9", "0.1:0.9:0.1:0.2", "0.5:0.1:0.1", "0.1:0.9:0", "", "a,b"]
)
def test_parse_deltas_rejects_malformed(text):
    with pytest.raises(ValueError):
        parse_deltas(text)


# ---------------------------------------------------------------------------
# exact
# ---------------------------------------------------------------------------


def test_exact_json_output(capsys):
    code, out, _ = run_cli(capsys, "exact", "--delta", "0.5", "--json")
    assert code == 0
    payload = json.loads(out)
    assert payload["expected_total"] == pytest.approx(8.0)
    assert payload["expected_steps"] == pytest.approx([8.0, 6.0, 4.0, 2.0])
    assert payload["spectral_radius"] == pytest.approx(0.5)
    assert payload["closed_form_failures"] == pytest.approx(5.0)
    assert payload["tail_constant_norm"] == "inf"


def test_exact_degenerate_delta(capsys):
    code, out, _ = run_cli(capsys, "exact", "--delta", "1.0", "--json")
    assert code == 0
    payload = json.loads(out)
    assert payload["expected_total"] == pytest.approx(4.0)
    assert payload["spectral_radius"] == 0.0


def test_exact_counting_convention_switch(capsys):
    code, out, _ = run_cli(
        capsys, "exact", "--delta", "0.5", "--counting-convention", "failures", "--json"
    )
    assert code == 0
    assert json.loads(out)["expected_total"] == pytest.approx(5.0)


def test_exact_text_output(capsys):
    code, out, _ = run_cli(capsys, "exact", "--delta", "0.5")
    assert code == 0
    assert "expected total (attempts) 8.000000" in out
    assert "spectral radius         0.500000" in out


def test_exact_rejects_invalid_delta(capsys):
    assert run_cli(capsys, "exact", "--delta", "0")[0] == 2
    assert run_cli(capsys, "exact", "--delta", "0.5", "--stages", "0")[0] == 2
    assert run_cli(capsys, "exact")[0] == 2  # --delta is required


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def test_sweep_report_shape_and_regions(tmp_path, capsys):
    out_path = tmp_path / "report.csv"
    code, _, err = run_cli(
        capsys, "sweep", "--trials", "500", "--seed", "3", "--out", str(out_path)
    )
    assert code == 0
    assert "sweep: 4500 trials" in err
    lines = out_path.read_text().splitlines()
    assert lines[0] == (
        "delta,theory,mean,std,conservative_factor,p99,success_rate_percent,"
        "efficiency,ci_width_99,region"
    )
    assert len(lines) == 10
    regions = [line.split(",")[-1] for line in lines[1:]]
    assert regions == ["Marginal"] * 2 + ["Practical"] * 4 + ["HighPerformance"] * 3
    for line in lines[1:]:
        cells = line.split(",")
        assert cells[6] == "100.000000"  # success percentage at cutoff 1000
        assert float(cells[1]) == pytest.approx(4.0 / float(cells[0]), abs=1e-6)


def test_sweep_output_is_byte_identical(tmp_path, capsys):
    first = tmp_path / "one.csv"
    second = tmp_path / "two.csv"
    for path in (first, second):
        code, _, _ = run_cli(
            capsys,
            "sweep", "--deltas", "0.2,0.6", "--trials", "400",
            "--seed", "11", "--out", str(path),
        )
        assert code == 0
    assert first.read_bytes() == second.read_bytes()


def test_sweep_resource_metrics_optin(tmp_path, capsys):
    out_path = tmp_path / "report.csv"
    code, _, _ = run_cli(
        capsys,
        "sweep", "--deltas", "0.5", "--trials", "100", "--seed", "1",
        "--out", str(out_path), "--resource-metrics",
    )
    assert code == 0
    header = out_path.read_text().splitlines()[0]
    assert "runtime_seconds" in header
    assert "throughput" in header


def test_sweep_json_format(tmp_path, capsys):
    out_path = tmp_path / "report.json"
    code, _, _ = run_cli(
        capsys,
        "sweep", "--deltas", "0.5", "--trials", "200", "--seed", "1",
        "--format", "json", "--out", str(out_path),
    )
    assert code == 0
    rows = json.loads(out_path.read_text())
    assert len(rows) == 1
    assert rows[0]["region"] == "Practical"
    assert "runtime_seconds" not in rows[0]  # volatile fields stay opt-in
    assert rows[0]["theory"] == pytest.approx(8.0)


def test_sweep_degenerate_delta_row(tmp_path, capsys):
    out_path = tmp_path / "report.csv"
    code, _, _ = run_cli(
        capsys,
        "sweep", "--deltas", "1.0", "--trials", "10", "--seed", "0",
        "--out", str(out_path),
    )
    assert code == 0
    cells = out_path.read_text().splitlines()[1].split(",")
    assert cells[2] == "4.000000"  # mean
    assert cells[3] == "0.000000"  # std


def test_sweep_writes_to_stdout_by_default(capsys):
    code, out, _ = run_cli(capsys, "sweep", "--deltas", "0.5", "--trials", "50", "--seed", "1")
    assert code == 0
    assert out.startswith("delta,theory,")


def test_sweep_seed_resolution(tmp_path, capsys, monkeypatch):
    flagged = tmp_path / "flagged.csv"
    env_only = tmp_path / "env.csv"
    defaulted = tmp_path / "defaulted.csv"

    monkeypatch.delenv("CONVLAB_SEED", raising=False)
    run_cli(capsys, "sweep", "--deltas", "0.5", "--trials", "100", "--seed", "42",
            "--out", str(flagged))
    run_cli(capsys, "sweep", "--deltas", "0.5", "--trials", "100", "--out", str(defaulted))
    # no flag and no environment falls back to the documented default 42
    assert flagged.read_bytes() == defaulted.read_bytes()

    monkeypatch.setenv("CONVLAB_SEED", "42")
    run_cli(capsys, "sweep", "--deltas", "0.5", "--trials", "100", "--out", str(env_only))
    assert env_only.read_bytes() == flagged.read_bytes()

    # explicit flag beats the environment
    other = tmp_path / "other.csv"
    monkeypatch.setenv("CONVLAB_SEED", "7")
    run_cli(capsys, "sweep", "--deltas", "0.5", "--trials", "100", "--seed", "42",
            "--out", str(other))
    assert other.read_bytes() == flagged.read_bytes()


def test_sweep_rejects_bad_env_seed(capsys, monkeypatch):
    monkeypatch.setenv("CONVLAB_SEED", "not-a-number")
    code, _, err = run_cli(capsys, "sweep", "--deltas", "0.5", "--trials", "10")
    assert code == 2
    assert "CONVLAB_SEED" in err


@pytest.mark.parametrize(
    "args",
    [
        ("sweep", "--trials", "0"),
        ("sweep", "--deltas", "1.5", "--trials", "10"),
        ("sweep", "--deltas", "0.5:0.1:0.1", "--trials", "10"),
        ("sweep", "--deltas", "0.5", "--trials", "10", "--cutoff", "3"),
    ],
)
def test_sweep_usage_errors(capsys, args):
    assert run_cli(capsys, *args)[0] == 2


def test_sweep_io_error_leaves_no_file(tmp_path, capsys):
    target = tmp_path / "missing" / "report.csv"
    code, _, err = run_cli(
        capsys, "sweep", "--deltas", "0.5", "--trials", "10", "--out", str(target)
    )
    assert code == 3
    assert "error:" in err
    assert not target.exists()


def test_sweep_resource_limit(capsys):
    code, _, err = run_cli(
        capsys, "sweep", "--deltas", "0.5", "--trials", str(2**27), "--seed", "0"
    )
    assert code == 4
    assert "error:" in err


# ---------------------------------------------------------------------------
# tail
# ---------------------------------------------------------------------------


def test_tail_writes_ccdf_and_sidecar(tmp_path, capsys):
    out_path = tmp_path / "tail.csv"
    code, _, err = run_cli(
        capsys,
        "tail", "--delta", "0.5", "--trials", "20000", "--seed", "42",
        "--out", str(out_path),
    )
    assert code == 0
    lines = out_path.read_text().splitlines()
    assert lines[0] == "k,ccdf"
    assert lines[1].startswith("4,")
    sidecar = json.loads((tmp_path / "tail.csv.meta.json").read_text())
    assert sidecar["theoretical_slope"] == pytest.approx(math.log(0.5))
    assert sidecar["fitted_slope"] < 0.0
    assert "fitted slope" in err


def test_tail_stdout_mode(capsys):
    code, out, _ = run_cli(capsys, "tail", "--delta", "0.5", "--trials", "1000", "--seed", "1")
    assert code == 0
    assert out.splitlines()[0] == "k,ccdf"


def test_tail_handles_insufficient_tail(tmp_path, capsys):
    out_path = tmp_path / "tail.csv"
    code, _, err = run_cli(
        capsys,
        "tail", "--delta", "1.0", "--trials", "10", "--seed", "1",
        "--out", str(out_path),
    )
    assert code == 0  # degenerate distribution: no fit, still a valid export
    assert json.loads((tmp_path / "tail.csv.meta.json").read_text())["fitted_slope"] is None
    assert "no fit" in err


@pytest.mark.xfail(
    strict=True,
    reason="the four-stage total carries a cubic prefactor, so the local "
    "log-CCDF slope ln(1-delta) + 3/k stays shallower than the asymptotic "
    "rate over the whole fitted span and a least-squares line lands 25-34% "
    "short at any sample size; measured 29.6% at delta=0.5 and 24.8% at "
    "delta=0.9 with 1e6 trials.",
)
@pytest.mark.parametrize("delta", [0.5, 0.9])
def test_tail_fit_matches_asymptotic_rate(tmp_path, capsys, delta):
    out_path = tmp_path / "tail.csv"
    code, _, _ = run_cli(
        capsys,
        "tail", "--delta", str(delta), "--trials", "1000000", "--seed", "42",
        "--out", str(out_path),
    )
    assert code == 0
    sidecar = json.loads((tmp_path / "tail.csv.meta.json").read_text())
    target = math.log1p(-delta)
    assert abs(sidecar["fitted_slope"] - target) <= 0.10 * abs(target)


# ---------------------------------------------------------------------------
# monitor
# ---------------------------------------------------------------------------


def drift_file(tmp_path):
    events = synthesize_drift_stream([(0.7, 500), (0.2, 500)], seed=9001)
    path = tmp_path / "events.jsonl"
    write_events_jsonl(events, path)
    return path


def test_monitor_reports_drift(tmp_path, capsys):
    trace_path = tmp_path / "trace.csv"
    code, _, err = run_cli(
        capsys,
        "monitor", "--input", str(drift_file(tmp_path)), "--out", str(trace_path),
    )
    assert code == 0
    lines = trace_path.read_text().splitlines()
    assert lines[0] == "ts,delta_hat,region,action"
    assert len(lines) == 1001
    actions = [line for line in lines[1:] if not line.endswith(",NoAction")]
    assert len(actions) == 1
    assert actions[0].startswith("573,")
    assert "1 actions" in err


def test_monitor_reads_stdin(tmp_path, capsys, monkeypatch):
    content = drift_file(tmp_path).read_text()
    monkeypatch.setattr("sys.stdin", io.StringIO(content))
    code, out, _ = run_cli(capsys, "monitor", "--input", "-")
    assert code == 0
    assert out.splitlines()[0] == "ts,delta_hat,region,action"


def test_monitor_empty_input(tmp_path, capsys):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    code, out, _ = run_cli(capsys, "monitor", "--input", str(path))
    assert code == 0
    assert out == "ts,delta_hat,region,action\n"


def test_monitor_malformed_line(tmp_path, capsys):
    path = tmp_path / "events.jsonl"
    path.write_text(
        '{"trial": 0, "stage": 1, "attempt": 1, "success": true, "ts": 0}\n'
        "garbage\n"
    )
    code, _, err = run_cli(capsys, "monitor", "--input", str(path))
    assert code == 5
    assert "line 2" in err


def test_monitor_out_of_order_stream(tmp_path, capsys):
    path = tmp_path / "events.jsonl"
    path.write_text(
        '{"trial": 0, "stage": 1, "attempt": 1, "success": true, "ts": 9}\n'
        '{"trial": 0, "stage": 1, "attempt": 2, "success": true, "ts": 3}\n'
    )
    code, _, err = run_cli(capsys, "monitor", "--input", str(path))
    assert code == 6
    assert "error:" in err


def test_monitor_rejects_inverted_thresholds(tmp_path, capsys):
    code, _, _ = run_cli(
        capsys,
        "monitor", "--input", str(drift_file(tmp_path)),
        "--trigger", "0.5", "--rearm", "0.4",
    )
    assert code == 2


def test_monitor_missing_input_file(capsys):
    code, _, _ = run_cli(capsys, "monitor", "--input", "/no/such/file.jsonl")
    assert code == 3


# ---------------------------------------------------------------------------
# distribution
# ---------------------------------------------------------------------------


def test_distribution_histogram(tmp_path, capsys):
    out_path = tmp_path / "hist.csv"
    code, _, _ = run_cli(
        capsys,
        "distribution", "--delta", "0.1", "--trials", "10000", "--seed", "42",
        "--out", str(out_path),
    )
    assert code == 0
    lines = out_path.read_text().splitlines()
    assert lines[0] == "k,count"
    counts = [int(line.split(",")[1]) for line in lines[1:]]
    assert sum(counts) == 10000
    sidecar = json.loads((tmp_path / "hist.csv.meta.json").read_text())
    # the four-iteration floor has probability delta^4 = 1e-4, so a 10k-trial
    # sample may or may not reach it
    assert 4 <= sidecar["min"] <= 5
    assert sidecar["max"] >= 97  # slow-convergence support reaches deep tails
    assert abs(sidecar["p99"] - 97) <= 2
    assert set(sidecar) >= {"delta", "trials", "seed", "p25", "p50", "p75", "p99"}


def test_distribution_degenerate_delta(tmp_path, capsys):
    out_path = tmp_path / "hist.csv"
    code, _, _ = run_cli(
        capsys,
        "distribution", "--delta", "1.0", "--trials", "50", "--seed", "0",
        "--out", str(out_path),
    )
    assert code == 0
    assert out_path.read_text() == "k,count\n4,50\n"


# ---------------------------------------------------------------------------
# top-level parser
# ---------------------------------------------------------------------------


def test_no_arguments_is_usage_error(capsys):
    assert run_cli(capsys)[0] == 2


def test_unknown_subcommand_is_usage_error(capsys):
    assert run_cli(capsys, "bogus")[0] == 2


def test_help_exits_cleanly(capsys):
    code, out, _ = run_cli(capsys, "--help")
    assert code == 0
    assert "exact" in out and "sweep" in out and "monitor" in out
