"""Command-line interface: subcommands, exit codes, determinism."""

import filecmp
import math

import numpy as np
import pytest

import niflang.gauss as gauss
from niflang import data_path
from niflang.cli import main
from niflang.gbn import load_model, load_traces, precision_chain, state_from_model
from niflang.reference import parking_chain


def run_cli(*argv):
    return main([str(a) for a in argv])


PROBE = "x := 1; nif (x >= 0, 0.16) { y := 1 } else { y := 2 }"


# --- run -------------------------------------------------------------------


def test_run_deterministic_program_zero_variance(tmp_path, capsys):
    prog = tmp_path / "p.np"
    prog.write_text("x := 2; y := x * 3")
    assert run_cli("run", prog, "--trials", "50", "--out", tmp_path / "out") == 0
    out = capsys.readouterr().out
    assert "y\t50\t6\t0" in out
    summary = (tmp_path / "out" / "store_summary.csv").read_text()
    assert "variable,n,mean,std" in summary
    assert "y,50,6,0" in summary


def test_run_probe_program_frequency(tmp_path, capsys):
    prog = tmp_path / "probe.np"
    prog.write_text(PROBE)
    assert run_cli("run", prog, "--trials", "20000", "--seed", "5") == 0
    out = capsys.readouterr().out
    mean = float(next(l for l in out.splitlines() if l.startswith("y\t")).split("\t")[2])
    # store mean = 2 - p with p the first-branch probability 0.9938
    assert mean == pytest.approx(2.0 - 0.9938, abs=0.01)


def test_run_missing_file_exits_1(tmp_path, capsys):
    assert run_cli("run", tmp_path / "absent.np") == 1
    assert "absent.np" in capsys.readouterr().err


def test_run_parse_error_exits_1_with_position(tmp_path, capsys):
    prog = tmp_path / "bad.np"
    prog.write_text("x := ;")
    assert run_cli("run", prog) == 1
    err = capsys.readouterr().err
    assert "parse error" in err and "1:6" in err


def test_run_runtime_error_exits_2(tmp_path, capsys):
    prog = tmp_path / "host.np"
    prog.write_text("foo()")
    assert run_cli("run", prog) == 2
    assert "unbound host function" in capsys.readouterr().err


def test_run_trace_log_written(tmp_path):
    prog = tmp_path / "p.np"
    prog.write_text(PROBE)
    assert run_cli("run", prog, "--trials", "3", "--trace-log", "--out", tmp_path / "o") == 0
    lines = (tmp_path / "o" / "trace_log.tsv").read_text().splitlines()
    assert lines[0].split("\t") == [
        "stmt-id", "diff", "sigma2", "prob", "q1", "q2", "sample", "taken",
    ]
    assert len(lines) == 4  # one guard evaluation per trial


def test_usage_error_exits_1():
    with pytest.raises(SystemExit) as err:
        run_cli("run")  # missing program argument
    assert err.value.code == 1


# --- sample / learn ----------------------------------------------------------


def test_sample_then_learn_recovers_model(tmp_path, capsys):
    model = data_path("parking_reference.csv")
    assert run_cli("sample", model, "--count", "4000", "--seed", "3",
                   "--out", tmp_path) == 0
    traces = tmp_path / "commands.csv"
    assert run_cli("learn", traces, "--prior", data_path("parking_prior.csv"),
                   "--out", tmp_path / "learned.csv") == 0
    learned = load_model(tmp_path / "learned.csv")
    truth = parking_chain()
    assert np.max(np.abs(learned.chain_coeffs() - truth.chain_coeffs())) < 0.12
    assert np.max(np.abs(learned.variances() / truth.variances() - 1.0)) < 0.2
    assert (tmp_path / "learned.png").exists()
    assert (tmp_path / "learned.csv.state.json").exists()


def test_learn_sequential_equals_combined(tmp_path):
    model = data_path("parking_reference.csv")
    run_cli("sample", model, "--count", "600", "--seed", "8", "--out", tmp_path)
    labels, traces = load_traces(tmp_path / "commands.csv")
    from niflang.gbn import save_traces

    save_traces(tmp_path / "a.csv", labels, traces[:300])
    save_traces(tmp_path / "b.csv", labels, traces[300:])
    prior = data_path("parking_prior.csv")

    assert run_cli("learn", tmp_path / "a.csv", "--prior", prior,
                   "--out", tmp_path / "m_a.csv") == 0
    assert run_cli("learn", tmp_path / "b.csv", "--prior", tmp_path / "m_a.csv",
                   "--out", tmp_path / "m_ab.csv") == 0
    assert run_cli("learn", tmp_path / "commands.csv", "--prior", prior,
                   "--out", tmp_path / "m_all.csv") == 0

    seq = load_model(tmp_path / "m_ab.csv")
    combined = load_model(tmp_path / "m_all.csv")
    assert np.max(np.abs(seq.variances() - combined.variances())) < 1e-9
    assert np.max(np.abs(seq.chain_coeffs() - combined.chain_coeffs())) < 1e-9
    assert np.max(np.abs(seq.means() - combined.means())) < 1e-9


def test_learn_empty_trace_file_exits_1(tmp_path, capsys):
    bad = tmp_path / "t.csv"
    bad.write_text("trace_id,l1\n")
    assert run_cli("learn", bad) == 1
    assert "no trace rows" in capsys.readouterr().err


def test_learn_dimension_mismatch_exits_1(tmp_path, capsys):
    t = tmp_path / "t.csv"
    t.write_text("trace_id,l1,l2\n0,0.5,0.6\n")
    assert run_cli("learn", t, "--prior", data_path("parking_prior.csv")) == 1
    assert "columns" in capsys.readouterr().err


def test_learn_improper_posterior_reports_needed(tmp_path, capsys):
    t = tmp_path / "t.csv"
    rows = ["trace_id,a,b,c,d,e,f,g"]
    rows += [f"{i},0.1,0.2,0.3,0.4,0.5,0.6,{0.7 + 0.01 * i}" for i in range(3)]
    t.write_text("\n".join(rows) + "\n")
    # a deliberately weak prior state: v = 1 via sidecar-free learn is the
    # package default (v = n + 2), so force the weak path through the API
    from niflang.gbn import LearningState, learn_update

    state = LearningState(v=1.0, mu=np.zeros(7), beta=np.eye(7))
    with pytest.raises(Exception, match="more trace"):
        learn_update(state, [np.zeros(7)] * 2)


# --- park --------------------------------------------------------------------


def test_park_zero_noise_quiet_world(tmp_path, capsys):
    quiet = tmp_path / "quiet.cfg"
    lines = []
    for line in data_path("parking_world.cfg").read_text().splitlines():
        key = line.split("=")[0].strip()
        if key.startswith(("actuation.", "sensor.")):
            line = f"{key} = 0"
        lines.append(line)
    quiet.write_text("\n".join(lines) + "\n")
    degen = tmp_path / "degen.csv"
    ref = data_path("parking_reference.csv").read_text().splitlines()
    rows = [ref[0]]
    for line in ref[1:]:
        kind, direction, mean, var, coeff = line.split(",")
        rows.append(",".join([kind, direction, mean, "1e-18", "0"]))
    degen.write_text("\n".join(rows) + "\n")
    assert run_cli("park", data_path("parking.np"), degen, "--world", quiet,
                   "--runs", "5", "--out", tmp_path / "out") == 0
    out = capsys.readouterr().out
    assert "success rate: 1 (5/5)" in out
    report = (tmp_path / "out" / "report.csv").read_text().splitlines()
    assert len(report) == 6
    assert (tmp_path / "out" / "trajectories.png").exists()


def test_park_writes_paths_on_request(tmp_path, capsys):
    assert run_cli("park", data_path("parking.np"), data_path("parking_reference.csv"),
                   "--runs", "2", "--paths", "--slip", "0.5",
                   "--out", tmp_path / "o") == 0
    assert "slip: 0.5" in capsys.readouterr().out
    assert (tmp_path / "o" / "path_0000.csv").exists()
    assert (tmp_path / "o" / "path_0001.csv").exists()
    header = (tmp_path / "o" / "path_0000.csv").read_text().splitlines()[0]
    assert header == "t,x,y,theta"


def test_park_missing_model_exits_1(tmp_path, capsys):
    assert run_cli("park", data_path("parking.np"), tmp_path / "no.csv") == 1


# --- check -------------------------------------------------------------------


def test_check_passes_and_prints_lines(tmp_path, capsys):
    assert run_cli("check", "--out", tmp_path / "c") == 0
    out = capsys.readouterr().out
    assert out.count("PASS") >= 10
    assert "FAIL" not in out
    assert (tmp_path / "c" / "check_report.csv").exists()
    assert (tmp_path / "c" / "probit.png").exists()


def test_check_negative_control_perturbed_erf(monkeypatch, capsys):
    # corrupting the series normalizer must break the golden probabilities
    monkeypatch.setattr(gauss, "_TWO_OVER_SQRT_PI", gauss._TWO_OVER_SQRT_PI * 1.002)
    gauss._std_inv_cdf.cache_clear()
    try:
        assert run_cli("check") == 3
        assert "FAIL" in capsys.readouterr().out
    finally:
        gauss._std_inv_cdf.cache_clear()


def test_check_output_is_seed_free(tmp_path):
    assert run_cli("check", "--out", tmp_path / "a", "--seed", "1") == 0
    assert run_cli("check", "--out", tmp_path / "b", "--seed", "999") == 0
    assert (tmp_path / "a" / "check_report.csv").read_bytes() == (
        tmp_path / "b" / "check_report.csv"
    ).read_bytes()


# --- determinism across reruns -------------------------------------------------


def _assert_dirs_identical(a, b):
    cmp = filecmp.dircmp(a, b)
    assert not cmp.left_only and not cmp.right_only
    _, mismatch, errors = filecmp.cmpfiles(a, b, cmp.common_files, shallow=False)
    assert not mismatch and not errors


def test_rerun_byte_identical_outputs(tmp_path):
    prog = tmp_path / "p.np"
    prog.write_text(PROBE)
    for d in ("r1", "r2"):
        assert run_cli("run", prog, "--trials", "100", "--seed", "7",
                       "--trace-log", "--out", tmp_path / d) == 0
    _assert_dirs_identical(tmp_path / "r1", tmp_path / "r2")

    for d in ("s1", "s2"):
        assert run_cli("sample", data_path("parking_reference.csv"), "--count", "50",
                       "--seed", "11", "--out", tmp_path / d) == 0
    _assert_dirs_identical(tmp_path / "s1", tmp_path / "s2")

    for d in ("p1", "p2"):
        assert run_cli("park", data_path("parking.np"),
                       data_path("parking_reference.csv"),
                       "--runs", "3", "--seed", "21", "--paths",
                       "--out", tmp_path / d) == 0
    _assert_dirs_identical(tmp_path / "p1", tmp_path / "p2")
