import json

import numpy as np
import pytest

from contain import cli
from contain.cli import (
    ScenarioParseError,
    cmd_simulate,
    default_scenario,
    load_scenario,
    main,
    parse_scenario,
)

CHAIN_TEXT = """\
[system]
A = 0
B = 1
C = 1

[graph]
adjacency = 0 1; 0 0

[controller]
kind = continuous_static
kappa = 0.1

[leaders]
2.gain = 0
2.gamma = 1

[sim]
x0 = -2; 0
t_end = 2
h = 0.01
"""


def chain_file(tmp_path, text=CHAIN_TEXT, name="chain.scn"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_parse_default_scenario_roundtrip():
    parsed = parse_scenario(default_scenario())
    assert parsed.kind == "adaptive"
    assert parsed.kappa == 0.1
    assert parsed.topology.n_followers == 6
    assert parsed.gammas == [6.0, 4.0]
    assert parsed.t_end == 20.0
    assert parsed.h == 0.001
    assert parsed.x0_user.shape == (8, 2)
    assert parsed.are_weight is not None
    assert np.allclose(parsed.are_weight, [[4.0, 0.0], [0.0, 1.0]])


def test_parse_overrides_win():
    parsed = parse_scenario(default_scenario(), controller="continuous_static",
                            kappa=0.05, h=0.01, t_end=5.0)
    assert parsed.kind == "continuous_static"
    assert parsed.kappa == 0.05
    assert parsed.h == 0.01
    assert parsed.t_end == 5.0


def test_parse_chain_minimal():
    parsed = parse_scenario(CHAIN_TEXT)
    assert parsed.system.n == 1
    assert parsed.topology.leader_labels == (2,)
    assert parsed.taus is None
    assert parsed.c1_scale == 1.0
    assert parsed.tail_fraction == 0.2


def test_parse_error_reports_line():
    bad = CHAIN_TEXT.replace("kappa = 0.1", "kappa = zero")
    with pytest.raises(ScenarioParseError) as info:
        parse_scenario(bad)
    assert info.value.line is not None


def test_parse_error_cases():
    cases = [
        CHAIN_TEXT.replace("[system]\n", ""),                      # missing section
        CHAIN_TEXT.replace("A = 0", "A = 0 1; 2"),                 # ragged matrix
        CHAIN_TEXT.replace("kind = continuous_static", "kind = pid"),
        CHAIN_TEXT.replace("kappa = 0.1\n", ""),                   # kappa required
        CHAIN_TEXT.replace("2.gamma = 1\n", ""),                   # gamma required
        CHAIN_TEXT.replace("x0 = -2; 0", "x0 = -2"),               # wrong x0 shape
        CHAIN_TEXT + "t_end = 3\n",                                # duplicate key
        "stray = 1\n" + CHAIN_TEXT,                                # before any section
        CHAIN_TEXT.replace("2.gain = 0", "2.sinusoids = 0:1:1:0\n2.gain = 0"),
    ]
    for text in cases:
        with pytest.raises(ScenarioParseError):
            parse_scenario(text)


def test_adaptive_override_needs_taus():
    with pytest.raises(ScenarioParseError):
        parse_scenario(CHAIN_TEXT, controller="adaptive")


def test_discontinuous_does_not_need_kappa():
    text = CHAIN_TEXT.replace("kind = continuous_static", "kind = discontinuous_static")
    text = text.replace("kappa = 0.1\n", "")
    parsed = parse_scenario(text)
    assert parsed.kind == "discontinuous_static"
    assert parsed.kappa is None


def test_validate_pass(tmp_path, capsys):
    rc = main(["validate", chain_file(tmp_path)])
    out = capsys.readouterr().out
    assert rc == 0
    assert "assumption check: PASS" in out
    assert "lambda_min(L1)" in out


def test_validate_fail_lists_asymmetric_pair(tmp_path, capsys):
    text = CHAIN_TEXT.replace("adjacency = 0 1; 0 0",
                              "adjacency = 0 1 1; 0 0 1; 0 0 0")
    text = text.replace("x0 = -2; 0", "x0 = -2; 0; 0")
    text = text.replace("2.gain = 0", "3.gain = 0")
    text = text.replace("2.gamma = 1", "3.gamma = 1")
    rc = main(["validate", chain_file(tmp_path, text)])
    out = capsys.readouterr().out
    assert rc == 2
    assert "FAIL" in out
    assert "1<->2" in out


def test_synth_writes_sidecar(tmp_path, capsys):
    path = chain_file(tmp_path)
    rc = main(["synth", path])
    out = capsys.readouterr().out
    assert rc == 0
    assert "alpha" in out
    sidecar = tmp_path / "chain.gains.json"
    payload = json.loads(sidecar.read_text())
    assert payload["K"] == [[-1.0]]
    assert payload["alpha"] == pytest.approx(2.0)
    assert payload["lmi_lambda_max"] < 0.0


def test_bound_prints_radii(tmp_path, capsys):
    rc = main(["bound", chain_file(tmp_path)])
    out = capsys.readouterr().out
    assert rc == 0
    assert "D1 radius^2" in out


def test_simulate_writes_outputs(tmp_path, capsys):
    path = chain_file(tmp_path)
    out_dir = tmp_path / "out"
    rc = main(["simulate", path, "--out", str(out_dir)])
    stdout = capsys.readouterr().out
    assert rc == 0
    assert "verdict: certified" in stdout
    csv_lines = (out_dir / "trajectory.csv").read_text().splitlines()
    assert csv_lines[0] == "t,x1_1,x2_1,u1_1,xi_norm,v1"
    assert len(csv_lines) == 1 + 200
    first = csv_lines[1].split(",")
    assert first[0] == "0.0"
    assert first[1] == "-2.0"
    assert first[2] == "0.0"
    metrics = (out_dir / "metrics.txt").read_text()
    assert "kind = continuous_static" in metrics
    assert "d1_certified = True" in metrics
    assert "verdict = certified" in metrics
    plot = (out_dir / "plot.gp").read_text()
    assert 'set datafile separator ","' in plot
    assert "trajectory.csv" in plot


def test_simulate_user_order_columns(tmp_path):
    # leader listed first in the file; columns must keep that order
    text = """\
[system]
A = 0
B = 1
C = 1

[graph]
adjacency = 0 0; 1 0

[leaders]
1.gain = 0
1.gamma = 1

[controller]
kind = continuous_static
kappa = 0.1

[sim]
x0 = 5; -2
t_end = 8
h = 0.01
"""
    out_dir = tmp_path / "out"
    rc = main(["simulate", chain_file(tmp_path, text), "--out", str(out_dir)])
    assert rc == 0
    lines = (out_dir / "trajectory.csv").read_text().splitlines()
    # agent 1 is the leader here, so the only input column belongs to agent 2
    assert lines[0] == "t,x1_1,x2_1,u2_1,xi_norm,v1"
    row = lines[1].split(",")
    assert row[1] == "5.0"   # leader (user row 1)
    assert row[2] == "-2.0"  # follower (user row 2)


def test_simulate_deterministic_output(tmp_path):
    path = chain_file(tmp_path)
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert main(["simulate", path, "--out", str(a)]) == 0
    assert main(["simulate", path, "--out", str(b)]) == 0
    assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()


def test_adaptive_columns_and_metrics(tmp_path):
    text = CHAIN_TEXT.replace(
        "kind = continuous_static\nkappa = 0.1",
        "kind = adaptive\nkappa = 0.1\ntaus = 1\nphis = 0.1\nd0 = 0",
    )
    out_dir = tmp_path / "out"
    rc = main(["simulate", chain_file(tmp_path, text), "--out", str(out_dir)])
    assert rc == 0
    lines = (out_dir / "trajectory.csv").read_text().splitlines()
    assert lines[0] == "t,x1_1,x2_1,u1_1,xi_norm,v1,d_1"
    metrics = (out_dir / "metrics.txt").read_text()
    assert "varrho" in metrics
    assert "d_sup" in metrics
    assert "d2_certified = True" in metrics


def test_observer_columns(tmp_path):
    text = CHAIN_TEXT.replace("kind = continuous_static", "kind = observer_based")
    out_dir = tmp_path / "out"
    rc = main(["simulate", chain_file(tmp_path, text), "--out", str(out_dir)])
    assert rc == 0
    lines = (out_dir / "trajectory.csv").read_text().splitlines()
    assert lines[0] == "t,x1_1,x2_1,u1_1,xi_norm,v1,v1_1,v2_1"


def test_exit_code_parse_error(tmp_path, capsys):
    bad = chain_file(tmp_path, CHAIN_TEXT.replace("B = 1", "B = one"))
    assert main(["validate", bad]) == 1
    assert "scenario error" in capsys.readouterr().err


def test_exit_code_missing_file(capsys):
    assert main(["validate", "/no/such/file.scn"]) == 1
    assert "i/o error" in capsys.readouterr().err


def test_exit_code_assumption_failure(tmp_path, capsys):
    # two followers, no leader
    text = CHAIN_TEXT.replace("adjacency = 0 1; 0 0", "adjacency = 0 1; 1 0")
    text = text.replace("[leaders]\n2.gain = 0\n2.gamma = 1\n\n", "")
    rc = main(["validate", chain_file(tmp_path, text)])
    assert rc == 2
    assert "assumption failure" in capsys.readouterr().err


def test_exit_code_not_controllable(tmp_path, capsys):
    text = CHAIN_TEXT.replace("A = 0", "A = 1 0; 0 1")
    text = text.replace("B = 1", "B = 1; 1")
    text = text.replace("C = 1", "C = 1 0; 0 1")
    text = text.replace("2.gain = 0", "2.gain = 0 0")
    text = text.replace("x0 = -2; 0", "x0 = -2 0; 0 0")
    rc = main(["synth", chain_file(tmp_path, text)])
    assert rc == 3
    assert "not controllable" in capsys.readouterr().err


def test_exit_code_varrho(tmp_path, capsys):
    text = CHAIN_TEXT.replace(
        "kind = continuous_static\nkappa = 0.1",
        "kind = adaptive\nkappa = 0.1\ntaus = 1\nphis = 3\nd0 = 0",
    )
    path = chain_file(tmp_path, text)
    assert main(["bound", path]) == 4
    assert "adaptive leakage too fast" in capsys.readouterr().err
    # simulate downgrades to an uncertified run instead of dying
    out_dir = tmp_path / "out"
    rc = main(["simulate", path, "--out", str(out_dir)])
    assert rc == 5
    metrics = (out_dir / "metrics.txt").read_text()
    assert "uncertifiable" in metrics
    assert "verdict = not certified" in metrics


def test_exit_code_divergence(tmp_path, capsys):
    text = CHAIN_TEXT.replace("t_end = 2", "t_end = 2000").replace("h = 0.01", "h = 5")
    rc = main(["simulate", chain_file(tmp_path, text), "--out", str(tmp_path / "out")])
    assert rc == 6
    assert "diverged" in capsys.readouterr().err


def test_default_subcommand_roundtrip(tmp_path, capsys):
    assert main(["default"]) == 0
    text = capsys.readouterr().out
    assert "[system]" in text
    parse_scenario(text)  # must be loadable as-is
    out = tmp_path / "default.scn"
    assert main(["default", "--out", str(out)]) == 0
    assert out.read_text(encoding="utf-8") == default_scenario()


def test_cli_controller_flag(tmp_path, capsys):
    path = chain_file(tmp_path)
    rc = main(["simulate", path, "--out", str(tmp_path / "o"),
               "--controller", "discontinuous_static", "--t-end", "0.5"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "discontinuous_static" in out


def test_load_scenario_applies_overrides(tmp_path):
    parsed = load_scenario(chain_file(tmp_path), t_end=1.0, h=0.005)
    assert parsed.t_end == 1.0
    assert parsed.h == 0.005
