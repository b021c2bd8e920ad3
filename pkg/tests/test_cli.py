import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from invobs.cli import main
from invobs.lie_core import log
from invobs.sim import (
    ParseError,
    Scenario,
    SimRecord,
    ValidationError,
    load_scenario,
    read_csv,
    run_scenario,
    simulate,
)

DATA = Path(__file__).parent / "data"
BAD = sorted((DATA / "bad_scenarios").glob("*.toml"))
NUMERIC = sorted((DATA / "numeric_scenarios").glob("*.toml"))


def write(tmp_path, text, name="s.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


CAR_SMALL = """
system = "car"
duration = 0.5
dt = 0.01
seed = 3
stride = 5

[initial]
error = [0.1, 0.2, -0.1]

[input]
preset = "sinusoid"
value = [1.0, 0.2]
amplitude = [0.1, 0.3]
omega = [2.0, 1.0]

[observer]
gain = "poles"
poles = [-1.0, -2.0, -3.0]

[noise]
std = 0.01
"""


@pytest.mark.parametrize("path", BAD, ids=lambda p: p.stem)
def test_bad_corpus_exit_codes(path, tmp_path, capsys):
    expected = 2 if path.name.startswith("parse_") else 3
    assert main(["simulate", str(path), "--out", str(tmp_path / "o.csv")]) == expected
    assert not (tmp_path / "o.csv").exists()


def test_parse_error_has_line_info():
    with pytest.raises(ParseError, match=r"line 3"):
        load_scenario(DATA / "bad_scenarios" / "parse_missing_equals.toml")


@pytest.mark.parametrize("path", NUMERIC, ids=lambda p: p.stem)
def test_numeric_corpus_exit_code(path, tmp_path):
    assert main(["simulate", str(path), "--out", str(tmp_path / "o.csv")]) == 4


def test_simulate_writes_csv_and_summary(tmp_path, capsys):
    scen = write(tmp_path, CAR_SMALL)
    out = tmp_path / "run.csv"
    assert main(["simulate", str(scen), "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert {"final_xi_norm", "decay_rate", "permanent"} <= set(summary)
    rec = read_csv(out)
    assert rec.columns[:4] == ["t", "x_theta", "x_tx", "x_ty"]
    assert rec.columns[7:11] == ["xi_1", "xi_2", "xi_3", "xi_norm"]
    assert rec.columns[-4:] == ["y_1", "y_2", "yhat_1", "yhat_2"]
    t = rec.column("t")
    assert np.all(np.diff(t) > 0) and t[-1] == pytest.approx(0.5)
    assert len(rec.rows) == 11
    assert not list(tmp_path.glob(".*.tmp"))


def test_determinism_byte_identical(tmp_path):
    scen = write(tmp_path, CAR_SMALL)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["simulate", str(scen), "--out", str(a)])
    main(["simulate", str(scen), "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()
    other = write(tmp_path, CAR_SMALL.replace("seed = 3", "seed = 4"), "t.toml")
    c = tmp_path / "c.csv"
    main(["simulate", str(other), "--out", str(c)])
    assert a.read_bytes() != c.read_bytes()


def test_batch_matches_single_runs(tmp_path, capsys):
    batch = tmp_path / "batch"
    batch.mkdir()
    write(batch, CAR_SMALL, "one.toml")
    write(batch, CAR_SMALL.replace("seed = 3", "seed = 9"), "two.toml")
    out = tmp_path / "out"
    assert main(["simulate", "--batch", str(batch), "--out", str(out), "--jobs", "2"]) == 0
    for name in ("one", "two"):
        single = tmp_path / f"{name}.csv"
        main(["simulate", str(batch / f"{name}.toml"), "--out", str(single)])
        assert (out / f"{name}.csv").read_bytes() == single.read_bytes()


def test_batch_reports_worst_exit_code(tmp_path):
    batch = tmp_path / "batch"
    batch.mkdir()
    write(batch, CAR_SMALL, "good.toml")
    write(batch, 'system = "car"\nduration = 1.0\n', "bad.toml")
    assert main(["simulate", "--batch", str(batch), "--jobs", "1"]) == 3
    assert (batch / "good.csv").exists()


def test_zero_error_scenario():
    record, summary = run_scenario(DATA / "scenarios" / "reference_zero_error.toml")
    assert np.max(record.column("xi_norm")) <= 1e-9
    assert summary["permanent"] and summary["decay_rate"] is None


def test_csv_round_trip_exact(tmp_path):
    record, _ = run_scenario(write(tmp_path, CAR_SMALL))
    path = tmp_path / "r.csv"
    record.write(path)
    assert read_csv(path) == record
    assert read_csv(path.read_text()) == record


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=3, max_size=30).filter(lambda v: len(v) % 3 == 0))
def test_csv_round_trip_property(values):
    rec = SimRecord(["t", "a", "b"], np.array(values).reshape(-1, 3))
    assert read_csv(rec.to_csv()) == rec


def test_scenario_defaults_and_helpers():
    sc = Scenario.from_dict({"system": "custom-reference", "duration": 0.1, "dt": 0.01})
    assert sc.stride == 1 and sc.seed == 0 and sc.method == "rkmk4"
    record, summary = simulate(sc)
    assert "xi_norm" not in record.columns
    assert "final_xi_norm" not in summary
    with pytest.raises(ValidationError):
        Scenario.from_dict({"system": "car", "duration": 1.0, "dt": 0.1, "observer": 3})


def test_error_angle_axis_is_seeded():
    base = {"system": "attitude", "duration": 0.01, "dt": 0.01, "initial": {"error_angle_deg": 30.0}}
    sys_ = Scenario.from_dict(base).build_system()
    a = Scenario.from_dict({**base, "seed": 1}).initial_states(sys_)[1]
    b = Scenario.from_dict({**base, "seed": 1}).initial_states(sys_)[1]
    c = Scenario.from_dict({**base, "seed": 2}).initial_states(sys_)[1]
    assert np.array_equal(a.data, b.data) and not np.array_equal(a.data, c.data)
    assert math.degrees(np.linalg.norm(log(a))) == pytest.approx(30.0)


def _json_block(out):
    return json.loads(out[: out.index("\n}\n") + 2])


def test_linearize_attitude(capsys):
    assert main(["linearize", "attitude"]) == 0
    doc = _json_block(capsys.readouterr().out)
    assert np.array_equal(doc["A"], np.zeros((3, 3)))
    assert doc["basis"] == ["rot_x", "rot_y", "rot_z"] and doc["observable"]


def test_linearize_car_and_reference(capsys):
    assert main(["linearize", "car", "--ubar", "1", "0", "--poles", "-1", "-2", "-3"]) == 0
    doc = _json_block(capsys.readouterr().out)
    assert doc["observability_rank"] == 3
    assert np.allclose(sorted(e[0] if isinstance(e, list) else e for e in doc["eigenvalues"]), [-3, -2, -1], atol=1e-6)
    assert main(["linearize", "custom-reference"]) == 0
    doc = _json_block(capsys.readouterr().out)
    assert np.array_equal(doc["A"], np.zeros((2, 2)))


def test_linearize_errors(capsys):
    assert main(["linearize", "attitude-mag", "--poles", "-1", "-2", "-3"]) == 4
    assert main(["linearize", "car", "--ubar", "1"]) == 3
    assert main(["linearize", "car", "--poles", "-1"]) == 3


def test_gains_command(capsys):
    assert main(["gains", "attitude", "--K", "2"]) == 0
    doc = _json_block(capsys.readouterr().out)
    assert doc["stable"] and doc["symmetric_part"] == "negative definite"
    assert np.array(doc["L"]).shape == (3, 6)
    assert main(["gains", "car"]) == 3


@pytest.mark.parametrize("system,code", [("attitude", 0), ("car", 0), ("custom-reference", 0), ("corrupted", 5)])
def test_check_command(system, code, capsys):
    assert main(["check", system, "--samples", "20"]) == code
    out = capsys.readouterr().out
    if code:
        assert "FAIL  corrupted:output" in out
    else:
        assert "FAIL" not in out
    if system == "car":
        assert "PASS  car:trajectory_independence" in out and "PASS  car:input_dependence" in out


def test_permanent_command(tmp_path, capsys):
    out = tmp_path / "p.csv"
    assert main(["permanent", "car", "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["permanent"] and summary["closed_after_period"]
    rec = read_csv(out)
    assert rec.columns == ["t", "x_theta", "x_tx", "x_ty", "u_1", "u_2"]
    assert main(["permanent", "attitude", "--out", str(out)]) == 0
    capsys.readouterr()
    assert main(["permanent", "car", "--perturb", "0.01", "--out", str(out)]) == 5
    assert json.loads(capsys.readouterr().out)["permanent"] is False


def test_permanent_to_stdout(capsys):
    assert main(["permanent", "car", "--samples", "5", "--x0", "0.1", "1", "2"]) == 0
    cap = capsys.readouterr()
    assert cap.out.startswith("t,x_theta") and len(cap.out.splitlines()) == 6
    assert json.loads(cap.err)["permanent"]


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "invobs", "simulate", str(DATA / "bad_scenarios" / "invalid_zero_stride.toml")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 3 and "stride" in proc.stderr
