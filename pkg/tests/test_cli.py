import json
import subprocess
import sys

import pytest

from simloc.cli import (
    ANALYTIC_HEADER,
    COMPARE_HEADER,
    DOS_HEADER,
    LOCK_NAME,
    MOMENTS_HEADER,
    csv_text,
    git_blob_hash,
    load_config,
    run_command,
    validate_config,
)
from simloc.errors import ConfigError

BASE = {"n": 16, "w_values": [3.0], "q_values": [2.0, 3.0], "realizations": 20, "seed": 5}


def write_config(tmp_path, **changes):
    cfg = {**BASE, **changes}
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def test_validate_config_defaults():
    cfg = validate_config(dict(BASE))
    assert cfg.window_factor == 0.05
    assert cfg.tolerances["sigma_threshold"] == 3.0
    assert cfg.q_values == (2.0, 3.0)


@pytest.mark.parametrize("change, field", [
    ({"n": 33}, "'n'"),
    ({"n": 2.5}, "'n'"),
    ({"w_values": [0.0]}, "w_values"),
    ({"w_values": []}, "w_values"),
    ({"q_values": [1.0]}, "q_values"),
    ({"q_values": ["2"]}, "q_values[0]"),
    ({"realizations": 0}, "realizations"),
    ({"window_factor": 0.7}, "window_factor"),
    ({"seed": -1}, "seed"),
    ({"tolerances": {"sigma": 2}}, "tolerances"),
    ({"extra": 1}, "extra"),
])
def test_validate_config_rejects(change, field):
    with pytest.raises(ConfigError, match=field.replace("[", r"\[").replace("]", r"\]")):
        validate_config({**BASE, **change})


def test_missing_field():
    raw = dict(BASE)
    del raw["realizations"]
    with pytest.raises(ConfigError, match="realizations"):
        validate_config(raw)


def test_json_error_location(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "n": 16,\n  "w_values": [3.0,]\n}')
    with pytest.raises(ConfigError, match="line 3"):
        load_config(path)


def test_csv_format():
    text = csv_text(["a", "b", "c"], [[1, 0.5, "inf"]])
    assert text == "a,b,c\n1,5.00000000000e-01,inf\n"


def test_git_blob_hash_matches_git():
    # `printf 'hello\n' | git hash-object --stdin`
    assert git_blob_hash(b"hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a"


def test_exit_codes(tmp_path, capsys):
    assert run_command(["nonsense"]) == 2
    assert run_command(["simulate"]) == 2
    bad = write_config(tmp_path, n=7)
    assert run_command(["simulate", "--config", str(bad)]) == 2
    assert "'n'" in capsys.readouterr().err
    assert run_command(["analytic", "--q", "2"]) == 2
    assert run_command(["analytic", "--q", "2", "--w", "3", "--mode", "finite_n", "--finite-n", "5"]) == 2


def test_analytic_strong_disorder(tmp_path, capsys):
    out = tmp_path / "out"
    assert run_command(["analytic", "--q", "2", "--w", "1e4", "--mode", "thermo", "--out", str(out)]) == 0
    lines = (out / "analytic.csv").read_text().splitlines()
    assert lines[0] == ",".join(ANALYTIC_HEADER)
    row = lines[1].split(",")
    assert row[2:4] == ["thermo", "inf"]
    assert abs(float(row[4]) - 1.0) <= 0.01
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["files"]["analytic.csv"] == git_blob_hash((out / "analytic.csv").read_bytes())
    assert manifest["command"] == "analytic"


def test_analytic_finite_n(tmp_path):
    out = tmp_path / "out"
    assert run_command(["analytic", "--q", "2", "--w", "3", "--mode", "finite_n",
                        "--finite-n", "8", "--out", str(out)]) == 0
    row = (out / "analytic.csv").read_text().splitlines()[1].split(",")
    assert row[2:4] == ["finite_n", "8"]


def test_simulate_outputs_and_determinism(tmp_path):
    cfg = write_config(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_command(["simulate", "--config", str(cfg), "--out", str(a), "--threads", "1"]) == 0
    assert run_command(["simulate", "--config", str(cfg), "--out", str(b), "--threads", "3"]) == 0
    for name in ("moments.csv", "dos.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    moments = (a / "moments.csv").read_text().splitlines()
    assert moments[0] == ",".join(MOMENTS_HEADER)
    assert len(moments) == 3
    assert (a / "dos.csv").read_text().splitlines()[0] == ",".join(DOS_HEADER)
    assert not (a / LOCK_NAME).exists()


def test_compare_writes_all_rows(tmp_path):
    cfg = write_config(tmp_path, w_values=[3.0, 10.0], n=64, realizations=30)
    out = tmp_path / "out"
    code = run_command(["compare", "--config", str(cfg), "--out", str(out)])
    assert code in (0, 1)
    lines = (out / "compare.csv").read_text().splitlines()
    assert lines[0] == ",".join(COMPARE_HEADER)
    assert len(lines) == 5
    files = json.loads((out / "manifest.json").read_text())["files"]
    assert set(files) == {"moments.csv", "dos.csv", "analytic.csv", "compare.csv"}


def test_numeric_failure_leaves_no_output(tmp_path, capsys):
    # the lower level of two sites sits near (v1 + v2)/2 ~ 0.007, far outside a 1e-5 window
    cfg = write_config(tmp_path, n=2, w_values=[0.01], realizations=1, window_factor=0.001)
    out = tmp_path / "out"
    code = run_command(["compare", "--config", str(cfg), "--out", str(out)])
    assert code == 3
    assert "EmptyWindowError" in capsys.readouterr().err
    assert not out.exists() or not any(out.iterdir())


def test_lock_blocks_second_run(tmp_path):
    out = tmp_path / "out"
    out.mkdir()
    (out / LOCK_NAME).write_text("1")
    cfg = write_config(tmp_path)
    assert run_command(["simulate", "--config", str(cfg), "--out", str(out)]) == 2
    assert not (out / "moments.csv").exists()


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "simloc", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    assert "selftest" in r.stdout
