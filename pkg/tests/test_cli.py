import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from anisoprop.cli import main
from anisoprop.evolve import read_field_binary

DATA = Path(__file__).parent / "data"


def _run(tmp_path, *argv, out="out"):
    target = tmp_path / out
    code = main(["--out", str(target), *argv])
    return code, target


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_spectrum_matches_golden_file(tmp_path):
    code, out = _run(tmp_path, "spectrum", "-K", "10")
    assert code == 0
    assert (out / "levels.csv").read_bytes() == (DATA / "levels_flagship_K10.csv").read_bytes()
    energies = [float(r["energy_canonical"]) for r in _rows(out / "levels.csv")]
    assert energies == sorted(energies)


def test_spectrum_is_deterministic(tmp_path):
    _, a = _run(tmp_path, "spectrum", "-K", "25", out="a")
    _, b = _run(tmp_path, "spectrum", "-K", "25", out="b")
    assert (a / "levels.csv").read_bytes() == (b / "levels.csv").read_bytes()


def test_spectrum_decoupled_degeneracies(tmp_path):
    cfg = tmp_path / "iso.json"
    cfg.write_text(json.dumps({"omega1": 1.0, "omega2": 1.0, "omega0": 0.0, "m": 1.0, "hbar": 1.0}))
    code, out = _run(tmp_path, "--config", str(cfg), "spectrum", "-K", "6")
    assert code == 0
    energies = [float(r["energy_canonical"]) for r in _rows(out / "levels.csv")]
    assert energies == [1.0, 2.0, 2.0, 3.0, 3.0, 3.0]


def test_bad_config_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"omega1": -1.0, "omega2": 1.0, "omega0": 0.0}))
    code, _ = _run(tmp_path, "--config", str(cfg), "spectrum")
    assert code == 2
    assert "error" in capsys.readouterr().err


def test_kernel_at_caustic_exits_3(tmp_path, capsys):
    code, _ = _run(tmp_path, "kernel", "--t", repr(2 * math.pi / 5), "--point", "0.1", "0.2")
    assert code == 3
    err = capsys.readouterr().err
    assert "conjugate times nearby" in err
    listed = err.split("conjugate times nearby: ")[1].splitlines()[0].split(", ")
    for k, value in enumerate(listed, start=1):
        assert float(value) == pytest.approx(2 * math.pi * k / 5, rel=1e-10)
    assert "safe windows" in err


def test_kernel_single_point(tmp_path, capsys):
    code, out = _run(tmp_path, "kernel", "--t", "0.4", "--source", "0.1", "-0.3", "--point", "0.5", "0.2")
    assert code == 0
    printed = capsys.readouterr().out.split()
    assert len(printed) == 2
    stored = json.loads((out / "kernel_point.json").read_text())
    assert complex(float(printed[0]), float(printed[1])) == complex(stored["re"], stored["im"])


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_kernel_grid_row_count(tmp_path, fmt):
    code, out = _run(tmp_path, "kernel", "--t", "0.4", "--grid", "-1", "1", "7", "-2", "2", "5", "--format", fmt)
    assert code == 0
    path = out / f"kernel.{fmt}"
    n = len(_rows(path)) if fmt == "csv" else len(json.loads(path.read_text())["rows"])
    assert n == 7 * 5


def test_trajectory_hits_endpoints(tmp_path):
    code, out = _run(tmp_path, "trajectory", "--endpoints", "0.1", "0.2", "-0.4", "0.5", "0.7")
    assert code == 0
    rows = _rows(out / "trajectory.csv")
    assert float(rows[0]["x"]) == pytest.approx(0.1, abs=1e-12)
    assert float(rows[-1]["y"]) == pytest.approx(0.5, abs=1e-12)


def test_action_json(tmp_path, capsys):
    code, out = _run(tmp_path, "action", "--endpoints", "0.1", "0.2", "-0.4", "0.5", "0.7")
    assert code == 0
    result = json.loads((out / "action.json").read_text())
    assert result["closed"] == pytest.approx(result["boundary"], rel=1e-10)


def test_evolve_outputs(tmp_path):
    code, out = _run(
        tmp_path, "evolve", "--times", "0,0.1,0.2", "--grid-points", "64", "--x0", "0.5", "--sigma", "0.5"
    )
    assert code == 0
    rows = _rows(out / "observables.csv")
    assert [float(r["t"]) for r in rows] == [0.0, 0.1, 0.2]
    first = read_field_binary(out / "field_0000.bin")
    again_code, again = _run(
        tmp_path, "evolve", "--times", "0", "--grid-points", "64", "--x0", "0.5", "--sigma", "0.5", out="again"
    )
    assert again_code == 0
    assert (again / "field_0000.bin").read_bytes() == (out / "field_0000.bin").read_bytes()
    assert first.norm2 == pytest.approx(1.0, abs=1e-12)
    manifest = json.loads((out / "manifest_evolve.json").read_text())
    listed = {Path(p).name for p in manifest["outputs"]}
    on_disk = {p.name for p in out.iterdir()}
    assert listed == on_disk


def test_evolve_cat_revival(tmp_path):
    code, out = _run(tmp_path, "evolve", "--state", "cat", "--times", f"0,{2 * math.pi!r}", "--grid-points", "96")
    assert code == 0
    rows = _rows(out / "observables.csv")
    assert float(rows[-1]["autocorrelation"]) > 0.999


def test_evolve_csv_format(tmp_path):
    code, out = _run(tmp_path, "evolve", "--times", "0", "--grid-points", "32", "--half-width", "4", "--format", "csv")
    assert code == 0
    data = np.loadtxt(out / "field_0000.csv", delimiter=",", skiprows=1)
    assert data.shape == (32 * 32, 4)


def test_global_flags_after_subcommand(tmp_path):
    target = tmp_path / "late"
    assert main(["spectrum", "-K", "3", "--out", str(target)]) == 0
    assert (target / "levels.csv").exists()


def test_verify_identities_reports_honestly(tmp_path, capsys):
    code, out = _run(tmp_path, "verify", "identities")
    assert code == 1
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("[FAIL] criterion  1")
    assert lines[1].startswith("[PASS] criterion  2")
    results = json.loads((out / "verify_identities.json").read_text())
    corrected = results[0]["details"]["per_identity_max_corrected_fifth"]
    assert max(corrected.values()) < 1e-12
