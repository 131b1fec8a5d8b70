import filecmp
import os

import numpy as np
import pytest

from porofem import cli
from porofem.config import dump_config, parse_config, parse_config_text
from porofem.errors import InvalidConfigError, InvalidRequestError
from porofem.output import read_csv, snapshot_at, vtk_text, write_profile_csv, write_vtk, write_vtk_series
from porofem.problems import HOUR, PRESETS, get_preset, preset_mp1, preset_mp2, run_preset
from porofem.solvers import RunResult
from porofem.verification import verify_terzaghi


@pytest.fixture(scope="module")
def mp1_run():
    return run_preset(preset_mp1())


# ---------------------------------------------------------------------------
# config


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_config_round_trip(name, tmp_path):
    preset = get_preset(name)
    path = tmp_path / "c.ini"
    path.write_text(dump_config(preset))
    back = parse_config(path).preset
    assert back == preset
    assert dump_config(back) == dump_config(preset)


def test_negative_dt_names_the_key():
    with pytest.raises(InvalidConfigError) as exc:
        parse_config_text("[problem]\nid = mp1\n[time]\ndt = -1\n")
    assert any("time.dt" in e and e.startswith("line 4") for e in exc.value.errors)


def test_partial_override_keeps_defaults():
    preset = parse_config_text("[problem]\nid = mp2\n[material]\nk = 2e-12\n").preset
    ref = preset_mp2()
    assert preset.material.k == 2e-12
    assert preset == ref.with_(material=ref.material.__class__(**{**ref.material.__dict__, "k": 2e-12}))


def test_unit_suffixes_and_mismatch():
    preset = parse_config_text("[problem]\nid = mp1\n[time]\ndt = 30 min\nt_end = 80 hr\n").preset
    assert preset.dt == 1800.0 and preset.t_end == 80 * HOUR
    with pytest.raises(InvalidConfigError) as exc:
        parse_config_text("[problem]\nid = mp1\n\n[time]\ndt = 1 kPa\n")
    (err,) = exc.value.errors
    assert err.startswith("line 5") and "unit" in err


def test_all_errors_are_reported():
    text = "[problem]\nid = mp1\n[time]\ndt = -1\n[material]\nbogus = 3\nk = abc\n[extra]\n"
    with pytest.raises(InvalidConfigError) as exc:
        parse_config_text(text)
    joined = "\n".join(exc.value.errors)
    for frag in ("line 4", "line 6", "line 7", "line 8", "bogus", "[extra]"):
        assert frag in joined


def test_missing_problem_id():
    with pytest.raises(InvalidConfigError) as exc:
        parse_config_text("[time]\ndt = 1\n")
    assert any("problem.id" in e for e in exc.value.errors)


def test_bc_section_replaces_preset_bcs():
    preset = parse_config_text(
        "[problem]\nid = mp2\n[bc]\nbottom.uy = 0\nbottom.ux = 0\ntop.p = 0\n"
        "top.ty = -5e5\ntop.ty.span = 0.4, 0.6\n"
    ).preset
    assert [(b.tag, b.field) for b in preset.bcs.dirichlet] == [("bottom", "uy"), ("bottom", "ux"), ("top", "p")]
    (n,) = preset.bcs.neumann
    assert n.value == -5e5 and n.span == (0.4, 0.6)


# ---------------------------------------------------------------------------
# CSV and VTK


def test_mp1_profiles(mp1_run, tmp_path):
    prob, res = mp1_run
    write_profile_csv(prob, res, 0.0, tmp_path / "p0.csv")
    cols, data = read_csv(tmp_path / "p0.csv")
    assert cols == ["z", "p_w"]
    np.testing.assert_array_equal(data[:, 1], 1.0e5)
    write_profile_csv(prob, res, 80 * HOUR, tmp_path / "p80.csv")
    _, data = read_csv(tmp_path / "p80.csv")
    assert data[0, 0] == 0.0 and data[0, 1] == 0.0
    np.testing.assert_array_equal(data[:, 1], res.at(80 * HOUR).x)  # exact text round trip
    text = (tmp_path / "p80.csv").read_bytes()
    assert b"\r" not in text and text.startswith(b"# ") and b"# units: z [m], p_w [Pa]" in text


def test_unscheduled_time_is_invalid_request(mp1_run, tmp_path):
    prob, res = mp1_run
    with pytest.raises(InvalidRequestError):
        write_profile_csv(prob, res, 7 * HOUR, tmp_path / "x.csv")
    assert not (tmp_path / "x.csv").exists()
    with pytest.raises(InvalidRequestError):
        snapshot_at(res, 1.0)


def test_mp1_vtk(mp1_run):
    prob, res = mp1_run
    text = vtk_text(prob, res.at(5 * HOUR))
    lines = text.splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0" and lines[2] == "ASCII"
    assert "DATASET POLYDATA" in lines and "POINTS 51 double" in lines
    assert "LINES 50 150" in lines and "SCALARS pore_pressure double 1" in lines


def test_mp2_vtk_counts(tmp_path):
    prob, res = run_preset(preset_mp2().with_(t_end=1.0, output_times=(1.0,)))
    path = write_vtk(prob, res.snapshots[0], tmp_path / "s.vtk")
    lines = open(path).read().splitlines()
    assert "DATASET UNSTRUCTURED_GRID" in lines
    assert "POINTS 2601 double" in lines and "CELLS 2500 12500" in lines and "CELL_TYPES 2500" in lines
    i = lines.index("CELL_TYPES 2500")
    assert set(lines[i + 1 : i + 2501]) == {"9"}
    assert "VECTORS displacement double" in lines and "POINT_DATA 2601" in lines
    assert not any(ln.startswith("SCALARS saturation") for ln in lines)


def test_empty_snapshot_list(tmp_path, mp1_run):
    with pytest.raises(InvalidRequestError):
        write_vtk_series(mp1_run[0], [], tmp_path)
    with pytest.raises(InvalidRequestError):
        write_vtk(mp1_run[0], None, tmp_path / "a.vtk")
    assert os.listdir(tmp_path) == []
    with pytest.raises(InvalidRequestError):
        snapshot_at(RunResult(), 5.0)


# ---------------------------------------------------------------------------
# CLI


def _same_tree(a, b):
    names = sorted(os.listdir(a))
    assert names == sorted(os.listdir(b)) and names
    match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    assert mismatch == [] and errors == []


def test_run_is_byte_identical(tmp_path, capsys):
    assert cli.main(["run", "--problem", "mp1", "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["run", "--problem", "mp1", "--out", str(tmp_path / "b")]) == 0
    _same_tree(tmp_path / "a", tmp_path / "b")
    names = os.listdir(tmp_path / "a")
    assert "config.ini" in names and "profile_t0s.csv" in names and "profile_t288000s.csv" in names
    assert "snapshot_t288000s.vtk" in names


def test_preset_then_config_equals_problem(tmp_path, capsys):
    cfg = tmp_path / "mp1.ini"
    assert cli.main(["preset", "--problem", "mp1", "--out", str(cfg)]) == 0
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["run", "--problem", "mp1", "--out", str(tmp_path / "b")]) == 0
    _same_tree(tmp_path / "a", tmp_path / "b")


def test_preset_to_stdout(capsys):
    assert cli.main(["preset", "--problem", "mp3"]) == 0
    assert parse_config_text(capsys.readouterr().out).preset == get_preset("mp3")


def test_exit_codes(tmp_path, capsys):
    assert cli.main(["frobnicate"]) == 2
    assert "usage" in capsys.readouterr().err
    bad = tmp_path / "bad.ini"
    bad.write_text("[problem]\nid = mp1\n[time]\ndt = -1\n")
    assert cli.main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "line 4" in capsys.readouterr().err
    assert cli.main(["run", "--config", str(tmp_path / "missing.ini"), "--out", str(tmp_path / "o")]) == 2
    assert cli.main(["--workers", "0", "run", "--problem", "mp1", "--out", str(tmp_path / "o")]) == 2
    stiff = tmp_path / "stiff.ini"
    stiff.write_text("[problem]\nid = mp3\n[time]\nt_end = 60\ndt = 60\noutput_times = 60\n[solver]\nmax_iter = 1\n")
    assert cli.main(["run", "--config", str(stiff), "--out", str(tmp_path / "s")]) == 3
    assert "converge" in capsys.readouterr().err


def test_convergence_command(capsys):
    assert cli.main(["convergence", "--problem", "mp1", "--levels", "3"]) == 0
    out = capsys.readouterr().out
    assert "minimum order" in out and "PASS" in out
    assert cli.main(["convergence", "--problem", "mp2"]) == 2


def test_verify_exit_code_is_criterion_truth(capsys):
    check = verify_terzaghi()
    code = cli.main(["verify", "terzaghi"])
    assert code == (0 if check.passed else 1)
    assert capsys.readouterr().out.strip().endswith("PASS" if check.passed else "FAIL")
