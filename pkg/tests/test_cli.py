import numpy as np
import pytest

from ternary_mmc import cli, storage
from ternary_mmc.energy import PhasePair


def write(tmp_path, text, name="c.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


SHORT = """
[grid]
n = 16
[scheme]
dt = 0.001
a_preset = theorem
[run]
t_final = 0.006
output_dir = out
snapshot_stride = 2
diag_stride = 2
plots = {plots}
"""


def test_verify_passes(capsys):
    assert cli.main(["verify"]) == 0
    out = capsys.readouterr().out
    assert "6/6 checks passed" in out and "FAIL" not in out


def test_verify_reports_failure(monkeypatch, capsys):
    from ternary_mmc import verification
    bad = verification.Check("rigged", False, "forced")
    monkeypatch.setattr(verification, "run_checks", lambda seed=0: [bad])
    assert cli.main(["verify"]) == 1
    assert "0/1 checks passed" in capsys.readouterr().out


def test_unknown_subcommand(capsys):
    assert cli.main(["frobnicate"]) == 2
    err = capsys.readouterr().err
    assert "usage:" in err


def test_missing_subcommand(capsys):
    assert cli.main([]) == 2
    assert "usage:" in capsys.readouterr().err


def test_help_exits_zero(capsys):
    assert cli.main(["--help"]) == 0


def test_config_error_exit(tmp_path, capsys):
    assert cli.main(["run", "--config", write(tmp_path, "[grid]\nnn = 3\n")]) == 2
    assert "line 2" in capsys.readouterr().err
    assert cli.main(["run", "--config", str(tmp_path / "absent.ini")]) == 2


def test_run_writes_outputs(tmp_path, capsys):
    cfg = write(tmp_path, SHORT.format(plots="true"))
    assert cli.main(["run", "--config", cfg, "--snapshots", str(tmp_path / "snaps")]) == 0
    out = tmp_path / "out"
    rows = storage.read_diag_csv(out / "diagnostics.csv")
    assert [r["step"] for r in rows] == [0, 2, 4, 6]
    assert sorted(p.name for p in (tmp_path / "snaps").iterdir()) == [
        "snap_00000000.mmc", "snap_00000002.mmc", "snap_00000004.mmc", "snap_00000006.mmc"]
    final = storage.load_snapshot(out / "final.mmc")
    assert final.step == 6 and final.time == pytest.approx(0.006)
    for name in ("energy.png", "mass.png", "extrema.png", "phases_final.png"):
        assert (out / name).stat().st_size > 0
    assert "certified" in capsys.readouterr().out


def test_run_overwrites_old_csv(tmp_path):
    cfg = write(tmp_path, SHORT.format(plots="false"))
    assert cli.main(["run", "--config", cfg]) == 0
    assert cli.main(["run", "--config", cfg]) == 0
    rows = storage.read_diag_csv(tmp_path / "out" / "diagnostics.csv")
    assert len(rows) == 4
    assert not (tmp_path / "out" / "energy.png").exists()


def test_run_from_snapshot(tmp_path):
    n = 16
    pair = PhasePair(np.full((n, n), 0.2), np.full((n, n), 0.3))
    storage.store_snapshot(tmp_path / "init.mmc", pair, 64.0, 0.0, 0)
    cfg = write(tmp_path, SHORT.format(plots="false") + "[initial]\nkind = file\npath = init.mmc\n")
    assert cli.main(["run", "--config", cfg]) == 0
    final = storage.load_snapshot(tmp_path / "out" / "final.mmc")
    assert np.allclose(final.pair.phi1, 0.2, atol=1e-13)


def test_bad_initial_snapshot_is_config_error(tmp_path):
    cfg = write(tmp_path, SHORT.format(plots="false") + "[initial]\nkind = file\npath = none.mmc\n")
    assert cli.main(["run", "--config", cfg]) == 2


def test_solver_failure_exit(tmp_path):
    text = SHORT.format(plots="false") + "[solver]\ngrad_tol = 1e-30\nmax_iters = 1\n"
    cfg = write(tmp_path, text)
    assert cli.main(["run", "--config", cfg]) == 3
    partial = storage.load_snapshot(tmp_path / "out" / "partial.mmc")
    assert partial.step == 0
    assert len(storage.read_diag_csv(tmp_path / "out" / "diagnostics.csv")) == 1


def test_converge_small(tmp_path, capsys):
    cfg = write(tmp_path, """
[converge]
sizes = 8, 16, 32
t_final = 0.064
[run]
output_dir = out
plots = true
""")
    assert cli.main(["converge", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert "8^2-16^2" in out and "16^2-32^2" in out
    rows = storage.read_convergence_csv(tmp_path / "out" / "convergence.csv")
    assert len(rows) == 2
    assert (tmp_path / "out" / "convergence.png").exists()
