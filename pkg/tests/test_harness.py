import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from virecon import cli
from virecon.config import load_config
from virecon.experiment import CSV_COLUMNS, dorfler_marking, run_experiment, top_fraction_share
from virecon.output import csv_text, read_csv, vtk_text, write_outputs

HEADER = ("level,h_max,ndofs,nsteps,err_LinfL2,eta0_T,eta_total,term_signeg,term_comp,"
          "term_dual,effectivity,ortho_resid,seconds")
SMALL = "problem=manufactured_obstacle\nk=1\nn=2\nlevels=1"


@pytest.fixture(scope="module")
def small_report():
    return run_experiment(load_config(SMALL))


def test_one_level_csv(tmp_path, small_report):
    write_outputs(small_report, tmp_path)
    lines = (tmp_path / "convergence.csv").read_text().splitlines()
    assert len(lines) == 2
    assert lines[0] == HEADER == ",".join(CSV_COLUMNS)
    # no timing unless requested, no ortho without verification
    assert lines[1].endswith(",,")


def test_csv_round_trip(tmp_path, small_report):
    write_outputs(small_report, tmp_path)
    back = read_csv(tmp_path / "convergence.csv")
    row = small_report.rows[0]
    for name in CSV_COLUMNS:
        want = getattr(row, name)
        if want is None:
            assert back[0][name] is None
        else:
            assert back[0][name] == pytest.approx(want, rel=1e-12, abs=0)


def test_vtk_fields(small_report):
    level = small_report.levels[0]
    text = vtk_text(level)
    nv = level.trajectory.space.mesh.n_vertices
    assert level.trajectory.space.n_dofs == nv
    assert f"POINTS {nv} double" in text and f"POINT_DATA {nv}" in text
    for name in ("w", "sigma", "chi", "eta0_sq"):
        assert f"SCALARS {name} double 1" in text
    nt = level.trajectory.space.mesh.n_triangles
    assert f"CELL_DATA {nt}" in text


def test_vtk_p2_uses_vertices():
    report = run_experiment(load_config("problem=heat_smooth\nk=2\nn=2\nlevels=1"))
    level = report.levels[0]
    text = vtk_text(level)
    nv = level.trajectory.space.mesh.n_vertices
    assert f"POINTS {nv} double" in text
    assert np.isfinite(level.row.eta_total)


def test_deterministic_csv(small_report):
    again = run_experiment(load_config(SMALL))
    assert csv_text(again) == csv_text(small_report)


def test_printed_residual_changes_estimate(small_report):
    printed = run_experiment(load_config(SMALL + "\nresidual=printed"))
    assert printed.rows[0].eta0_T != small_report.rows[0].eta0_T


def test_verification_fills_ortho():
    report = run_experiment(load_config(
        SMALL + "\nverification=true\nfine_depth=1\nsigma_mode=consistent"))
    assert report.rows[0].ortho_resid is not None
    assert report.rows[0].ortho_resid <= 1e-9


def test_record_time_fills_seconds():
    report = run_experiment(load_config(SMALL + "\nrecord_time=true"))
    assert report.rows[0].seconds > 0


def test_k1_total_finite(small_report):
    row = small_report.rows[0]
    assert np.isfinite(row.eta_total) and row.eta_total > 0
    assert row.effectivity is not None and row.effectivity >= 1


def test_adaptive_smoke():
    report = run_experiment(load_config(
        "problem=pyramid_adaptive\nrefinement=adaptive\ntheta=0.5\nbudget=120"))
    dofs = [r.ndofs for r in report.rows]
    assert len(dofs) >= 2 and all(d <= 120 for d in dofs)
    assert all(a < b for a, b in zip(dofs[:-1], dofs[1:]))
    assert all(r.err_LinfL2 is None and r.effectivity is None for r in report.rows)


def test_dorfler_examples():
    assert list(dorfler_marking(np.array([1.0, 4.0, 2.0, 3.0]), 0.5)) == [1, 3]
    assert list(dorfler_marking(np.array([1.0, 1.0]), 1.0)) == [0, 1]
    assert len(dorfler_marking(np.zeros(3), 0.5)) == 0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1e3), min_size=1, max_size=50), st.floats(0.01, 1.0))
def test_dorfler_is_minimal(values, theta):
    v = np.array(values)
    marks = dorfler_marking(v, theta)
    total = v.sum()
    if total == 0:
        assert len(marks) == 0
        return
    assert v[marks].sum() >= theta * total * (1 - 1e-12)
    # dropping the smallest marked element breaks the criterion
    if len(marks) > 1:
        assert v[marks].sum() - v[marks].min() < theta * total * (1 + 1e-12)


def test_top_fraction_share():
    v = np.r_[np.full(9, 1.0), 91.0]
    assert top_fraction_share(v, 0.1) == pytest.approx(0.91)
    assert top_fraction_share(np.zeros(4)) == 0.0


def test_cli_run(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(SMALL + f"\noutput_dir={tmp_path / 'out'}\n")
    assert cli.main(["run", str(cfg)]) == 0
    assert (tmp_path / "out" / "convergence.csv").exists()
    assert (tmp_path / "out" / "solution_level0.vtk").exists()


def test_cli_bad_config(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("problem=heat_smooth\ntheta=1.5\n")
    assert cli.main(["run", str(cfg)]) == 2
    assert cli.main(["run", str(tmp_path / "missing.cfg")]) == 2


def test_cli_bad_output_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = tmp_path / "c.cfg"
    cfg.write_text(SMALL + "\n")
    assert cli.main(["run", str(cfg), "-o", str(blocker / "sub")]) == 2


def test_cli_usage_errors():
    assert cli.main([]) == 2
    assert cli.main(["selftest", "--only", "11"]) == 2


def test_cli_selftest_subset(capsys):
    assert cli.main(["selftest", "--only", "7"]) in (0, 1)
    out = capsys.readouterr().out
    assert "criteria passed" in out and out.count("\n") == 2


def test_write_outputs_unwritable(tmp_path, small_report):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        write_outputs(small_report, blocker / "sub")


def test_threads_env_does_not_change_results(monkeypatch, small_report):
    monkeypatch.setenv("VIRECON_THREADS", "3")
    assert csv_text(run_experiment(load_config(SMALL))) == csv_text(small_report)
    assert os.environ["VIRECON_THREADS"] == "3"
