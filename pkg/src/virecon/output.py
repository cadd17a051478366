"""CSV summary and legacy ASCII VTK files for a convergence report."""

import csv
import io
from pathlib import Path

import numpy as np

from virecon.experiment import CSV_COLUMNS


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.17g" % value


def csv_text(report):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in report.rows:
        writer.writerow([_fmt(getattr(row, name)) for name in CSV_COLUMNS])
    return buf.getvalue()


def read_csv(path):
    """Parse ``convergence.csv`` back into a list of dicts (empty fields -> None)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{k: (float(v) if v != "" else None) for k, v in r.items()} for r in rows]


def vtk_text(level, title="virecon solution"):
    """Final-time solution of one level as a legacy ASCII unstructured grid.

    Point fields are the vertex values of ``w``, ``sigma`` and ``chi`` (the
    first ``n_vertices`` coefficients, also for P2); the cell field is the
    squared per-element eta0 at the final time.
    """
    traj = level.trajectory
    mesh = traj.space.mesh
    nv, nt = mesh.n_vertices, mesh.n_triangles
    last = traj.states[-1]
    sigma = traj.sigma[-1].sigma.coef if traj.sigma else np.zeros(traj.space.n_dofs)
    eta_sq = level.analysis.breakdown.eta0_elem_sq
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {nv} double"]
    lines += ["%.17g %.17g 0" % (x, y) for x, y in mesh.vertices]
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += ["3 %d %d %d" % tuple(tri) for tri in mesh.triangles]
    lines.append(f"CELL_TYPES {nt}")
    lines += ["5"] * nt
    lines.append(f"POINT_DATA {nv}")
    for name, values in (("w", last.w.coef), ("sigma", sigma), ("chi", last.chi.coef)):
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [_fmt(v) for v in values[:nv]]
    lines.append(f"CELL_DATA {nt}")
    lines += ["SCALARS eta0_sq double 1", "LOOKUP_TABLE default"]
    lines += [_fmt(v) for v in eta_sq]
    return "\n".join(lines) + "\n"


def write_outputs(report, out_dir):
    """Write ``convergence.csv`` and ``solution_level<L>.vtk`` into ``out_dir``.

    Raises ``OSError`` when the directory cannot be created or written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "convergence.csv"]
    paths[0].write_text(csv_text(report))
    for level in report.levels:
        path = out / f"solution_level{level.row.level}.vtk"
        path.write_text(vtk_text(level))
        paths.append(path)
    return paths
