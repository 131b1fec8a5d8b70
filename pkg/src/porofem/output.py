"""CSV profiles and legacy VTK snapshots.

Numbers are written with 17 significant digits so that files from identical
runs are byte-identical and values survive a text round trip exactly.
"""
from __future__ import annotations

import os

import numpy as np

from .constitutive import vg_saturation
from .errors import InvalidRequestError

FLOAT = "%.16e"


def _fmt(v):
    return FLOAT % float(v)


def write_csv(path, columns, units, rows, comment=None):
    """Comma-separated file: ``#`` comment lines with units, a header row, data rows."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    lines = []
    if comment:
        lines.append(f"# {comment}")
    lines.append("# units: " + ", ".join(f"{c} [{u}]" for c, u in zip(columns, units)))
    lines.append(",".join(columns))
    for r in rows:
        lines.append(",".join(_fmt(v) for v in r))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path):
    """Column name list and data array of a file written by :func:`write_csv`."""
    with open(path, encoding="ascii") as fh:
        body = [ln for ln in fh.read().splitlines() if ln and not ln.startswith("#")]
    cols = body[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in body[1:]]).reshape(-1, len(cols))
    return cols, data


def snapshot_at(result, t, tol=1e-9):
    """Snapshot at a scheduled output time; t = 0 is the initial condition."""
    if abs(t) <= tol and result.initial is not None:
        return result.initial
    try:
        return result.at(t, tol)
    except KeyError:
        raise InvalidRequestError(f"t = {t!r} s is not a scheduled output time (have {result.times})") from None


def profile(problem, x):
    """The plotted profile of a state: ``(columns, units, rows)``.

    mp1: pore pressure against depth. mp2: vertical displacement of the top
    surface. mp3: pore pressure against height along the node column nearest
    to the vertical center line.
    """
    name = problem.preset.problem
    mesh = problem.mesh
    if name == "mp1":
        z = mesh.nodes[:, 0]
        return ("z", "p_w"), ("m", "Pa"), np.column_stack([z, x])
    if name == "mp2":
        top = mesh.boundary_nodes["top"]
        order = np.argsort(mesh.nodes[top, 0], kind="stable")
        top = top[order]
        uy = problem.displacement(x)[top, 1]
        return ("x", "u_y"), ("m", "m"), np.column_stack([mesh.nodes[top, 0], uy])
    pn = problem.pressure_nodes()
    X = mesh.nodes[pn]
    xc = 0.5 * mesh.extent[0]
    col_x = X[np.argmin(np.abs(X[:, 0] - xc)), 0]
    sel = np.flatnonzero(X[:, 0] == col_x)
    sel = sel[np.argsort(X[sel, 1], kind="stable")]
    return ("y", "p_w"), ("m", "Pa"), np.column_stack([X[sel, 1], problem.pressure(x)[sel]])


def write_profile_csv(problem, result, t, path):
    """Write the profile of the snapshot at output time ``t`` (s)."""
    snap = snapshot_at(result, t)
    cols, units, rows = profile(problem, snap.x)
    write_csv(path, cols, units, rows, comment=f"{problem.preset.problem} profile at t = {_fmt(snap.t)} s")
    return path


def write_series_csv(result, key, path, column, unit, comment=None):
    """Per-step diagnostic ``key`` against time."""
    rows = [(s["t"], s[key]) for s in result.steps if key in s]
    if not rows:
        raise InvalidRequestError(f"no per-step values for {key!r}")
    write_csv(path, ("t", column), ("s", unit), rows, comment=comment)
    return path


def write_bottom_flux_csv(result, path):
    """Area-averaged Darcy velocity w_y on the base against time (mp3)."""
    return write_series_csv(result, "bottom_w_y", path, "w_y", "m/s", comment="mean Darcy velocity on the base")


def _vtk_header(title):
    return ["# vtk DataFile Version 3.0", title, "ASCII"]


def _vtk_array(lines, name, values, vector=False):
    if vector:
        lines.append(f"VECTORS {name} double")
        lines.extend(" ".join(_fmt(c) for c in v) for v in values)
    else:
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(_fmt(v) for v in values)


def vtk_text(problem, snapshot):
    """Legacy ASCII VTK 3.0 text of one snapshot.

    1D runs become POLYDATA line cells. 2D runs are written on the bilinear
    vertex grid as VTK_QUAD cells with displacement, pore pressure and, when
    the problem is unsaturated, saturation.
    """
    mesh = problem.mesh
    name = problem.preset.problem
    x = snapshot.x
    lines = _vtk_header(f"{name} t = {_fmt(snapshot.t)} s")
    if mesh.dim == 1:
        n = mesh.n_nodes
        lines.append("DATASET POLYDATA")
        lines.append(f"POINTS {n} double")
        lines.extend(f"{_fmt(z)} {_fmt(0.0)} {_fmt(0.0)}" for z in mesh.nodes[:, 0])
        ne = mesh.n_elements
        lines.append(f"LINES {ne} {3 * ne}")
        lines.extend(f"2 {a} {b}" for a, b in mesh.elements)
        lines.append(f"POINT_DATA {n}")
        _vtk_array(lines, "pore_pressure", x)
        return "\n".join(lines) + "\n"
    pn = problem.pressure_nodes()
    local = problem.dofmap.node_to_local["p"]
    pts = mesh.nodes[pn]
    cells = local[mesh.elements[:, :4]]
    lines.append("DATASET UNSTRUCTURED_GRID")
    lines.append(f"POINTS {len(pn)} double")
    lines.extend(f"{_fmt(a)} {_fmt(b)} {_fmt(0.0)}" for a, b in pts)
    ne = len(cells)
    lines.append(f"CELLS {ne} {5 * ne}")
    lines.extend("4 " + " ".join(str(int(c)) for c in cell) for cell in cells)
    lines.append(f"CELL_TYPES {ne}")
    lines.extend("9" for _ in range(ne))
    lines.append(f"POINT_DATA {len(pn)}")
    u = problem.displacement(x)[pn]
    _vtk_array(lines, "displacement", np.column_stack([u, np.zeros(len(pn))]), vector=True)
    p = problem.pressure(x)
    _vtk_array(lines, "pore_pressure", p)
    if name == "mp3":
        _vtk_array(lines, "saturation", np.atleast_1d(vg_saturation(p, problem.params)))
    return "\n".join(lines) + "\n"


def write_vtk(problem, snapshot, path):
    if snapshot is None:
        raise InvalidRequestError("no snapshot to write")
    text = vtk_text(problem, snapshot)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)
    return path


def time_tag(t):
    return format(float(t), ".10g").replace("+", "")


def write_vtk_series(problem, snapshots, directory, prefix="snapshot"):
    """One VTK file per snapshot; refuses an empty list rather than writing nothing."""
    snapshots = list(snapshots)
    if not snapshots:
        raise InvalidRequestError("empty snapshot list: nothing to write")
    paths = []
    for s in snapshots:
        path = os.path.join(directory, f"{prefix}_t{time_tag(s.t)}s.vtk")
        paths.append(write_vtk(problem, s, path))
    return paths
