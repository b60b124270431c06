"""CSV, legacy VTK and MatrixMarket output."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import scipy.io

from .mesh import SpaceTimeMesh, number_nodes

__all__ = ["format_float", "write_csv", "read_csv", "write_profile_csv", "write_mesh_vtk",
           "write_field_vtk", "write_matrix_market", "PROFILE_HEADER", "CONVERGENCE_HEADER",
           "TRACE_HEADER", "ERROR_HEADER"]

PROFILE_HEADER = ("arc_length", "u")
CONVERGENCE_HEADER = ("h", "eta", "err_h", "err_l2")
TRACE_HEADER = ("round", "dof", "eta", "err_l2")
ERROR_HEADER = ("h", "dofs", "err_l2", "err_h", "err_h_star", "eta")

VTK_QUAD = 9
VTK_HEXAHEDRON = 12
# local corner (first axis fastest) -> VTK winding
_VTK_ORDER = {2: [0, 1, 3, 2], 3: [0, 1, 3, 2, 4, 5, 7, 6]}


def format_float(x) -> str:
    """Shortest round-trip decimal; ints and strings pass through, None becomes ``nan``."""
    if x is None:
        return "nan"
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_float(v) for v in row])
    return path


def read_csv(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {name: np.array([float(r[i]) for r in body]) for i, name in enumerate(header)}


def write_profile_csv(path, arc_length, values) -> Path:
    return write_csv(path, PROFILE_HEADER, zip(arc_length, values))


def _corner_cells(mesh: SpaceTimeMesh):
    numbering = number_nodes(mesh, 1)
    cells = numbering.element_nodes[:, _VTK_ORDER[mesh.ndim]]
    return numbering, cells


def _write_vtk(path, points, cells, cell_type, point_data=None, cell_data=None, title="stgls"):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pts3 = np.zeros((len(points), 3))
    pts3[:, : points.shape[1]] = points
    npc = cells.shape[1]
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{title}\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {len(pts3)} double\n")
        for p in pts3:
            fh.write(" ".join(format_float(v) for v in p) + "\n")
        fh.write(f"CELLS {len(cells)} {len(cells) * (npc + 1)}\n")
        for c in cells:
            fh.write(f"{npc} " + " ".join(str(int(i)) for i in c) + "\n")
        fh.write(f"CELL_TYPES {len(cells)}\n")
        fh.write("".join(f"{cell_type}\n" for _ in range(len(cells))))
        if cell_data:
            fh.write(f"CELL_DATA {len(cells)}\n")
            for name, vals in cell_data.items():
                _scalars(fh, name, vals)
        if point_data:
            fh.write(f"POINT_DATA {len(pts3)}\n")
            for name, vals in point_data.items():
                _scalars(fh, name, vals)
    return path


def _scalars(fh, name, vals):
    vals = np.asarray(vals)
    kind = "int" if np.issubdtype(vals.dtype, np.integer) else "double"
    fh.write(f"SCALARS {name} {kind} 1\nLOOKUP_TABLE default\n")
    for v in vals:
        fh.write(format_float(v) + "\n")


def write_mesh_vtk(path, mesh: SpaceTimeMesh, cell_data: dict | None = None) -> Path:
    """Leaves as quads (one space dimension) or hexahedra (two), with ``level``."""
    numbering, cells = _corner_cells(mesh)
    data = {"level": np.asarray(mesh.levels, dtype=np.int64)}
    data.update(cell_data or {})
    ctype = VTK_QUAD if mesh.ndim == 2 else VTK_HEXAHEDRON
    return _write_vtk(path, numbering.node_coords, cells, ctype, cell_data=data)


def write_field_vtk(path, field, name: str = "u", cell_data: dict | None = None) -> Path:
    """Field values at element corners plus the ``level`` cell field."""
    mesh = field.mesh
    numbering, cells = _corner_cells(mesh)
    values = field(numbering.node_coords)
    data = {"level": np.asarray(mesh.levels, dtype=np.int64)}
    data.update(cell_data or {})
    ctype = VTK_QUAD if mesh.ndim == 2 else VTK_HEXAHEDRON
    return _write_vtk(path, numbering.node_coords, cells, ctype, point_data={name: values}, cell_data=data)


def write_matrix_market(path, system) -> Path:
    """Dump the reduced matrix and right-hand side of a DiscreteSystem."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    scipy.io.mmwrite(str(path), system.matrix)
    rhs_path = path.with_name(path.stem + "_rhs.mtx")
    scipy.io.mmwrite(str(rhs_path), system.rhs.reshape(-1, 1))
    return path
