"""Structured interval and quadrilateral meshes, and degree-of-freedom maps."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfigError

BOUNDARY_TAGS = ("top", "bottom", "left", "right")


@dataclass(frozen=True, eq=False)
class Mesh:
    dim: int
    nodes: np.ndarray  # (n_nodes, dim)
    elements: np.ndarray  # (n_elem, nen)
    order: int
    boundary_nodes: dict = field(default_factory=dict)
    # per tag: (n_edges, order + 1) node ids ordered along the boundary
    boundary_edges: dict = field(default_factory=dict)
    boundary_elements: dict = field(default_factory=dict)
    shape: tuple = ()  # element counts per axis
    extent: tuple = ()  # physical size per axis

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_elements(self):
        return len(self.elements)

    def vertex_nodes(self):
        """Node ids of element corners (the bilinear sub-grid for 9-node quads)."""
        if self.dim == 1 or self.order == 1:
            return np.arange(self.n_nodes)
        nx, ny = self.shape
        NX = 2 * nx + 1
        jj, ii = np.meshgrid(np.arange(0, 2 * ny + 1, 2), np.arange(0, NX, 2), indexing="ij")
        return (jj * NX + ii).ravel()

    def element_coords(self):
        return self.nodes[self.elements]


def _count(length, h, name):
    if length <= 0 or h <= 0:
        raise InvalidConfigError(f"{name}: length and spacing must be positive")
    ratio = length / h
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > 1e-9:
        raise InvalidConfigError(f"{name}: {length!r} is not divisible by spacing {h!r}")
    return n


def generate_interval_mesh(length, n_elem):
    """Uniform 2-node line mesh on [0, length]; z = 0 is the ``top`` end."""
    if not length > 0 or int(n_elem) != n_elem or n_elem < 1:
        raise InvalidConfigError(
            f"interval mesh needs length > 0 and n_elem >= 1, got {length!r}, {n_elem!r}"
        )
    n_elem = int(n_elem)
    z = length * np.arange(n_elem + 1) / n_elem
    elems = np.column_stack([np.arange(n_elem), np.arange(1, n_elem + 1)])
    return Mesh(
        dim=1,
        nodes=z.reshape(-1, 1),
        elements=elems,
        order=1,
        boundary_nodes={"top": np.array([0]), "bottom": np.array([n_elem])},
        boundary_edges={"top": np.array([[0]]), "bottom": np.array([[n_elem]])},
        boundary_elements={"top": np.array([0]), "bottom": np.array([n_elem - 1])},
        shape=(n_elem,),
        extent=(float(length),),
    )


def generate_quad_mesh(width, height, hx, hy, order=1):
    """Structured quad mesh of [0, width] x [0, height].

    Nodes are numbered row by row with x fastest; ``order=2`` produces 9-node
    elements. y = height is the ``top`` boundary.
    """
    if order not in (1, 2):
        raise InvalidConfigError(f"quad mesh order must be 1 or 2, got {order!r}")
    nx = _count(width, hx, "width/hx")
    ny = _count(height, hy, "height/hy")
    NX, NY = order * nx + 1, order * ny + 1
    xs = width * np.arange(NX) / (NX - 1)
    ys = height * np.arange(NY) / (NY - 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return j * NX + i

    ej, ei = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    I, J = order * ei.ravel(), order * ej.ravel()
    s = order
    cols = [nid(I, J), nid(I + s, J), nid(I + s, J + s), nid(I, J + s)]
    if order == 2:
        cols += [nid(I + 1, J), nid(I + 2, J + 1), nid(I + 1, J + 2), nid(I, J + 1), nid(I + 1, J + 1)]
    elements = np.column_stack(cols)

    along = np.arange(order + 1)
    bn = {
        "bottom": nid(np.arange(NX), 0),
        "top": nid(np.arange(NX), NY - 1),
        "left": nid(0, np.arange(NY)),
        "right": nid(NX - 1, np.arange(NY)),
    }
    ex = np.arange(nx)
    ey = np.arange(ny)
    be = {
        "bottom": nid(order * ex[:, None] + along, 0),
        "top": nid(order * ex[:, None] + along, NY - 1),
        "left": nid(0, order * ey[:, None] + along),
        "right": nid(NX - 1, order * ey[:, None] + along),
    }
    bel = {
        "bottom": ex,
        "top": (ny - 1) * nx + ex,
        "left": ey * nx,
        "right": ey * nx + nx - 1,
    }
    return Mesh(
        dim=2,
        nodes=nodes,
        elements=elements,
        order=order,
        boundary_nodes=bn,
        boundary_edges=be,
        boundary_elements=bel,
        shape=(nx, ny),
        extent=(float(width), float(height)),
    )


@dataclass(frozen=True, eq=False)
class DofMap:
    """Mapping from (field, mesh node) to global equation index.

    Fields are numbered in blocks in the order of ``fields``; within a block
    the order follows ascending mesh node id.
    """

    fields: tuple
    field_nodes: dict  # field -> sorted mesh node ids carrying it
    offsets: dict
    node_to_local: dict  # field -> (n_mesh_nodes,) local index or -1
    n_dofs: int
    element_dofs: np.ndarray  # (n_elem, n_local_dofs)

    def index(self, field, nodes):
        local = self.node_to_local[field][np.asarray(nodes)]
        if np.any(local < 0):
            raise KeyError(f"field {field!r} is not defined on some requested nodes")
        return self.offsets[field] + local

    def lookup(self, index):
        """Inverse of :meth:`index` for a single global index."""
        if not 0 <= index < self.n_dofs:
            raise IndexError(index)
        for f in reversed(self.fields):
            if index >= self.offsets[f]:
                return f, int(self.field_nodes[f][index - self.offsets[f]])
        raise IndexError(index)

    def block(self, field):
        off = self.offsets[field]
        return slice(off, off + len(self.field_nodes[field]))


def _make_dofmap(mesh, layout):
    offsets, field_nodes, n2l = {}, {}, {}
    off = 0
    for name, nodes in layout:
        nodes = np.asarray(nodes)
        loc = np.full(mesh.n_nodes, -1, dtype=np.int64)
        loc[nodes] = np.arange(len(nodes))
        offsets[name], field_nodes[name], n2l[name] = off, nodes, loc
        off += len(nodes)
    return offsets, field_nodes, n2l, off


def build_scalar_dofmap(mesh, field="p"):
    """One unknown per node, e.g. pore pressure on the line mesh."""
    offsets, fn, n2l, n = _make_dofmap(mesh, [(field, np.arange(mesh.n_nodes))])
    return DofMap((field,), fn, offsets, n2l, n, mesh.elements.astype(np.int64))


def build_taylor_hood_dofmap(mesh):
    """Q2 displacement / Q1 pressure layout: all u_x, then all u_y, then all p."""
    if mesh.dim != 2 or mesh.order != 2 or mesh.elements.shape[1] != 9:
        raise InvalidConfigError("Taylor-Hood layout needs a mesh of 9-node quads")
    allnodes = np.arange(mesh.n_nodes)
    verts = mesh.vertex_nodes()
    offsets, fn, n2l, n = _make_dofmap(mesh, [("ux", allnodes), ("uy", allnodes), ("p", verts)])
    el = mesh.elements
    edofs = np.hstack([offsets["ux"] + el, offsets["uy"] + el, offsets["p"] + n2l["p"][el[:, :4]]])
    return DofMap(("ux", "uy", "p"), fn, offsets, n2l, n, edofs.astype(np.int64))
