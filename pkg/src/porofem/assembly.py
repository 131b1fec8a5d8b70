"""Discrete operators for the three model problems and boundary conditions.

Global matrices are assembled from per-element dense blocks into a fixed CSR
pattern. Element work is split into fixed-size blocks that are independent of
the worker count, and blocks are merged in element order, so the assembled
arrays are bitwise identical for any number of workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import kernels
from .constitutive import derived_coefficients, vg_state
from .elements import LINE2, QUAD4, QUAD9, gauss_rule
from .errors import DegenerateElementError, DivergedStateError, InvalidConfigError
from .mesh import BOUNDARY_TAGS

BLOCK_SIZE = 256

DISPLACEMENT_FIELDS = ("ux", "uy")
NEUMANN_FIELDS = ("tx", "ty", "flux")


# ---------------------------------------------------------------------------
# boundary conditions


@dataclass(frozen=True)
class DirichletBC:
    tag: str
    field: str  # "p", "ux" or "uy"
    value: float | Callable = 0.0

    def at(self, t):
        return float(self.value(t)) if callable(self.value) else float(self.value)


@dataclass(frozen=True)
class NeumannBC:
    """Traction component (``tx``/``ty``, Pa) or inflow water flux (``flux``, m/s).

    ``span`` restricts the load to a coordinate interval along the boundary.
    """

    tag: str
    field: str
    value: float | Callable = 0.0
    span: tuple | None = None

    def at(self, t):
        return float(self.value(t)) if callable(self.value) else float(self.value)


@dataclass(frozen=True)
class BoundaryConditionSet:
    dirichlet: tuple = ()
    neumann: tuple = ()

    def errors(self, mesh, fields):
        out = []
        tags = set(mesh.boundary_nodes)
        seen = {}
        for bc in self.dirichlet:
            if bc.tag not in tags:
                out.append(f"bc: unknown boundary tag {bc.tag!r}")
            if bc.field not in fields:
                out.append(f"bc: field {bc.field!r} is not an unknown of this problem")
            key = (bc.tag, bc.field)
            if key in seen and seen[key] != bc.value:
                out.append(f"bc: conflicting Dirichlet values on {bc.tag}.{bc.field}")
            seen[key] = bc.value
        for bc in self.neumann:
            if bc.tag not in tags:
                out.append(f"bc: unknown boundary tag {bc.tag!r}")
            if bc.field not in NEUMANN_FIELDS:
                out.append(f"bc: unknown natural condition {bc.field!r}")
            if bc.field != "flux" and "ux" not in fields:
                out.append(f"bc: traction {bc.field!r} needs a displacement field")
            if bc.span is not None and not bc.span[0] < bc.span[1]:
                out.append(f"bc: empty span on {bc.tag}.{bc.field}")
        return out


def dirichlet_set(mesh, dofmap, bcs, t):
    """Prescribed ``(indices, values)`` at time ``t``; later entries win on shared corners.

    Conflicting values on a shared corner node resolve to the condition listed
    last, so the arrays are sorted and unique.
    """
    vals = {}
    for bc in bcs.dirichlet:
        nodes = mesh.boundary_nodes[bc.tag]
        if bc.field == "p":
            nodes = nodes[dofmap.node_to_local["p"][nodes] >= 0]
        for i in dofmap.index(bc.field, nodes):
            vals[int(i)] = bc.at(t)
    idx = np.array(sorted(vals), dtype=np.int64)
    return idx, np.array([vals[i] for i in idx], dtype=float)


# ---------------------------------------------------------------------------
# sparse pattern and parallel block evaluation


class SparsityPattern:
    """Fixed CSR pattern for element dof lists, with a scatter map for values."""

    def __init__(self, element_dofs, n_dofs):
        ed = np.asarray(element_dofs, dtype=np.int64)
        nd = ed.shape[1]
        rows = np.repeat(ed, nd, axis=1).ravel()
        cols = np.tile(ed, (1, nd)).ravel()
        keys = rows * n_dofs + cols
        uniq, self.scatter = np.unique(keys, return_inverse=True)
        self.indices = (uniq % n_dofs).astype(np.int32)
        row_of = uniq // n_dofs
        self.indptr = np.zeros(n_dofs + 1, dtype=np.int64)
        np.cumsum(np.bincount(row_of, minlength=n_dofs), out=self.indptr[1:])
        self.n = n_dofs
        self.nnz = len(uniq)

    def matrix(self, local):
        data = np.bincount(self.scatter, weights=np.asarray(local).ravel(), minlength=self.nnz)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))


def scatter_vector(element_dofs, local, n):
    return np.bincount(np.asarray(element_dofs).ravel(), weights=np.asarray(local).ravel(), minlength=n)


def run_blocks(fn, n_elem, workers=1, block=BLOCK_SIZE):
    """Evaluate ``fn(slice)`` over fixed element blocks, results in block order."""
    slices = [slice(s, min(s + block, n_elem)) for s in range(0, n_elem, block)]
    if workers is None or workers <= 1 or len(slices) == 1:
        return [fn(s) for s in slices]
    with ThreadPoolExecutor(max_workers=int(workers)) as pool:
        return list(pool.map(fn, slices))


# ---------------------------------------------------------------------------
# geometry


class QuadGeometry:
    """Quadrature-point geometry of a 9-node quad mesh with a 3x3 Gauss rule."""

    def __init__(self, mesh, n_gauss=3):
        if mesh.order != 2:
            raise InvalidConfigError("QuadGeometry needs 9-node elements")
        rule = gauss_rule(2, n_gauss)
        self.rule = rule
        self.N9 = QUAD9.eval(rule.points)
        self.N4 = QUAD4.eval(rule.points)
        d9 = QUAD9.eval_grad(rule.points)
        d4 = QUAD4.eval_grad(rule.points)
        X = mesh.element_coords()
        J = np.einsum("eai,qaj->eqij", X, d9)
        det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        bad = np.argwhere(det <= 0.0)
        if len(bad):
            e, q = bad[0]
            raise DegenerateElementError(int(e), float(det[e, q]))
        Jinv = np.linalg.inv(J)
        self.dN9 = np.ascontiguousarray(np.einsum("qaj,eqji->eqai", d9, Jinv))
        self.dN4 = np.ascontiguousarray(np.einsum("qaj,eqji->eqai", d4, Jinv))
        self.wdet = np.ascontiguousarray(rule.weights[None, :] * det)
        self.n_elem = len(X)

    def take(self, s):
        return self.dN9[s], self.N9, self.dN4[s], self.N4, self.wdet[s]


# ---------------------------------------------------------------------------
# MP1: one-dimensional pressure diffusion


@dataclass
class SystemMatrices:
    A: sp.csr_matrix
    b: np.ndarray


def mp1_element_matrices(mesh, n_gauss=2):
    """Per-element stiffness (without ``c_v``) and consistent mass, shape (ne, 2, 2)."""
    rule = gauss_rule(1, n_gauss)
    N = LINE2.eval(rule.points)
    dn = LINE2.eval_grad(rule.points)[:, :, 0]
    X = mesh.element_coords()[:, :, 0]
    J = X @ dn.T  # (ne, nq)
    if np.any(J <= 0):
        e = int(np.argwhere(J <= 0)[0, 0])
        raise DegenerateElementError(e, float(J[e].min()))
    wdet = rule.weights * J
    grad = dn[None, :, :] / J[:, :, None]
    Ke = np.einsum("eq,eqa,eqb->eab", wdet, grad, grad)
    Me = np.einsum("eq,qa,qb->eab", wdet, N, N)
    return Ke, Me


class Mp1Operator:
    """Backward-Euler operator ``(M/dt + c_v K) p = M/dt p_n + K_bulk * inflow``."""

    def __init__(self, mesh, dofmap, params, dt, bcs):
        self.mesh, self.dofmap, self.params, self.dt, self.bcs = mesh, dofmap, params, dt, bcs
        coef = derived_coefficients(params)
        self.c_v = coef.c_v
        Ke, Me = mp1_element_matrices(mesh)
        pat = SparsityPattern(dofmap.element_dofs, dofmap.n_dofs)
        self.K = pat.matrix(Ke)
        self.M = pat.matrix(Me)
        self.A = (self.M / dt + self.c_v * self.K).tocsr()

    def flux_load(self, t):
        f = np.zeros(self.dofmap.n_dofs)
        for bc in self.bcs.neumann:
            if bc.field != "flux":
                continue
            for node in self.mesh.boundary_nodes[bc.tag]:
                f[self.dofmap.index("p", [node])[0]] += self.params.bulk_modulus * bc.at(t)
        return f

    def system(self, p_prev, t_new):
        b = self.M @ p_prev / self.dt + self.flux_load(t_new)
        return SystemMatrices(self.A, b)


def assemble_mp1(mesh, dofmap, params, state_prev, dt, bcs, t_new=0.0):
    if mesh.dim != 1:
        raise InvalidConfigError("MP1 needs a 1D mesh")
    if not dt > 0:
        raise InvalidConfigError("dt must be > 0")
    return Mp1Operator(mesh, dofmap, params, dt, bcs).system(state_prev, t_new)


# ---------------------------------------------------------------------------
# natural boundary loads on 9-node meshes


def _edge_axis(tag):
    return 0 if tag in ("top", "bottom") else 1


def traction_load(mesh, dofmap, bc, t):
    """Consistent nodal forces of a uniform traction over (part of) a boundary."""
    f = np.zeros(dofmap.n_dofs)
    comp = {"tx": "ux", "ty": "uy"}[bc.field]
    value = bc.at(t)
    axis = _edge_axis(bc.tag)
    x1d, w1d = np.polynomial.legendre.leggauss(3)
    for edge in mesh.boundary_edges[bc.tag]:
        s0, s1 = mesh.nodes[edge[0], axis], mesh.nodes[edge[-1], axis]
        lo, hi = s0, s1
        if bc.span is not None:
            lo, hi = max(s0, bc.span[0]), min(s1, bc.span[1])
        if hi <= lo:
            continue
        # Gauss points on [lo, hi] mapped back to the edge parameter in [-1, 1]
        s = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x1d
        tt = 2.0 * (s - s0) / (s1 - s0) - 1.0
        N = np.stack([tt * (tt - 1.0) / 2.0, 1.0 - tt * tt, tt * (tt + 1.0) / 2.0], axis=1)
        fe = value * 0.5 * (hi - lo) * (w1d @ N)
        np.add.at(f, dofmap.index(comp, edge), fe)
    return f


def flux_load(mesh, dofmap, bc, t):
    """Nodal inflow of a uniform normal water flux on pressure (vertex) nodes."""
    f = np.zeros(dofmap.n_dofs)
    value = bc.at(t)
    axis = _edge_axis(bc.tag)
    x1d, w1d = np.polynomial.legendre.leggauss(2)
    for edge in mesh.boundary_edges[bc.tag]:
        a, b = edge[0], edge[-1]
        s0, s1 = mesh.nodes[a, axis], mesh.nodes[b, axis]
        lo, hi = s0, s1
        if bc.span is not None:
            lo, hi = max(s0, bc.span[0]), min(s1, bc.span[1])
        if hi <= lo:
            continue
        s = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x1d
        tt = (s - s0) / (s1 - s0)
        N = np.stack([1.0 - tt, tt], axis=1)
        fe = value * 0.5 * (hi - lo) * (w1d @ N)
        np.add.at(f, dofmap.index("p", [a, b]), fe)
    return f


def natural_loads(mesh, dofmap, bcs, t):
    f = np.zeros(dofmap.n_dofs)
    for bc in bcs.neumann:
        f += flux_load(mesh, dofmap, bc, t) if bc.field == "flux" else traction_load(mesh, dofmap, bc, t)
    return f


def gravity_loads(mesh, dofmap, geom, params, rho):
    """Body force ``rho g`` on u and the gravity part of the Darcy term on p."""
    gy = -params.gravity
    f = np.zeros(dofmap.n_dofs)
    if gy == 0.0:
        return f
    ed = dofmap.element_dofs
    fu = rho * gy * np.einsum("eq,qa->ea", geom.wdet, geom.N9)
    fp = params.mobility * params.rho_w * gy * np.einsum("eq,eqi->ei", geom.wdet, geom.dN4[..., 1])
    f += scatter_vector(ed[:, 9:18], fu, dofmap.n_dofs)
    f += scatter_vector(ed[:, 18:], fp, dofmap.n_dofs)
    return f


# ---------------------------------------------------------------------------
# MP2: saturated u-p consolidation (linear)


class Mp2Operator:
    """Monolithic Taylor-Hood system for saturated compressible consolidation.

    Rows::

        [ K          -B G            ] [u]   [f_u                              ]
        [ B G^T/dt   S/(M dt) + H    ] [p] = [S p_n/(M dt) + B G^T u_n/dt + f_p]
    """

    def __init__(self, mesh, dofmap, params, dt, bcs, workers=1, geom=None):
        if dofmap.fields != ("ux", "uy", "p") or dofmap.element_dofs.shape[0] != mesh.n_elements:
            raise InvalidConfigError("MP2 needs the Taylor-Hood dofmap of this mesh")
        if not dt > 0:
            raise InvalidConfigError("dt must be > 0")
        self.mesh, self.dofmap, self.params, self.dt, self.bcs = mesh, dofmap, params, dt, bcs
        self.geom = geom or QuadGeometry(mesh)
        coef = derived_coefficients(params)
        self.B, self.inv_M = coef.B, coef.inv_M
        g = self.geom

        def work(s):
            return kernels.mp2_blocks(g.dN9[s], g.N4, g.dN4[s], g.wdet[s], params.lam, params.mu, params.mobility)

        parts = run_blocks(work, g.n_elem, workers)
        Kuu, G, S, H = (np.concatenate([p[i] for p in parts]) for i in range(4))
        ne = g.n_elem
        local = np.zeros((ne, 22, 22))
        local[:, :18, :18] = Kuu
        local[:, :18, 18:] = -self.B * G
        local[:, 18:, :18] = self.B * np.swapaxes(G, 1, 2) / dt
        local[:, 18:, 18:] = self.inv_M * S / dt + H
        self.pattern = SparsityPattern(dofmap.element_dofs, dofmap.n_dofs)
        self.A = self.pattern.matrix(local)
        hist = np.zeros_like(local)
        hist[:, 18:, :18] = self.B * np.swapaxes(G, 1, 2) / dt
        hist[:, 18:, 18:] = self.inv_M * S / dt
        self.history = self.pattern.matrix(hist)
        rho = params.solid_fraction0 * params.rho_s + params.phi0 * params.rho_w
        self.f_gravity = gravity_loads(mesh, dofmap, self.geom, params, rho)

    def system(self, x_prev, t_new):
        b = self.history @ x_prev + self.f_gravity + natural_loads(self.mesh, self.dofmap, self.bcs, t_new)
        return SystemMatrices(self.A, b)


def assemble_mp2(mesh, dofmap, params, state_prev, dt, bcs, t_new=0.0, workers=1):
    return Mp2Operator(mesh, dofmap, params, dt, bcs, workers).system(state_prev, t_new)


# ---------------------------------------------------------------------------
# MP3: unsaturated u-p seepage (nonlinear)


def kernel_params(params):
    prm = np.zeros(kernels.N_PRM)
    prm[kernels.P_LAM] = params.lam
    prm[kernels.P_MU] = params.mu
    prm[kernels.P_MOB] = params.mobility
    prm[kernels.P_RHO_S] = params.rho_s
    prm[kernels.P_RHO_W] = params.rho_w
    prm[kernels.P_PHIS0] = params.solid_fraction0
    prm[kernels.P_GY] = -params.gravity
    prm[kernels.P_ALPHA] = params.vg.alpha
    prm[kernels.P_N] = params.vg.n
    prm[kernels.P_M] = params.vg.m_eff
    prm[kernels.P_SRES] = params.vg.s_res
    prm[kernels.P_SMAX] = params.vg.s_max
    return prm


class Mp3Operator:
    """Residual and consistent Jacobian of the unsaturated u-p formulation.

    ``offset`` is subtracted from the residual; the problem layer uses it to
    hold the initial geostatic state in equilibrium.
    """

    def __init__(self, mesh, dofmap, params, dt, bcs, workers=1, geom=None, use_numba=None):
        if math.isfinite(params.k_s) or math.isfinite(params.k_w):
            raise InvalidConfigError("MP3 assumes incompressible constituents (k_s = k_w = inf)")
        if dofmap.fields != ("ux", "uy", "p"):
            raise InvalidConfigError("MP3 needs the Taylor-Hood dofmap")
        self.mesh, self.dofmap, self.params, self.dt, self.bcs = mesh, dofmap, params, dt, bcs
        self.workers = workers
        self.use_numba = use_numba
        self.geom = geom or QuadGeometry(mesh)
        self.pattern = SparsityPattern(dofmap.element_dofs, dofmap.n_dofs)
        self.prm = kernel_params(params)
        self.offset = np.zeros(dofmap.n_dofs)

    def _gather(self, x):
        ed = self.dofmap.element_dofs
        xe = x[ed]
        return xe[:, :18].reshape(-1, 2, 9), xe[:, 18:]

    def local(self, x, x_prev, want_jac=True):
        ue, pe = self._gather(x)
        uen, pen = self._gather(x_prev)
        g = self.geom

        def work(s):
            return kernels.mp3_local(
                g.dN9[s], g.N9, g.dN4[s], g.N4, g.wdet[s],
                ue[s], pe[s], uen[s], pen[s], self.prm, self.dt, want_jac, self.use_numba,
            )

        parts = run_blocks(work, g.n_elem, self.workers)
        R = np.concatenate([p[0] for p in parts])
        J = np.concatenate([p[1] for p in parts]) if want_jac else None
        if not np.all(np.isfinite(R)):
            e = int(np.argwhere(~np.isfinite(R).all(axis=1))[0, 0])
            centre = self.mesh.nodes[self.mesh.elements[e, 8]]
            raise DivergedStateError(f"non-finite residual in element {e} near {tuple(centre)}", centre)
        return R, J

    def residual(self, x, x_prev, t_new):
        R, _ = self.local(x, x_prev, want_jac=False)
        r = scatter_vector(self.dofmap.element_dofs, R, self.dofmap.n_dofs)
        return r - natural_loads(self.mesh, self.dofmap, self.bcs, t_new) - self.offset

    def jacobian(self, x, x_prev, t_new=None):
        _, J = self.local(x, x_prev, want_jac=True)
        return self.pattern.matrix(J)

    def residual_and_jacobian(self, x, x_prev, t_new):
        R, J = self.local(x, x_prev, want_jac=True)
        r = scatter_vector(self.dofmap.element_dofs, R, self.dofmap.n_dofs)
        r -= natural_loads(self.mesh, self.dofmap, self.bcs, t_new) + self.offset
        return r, self.pattern.matrix(J)

    def point_fields(self, x):
        """Saturation and relative permeability at every quadrature point."""
        _, pe = self._gather(x)
        p = pe @ self.geom.N4.T
        S, _, kr, _ = vg_state(p, self.params)
        return S, kr


def assemble_mp3_residual(mesh, dofmap, params, state_iter, state_prev, dt, bcs, t_new=0.0, workers=1):
    return Mp3Operator(mesh, dofmap, params, dt, bcs, workers).residual(state_iter, state_prev, t_new)


def assemble_mp3_jacobian(mesh, dofmap, params, state_iter, state_prev, dt, bcs, t_new=0.0, workers=1):
    return Mp3Operator(mesh, dofmap, params, dt, bcs, workers).jacobian(state_iter, state_prev, t_new)


# ---------------------------------------------------------------------------
# Darcy flux through a boundary


def boundary_mean_velocity(mesh, dofmap, params, x, tag="bottom", component=1):
    """Area-averaged Darcy velocity component at the quadrature points of a boundary.

    Pressure gradients come from the elements adjacent to the boundary; the
    relative permeability is evaluated from the boundary pressure.
    """
    side = {"bottom": (None, -1.0), "top": (None, 1.0), "left": (-1.0, None), "right": (1.0, None)}[tag]
    x1d, w1d = np.polynomial.legendre.leggauss(3)
    if side[0] is None:
        pts = np.column_stack([x1d, np.full(3, side[1])])
        axis = 0
    else:
        pts = np.column_stack([np.full(3, side[0]), x1d])
        axis = 1
    N4 = QUAD4.eval(pts)
    d9 = QUAD9.eval_grad(pts)
    d4 = QUAD4.eval_grad(pts)
    g = params.gravity_vector(2)
    total = 0.0
    length = 0.0
    for e in mesh.boundary_elements[tag]:
        X = mesh.nodes[mesh.elements[e]]
        J = np.einsum("ai,qaj->qij", X, d9)
        grads = np.einsum("qaj,qji->qai", d4, np.linalg.inv(J))
        pe = x[dofmap.element_dofs[e, 18:]]
        p = N4 @ pe
        gp = np.einsum("qai,a->qi", grads, pe)
        _, _, kr, _ = vg_state(p, params)
        w = -(kr[:, None] * params.mobility) * (gp - params.rho_w * g)
        ds = np.abs(J[:, axis, axis])
        total += float(np.sum(w1d * ds * w[:, component]))
        length += float(np.sum(w1d * ds))
    return total / length


# ---------------------------------------------------------------------------
# Dirichlet conditions


def apply_dirichlet(system, indices, values):
    """Symmetric elimination of prescribed dofs.

    Prescribed rows and columns become identity rows/columns, and the known
    column contributions move to the right-hand side, so a symmetric input
    stays symmetric.
    """
    A = sp.csr_matrix(system.A)
    n = A.shape[0]
    idx = np.asarray(indices, dtype=np.int64)
    if len(idx) and (idx.min() < 0 or idx.max() >= n):
        raise IndexError("Dirichlet index out of range")
    xd = np.zeros(n)
    xd[idx] = values
    b = np.asarray(system.b, dtype=float) - A @ xd
    keep = np.ones(n)
    keep[idx] = 0.0
    D = sp.diags(keep)
    A2 = (D @ A @ D + sp.diags(1.0 - keep)).tocsr()
    b[idx] = values
    return SystemMatrices(A2, b)


def problem_fields(mesh):
    return ("p",) if mesh.dim == 1 else ("ux", "uy", "p")


__all__ = [
    "BOUNDARY_TAGS",
    "BoundaryConditionSet",
    "DirichletBC",
    "NeumannBC",
    "SystemMatrices",
    "apply_dirichlet",
    "assemble_mp1",
    "assemble_mp2",
    "assemble_mp3_jacobian",
    "assemble_mp3_residual",
    "boundary_mean_velocity",
    "dirichlet_set",
]
