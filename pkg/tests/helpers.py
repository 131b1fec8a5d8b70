"""Small builders shared by the test modules."""
import numpy as np

from porofem.assembly import BoundaryConditionSet, DirichletBC, NeumannBC
from porofem.constitutive import INCOMPRESSIBLE, MaterialParams
from porofem.mesh import build_taylor_hood_dofmap, generate_quad_mesh

ROLLERS = (
    DirichletBC("left", "ux", 0.0),
    DirichletBC("right", "ux", 0.0),
    DirichletBC("bottom", "ux", 0.0),
    DirichletBC("bottom", "uy", 0.0),
)


def small_mesh(nx=3, ny=4, w=0.3, h=0.4):
    mesh = generate_quad_mesh(w, h, w / nx, h / ny, 2)
    return mesh, build_taylor_hood_dofmap(mesh)


def incompressible(**kw):
    base = dict(lam=4.0e6, mu=4.0e6, k_s=INCOMPRESSIBLE, k_w=INCOMPRESSIBLE, k=1.0e-12, mu_w=1.0e-3,
                rho_s=2000.0, rho_w=1000.0, phi0=0.3, gravity=0.0)
    base.update(kw)
    return MaterialParams(**base)


def oedometer_bcs(load=-1.0e5):
    return BoundaryConditionSet(
        dirichlet=ROLLERS + (DirichletBC("top", "p", 0.0),),
        neumann=(NeumannBC("top", "ty", load),),
    )


def random_state(dofmap, n_nodes, rng, u_scale=1e-4, p_offset=-3e3, p_scale=2e3):
    x = np.zeros(dofmap.n_dofs)
    x[: 2 * n_nodes] = u_scale * rng.standard_normal(2 * n_nodes)
    x[dofmap.block("p")] = p_offset + p_scale * rng.standard_normal(len(dofmap.field_nodes["p"]))
    return x
