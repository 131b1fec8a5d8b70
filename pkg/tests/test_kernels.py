import numpy as np
import pytest

from porofem import _jit, kernels
from porofem.assembly import QuadGeometry, kernel_params
from porofem.constitutive import VanGenuchten
from porofem.mesh import generate_quad_mesh

from helpers import incompressible

pytestmark = pytest.mark.skipif(not _jit.HAVE_NUMBA, reason="numba not installed")


@pytest.fixture(scope="module")
def geom():
    mesh = generate_quad_mesh(0.3, 0.4, 0.1, 0.1, 2)
    mesh.nodes[:, 0] += 0.02 * np.sin(7.0 * mesh.nodes[:, 1])  # non-affine elements
    return QuadGeometry(mesh)


def test_mp2_blocks_backends_agree(geom):
    g = geom
    args = (g.dN9, g.N4, g.dN4, g.wdet, 3.0e6, 2.0e6, 1.0e-9)
    a = kernels.mp2_blocks(*args, use_numba=True)
    b = kernels.mp2_blocks(*args, use_numba=False)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-12 * np.abs(y).max())


@pytest.mark.parametrize("want_jac", [True, False])
def test_mp3_local_backends_agree(geom, want_jac):
    g = geom
    rng = np.random.default_rng(1)
    ne = g.n_elem
    prm = kernel_params(incompressible(gravity=9.81, vg=VanGenuchten(alpha=3e3, n=2.0, s_res=0.2)))
    ue = 1e-4 * rng.standard_normal((ne, 2, 9))
    uen = 1e-4 * rng.standard_normal((ne, 2, 9))
    pe = -2e3 + 4e3 * rng.standard_normal((ne, 4))  # both wet and dry points
    pen = pe + 10.0 * rng.standard_normal((ne, 4))
    args = (g.dN9, g.N9, g.dN4, g.N4, g.wdet, ue, pe, uen, pen, prm, 60.0, want_jac)
    Ra, Ja = kernels.mp3_local(*args, use_numba=True)
    Rb, Jb = kernels.mp3_local(*args, use_numba=False)
    np.testing.assert_allclose(Ra, Rb, rtol=1e-10, atol=1e-10 * np.abs(Rb).max())
    if want_jac:
        np.testing.assert_allclose(Ja, Jb, rtol=1e-10, atol=1e-10 * np.abs(Jb).max())


def test_backend_name():
    assert _jit.backend() in ("numba", "numpy")
