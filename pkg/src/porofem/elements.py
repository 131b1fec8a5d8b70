"""Reference shape functions, Gauss rules and the isoparametric map.

Three Lagrange bases are provided: the 2-node line, the 4-node bilinear quad
and the 9-node biquadratic quad. Quad node numbering is corners first
(counterclockwise from (-1, -1)), then edge midpoints (bottom, right, top,
left), then the center node.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateElementError, InvalidConfigError


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (nq, dim) reference coordinates
    weights: np.ndarray  # (nq,)

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return len(self.weights)

    def integrate(self, f):
        """Integrate ``f(points) -> (nq,)`` over the reference domain."""
        return float(np.dot(self.weights, f(self.points)))


def gauss_rule(dim, n_per_axis):
    """Tensor-product Gauss-Legendre rule on [-1, 1]^dim."""
    if dim not in (1, 2):
        raise InvalidConfigError(f"unsupported quadrature dimension {dim}")
    if not 1 <= n_per_axis <= 5:
        raise InvalidConfigError(f"unsupported Gauss order {n_per_axis} (1..5)")
    x, w = np.polynomial.legendre.leggauss(n_per_axis)
    if dim == 1:
        return QuadratureRule(x.reshape(-1, 1), w.copy())
    # x varies fastest, matching the mesh numbering
    xx, yy = np.meshgrid(x, x, indexing="xy")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    ww = np.outer(w, w).ravel()
    return QuadratureRule(pts, ww)


def _lagrange1(t):
    return np.stack([(1.0 - t) / 2.0, (1.0 + t) / 2.0]), np.stack(
        [np.full_like(t, -0.5), np.full_like(t, 0.5)]
    )


def _lagrange2(t):
    # nodes at -1, 0, 1
    vals = np.stack([t * (t - 1.0) / 2.0, 1.0 - t * t, t * (t + 1.0) / 2.0])
    ders = np.stack([t - 0.5, -2.0 * t, t + 0.5])
    return vals, ders


class ElementBasis:
    """Lagrange basis on a reference element.

    ``eval`` returns shape values with shape (npts, n_nodes) and ``eval_grad``
    reference gradients with shape (npts, n_nodes, dim).
    """

    def __init__(self, name, dim, ref_nodes, factors):
        self.name = name
        self.dim = dim
        self.ref_nodes = np.asarray(ref_nodes, dtype=float)
        self.n_nodes = len(self.ref_nodes)
        self._factors = factors  # per node: index into the 1D basis per axis

    def _one_d(self, t):
        raise NotImplementedError

    def _prepare(self, xi):
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        if xi.shape[1] != self.dim:
            xi = xi.reshape(-1, self.dim)
        return xi

    def eval(self, xi):
        xi = self._prepare(xi)
        out = np.ones((xi.shape[0], self.n_nodes))
        for d in range(self.dim):
            vals, _ = self._one_d(xi[:, d])
            out *= vals[self._factors[:, d]].T
        return out

    def eval_grad(self, xi):
        xi = self._prepare(xi)
        one_d = [self._one_d(xi[:, d]) for d in range(self.dim)]
        out = np.ones((xi.shape[0], self.n_nodes, self.dim))
        for k in range(self.dim):
            for d in range(self.dim):
                vals, ders = one_d[d]
                src = ders if d == k else vals
                out[:, :, k] *= src[self._factors[:, d]].T
        return out

    def __repr__(self):
        return f"ElementBasis({self.name!r})"


class _Linear(ElementBasis):
    def _one_d(self, t):
        return _lagrange1(t)


class _Quadratic(ElementBasis):
    def _one_d(self, t):
        return _lagrange2(t)


LINE2 = _Linear("line2", 1, [[-1.0], [1.0]], np.array([[0], [1]]))

QUAD4 = _Linear(
    "quad4",
    2,
    [[-1, -1], [1, -1], [1, 1], [-1, 1]],
    np.array([[0, 0], [1, 0], [1, 1], [0, 1]]),
)

# 1D quadratic node index: 0 -> -1, 1 -> 0, 2 -> +1
QUAD9 = _Quadratic(
    "quad9",
    2,
    [[-1, -1], [1, -1], [1, 1], [-1, 1], [0, -1], [1, 0], [0, 1], [-1, 0], [0, 0]],
    np.array([[0, 0], [2, 0], [2, 2], [0, 2], [1, 0], [2, 1], [1, 2], [0, 1], [1, 1]]),
)


def basis_for(n_nodes, dim):
    for b in (LINE2, QUAD4, QUAD9):
        if b.n_nodes == n_nodes and b.dim == dim:
            return b
    raise InvalidConfigError(f"no basis with {n_nodes} nodes in {dim}D")


def jacobian(coords, basis, xi, element=None):
    """Isoparametric map of one element at reference points ``xi``.

    Returns ``(J, detJ, grads)`` where ``J`` has shape (npts, dim, dim) with
    ``J[q, i, j] = dx_i / dxi_j``, and ``grads`` holds physical shape-function
    gradients of shape (npts, n_nodes, dim).
    """
    coords = np.asarray(coords, dtype=float).reshape(basis.n_nodes, basis.dim)
    dn = basis.eval_grad(xi)
    J = np.einsum("ai,qaj->qij", coords, dn)
    if basis.dim == 1:
        det = J[:, 0, 0].copy()
    else:
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    bad = det <= 0.0
    if np.any(bad):
        raise DegenerateElementError(element, float(det[bad][0]))
    Jinv = np.linalg.inv(J)
    # grad N = J^{-T} grad_ref N
    grads = np.einsum("qaj,qji->qai", dn, Jinv)
    return J, det, grads
