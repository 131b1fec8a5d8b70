"""Reference solutions and error norms for verification.

Depth ``z`` is measured from the drained face; the column is impervious at
``z = H``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .elements import LINE2, gauss_rule
from .errors import InvalidConfigError


def _modes(n_terms):
    return (2.0 * np.arange(n_terms) + 1.0) * np.pi / 2.0


def _terms_needed(Tv, n_terms, tail_tol=1e-10):
    # the m-th term is bounded by (2/M) exp(-M^2 Tv); stop once it is below tail_tol
    if Tv <= 0:
        return n_terms
    m_needed = math.sqrt(max(-math.log(tail_tol * math.pi / 4.0), 1.0) / Tv) / math.pi + 2
    return max(n_terms, int(m_needed))


def terzaghi_series(z, t, c_v, H, p0, n_terms=200):
    """Excess pore pressure of a single-drained column under uniform initial pressure.

    ``z`` may be an array. At ``t = 0`` the initial condition ``p0`` is returned
    (zero exactly at the drained face).
    """
    z = np.asarray(z, dtype=float)
    if n_terms < 100:
        raise InvalidConfigError("terzaghi_series needs at least 100 terms")
    if t <= 0:
        return np.where(z > 0, float(p0), 0.0)
    Tv = c_v * t / H**2
    M = _modes(_terms_needed(Tv, n_terms))
    zz = z[..., None] / H
    terms = (2.0 / M) * np.sin(M * zz) * np.exp(-M * M * Tv)
    return p0 * terms.sum(axis=-1)


def terzaghi_series_implicit(z, n_steps, dt, c_v, H, p0, n_terms=2000):
    """Series solution of the time-discrete (backward-Euler) diffusion problem.

    Each Fourier mode decays by ``1 / (1 + c_v M^2 dt / H^2)`` per step
    instead of ``exp(-c_v M^2 dt / H^2)``. Comparing against it isolates the
    spatial discretization error of a backward-Euler run.
    """
    z = np.asarray(z, dtype=float)
    if n_steps == 0:
        return np.where(z > 0, float(p0), 0.0)
    M = _modes(n_terms)
    amp = (1.0 + c_v * M * M * dt / H**2) ** (-float(n_steps))
    zz = z[..., None] / H
    return p0 * ((2.0 / M) * np.sin(M * zz) * amp).sum(axis=-1)


def degree_of_consolidation(Tv, n_terms=200):
    """Average degree of consolidation U(Tv) = 1 - mean pressure / p0."""
    if Tv <= 0:
        return 0.0
    M = _modes(_terms_needed(Tv, n_terms))
    return float(1.0 - np.sum(2.0 / M**2 * np.exp(-M * M * Tv)))


def terzaghi_fd(z_out, t, c_v, H, p0, nz=400, courant=0.4):
    """Explicit finite-difference solution used to cross-check the series.

    Forward Euler on a uniform grid with ``c_v dt / dz^2 = courant`` (stable
    for ``courant <= 0.5``); the impervious end uses a ghost node.
    """
    dz = H / nz
    z = np.linspace(0.0, H, nz + 1)
    p = np.full(nz + 1, float(p0))
    p[0] = 0.0
    dt_max = courant * dz * dz / c_v
    n = max(1, int(math.ceil(t / dt_max)))
    lam = c_v * (t / n) / dz**2
    for _ in range(n):
        lap = np.empty_like(p)
        lap[1:-1] = p[2:] - 2.0 * p[1:-1] + p[:-2]
        lap[-1] = 2.0 * (p[-2] - p[-1])
        lap[0] = 0.0
        p = p + lam * lap
    return np.interp(z_out, z, p)


@dataclass
class ErrorReport:
    l2_rel: float
    linf_rel: float
    sample_times: list = field(default_factory=list)
    per_time: dict = field(default_factory=dict)  # t -> (l2_rel, linf_rel)

    def worst(self):
        if not self.per_time:
            return self.l2_rel
        return max(v[0] for v in self.per_time.values())


def l2_error(z_nodes, p_h, reference, n_gauss=5, relative=True):
    """L2 distance between a piecewise-linear nodal profile and ``reference(z)``.

    Element-wise Gauss quadrature; with ``relative=True`` the result is divided
    by the reference norm (falling back to the absolute value when that norm
    vanishes). Returns ``(l2, linf)`` with the same normalization.
    """
    z_nodes = np.asarray(z_nodes, dtype=float)
    p_h = np.asarray(p_h, dtype=float)
    if z_nodes.size == 0 or p_h.size != z_nodes.size:
        raise ValueError("empty or mismatched profile")
    rule = gauss_rule(1, n_gauss)
    N = LINE2.eval(rule.points)
    a, b = z_nodes[:-1], z_nodes[1:]
    h = b - a
    zq = a[:, None] + (rule.points[:, 0][None, :] + 1.0) * 0.5 * h[:, None]
    ph_q = p_h[:-1, None] * N[None, :, 0] + p_h[1:, None] * N[None, :, 1]
    ref_q = np.asarray(reference(zq), dtype=float)
    wq = rule.weights[None, :] * 0.5 * h[:, None]
    err = math.sqrt(float(np.sum(wq * (ph_q - ref_q) ** 2)))
    ref = math.sqrt(float(np.sum(wq * ref_q**2)))
    ref_nodes = np.asarray(reference(z_nodes), dtype=float)
    linf = float(np.max(np.abs(p_h - ref_nodes)))
    if relative and ref > 0:
        return err / ref, linf / float(np.max(np.abs(ref_nodes)))
    return err, linf


def convergence_order(h, errors):
    """Least-squares slope of log(error) against log(h).

    Warns (``RuntimeWarning``) when the errors do not decrease monotonically
    with ``h``.
    """
    h = np.asarray(h, dtype=float)
    e = np.asarray(errors, dtype=float)
    if len(e) < 2 or np.any(e <= 0) or len(h) != len(e):
        raise ValueError("need at least two strictly positive errors")
    order = np.argsort(h)[::-1]
    if np.any(np.diff(e[order]) >= 0):
        warnings.warn("errors are not monotone in h", RuntimeWarning, stacklevel=2)
    slope = np.polyfit(np.log(h), np.log(e), 1)[0]
    return float(slope)
