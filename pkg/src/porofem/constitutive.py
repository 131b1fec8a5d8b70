"""Material laws of the coupled soil model at a material point.

All point functions are vectorized over leading array axes. Pore pressure is
positive in compression; negative values are suction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .errors import InvalidConfigError

#: Sentinel bulk modulus for an incompressible constituent.
INCOMPRESSIBLE = math.inf


@dataclass(frozen=True)
class VanGenuchten:
    alpha: float = 3.0e3  # Pa
    n: float = 2.0
    m: float | None = None  # defaults to 1 - 1/n
    s_res: float = 0.2
    s_max: float = 1.0

    @property
    def m_eff(self):
        return 1.0 - 1.0 / self.n if self.m is None else self.m

    def errors(self):
        out = []
        if not self.alpha > 0:
            out.append("vangenuchten.alpha must be > 0")
        if not self.n > 1:
            out.append("vangenuchten.n must be > 1")
        m = self.m_eff if self.n > 0 else float("nan")
        if not 0 < m < 1:
            out.append("vangenuchten.m must lie in (0, 1)")
        if not 0 <= self.s_res < self.s_max <= 1:
            out.append("vangenuchten requires 0 <= s_res < s_max <= 1")
        return out


@dataclass(frozen=True)
class MaterialParams:
    lam: float = 4.0e6  # Pa
    mu: float = 4.0e6  # Pa
    k_s: float = INCOMPRESSIBLE  # Pa
    k_w: float = INCOMPRESSIBLE  # Pa
    k: float = 1.0e-12  # m^2, intrinsic permeability
    mu_w: float = 1.0e-3  # Pa s
    rho_s: float = 2650.0  # kg/m^3
    rho_w: float = 1000.0  # kg/m^3
    phi0: float = 0.4  # reference porosity
    gravity: float = 0.0  # m/s^2, acts along -y (2D) or is ignored (1D)
    vg: VanGenuchten = field(default_factory=VanGenuchten)

    @property
    def bulk_modulus(self):
        return self.lam + 2.0 * self.mu / 3.0

    @property
    def oedometric_modulus(self):
        return self.lam + 2.0 * self.mu

    @property
    def solid_fraction0(self):
        return 1.0 - self.phi0

    @property
    def mobility(self):
        return self.k / self.mu_w

    def gravity_vector(self, dim=2):
        g = np.zeros(dim)
        if dim > 1:
            g[-1] = -self.gravity
        return g

    def with_(self, **kw):
        return replace(self, **kw)

    def errors(self):
        out = []
        if not self.mu > 0:
            out.append("material.mu must be > 0")
        if not self.bulk_modulus > 0:
            out.append("material: bulk modulus lambda + 2 mu / 3 must be > 0")
        if not 0 < self.phi0 < 1:
            out.append("material.phi0 must lie in (0, 1)")
        for name in ("k_s", "k_w", "k", "mu_w"):
            if not getattr(self, name) > 0:
                out.append(f"material.{name} must be > 0")
        for name in ("rho_s", "rho_w", "gravity"):
            if not getattr(self, name) >= 0:
                out.append(f"material.{name} must be >= 0")
        if not out:
            B = 1.0 - self.bulk_modulus / self.k_s
            if not 0 < B <= 1:
                out.append(f"material: Biot coefficient {B:g} outside (0, 1]")
            inv_m = _inverse_biot_modulus(B, self.phi0, self.k_s, self.k_w)
            if inv_m < 0:
                out.append("material: Biot modulus must be positive")
        out.extend(self.vg.errors())
        return out

    def validate(self):
        errs = self.errors()
        if errs:
            raise InvalidConfigError("invalid material parameters", errs)
        return self


class Coefficients(NamedTuple):
    B: float
    M: float
    inv_M: float
    c_v: float


def _inverse_biot_modulus(B, phi, k_s, k_w):
    inv = 0.0
    if math.isfinite(k_s):
        inv += (B - phi) / k_s
    if math.isfinite(k_w):
        inv += phi / k_w
    return inv


def derived_coefficients(params):
    """Biot coefficient, Biot modulus and the coefficient of consolidation.

    ``c_v`` is K k / mu_w with K the skeleton bulk modulus. ``M`` is ``inf``
    when both constituents are incompressible.
    """
    K = params.bulk_modulus
    B = 1.0 - K / params.k_s if math.isfinite(params.k_s) else 1.0
    inv_m = _inverse_biot_modulus(B, params.phi0, params.k_s, params.k_w)
    if inv_m < 0 or (inv_m == 0 and (math.isfinite(params.k_s) or math.isfinite(params.k_w))):
        raise InvalidConfigError(f"non-positive Biot modulus (1/M = {inv_m:g})")
    M = math.inf if inv_m == 0 else 1.0 / inv_m
    return Coefficients(B=B, M=M, inv_M=inv_m, c_v=K * params.k / params.mu_w)


def effective_stress(eps, params):
    """Linear elastic effective stress; 2x2 strains are treated as plane strain."""
    eps = np.asarray(eps, dtype=float)
    d = eps.shape[-1]
    tr = np.trace(eps, axis1=-2, axis2=-1)
    return params.lam * tr[..., None, None] * np.eye(d) + 2.0 * params.mu * eps


def darcy_velocity(grad_p, k_r, params):
    grad_p = np.asarray(grad_p, dtype=float)
    g = params.gravity_vector(grad_p.shape[-1])
    return -(np.asarray(k_r)[..., None] * params.mobility) * (grad_p - params.rho_w * g)


def _vg(params):
    return params.vg if isinstance(params, MaterialParams) else params


def vg_saturation(p_w, params):
    """Water saturation from pore pressure; S_max wherever p_w >= 0."""
    vg = _vg(params)
    p = np.asarray(p_w, dtype=float)
    s = np.where(p < 0.0, -p / vg.alpha, 0.0)
    se = (1.0 + s**vg.n) ** (-vg.m_eff)
    sw = vg.s_res + (vg.s_max - vg.s_res) * se
    sw = np.where(p < 0.0, sw, vg.s_max)
    out = np.clip(sw, vg.s_res, vg.s_max)
    return out if out.ndim else float(out)


def vg_dSw_dpw(p_w, params):
    """Derivative of :func:`vg_saturation`, zero on the clamped branch."""
    vg = _vg(params)
    p = np.asarray(p_w, dtype=float)
    n, m = vg.n, vg.m_eff
    s = np.where(p < 0.0, -p / vg.alpha, 1.0)
    x = s**n
    d = (vg.s_max - vg.s_res) * (m * n / vg.alpha) * s ** (n - 1.0) * (1.0 + x) ** (-m - 1.0)
    out = np.where(p < 0.0, d, 0.0)
    return out if out.ndim else float(out)


def vg_relative_permeability(s_w, params):
    """Mualem-van Genuchten relative permeability of a given saturation."""
    vg = _vg(params)
    sw = np.asarray(s_w, dtype=float)
    if np.any((sw < -1e-9) | (sw > 1.0 + 1e-9)) or np.any(~np.isfinite(sw)):
        raise ValueError("saturation outside [0, 1]")
    m = vg.m_eff
    se = np.clip((sw - vg.s_res) / (vg.s_max - vg.s_res), 0.0, 1.0)
    kr = np.sqrt(se) * (1.0 - (1.0 - se ** (1.0 / m)) ** m) ** 2
    out = np.clip(kr, 0.0, 1.0)
    return out if out.ndim else float(out)


def vg_state(p_w, params):
    """Saturation, relative permeability and their pressure derivatives.

    ``k_r`` is evaluated directly from the pressure so that ``1 - Se^(1/m)``
    never loses precision near saturation. Returns ``(S, dS/dp, k_r, dk_r/dp)``.
    """
    vg = _vg(params)
    p = np.asarray(p_w, dtype=float)
    n, m, a = vg.n, vg.m_eff, vg.alpha
    wet = p >= 0.0
    s = np.where(wet, 1.0, -p / a)
    x = s**n
    se = (1.0 + x) ** (-m)
    dse = (m * n / a) * s ** (n - 1.0) * (1.0 + x) ** (-m - 1.0)
    # A = 1 - y^m with y = x / (1 + x) = 1 - Se^(1/m), free of cancellation as y -> 1
    with np.errstate(divide="ignore"):
        A = -np.expm1(m * np.log1p(-1.0 / (1.0 + x)))
    dA = (m * n / a) * s ** (m * n - 1.0) * (1.0 + x) ** (-1.0 - m)
    kr = np.sqrt(se) * A * A
    dkr = 0.5 / np.sqrt(se) * dse * A * A + 2.0 * np.sqrt(se) * A * dA
    S = vg.s_res + (vg.s_max - vg.s_res) * se
    dS = (vg.s_max - vg.s_res) * dse
    S = np.where(wet, vg.s_max, S)
    dS = np.where(wet, 0.0, dS)
    kr = np.where(wet, 1.0, kr)
    dkr = np.where(wet, 0.0, dkr)
    # off the wet branch the bounds can only be crossed by rounding; keep the slopes
    S = np.clip(S, vg.s_res, vg.s_max)
    kr = np.clip(kr, 0.0, 1.0)
    return S, dS, kr, dkr


def air_saturation(s_w):
    return 1.0 - np.asarray(s_w)


def mixture_density(phi_s, s_w, params):
    """Total density with massless pore air."""
    return phi_s * params.rho_s + (1.0 - phi_s) * s_w * params.rho_w


def solid_volume_fraction(div_u, params):
    """Solid volume fraction under small volumetric strain."""
    return params.solid_fraction0 * (1.0 - np.asarray(div_u))
