"""Element kernels for the Taylor-Hood (Q2 displacement / Q1 pressure) element.

Each kernel exists twice: an explicit-loop version compiled with numba and a
vectorized numpy version. :func:`mp2_blocks` and :func:`mp3_local` dispatch on
the active backend (see :mod:`porofem._jit`). Both consume precomputed
geometry arrays:

    dN9  (ne, nq, 9, 2)  physical displacement-basis gradients
    N9   (nq, 9)         displacement-basis values
    dN4  (ne, nq, 4, 2)  physical pressure-basis gradients
    N4   (nq, 4)         pressure-basis values
    wdet (ne, nq)        quadrature weight times Jacobian determinant

Local dof order is ``[ux_0..ux_8, uy_0..uy_8, p_0..p_3]``. ``prm`` packs
``lam, mu, mobility, rho_s, rho_w, solid_fraction0, g_y, alpha, n, m, s_res,
s_max`` into a float64 array.
"""
from __future__ import annotations

import math

import numpy as np

from . import _jit
from ._jit import njit
from .constitutive import VanGenuchten, vg_state

NU = 9
NP = 4
NDOF = 2 * NU + NP

(P_LAM, P_MU, P_MOB, P_RHO_S, P_RHO_W, P_PHIS0, P_GY, P_ALPHA, P_N, P_M, P_SRES, P_SMAX) = range(12)
N_PRM = 12


# ---------------------------------------------------------------------------
# numba loop kernels


@njit(cache=True, nogil=True)
def _vg_point(p, alpha, n, m, s_res, s_max):
    if p >= 0.0:
        return s_max, 0.0, 1.0, 0.0
    s = -p / alpha
    x = s**n
    se = (1.0 + x) ** (-m)
    dse = (m * n / alpha) * s ** (n - 1.0) * (1.0 + x) ** (-m - 1.0)
    # A = 1 - y^m with y = x / (1 + x), written to avoid cancellation as y -> 1
    A = -math.expm1(m * math.log1p(-1.0 / (1.0 + x))) if x > 0.0 else 1.0
    dA = (m * n / alpha) * s ** (m * n - 1.0) * (1.0 + x) ** (-1.0 - m)
    rse = math.sqrt(se)
    kr = rse * A * A
    dkr = 0.5 / rse * dse * A * A + 2.0 * rse * A * dA
    S = s_res + (s_max - s_res) * se
    dS = (s_max - s_res) * dse
    # on this branch the bounds can only be crossed by rounding; keep the slopes
    S = min(max(S, s_res), s_max)
    kr = min(max(kr, 0.0), 1.0)
    return S, dS, kr, dkr


@njit(cache=True, nogil=True)
def mp2_blocks_loops(dN9, N4, dN4, wdet, lam, mu, mob):
    ne, nq = wdet.shape
    K = np.zeros((ne, 2 * NU, 2 * NU))
    G = np.zeros((ne, 2 * NU, NP))
    S = np.zeros((ne, NP, NP))
    H = np.zeros((ne, NP, NP))
    for e in range(ne):
        for q in range(nq):
            w = wdet[e, q]
            for a in range(NU):
                ax = dN9[e, q, a, 0]
                ay = dN9[e, q, a, 1]
                for b in range(NU):
                    bx = dN9[e, q, b, 0]
                    by = dN9[e, q, b, 1]
                    dot = ax * bx + ay * by
                    K[e, a, b] += w * (lam * ax * bx + mu * (dot + ax * bx))
                    K[e, a, NU + b] += w * (lam * ax * by + mu * ay * bx)
                    K[e, NU + a, b] += w * (lam * ay * bx + mu * ax * by)
                    K[e, NU + a, NU + b] += w * (lam * ay * by + mu * (dot + ay * by))
                for j in range(NP):
                    G[e, a, j] += w * ax * N4[q, j]
                    G[e, NU + a, j] += w * ay * N4[q, j]
            for i in range(NP):
                for j in range(NP):
                    S[e, i, j] += w * N4[q, i] * N4[q, j]
                    H[e, i, j] += w * mob * (dN4[e, q, i, 0] * dN4[e, q, j, 0] + dN4[e, q, i, 1] * dN4[e, q, j, 1])
    return K, G, S, H


@njit(cache=True, nogil=True)
def mp3_local_loops(dN9, N9, dN4, N4, wdet, ue, pe, uen, pen, prm, dt, want_jac):
    ne, nq = wdet.shape
    lam, mu, mob = prm[P_LAM], prm[P_MU], prm[P_MOB]
    rho_s, rho_w, phis0, gy = prm[P_RHO_S], prm[P_RHO_W], prm[P_PHIS0], prm[P_GY]
    alpha, n, m, s_res, s_max = prm[P_ALPHA], prm[P_N], prm[P_M], prm[P_SRES], prm[P_SMAX]
    R = np.zeros((ne, NDOF))
    J = np.zeros((ne, NDOF, NDOF)) if want_jac else np.zeros((ne, 0, 0))
    for e in range(ne):
        for q in range(nq):
            w = wdet[e, q]
            g00 = 0.0
            g01 = 0.0
            g10 = 0.0
            g11 = 0.0
            divn = 0.0
            for a in range(NU):
                g00 += ue[e, 0, a] * dN9[e, q, a, 0]
                g01 += ue[e, 0, a] * dN9[e, q, a, 1]
                g10 += ue[e, 1, a] * dN9[e, q, a, 0]
                g11 += ue[e, 1, a] * dN9[e, q, a, 1]
                divn += uen[e, 0, a] * dN9[e, q, a, 0] + uen[e, 1, a] * dN9[e, q, a, 1]
            div = g00 + g11
            s00 = lam * div + 2.0 * mu * g00
            s11 = lam * div + 2.0 * mu * g11
            s01 = mu * (g01 + g10)
            p = 0.0
            pn = 0.0
            gpx = 0.0
            gpy = 0.0
            for i in range(NP):
                p += N4[q, i] * pe[e, i]
                pn += N4[q, i] * pen[e, i]
                gpx += dN4[e, q, i, 0] * pe[e, i]
                gpy += dN4[e, q, i, 1] * pe[e, i]
            S, dS, kr, dkr = _vg_point(p, alpha, n, m, s_res, s_max)
            Sn = _vg_point(pn, alpha, n, m, s_res, s_max)[0]
            phis = phis0 * (1.0 - div)
            phi = 1.0 - phis
            rho = phis * rho_s + phi * S * rho_w
            fx = gpx
            fy = gpy - rho_w * gy
            storage = (phi * (S - Sn) + S * (div - divn)) / dt
            for a in range(NU):
                ax = dN9[e, q, a, 0]
                ay = dN9[e, q, a, 1]
                R[e, a] += w * (ax * s00 + ay * s01 - S * p * ax)
                R[e, NU + a] += w * (ax * s01 + ay * s11 - S * p * ay - N9[q, a] * rho * gy)
            for i in range(NP):
                R[e, 2 * NU + i] += w * (N4[q, i] * storage + mob * kr * (dN4[e, q, i, 0] * fx + dN4[e, q, i, 1] * fy))
            if not want_jac:
                continue
            drho_ddiv = phis0 * (S * rho_w - rho_s)
            sp = S + p * dS
            cpu = (phis0 * (S - Sn) + S) / dt
            cpp = (phi * dS + dS * (div - divn)) / dt
            for a in range(NU):
                ax = dN9[e, q, a, 0]
                ay = dN9[e, q, a, 1]
                Na = N9[q, a]
                for b in range(NU):
                    bx = dN9[e, q, b, 0]
                    by = dN9[e, q, b, 1]
                    dot = ax * bx + ay * by
                    J[e, a, b] += w * (lam * ax * bx + mu * (dot + ax * bx))
                    J[e, a, NU + b] += w * (lam * ax * by + mu * ay * bx)
                    J[e, NU + a, b] += w * (lam * ay * bx + mu * ax * by - Na * gy * drho_ddiv * bx)
                    J[e, NU + a, NU + b] += w * (lam * ay * by + mu * (dot + ay * by) - Na * gy * drho_ddiv * by)
                for j in range(NP):
                    Nj = N4[q, j]
                    J[e, a, 2 * NU + j] += -w * sp * Nj * ax
                    J[e, NU + a, 2 * NU + j] += -w * (sp * Nj * ay + Na * gy * phi * dS * rho_w * Nj)
                    J[e, 2 * NU + j, a] += w * N4[q, j] * cpu * ax
                    J[e, 2 * NU + j, NU + a] += w * N4[q, j] * cpu * ay
            for i in range(NP):
                cix = dN4[e, q, i, 0]
                ciy = dN4[e, q, i, 1]
                flux_i = cix * fx + ciy * fy
                for j in range(NP):
                    J[e, 2 * NU + i, 2 * NU + j] += w * (
                        N4[q, i] * N4[q, j] * cpp
                        + mob * (kr * (cix * dN4[e, q, j, 0] + ciy * dN4[e, q, j, 1]) + dkr * N4[q, j] * flux_i)
                    )
    return R, J


# ---------------------------------------------------------------------------
# numpy vectorized kernels


def mp2_blocks_numpy(dN9, N4, dN4, wdet, lam, mu, mob):
    gx, gy = dN9[..., 0], dN9[..., 1]
    dot = np.einsum("eqad,eqbd->eqab", dN9, dN9)

    def integ(f):
        return np.einsum("eq,eqab->eab", wdet, f)

    xx = integ(lam * gx[..., :, None] * gx[..., None, :] + mu * (dot + gx[..., :, None] * gx[..., None, :]))
    xy = integ(lam * gx[..., :, None] * gy[..., None, :] + mu * gy[..., :, None] * gx[..., None, :])
    yx = integ(lam * gy[..., :, None] * gx[..., None, :] + mu * gx[..., :, None] * gy[..., None, :])
    yy = integ(lam * gy[..., :, None] * gy[..., None, :] + mu * (dot + gy[..., :, None] * gy[..., None, :]))
    K = np.concatenate([np.concatenate([xx, xy], axis=2), np.concatenate([yx, yy], axis=2)], axis=1)
    G = np.concatenate(
        [np.einsum("eq,eqa,qj->eaj", wdet, gx, N4), np.einsum("eq,eqa,qj->eaj", wdet, gy, N4)], axis=1
    )
    S = np.einsum("eq,qi,qj->eij", wdet, N4, N4)
    H = mob * np.einsum("eq,eqid,eqjd->eij", wdet, dN4, dN4)
    return K, G, S, H


def _vg_vec(p, prm):
    vg = VanGenuchten(alpha=prm[P_ALPHA], n=prm[P_N], m=prm[P_M], s_res=prm[P_SRES], s_max=prm[P_SMAX])
    return vg_state(p, vg)


def mp3_local_numpy(dN9, N9, dN4, N4, wdet, ue, pe, uen, pen, prm, dt, want_jac):
    lam, mu, mob = prm[P_LAM], prm[P_MU], prm[P_MOB]
    rho_s, rho_w, phis0, gy = prm[P_RHO_S], prm[P_RHO_W], prm[P_PHIS0], prm[P_GY]
    ne = wdet.shape[0]
    gu = np.einsum("eca,eqad->eqcd", ue, dN9)
    div = gu[..., 0, 0] + gu[..., 1, 1]
    divn = np.einsum("eca,eqac->eq", uen, dN9)
    eps = 0.5 * (gu + np.swapaxes(gu, -1, -2))
    sig = 2.0 * mu * eps
    sig[..., 0, 0] += lam * div
    sig[..., 1, 1] += lam * div
    p = pe @ N4.T
    pn = pen @ N4.T
    gp = np.einsum("eqid,ei->eqd", dN4, pe)
    S, dS, kr, dkr = _vg_vec(p, prm)
    Sn = _vg_vec(pn, prm)[0]
    phis = phis0 * (1.0 - div)
    phi = 1.0 - phis
    rho = phis * rho_s + phi * S * rho_w
    f = gp.copy()
    f[..., 1] -= rho_w * gy
    storage = (phi * (S - Sn) + S * (div - divn)) / dt

    # momentum: dN_a . sigma'_c - S p dN_a,c - N_a rho g_c
    ru = np.einsum("eqad,eqcd->eqca", dN9, sig) - (S * p)[..., None, None] * np.swapaxes(dN9, -1, -2)
    ru[:, :, 1, :] -= (rho * gy)[..., None] * N9[None, :, :]
    ru = np.einsum("eq,eqca->eca", wdet, ru).reshape(ne, 2 * NU)
    rp = np.einsum("eq,qi->ei", wdet * storage, N4) + mob * np.einsum("eq,eqid,eqd->ei", wdet * kr, dN4, f)
    R = np.concatenate([ru, rp], axis=1)
    if not want_jac:
        return R, np.zeros((ne, 0, 0))

    Kuu, _, _, _ = mp2_blocks_numpy(dN9, N4, dN4, wdet, lam, mu, mob)
    drho = phis0 * (S * rho_w - rho_s)
    # gravity-density coupling only enters the y rows
    gyx = np.einsum("eq,qa,eqb->eab", wdet * gy * drho, N9, dN9[..., 0])
    gyy = np.einsum("eq,qa,eqb->eab", wdet * gy * drho, N9, dN9[..., 1])
    Kuu[:, NU:, :NU] -= gyx
    Kuu[:, NU:, NU:] -= gyy
    sp = S + p * dS
    Jup = -np.concatenate(
        [
            np.einsum("eq,eqa,qj->eaj", wdet * sp, dN9[..., 0], N4),
            np.einsum("eq,eqa,qj->eaj", wdet * sp, dN9[..., 1], N4)
            + np.einsum("eq,qa,qj->eaj", wdet * gy * phi * dS * rho_w, N9, N4),
        ],
        axis=1,
    )
    cpu = (phis0 * (S - Sn) + S) / dt
    Jpu = np.concatenate(
        [
            np.einsum("eq,qi,eqb->eib", wdet * cpu, N4, dN9[..., 0]),
            np.einsum("eq,qi,eqb->eib", wdet * cpu, N4, dN9[..., 1]),
        ],
        axis=2,
    )
    cpp = (phi * dS + dS * (div - divn)) / dt
    Jpp = (
        np.einsum("eq,qi,qj->eij", wdet * cpp, N4, N4)
        + mob * np.einsum("eq,eqid,eqjd->eij", wdet * kr, dN4, dN4)
        + mob * np.einsum("eq,eqid,eqd,qj->eij", wdet * dkr, dN4, f, N4)
    )
    J = np.empty((ne, NDOF, NDOF))
    J[:, : 2 * NU, : 2 * NU] = Kuu
    J[:, : 2 * NU, 2 * NU :] = Jup
    J[:, 2 * NU :, : 2 * NU] = Jpu
    J[:, 2 * NU :, 2 * NU :] = Jpp
    return R, J


def mp2_blocks(dN9, N4, dN4, wdet, lam, mu, mob, use_numba=None):
    use_numba = _jit.USE_NUMBA if use_numba is None else use_numba
    fn = mp2_blocks_loops if use_numba else mp2_blocks_numpy
    return fn(dN9, N4, dN4, wdet, float(lam), float(mu), float(mob))


def mp3_local(dN9, N9, dN4, N4, wdet, ue, pe, uen, pen, prm, dt, want_jac=True, use_numba=None):
    use_numba = _jit.USE_NUMBA if use_numba is None else use_numba
    fn = mp3_local_loops if use_numba else mp3_local_numpy
    return fn(
        dN9, N9, dN4, N4, wdet,
        np.ascontiguousarray(ue), np.ascontiguousarray(pe),
        np.ascontiguousarray(uen), np.ascontiguousarray(pen),
        np.asarray(prm, dtype=np.float64), float(dt), bool(want_jac),
    )
