import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import vg_reference as ref
from porofem.constitutive import (
    INCOMPRESSIBLE,
    MaterialParams,
    VanGenuchten,
    air_saturation,
    darcy_velocity,
    derived_coefficients,
    effective_stress,
    mixture_density,
    solid_volume_fraction,
    vg_dSw_dpw,
    vg_relative_permeability,
    vg_saturation,
    vg_state,
)
from porofem.errors import InvalidConfigError

VG = VanGenuchten(alpha=3.0e3, n=2.0, s_res=0.2, s_max=1.0)
vg_params = st.builds(
    VanGenuchten,
    alpha=st.floats(1e2, 1e5),
    n=st.floats(1.1, 6.0),
    m=st.none(),
    s_res=st.floats(0.0, 0.5),
    s_max=st.floats(0.6, 1.0),
)
suction = st.floats(-1e6, -1.0)


def _args(vg):
    return (vg.alpha, vg.n, vg.m_eff, vg.s_res, vg.s_max)


def test_effective_stress_examples():
    p = MaterialParams(lam=1.0, mu=1.0)
    np.testing.assert_array_equal(effective_stress(np.zeros((2, 2)), p), np.zeros((2, 2)))
    np.testing.assert_allclose(effective_stress(np.eye(2), p), np.diag([4.0, 4.0]))
    gamma = 0.01
    s = effective_stress(np.array([[0.0, gamma / 2], [gamma / 2, 0.0]]), MaterialParams(lam=3.0, mu=2.0))
    assert s[0, 1] == pytest.approx(2.0 * gamma)


@settings(max_examples=50)
@given(st.lists(st.floats(-1e-2, 1e-2), min_size=6, max_size=6), st.floats(-3, 3), st.floats(-3, 3))
def test_effective_stress_is_linear_and_symmetric(v, a, b):
    p = MaterialParams(lam=5.0e6, mu=3.0e6)
    e1 = np.array([[v[0], v[1]], [v[1], v[2]]])
    e2 = np.array([[v[3], v[4]], [v[4], v[5]]])
    lhs = effective_stress(a * e1 + b * e2, p)
    rhs = a * effective_stress(e1, p) + b * effective_stress(e2, p)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * (np.abs(rhs).max() + 1e-300))
    assert np.allclose(lhs, lhs.T, rtol=0, atol=0)


def test_darcy_velocity_examples():
    p = MaterialParams(k=1e-12, mu_w=1e-3, rho_w=1000.0, gravity=9.81)
    np.testing.assert_allclose(darcy_velocity([0.0, -1000.0 * 9.81], 1.0, p), [0.0, 0.0], atol=1e-20)
    np.testing.assert_array_equal(darcy_velocity([3.0, 7.0], 0.0, p), [0.0, 0.0])
    q = MaterialParams(k=1e-12, mu_w=1e-3, gravity=0.0)
    np.testing.assert_allclose(darcy_velocity([0.0, -9810.0], 1.0, q), [0.0, 9.81e-6], rtol=1e-14)


def test_saturation_examples():
    assert vg_saturation(0.0, VG) == 1.0
    assert vg_saturation(-1e30, VG) == pytest.approx(0.2, abs=1e-12)
    vg = VanGenuchten(alpha=1e4, n=2.0, m=0.5, s_res=0.2, s_max=1.0)
    assert vg_saturation(-1e4, vg) == pytest.approx(0.2 + 0.8 * 2**-0.5, rel=1e-14)
    assert vg_saturation(-1e4, vg) == pytest.approx(0.76569, abs=1e-5)


def test_relative_permeability_examples():
    assert vg_relative_permeability(1.0, VG) == 1.0
    assert vg_relative_permeability(0.2, VG) == 0.0
    vg = VanGenuchten(alpha=1e4, n=2.0, m=0.5, s_res=0.0, s_max=1.0)
    expected = math.sqrt(0.5) * (1 - (1 - 0.25) ** 0.5) ** 2
    assert vg_relative_permeability(0.5, vg) == pytest.approx(expected, rel=1e-14)
    # sqrt(0.5) (1 - sqrt(0.75))^2 = 0.0126920 by hand
    assert vg_relative_permeability(0.5, vg) == pytest.approx(0.012692, abs=1e-6)


@pytest.mark.parametrize("s", [-0.01, 1.01, float("nan")])
def test_relative_permeability_domain_error(s):
    with pytest.raises(ValueError):
        vg_relative_permeability(s, VG)


def test_derivative_zero_on_wet_branch():
    assert vg_dSw_dpw(5e3, VG) == 0.0
    assert vg_dSw_dpw(0.0, VG) == 0.0
    S, dS, kr, dkr = vg_state(np.array([0.0, 10.0]), VG)
    np.testing.assert_array_equal(S, [1.0, 1.0])
    np.testing.assert_array_equal(dS, [0.0, 0.0])
    np.testing.assert_array_equal(kr, [1.0, 1.0])
    np.testing.assert_array_equal(dkr, [0.0, 0.0])


def test_derivative_vanishes_continuously_at_saturation():
    p = -np.logspace(-6, 0, 7)
    d = vg_dSw_dpw(p, VG)
    assert np.all(np.diff(np.abs(d)) > 0)
    assert abs(d[0]) < 1e-12


def test_derivative_matches_central_differences_preset():
    # step 1e-3 |p|, evaluated in extended precision so only truncation error remains
    rng = np.random.default_rng(7)
    p = -(10.0 ** rng.uniform(0.0, 6.0, 1000))
    d = vg_dSw_dpw(p, VG)
    for pi, di in zip(p, d):
        fd = float(ref.central_difference(ref.saturation, pi, 1e-3 * abs(pi), *_args(VG)))
        assert abs(di - fd) <= 1e-6 * abs(fd)


@settings(max_examples=200, deadline=None)
@given(vg_params, suction)
def test_saturation_and_permeability_match_reference(vg, p):
    args = _args(vg)
    S, dS, kr, dkr = vg_state(np.array([p]), vg)
    assert S[0] == pytest.approx(float(ref.saturation(p, *args)), rel=1e-12)
    assert kr[0] == pytest.approx(float(ref.relative_permeability_of_pressure(p, *args)), rel=1e-9, abs=1e-300)
    ds_ref = float(ref.derivative(ref.saturation, p, *args))
    assert dS[0] == pytest.approx(ds_ref, rel=1e-9, abs=1e-300)
    dkr_ref = float(ref.derivative(ref.relative_permeability_of_pressure, p, *args))
    assert dkr[0] == pytest.approx(dkr_ref, rel=1e-8, abs=1e-300)


@settings(max_examples=200, deadline=None)
@given(vg_params, suction, suction)
def test_saturation_monotone_and_bounded(vg, p1, p2):
    lo, hi = sorted((p1, p2))
    s_lo, s_hi = vg_saturation(lo, vg), vg_saturation(hi, vg)
    assert vg.s_res <= s_lo <= s_hi <= vg.s_max
    assert vg_dSw_dpw(lo, vg) >= 0.0
    assert air_saturation(s_lo) + s_lo == 1.0


@settings(max_examples=200, deadline=None)
@given(vg_params, st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_permeability_monotone_in_saturation(vg, a, b):
    s1, s2 = sorted(vg.s_res + (vg.s_max - vg.s_res) * np.array([a, b]))
    k1, k2 = vg_relative_permeability(s1, vg), vg_relative_permeability(s2, vg)
    assert 0.0 <= k1 <= k2 <= 1.0


@settings(max_examples=100, deadline=None)
@given(vg_params, suction)
def test_pressure_form_agrees_with_saturation_form(vg, p):
    _, _, kr, _ = vg_state(np.array([p]), vg)
    kr2 = vg_relative_permeability(vg_saturation(p, vg), vg)
    assert kr[0] == pytest.approx(kr2, rel=1e-6, abs=1e-12)


def test_van_genuchten_validation():
    assert VanGenuchten().errors() == []
    assert VanGenuchten(n=0.9).errors()
    assert VanGenuchten(alpha=-1).errors()
    assert VanGenuchten(s_res=0.9, s_max=0.5).errors()
    assert VanGenuchten(m=1.2).errors()


def test_mixture_density_examples():
    p = MaterialParams(rho_s=2650.0, rho_w=1000.0)
    assert mixture_density(1.0, 0.7, p) == pytest.approx(2650.0)
    assert mixture_density(0.6, 1.0, p) == pytest.approx(1990.0)
    assert mixture_density(0.6, 0.0, p) == pytest.approx(0.6 * 2650.0)


def test_solid_volume_fraction_examples():
    assert solid_volume_fraction(0.0, MaterialParams(phi0=0.3)) == pytest.approx(0.7)
    assert solid_volume_fraction(0.1, MaterialParams(phi0=0.3)) == pytest.approx(0.63)
    assert solid_volume_fraction(-0.05, MaterialParams(phi0=0.4)) == pytest.approx(0.63)


def test_derived_coefficients_examples():
    c = derived_coefficients(MaterialParams())
    assert c.B == 1.0 and c.inv_M == 0.0 and math.isinf(c.M)
    c = derived_coefficients(MaterialParams(k_s=INCOMPRESSIBLE, k_w=2.2e9, phi0=0.4))
    assert c.M == pytest.approx(5.5e9, rel=1e-14)
    lam, mu = 1.0e6, 1.5e6  # K = 2e6
    c = derived_coefficients(MaterialParams(lam=lam, mu=mu, k=8e-12, mu_w=1e-3))
    assert c.c_v == pytest.approx(1.6e-2, rel=1e-14)


def test_biot_coefficient_with_compressible_grains():
    p = MaterialParams(lam=4e6, mu=4e6, k_s=1e10, k_w=2.2e9, phi0=0.4)
    c = derived_coefficients(p)
    K = 4e6 + 8e6 / 3
    assert c.B == pytest.approx(1 - K / 1e10)
    assert c.inv_M == pytest.approx((c.B - 0.4) / 1e10 + 0.4 / 2.2e9)


def test_material_validation_collects_errors():
    bad = MaterialParams(mu=-1.0, phi0=1.5, k=0.0)
    errs = bad.errors()
    assert len(errs) >= 3
    with pytest.raises(InvalidConfigError) as exc:
        bad.validate()
    assert len(exc.value.errors) == len(errs)
    with pytest.raises(InvalidConfigError):
        derived_coefficients(MaterialParams(k_s=1e5, k_w=INCOMPRESSIBLE, phi0=0.9))
