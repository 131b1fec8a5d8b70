import numpy as np
import pytest

from porofem.constitutive import derived_coefficients
from porofem.errors import InvalidConfigError
from porofem.problems import HOUR, MINUTE, PRESETS, Mp3Problem, build_problem, get_preset, preset_mp1, preset_mp2, preset_mp3


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_validate(name):
    preset = get_preset(name)
    assert preset.errors() == []
    assert preset.validate() is preset


def test_unknown_preset():
    with pytest.raises(InvalidConfigError):
        get_preset("mp4")


def test_mp1_preset():
    p = preset_mp1()
    assert p.output_times == tuple(h * HOUR for h in (5, 10, 20, 40, 80))
    assert p.build_mesh().n_elements == 50
    assert derived_coefficients(p.material).c_v * HOUR == pytest.approx(0.016, rel=1e-12)
    assert [(b.tag, b.field, b.value) for b in p.bcs.dirichlet] == [("top", "p", 0.0)]
    assert [(b.tag, b.field, b.value) for b in p.bcs.neumann] == [("bottom", "flux", 0.0)]
    assert p.initial_p == 1.0e5 and p.dt == HOUR and p.t_end == 80 * HOUR


def test_mp2_preset():
    p = preset_mp2()
    assert p.output_times == (20.0, 40.0, 80.0)
    (footing,) = p.bcs.neumann
    assert (footing.tag, footing.field, footing.value, footing.span) == ("top", "ty", -1.0e6, (0.45, 0.55))
    assert derived_coefficients(p.material).B == pytest.approx(1 - (10e6 / 1.5) / 1e10, rel=1e-12)
    assert derived_coefficients(p.material).B == pytest.approx(0.99933, abs=1e-5)
    mesh = p.build_mesh()
    assert mesh.n_elements == 2500


def test_mp3_preset():
    p = preset_mp3()
    assert p.output_times == tuple(m * MINUTE for m in (5, 10, 20, 30, 600))
    assert [(b.tag, b.field) for b in p.bcs.dirichlet if b.field == "p"] == [("bottom", "p")]
    assert p.material.vg.m_eff == 0.5
    mesh = p.build_mesh()
    assert mesh.n_elements == 12 * 50


def test_mp3_hydrostatic_initial_state():
    prob = Mp3Problem(preset_mp3().with_(t_end=0.0, output_times=()))
    x0 = prob.initial_state()
    y = prob.mesh.nodes[prob.pressure_nodes(), 1]
    p = prob.pressure(x0)
    np.testing.assert_allclose(p, 1000.0 * 9.81 * (1.0 - y), rtol=1e-14, atol=1e-9)
    assert p[np.argmin(y)] == pytest.approx(9810.0)
    # the geostatic offset holds the initial state in equilibrium
    r = prob.op.residual(x0, x0, 0.0)
    assert np.abs(r).max() <= 1e-9 * np.abs(prob.op.offset).max()


def test_validation_collects_errors():
    bad = preset_mp1().with_(dt=-1.0, hz=0.03, element="taylor_hood")
    errs = bad.errors()
    assert len(errs) >= 3
    with pytest.raises(InvalidConfigError) as exc:
        bad.validate()
    assert exc.value.errors == errs


def test_mp3_rejects_compressible_constituents():
    p = preset_mp3()
    bad = p.with_(material=p.material.__class__(**{**p.material.__dict__, "k_w": 2.2e9}))
    assert any("incompressible" in e for e in bad.errors())


def test_presets_are_immutable():
    p = preset_mp1()
    with pytest.raises(Exception):
        p.dt = 2.0
    assert preset_mp1() == p


def test_build_problem_dispatch():
    for name in PRESETS:
        prob = build_problem(get_preset(name).with_(t_end=0.0, output_times=()))
        assert prob.preset.problem == name
