import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nozzleflow import closure as cl
from nozzleflow import inlet
from nozzleflow.errors import ParameterError, ValidationError


def test_constant_inlet_state():
    # [DERIVED] uniform stream: rho = m / u and p = (g-1)/g S rho^g
    prof = inlet.constant(2.0, 1.5, 1.4)
    m = 50.0
    rho = m / 2.0
    assert inlet.inlet_pressure(prof, m) == pytest.approx(0.4 / 1.4 * 1.5 * rho ** 1.4, rel=1e-14)
    B = inlet.bernoulli_profile(prof, m)(np.array([0.3]))[0]
    assert B == pytest.approx(0.5 * 4 + 1.5 * rho ** 0.4, rel=1e-14)


def test_force_shifts_bernoulli():
    # [TRIVIAL] constant potential 0.1 lowers B by 0.1
    prof = inlet.constant()
    x = np.linspace(0, 1, 11)
    B0 = inlet.bernoulli_profile(prof, 20.0)(x)
    B1 = inlet.bernoulli_profile(prof.with_force(lambda t: np.full(np.shape(t), 0.1)), 20.0)(x)
    np.testing.assert_allclose(B0 - B1, 0.1, atol=1e-14)


def test_m_hat_is_sonic_inlet():
    # [DERIVED] at m slightly above m_hat the fastest inlet point is just subsonic
    prof = inlet.polynomial([1.0, 0.0, 0.2], [1.0, 0.1])
    mh = inlet.m_hat(prof)
    x = prof.sample_points()
    M = inlet.inlet_mach(prof, mh * (1 + 1e-9), x)
    assert M.max() == pytest.approx(1.0, abs=1e-8) and M.max() < 1


def test_m_hat_closed_form_for_uniform_data():
    # [DERIVED] uniform stream is sonic when u^2 = (g-1) S (m/u)^(g-1)
    for u, S, g in ((1.0, 1.0, 1.4), (2.0, 0.7, 2.0), (0.5, 1.3, 1.67)):
        prof = inlet.constant(u, S, g)
        expected = u * (u * u / ((g - 1) * S)) ** (1 / (g - 1))
        assert inlet.m_hat(prof) == pytest.approx(expected, rel=1e-12)


def test_m_hat_is_tangency_of_sonic_flux():
    # [DERIVED] m - Q_hat(B(m), S) <= 0 with equality only at m_hat
    prof = inlet.constant(1.0, 1.0, 1.4)
    mh = inlet.m_hat(prof)
    for m in (0.5 * mh, 0.99 * mh, 1.01 * mh, 3 * mh):
        B = inlet.bernoulli_profile(prof, m)(np.array([0.5]))[0]
        assert m - cl.sonic_flux(B, 1.0, 1.4) < 0
    B = inlet.bernoulli_profile(prof, mh)(np.array([0.5]))[0]
    assert mh - cl.sonic_flux(B, 1.0, 1.4) == pytest.approx(0.0, abs=1e-10 * mh)


def test_stream_map_constant_data():
    prof = inlet.constant()
    clo = inlet.build_closure(prof, 30.0)
    x = np.linspace(0, 1, 13)
    np.testing.assert_allclose(clo.stream_map.psi(x), 30.0 * x, rtol=1e-14, atol=1e-12)
    np.testing.assert_allclose(clo.stream_map.inverse(30.0 * x), x, atol=1e-14)


def test_closure_transports_inlet_values(sheared):
    # [DERIVED] B(psi(x)) equals the upstream Bernoulli function at x
    m = 3 * inlet.m_hat(sheared)
    clo = inlet.build_closure(sheared, m)
    x = np.linspace(0.01, 0.99, 37)
    s = clo.stream_map.psi(x)
    B, S, _, _ = clo.table(s)
    np.testing.assert_allclose(B, inlet.bernoulli_profile(sheared, m)(x), rtol=1e-10)
    np.testing.assert_allclose(S, sheared.Sm(x), rtol=1e-10)
    np.testing.assert_allclose(clo.label(s), x, atol=1e-10)


def test_closure_extension_is_continuous(sheared):
    m = 3 * inlet.m_hat(sheared)
    clo = inlet.build_closure(sheared, m)
    d = 1e-9 * m
    for edge in (0.0, m):
        lo = clo.ext(np.array([edge - d]))
        hi = clo.ext(np.array([edge + d]))
        for a, b in zip(lo, hi):
            assert a[0] == pytest.approx(b[0], rel=1e-6, abs=1e-9)


def test_mass_flux_must_exceed_m_hat(sheared):
    with pytest.raises(ParameterError):
        inlet.build_closure(sheared, 0.5 * inlet.m_hat(sheared))


def test_wall_monotonicity_violation_detected():
    prof = inlet.polynomial([1.0, 0.5], [1.0])   # u^2 grows at the lower wall
    checks = {c.name: c.ok for c in inlet.validate_profile(prof)}
    assert not checks["wall-monotonicity"]
    with pytest.raises(ValidationError) as exc:
        inlet.require_valid(prof)
    assert exc.value.condition == "wall-monotonicity"


def test_entropy_wave_has_continuous_bernoulli():
    m = 10119.288512538838
    prof = inlet.entropy_wave(0.5, m, S=(1.0, 0.97))
    clo = inlet.build_closure(prof, m)
    dB, dS = clo.jump()
    assert dB == pytest.approx(0.0, abs=1e-9 * inlet.bernoulli_profile(prof, m)(np.array([0.2]))[0])
    assert dS == pytest.approx(-0.03)
    # entropy drop with a speed-ratio rise: the one-sided sign conditions do not hold
    assert not {c.name: c.ok for c in inlet.validate_profile(prof)}["jump-signs"]


def test_entropy_rise_needs_fast_stream():
    with pytest.raises(ParameterError):
        inlet.entropy_wave(0.5, 10119.3, S=(1.0, 1.05))


def test_two_state_jump_at_sheet():
    m = 500.0
    prof = inlet.two_state(0.5, (1.0, 1.3), (1.0, 1.0))
    clo = inlet.build_closure(prof, m)
    assert clo.m_d == pytest.approx(clo.stream_map.psi(np.array([0.5]))[0])
    dB, dS = clo.jump()
    assert dS == 0.0 and dB == pytest.approx(0.5 * (1.3 ** 2 - 1.0))


def test_mollifier_leaves_data_outside_layers():
    prof = inlet.two_state(0.5, (1.0, 1.3), (1.0, 1.1))
    mol = inlet.mollify(prof, 0.02, exact=True)
    x = np.array([0.15, 0.3, 0.45, 0.55, 0.7, 0.85])
    # identity up to the quadrature of the kernel mass
    np.testing.assert_allclose(mol.u1m(x), prof.u1m(x), rtol=1e-10)
    np.testing.assert_allclose(mol.Sm(x), prof.Sm(x), rtol=1e-10)
    assert mol.jumps == ()


def test_tabulated_mollifier_matches_exact():
    prof = inlet.two_state(0.5, (1.0, 1.3), (1.0, 1.1))
    a = inlet.mollify(prof, 0.02)
    b = inlet.mollify(prof, 0.02, exact=True)
    x = np.linspace(0, 1, 2001)
    np.testing.assert_allclose(a.u1m(x), b.u1m(x), rtol=1e-8)
    np.testing.assert_allclose(a.dSm(x), b.dSm(x), rtol=1e-6, atol=1e-6)


def test_mollified_slope_is_derivative():
    prof = inlet.two_state(0.5, (1.0, 1.3), (1.0, 1.1))
    mol = inlet.mollify(prof, 0.04, exact=True)
    x = np.array([0.08, 0.49, 0.5, 0.52, 0.93])
    h = 1e-6
    fd = (mol.Sm(x + h) - mol.Sm(x - h)) / (2 * h)
    np.testing.assert_allclose(mol.dSm(x), fd, rtol=1e-5, atol=1e-6)


def test_mollifier_width_bounds():
    prof = inlet.two_state(0.5, (1.0, 1.3), (1.0, 1.0), eps0=0.1)
    with pytest.raises(ParameterError):
        inlet.mollify(prof, 0.2)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 0.5), st.floats(0.0, 0.3))
def test_stream_map_monotone_and_total(c2, s1):
    prof = inlet.polynomial([1.0, 0.0, c2], [1.0, s1])
    m = 2 * inlet.m_hat(prof)
    clo = inlet.build_closure(prof, m)
    x = np.linspace(0, 1, 101)
    psi = clo.stream_map.psi(x)
    assert np.all(np.diff(psi) > 0)
    assert psi[-1] == pytest.approx(m, rel=1e-12)


def test_mollifier_reproduces_constants_everywhere():
    # [TRIVIAL] no jump in S: the mollified entropy is the data itself
    prof = inlet.two_state(0.5, (1.0, 1.3), (1.0, 1.0))
    mol = inlet.mollify(prof, 0.02, exact=True)
    x = np.linspace(0, 1, 4001)
    np.testing.assert_allclose(mol.Sm(x), 1.0, rtol=1e-10)
    assert mol.u1m(x).min() >= 1.0 - 1e-10 and mol.u1m(x).max() <= 1.3 + 1e-10
