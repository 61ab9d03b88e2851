import numpy as np
import pytest
from scipy.optimize import brentq

from nozzleflow import asymptotics as asy
from nozzleflow import geometry
from nozzleflow import inlet as il
from nozzleflow.continuation import start_flux
from nozzleflow.errors import DomainError


def one_d_outlet_pressure(gamma, u, S, m, width):
    """Uniform outlet state carrying m across ``width`` with the inlet (B, S)."""
    rho_m = (m / u)
    B = 0.5 * u * u + S * rho_m ** (gamma - 1)

    def mass(rho):
        q2 = 2 * (B - S * rho ** (gamma - 1))
        return rho * np.sqrt(max(q2, 0.0)) * width - m

    # subsonic branch: density between the sonic and the stagnation value
    rho_star = (2 * B / ((gamma + 1) * S)) ** (1 / (gamma - 1))
    rho_stag = (B / S) ** (1 / (gamma - 1))
    rho = brentq(mass, rho_star, rho_stag * (1 - 1e-15), xtol=1e-15, rtol=1e-15)
    return (gamma - 1) / gamma * S * rho ** gamma


@pytest.fixture(scope="module")
def uniform():
    prof = il.constant()
    return prof, start_flux(prof, 0.4)


def test_straight_outlet_equals_inlet(uniform, straight):
    # [TRIVIAL] symmetric channel: nothing changes downstream
    prof, m = uniform
    st = asy.outlet_state(prof, m, straight)
    assert st.p_plus == pytest.approx(st.p_minus, rel=1e-10)
    y = np.linspace(0, 1, 11)
    np.testing.assert_allclose(st.x2_of_y(y), y, atol=1e-10)
    assert asy.J_eval(st.p_minus, prof, m) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("b", [2.0, 1.5, 0.8])
def test_outlet_pressure_matches_one_d_oracle(uniform, b):
    # [DERIVED] constant data: the outlet is uniform and fixed by mass + Bernoulli
    prof, m = uniform
    st = asy.outlet_state(prof, m, geometry.tanh_nozzle(b))
    ref = one_d_outlet_pressure(1.4, 1.0, 1.0, m, b)
    assert st.p_plus == pytest.approx(ref, rel=1e-8)
    assert (st.p_plus > st.p_minus) == (b > 1.0)
    assert st.p_lower < st.p_plus < st.p_upper


def test_J_increases_between_bounds():
    prof = il.polynomial([1.0, 0.2, -0.1], [1.0, 0.05])
    m = start_flux(prof, 0.3)
    lo, hi = asy.pressure_bounds(prof, m)
    p = np.linspace(lo, hi, 12)[1:-1]
    J = np.array([asy.J_eval(v, prof, m) for v in p])
    h = 1e-7 * (hi - lo)
    dJ = [(asy.J_eval(v + h, prof, m) - asy.J_eval(v - h, prof, m)) / (2 * h) for v in p]
    assert np.all(np.diff(J) > 0)
    assert min(dJ) > 0


def test_J_diverges_logarithmically_at_quadratic_minimum():
    # u^2 S^(-1/g) has an interior quadratic minimum at y = 1/2, so the
    # integrand behaves like 1/|y - 1/2| at the upper bound: J ~ log(1/delta)
    prof = il.polynomial([1.0, -0.4, 0.4], [1.0])
    m = start_flux(prof, 0.3)
    lo, hi = asy.pressure_bounds(prof, m)
    assert asy.J_eval(hi, prof, m) == np.inf
    J = [asy.J_eval(hi - d * (hi - lo), prof, m) for d in (1e-3, 1e-6, 1e-9, 1e-12)]
    steps = np.diff(J)
    assert np.all(steps > 0)
    np.testing.assert_allclose(steps, steps.mean(), rtol=0.1)


def test_J_exceeds_thousand_when_minimum_spans_an_interval():
    # the slow state fills [0, x_d): the integrand blows up like delta^(-1/2)
    prof = il.mollify(il.two_state(0.5, (1.0, 1.3), (1.0, 1.0)), 0.02)
    m = start_flux(prof, 0.3)
    lo, hi = asy.pressure_bounds(prof, m)
    assert asy.J_eval(hi, prof, m) == np.inf
    assert asy.J_eval(hi - 1e-9 * (hi - lo), prof, m) > 1e3


def test_J_rejects_candidates_outside_bounds(uniform):
    prof, m = uniform
    lo, hi = asy.pressure_bounds(prof, m)
    with pytest.raises(DomainError):
        asy.J_eval(1.01 * hi, prof, m)
    with pytest.raises(DomainError):
        asy.J_eval(0.99 * lo, prof, m)


def test_critical_pressure_matches_sonic_condition():
    # [DERIVED] g = 2, u = S = 1, m = 1: p- = 1/2, B = 1/2 + rho = 3/2 with rho- = 1
    prof = il.constant(gamma=2.0)
    assert il.inlet_pressure(prof, 1.0) == pytest.approx(0.5, rel=1e-12)
    B = 1.5
    # sonic when B = (g+1) c^2 / (2 (g-1)) with c^2 = rho: rho* = 2B/3 = 1
    rho_star = 2 * B / 3
    p_star = 0.5 * rho_star ** 2
    assert asy.critical_pressure(prof, 1.0) == pytest.approx(p_star, rel=1e-12)


def test_critical_pressure_increases_with_speed_ratio():
    m = 50.0
    low = asy.critical_pressure(il.constant(u=1.0), m)
    high = asy.critical_pressure(il.polynomial([1.0, 0.3], [1.0]), m)
    assert high > low


def test_critical_pressure_is_the_lower_bound(uniform):
    prof, m = uniform
    assert asy.critical_pressure(prof, m) == pytest.approx(asy.pressure_bounds(prof, m)[0],
                                                           rel=1e-12)


def test_outlet_state_reports_failing_inequality():
    prof = il.constant()
    m = il.m_hat(prof) * 1.001
    with pytest.raises(DomainError, match="inequality"):
        asy.outlet_state(prof, m, geometry.tanh_nozzle(0.5))


def test_end_map_conserves_mass():
    prof = il.polynomial([1.0, 0.2, -0.1], [1.0, 0.05])
    m = start_flux(prof, 0.3)
    st = asy.outlet_state(prof, m, geometry.tanh_nozzle(0.75, a=0.1))
    y = np.linspace(0, 1, 50)
    rho = il.inlet_density(prof, m)
    assert st.x2_of_y(0.0)[0] == pytest.approx(0.1, abs=1e-12)
    assert st.x2_of_y(1.0)[0] == pytest.approx(0.75, abs=1e-9)
    assert np.all(np.diff(st.x2_of_y(y)) > 0)
    assert asy.mass_map_defect(st, y).max() < 1e-6 * m


def test_end_map_kinks_at_jump():
    prof = il.mollify(il.two_state(0.5, (1.0, 1.2), (1.0, 1.0)), 0.05)
    m = start_flux(prof, 0.3)
    st = asy.outlet_state(prof, m, geometry.tanh_nozzle(0.75))
    x = st.x2_of_y(np.linspace(0.4, 0.6, 41))
    assert np.all(np.diff(x) > 0)
    assert np.abs(np.diff(x, 2)).max() < 1e-2
