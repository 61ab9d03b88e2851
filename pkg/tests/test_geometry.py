import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from nozzleflow import geometry
from nozzleflow.errors import DomainError, ValidationError


def test_straight_flattening_is_identity():
    # [TRIVIAL] walls at 0 and 1 give the identity map
    g = geometry.straight()
    x = np.array([[0.3, 0.2], [-4.0, 0.9]])
    np.testing.assert_array_equal(geometry.flatten(g, x), x)


def test_flatten_maps_walls_to_strip_edges(contracting):
    # [DERIVED] w1 -> 0 and w2 -> 1
    x1 = np.linspace(-3, 3, 7)
    lo = np.stack([x1, contracting.w1(x1)], -1)
    hi = np.stack([x1, contracting.w2(x1)], -1)
    np.testing.assert_allclose(geometry.flatten(contracting, lo)[:, 1], 0.0, atol=1e-15)
    np.testing.assert_allclose(geometry.flatten(contracting, hi)[:, 1], 1.0, atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.floats(-8, 8), st.floats(0, 1), st.floats(0.3, 2.5), st.floats(-0.5, 0.5))
def test_flatten_round_trip(x1, y2, b, a):
    # [DERIVED] unflatten is the inverse of flatten
    assume(b - a > 0.05)
    g = geometry.tanh_nozzle(b, a)
    y = np.array([x1, y2])
    x = geometry.unflatten(g, y)
    np.testing.assert_allclose(geometry.flatten(g, x), y, atol=1e-12)


def test_metric_terms_match_finite_differences(contracting):
    # [DERIVED] chain-rule factors against central differences of the inverse map
    y1, y2, h = 0.4, 0.3, 1e-6
    H, eta, dH, deta = geometry.metric_terms(contracting, y1, y2)
    x = geometry.unflatten(contracting, np.array([y1, y2]))
    def y2_of(x1, x2):
        return geometry.flatten(contracting, np.array([x1, x2]))[1]
    d1 = (y2_of(x[0] + h, x[1]) - y2_of(x[0] - h, x[1])) / (2 * h)
    d2 = (y2_of(x[0], x[1] + h) - y2_of(x[0], x[1] - h)) / (2 * h)
    assert eta == pytest.approx(d1, abs=1e-8)
    assert 1 / H == pytest.approx(d2, abs=1e-8)
    def eta_at_x(x1):
        yy = y2_of(x1, x[1])
        return geometry.metric_terms(contracting, x1, yy)[1]
    fd = (eta_at_x(x[0] + h) - eta_at_x(x[0] - h)) / (2 * h)
    assert deta == pytest.approx(fd, abs=1e-7)
    w = contracting
    assert dH == pytest.approx((w.width(y1 + h) - w.width(y1 - h)) / (2 * h), abs=1e-8)


def test_jacobian_structure(contracting):
    J = geometry.jacobian_flatten(contracting, np.array([0.0, 0.5]))
    assert J[0, 0] == 1.0 and J[0, 1] == 0.0
    assert J[1, 1] == pytest.approx(1 / 0.875)


def test_points_outside_are_rejected(contracting):
    with pytest.raises(DomainError):
        geometry.flatten(contracting, np.array([0.0, 1.2]))


def test_crossed_walls_fail_validation():
    g = geometry.tanh_nozzle(-0.5)
    checks = dict((n, ok) for n, ok, _ in g.validate())
    assert not checks["wall-order"]
    with pytest.raises(ValidationError):
        g.require_valid()


def test_tail_flatness_depends_on_window():
    # tanh tails decay like exp(-2|x|): flat to 1e-8 only for a long enough window
    short = dict((n, ok) for n, ok, _ in geometry.tanh_nozzle(0.75, L=5.0).validate())
    long = dict((n, ok) for n, ok, _ in geometry.tanh_nozzle(0.75, L=10.0).validate())
    assert not short["tail-flatness"] and long["tail-flatness"]


def test_max_inclination_of_tanh():
    # [DERIVED] max |w2'| = |b - 1| / 2 at x = 0
    g = geometry.tanh_nozzle(0.5)
    assert g.max_inclination() == pytest.approx(np.arctan(0.25), rel=1e-12)


def test_truncate_grid():
    g = geometry.straight(L=2.0)
    grid = geometry.truncate(g, nx=9, ny=5)
    assert grid.shape == (9, 5)
    assert grid.y1[0] == -4.0 and grid.y1[-1] == 4.0
    assert grid.h1 == 1.0 and grid.h2 == 0.25
    with pytest.raises(DomainError):
        geometry.truncate(g, L=-1.0)


def test_table_walls_reproduce_samples():
    x = np.linspace(-6, 6, 25)
    lo = np.zeros_like(x)
    hi = 1.0 - 0.2 * (1 + np.tanh(x)) / 2
    g = geometry.from_table(x, lo, hi)
    np.testing.assert_allclose(g.w2(x), hi, atol=1e-15)
    assert g.b == pytest.approx(hi[-1])
