import numpy as np
import pytest
from scipy.optimize import brentq

from nozzleflow import continuation as ct
from nozzleflow import inlet as il
from nozzleflow import solver
from nozzleflow.errors import ParameterError


def choking_flux(profile):
    """Mass flux at which the uniform inlet state reaches Mach 1 (bisection on M(m))."""
    x = np.array([0.5])
    mach = lambda m: il.inlet_mach(profile, m, x)[0] - 1.0
    lo = il.m_hat(profile) * (1 + 1e-12)
    return brentq(mach, lo * 0.999, lo * 10, xtol=1e-14 * lo) if mach(lo * 0.999) > 0 else lo


@pytest.fixture(scope="module")
def straight_sweep(straight):
    return ct.bers_sweep(straight, il.constant())


def test_uniform_margin_matches_one_d(straight):
    # [DERIVED] margin of uniform flow is 1 - m / Q_hat(B, S)
    from nozzleflow.closure import sonic_flux
    prof = il.constant()
    m = ct.start_flux(prof, 0.5)
    clo = il.build_closure(prof, m)
    f, _ = solver.solve_bounded(straight, clo, opts=solver.SolveOptions(nx=41, ny=11))
    B, S, _, _ = clo.ext(np.array([0.5 * m]))
    assert ct.margin(f) == pytest.approx(1 - m / sonic_flux(B, S, 1.4)[0], rel=1e-9)
    assert ct.sonic_gap(f) < 0


def test_margin_grows_with_flux(straight):
    prof = il.constant()
    opts = solver.SolveOptions(nx=41, ny=11)
    margins = []
    for mach in (0.6, 0.4, 0.2):
        m = ct.start_flux(prof, mach)
        f, _ = solver.solve_bounded(straight, il.build_closure(prof, m), opts=opts)
        margins.append(ct.margin(f))
    assert margins[0] < margins[1] < margins[2]


def test_start_flux_hits_requested_mach():
    prof = il.polynomial([1.0, 0.3], [1.0, -0.05])
    m = ct.start_flux(prof, 0.35)
    assert il.inlet_mach(prof, m, prof.sample_points(2001)).max() == pytest.approx(0.35, rel=1e-9)


def test_straight_bracket_contains_choking_flux(straight_sweep):
    lo, hi = straight_sweep.m_c_bracket
    mc = choking_flux(il.constant())
    assert lo <= mc <= hi
    assert straight_sweep.width < 1e-3


def test_sweep_margins_monotone(straight_sweep):
    assert ct.margin_monotone(straight_sweep)
    assert straight_sweep.terminal_kind in ("sonic-approach", "solver-breakdown")
    assert straight_sweep.m_hi_margin < 0.02


def test_accepted_trials_are_subsonic(straight_sweep):
    acc = [t for t in straight_sweep.trials if t.outcome == "accepted"]
    assert acc and all(t.sonic_gap < 0 for t in acc)
    last = max(acc, key=lambda t: -t.m)
    assert all(t.sonic_gap <= last.sonic_gap for t in acc)


def test_infeasible_start_rejected(straight):
    with pytest.raises(ParameterError):
        ct.bers_sweep(straight, il.constant(), ct.SweepOptions(m_start=0.5 * il.m_hat(il.constant())))
