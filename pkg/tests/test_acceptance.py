"""End-to-end acceptance checks, one test per criterion.

Every test prints a single ``AC<n> PASS|FAIL`` line with the measured
quantities before asserting, so ``pytest -s -k acceptance`` gives a compact
scorecard.
"""
import time

import numpy as np
import pytest
from scipy.optimize import brentq

from nozzleflow import asymptotics as asy
from nozzleflow import continuation as ct
from nozzleflow import discontinuity as disc
from nozzleflow import fields as fl
from nozzleflow import geometry
from nozzleflow import incompressible as inc
from nozzleflow import inlet as il
from nozzleflow import solver
from nozzleflow.solver import SolveOptions

REFINE = ((101, 21), (201, 41), (401, 81))
SHEET_FLUX = 10119.288512538838     # lower-stream inlet Mach 0.26 for the entropy-wave data


def verdict(n, ok, detail):
    print(f"\nAC{n} {'PASS' if ok else 'FAIL'}: {detail}")
    return ok


def window(field_):
    """Columns with |x1| <= L, wall rows excluded (truncation layers sit outside)."""
    cols = np.abs(field_.grid.y1) <= field_.grid.geom.L
    return cols


def interior_max(values, field_):
    return float(np.abs(values[window(field_)][:, 1:-1]).max())


def ratios(errs):
    return [a / b for a, b in zip(errs[:-1], errs[1:])]


@pytest.fixture(scope="module")
def sheared_ladder():
    """Sheared smooth data in the contracting nozzle on three nested grids."""
    g = geometry.tanh_nozzle(0.75)
    prof = il.polynomial([1.0, 0.0, 0.2], [1.0, 0.1])
    clo = il.build_closure(prof, ct.start_flux(prof, 0.3))
    return [solver.solve_bounded(g, clo, opts=SolveOptions(nx=nx, ny=ny))[0] for nx, ny in REFINE]


# ---------------------------------------------------------------- 1

@pytest.mark.parametrize("gamma", [1.4, 2.0])
def test_ac1_uniform_flow_exact(gamma):
    # [DERIVED] constant data in a straight channel: psi = m y2, p = p-
    prof = il.constant(gamma=gamma)
    m = ct.start_flux(prof, 0.3)
    t = time.perf_counter()
    f, rep = solver.solve_bounded(geometry.straight(), il.build_closure(prof, m),
                                  opts=SolveOptions(tol=1e-12))
    dt = time.perf_counter() - t
    psi_err = float(np.abs(f.psi - m * f.grid.Y2).max()) / m
    res = float(np.abs(solver.residual(f)).max())
    p_err = float(np.abs(fl.reconstruct(f).p / il.inlet_pressure(prof, m) - 1).max())
    ok = psi_err < 1e-12 and res < 1e-12 and p_err < 1e-10 and dt < 5
    assert verdict(1, ok, f"gamma={gamma} psi err {psi_err:.2e}, residual {res:.2e}, "
                          f"p rel err {p_err:.2e}, {dt:.2f} s")


# ---------------------------------------------------------------- 2

def test_ac2_conservation(sheared_ladder):
    flux_err, transport, div = [], [], []
    for f in sheared_ladder:
        prim = fl.reconstruct(f)
        mid, _ = fl.station_flux(prim)
        flux_err.append(float(np.abs(mid / f.m - 1).max()))
        transport.append(fl.transport_defect(prim))
        div.append(interior_max(fl.mass_divergence(prim), f))
    r = ratios(div)
    ok = (max(flux_err) < 1e-6 and all(d == (0.0, 0.0) for d in transport)
          and all(3.5 <= v <= 4.5 for v in r))
    assert verdict(2, ok, f"station flux err {max(flux_err):.2e}, transport {transport[-1]}, "
                          f"mass residual {['%.3e' % d for d in div]} ratios "
                          f"{['%.2f' % v for v in r]}")


# ---------------------------------------------------------------- 3, 4

SMOOTH_CASES = {
    "straight/sheared": (geometry.straight(), il.polynomial([1.0, 0.0, 0.2], [1.0, 0.1])),
    "contracting/sheared": (geometry.tanh_nozzle(0.75), il.polynomial([1.0, 0.0, 0.2], [1.0, 0.1])),
    "expanding/stratified": (geometry.tanh_nozzle(1.5), il.polynomial([1.0, 0.1], [1.0, -0.05])),
    "raised/sheared": (geometry.tanh_nozzle(0.9, a=0.2), il.polynomial([1.0, 0.0, 0.2], [1.0, 0.1])),
    "gentle/entropy": (geometry.tanh_nozzle(0.6, scale=2.0), il.polynomial([1.0], [1.0, 0.2])),
    "contracting/uniform": (geometry.tanh_nozzle(0.75), il.constant()),
}


@pytest.fixture(scope="module")
def smooth_runs():
    out = {}
    for name, (g, prof) in SMOOTH_CASES.items():
        clo = il.build_closure(prof, ct.start_flux(prof, 0.3))
        out[name] = solver.solve_bounded(g, clo)[0]
    return out


def test_ac3_maximum_principles(smooth_runs):
    lines, ok = [], True
    for name, f in smooth_runs.items():
        rep = fl.max_principle_report(fl.reconstruct(f))
        ok &= rep["pass"]
        lines.append(f"{name}: {'ok' if rep['pass'] else 'fail'} "
                     f"|theta|max {rep['theta_max']:.4f} <= {rep['theta_B']:.4f}")
    assert verdict(3, ok and len(smooth_runs) >= 5, "; ".join(lines))


def test_ac4_monotone_nondegenerate(smooth_runs):
    worst_d, worst_q = np.inf, np.inf
    for f in smooth_runs.values():
        mono = solver.monotonicity_check(f)
        worst_d = min(worst_d, mono["min_dpsi_dx2"])
        worst_q = min(worst_q, float(fl.reconstruct(f).q.min()))
    ok = worst_d > 0 and worst_q > 0
    assert verdict(4, ok, f"min dpsi/dx2 {worst_d:.4g}, min q {worst_q:.4g} "
                          f"over {len(smooth_runs)} runs")


# ---------------------------------------------------------------- 5

def uniform_outlet_pressure(gamma, u, S, m, width):
    """Independent 1-D oracle: uniform outlet with the inlet (B, S) carrying m."""
    rho_m = m / u
    B = 0.5 * u * u + S * rho_m ** (gamma - 1)
    rho_star = (2 * B / ((gamma + 1) * S)) ** (1 / (gamma - 1))
    rho_stag = (B / S) ** (1 / (gamma - 1))
    rho = brentq(lambda r: r * np.sqrt(max(2 * (B - S * r ** (gamma - 1)), 0.0)) * width - m,
                 rho_star, rho_stag * (1 - 1e-15), xtol=1e-15, rtol=1e-15)
    return (gamma - 1) / gamma * S * rho ** gamma


def test_ac5_outlet_state():
    prof = il.constant()
    m = ct.start_flux(prof, 0.4)
    st = asy.outlet_state(prof, m, geometry.straight())
    sym = abs(st.p_plus / st.p_minus - 1)
    ex = asy.outlet_state(prof, m, geometry.tanh_nozzle(2.0))
    oracle = uniform_outlet_pressure(1.4, 1.0, 1.0, m, 2.0)
    exp_err = abs(ex.p_plus / oracle - 1)
    sheared = il.polynomial([1.0, 0.2, -0.1], [1.0, 0.05])
    ms = ct.start_flux(sheared, 0.3)
    lo, hi = asy.pressure_bounds(sheared, ms)
    cand = np.linspace(lo, hi, 12)[1:-1]
    J = np.array([asy.J_eval(p, sheared, ms) for p in cand])
    ok = sym < 1e-10 and exp_err < 1e-8 and ex.p_plus > ex.p_minus and np.all(np.diff(J) > 0)
    assert verdict(5, ok, f"symmetric |p+/p- - 1| {sym:.2e}; expanding vs oracle {exp_err:.2e}; "
                          f"J increasing at {cand.size} candidates: {bool(np.all(np.diff(J) > 0))}")


# ---------------------------------------------------------------- 6

def choking_flux(profile):
    """m at which the uniform inlet state reaches Mach 1 (bisection on the 1-D closure)."""
    x = np.array([0.5])
    f = lambda m: il.inlet_mach(profile, m, x)[0] - 1.0
    lo, hi = 1.0, 1.0
    while f(hi) > 0:
        hi *= 2
    while f(lo) < 0:
        lo /= 2
    return brentq(f, lo, hi, xtol=1e-14, rtol=1e-15)


def test_ac6_choking_continuation():
    prof = il.constant()
    t = time.perf_counter()
    flat = ct.bers_sweep(geometry.straight(), prof)
    con = ct.bers_sweep(geometry.tanh_nozzle(0.75), prof)
    dt = time.perf_counter() - t
    mc = choking_flux(prof)
    lo, hi = flat.m_c_bracket
    ok = (lo <= mc <= hi and flat.width < 1e-3 and con.m_c_bracket[0] > hi and dt < 900)
    assert verdict(6, ok, f"1-D choking flux {mc:.10g} in [{lo:.10g}, {hi:.10g}] "
                          f"(width {flat.width:.2e}); contracting bracket "
                          f"[{con.m_c_bracket[0]:.6g}, {con.m_c_bracket[1]:.6g}], {dt:.1f} s")


# ---------------------------------------------------------------- 7

def monotone_to_floor(errs, floor):
    """Non-increasing along the ladder up to a roundoff allowance ``floor``."""
    return all(b <= a + floor for a, b in zip(errs[:-1], errs[1:]))


@pytest.fixture(scope="module")
def families():
    g = geometry.tanh_nozzle(0.75)
    cases = {
        "entropy-wave": il.entropy_wave(0.5, SHEET_FLUX, S=(1.0, 0.97)),
        "vortex-sheet": il.two_state(0.5, (1.0, 1.3), (1.0, 1.0)),
    }
    t = time.perf_counter()
    out = {k: disc.eps_family(g, p, SHEET_FLUX, refine_last=True) for k, p in cases.items()}
    return g, cases, out, time.perf_counter() - t


def test_ac7_discontinuity_capture(families):
    g, cases, fams, dt = families
    tan_b = float(np.tan(g.max_inclination()))
    ok, lines = dt < 1200, []
    for kind, prof in cases.items():
        fam = fams[kind]
        reps = disc.family_report(fam, window=g.L)
        dB, dS = disc.inlet_jumps(prof, SHEET_FLUX)
        p_minus = il.inlet_pressure(prof, SHEET_FLUX)
        B_scale = float(np.nanmean(np.abs(reps[0].traces["B"][:, 0])))
        S_scale = float(np.nanmean(np.abs(reps[0].traces["S"][:, 0])))
        eB = [float(np.abs(r.jumps["B"] - dB).max()) for r in reps]
        eS = [float(np.abs(r.jumps["S"] - dS).max()) for r in reps]
        pj = float(np.abs(reps[-1].jumps["p"]).max()) / p_minus
        slope = max(r.lipschitz_estimate for r in reps)
        dist_ok = all(r.wall_distance > 0 and r.wall_distance >= r.distance_bounds["euclid"]
                      for r in reps)
        parts = {"complete": fam.complete, "kind": all(r.kind == kind for r in reps),
                 "pressure": pj < 1e-2, "B-ladder": monotone_to_floor(eB, 1e-9 * B_scale),
                 "S-ladder": monotone_to_floor(eS, 1e-9 * S_scale),
                 "slope": slope <= tan_b + 1e-2, "distance": dist_ok}
        ok &= all(parts.values())
        failed = [k for k, v in parts.items() if not v]
        lines.append(f"{kind}{' failing ' + ','.join(failed) if failed else ''}: "
                     f"|[p]|/p- {pj:.2e}, [B] err {['%.1e' % v for v in eB]}, "
                     f"[S] err {['%.1e' % v for v in eS]}, slope {slope:.3f} <= {tan_b:.3f}, "
                     f"wall distance {min(r.wall_distance for r in reps):.3f} >= bound "
                     f"{max(r.distance_bounds['euclid'] for r in reps):.3f}")
    assert verdict(7, ok, f"{dt:.0f} s; " + "; ".join(lines))


# ---------------------------------------------------------------- 8

def test_ac8_lagrangian_consistency(sheared_ladder, families):
    rt = max(fl.lagrangian_round_trip(fl.to_lagrangian(f), f) for f in sheared_ladder)
    mom = []
    for f in sheared_ladder:
        lag = fl.to_lagrangian(f)
        mom.append(interior_max(lag.momentum_residual(), f))
    r = ratios(mom)
    g, _, fams, _ = families
    f = fams["vortex-sheet"].fields[-1]
    m_d = disc.member_level(f)
    gam = disc.extract_gamma(f, m_d)
    lag = fl.to_lagrangian(f)
    hz = lag.z2[1] - lag.z2[0]
    z_img = np.array([lag.columns[i](x2) for i, x2 in enumerate(gam.x2)])
    off = float(np.abs(z_img - m_d).max()) / hz
    ok = rt < 1e-8 and all(3.5 <= v <= 4.5 for v in r) and off <= 1.0
    assert verdict(8, ok, f"round trip {rt:.2e}; momentum residual {['%.3e' % v for v in mom]} "
                          f"ratios {['%.2f' % v for v in r]}; Gamma image offset {off:.2e} z-cells")


# ---------------------------------------------------------------- 9

def test_ac9_incompressible_limit():
    t = time.perf_counter()
    lad = inc.gamma_ladder(geometry.tanh_nozzle(0.75), inc.smooth_two_state())
    flat = inc.gamma_ladder(geometry.straight(), inc.constant(1.0, 1.0, 10.0))
    dt = time.perf_counter() - t
    ok = (lad.complete and lad.monotone and flat.complete and max(flat.distances) < 1e-8
          and dt < 600)
    assert verdict(9, ok, f"gammas {lad.gammas} distances {['%.3e' % d for d in lad.distances]}; "
                          f"constant data max {max(flat.distances):.1e}; {dt:.1f} s")


# ---------------------------------------------------------------- 10

def test_ac10_exterior_force():
    # [DERIVED] gravity along the inlet: the force only shifts the transported B by -Phi
    g = geometry.tanh_nozzle(0.75)
    base = il.polynomial([1.0, 0.0, 0.2], [1.0, 0.1])
    m = ct.start_flux(base, 0.3)
    free = il.build_closure(base, m)
    B0 = float(free.ext(np.array([0.0]))[0][0])
    grav = 0.05 * B0
    forced = il.build_closure(base.with_force(lambda x: grav * np.asarray(x, float),
                                              lambda x: np.full(np.shape(x), grav)), m)
    rho = il.inlet_density(base, m)

    def label(s):
        return free.stream_map.inverse(np.clip(s, 0.0, m))

    shifted = il.closure_from_stream(
        m,
        lambda s: free.ext(s)[0] - grav * label(s),
        lambda s: free.ext(s)[2] - grav / (rho(label(s)) * base.u1m(label(s))),
        lambda s: free.ext(s)[1],
        lambda s: free.ext(s)[3],
        base.gamma)
    a, _ = solver.solve_bounded(g, forced)
    b, _ = solver.solve_bounded(g, shifted)
    diff = float(np.abs(a.psi - b.psi).max()) / m
    ok = diff < 1e-10
    assert verdict(10, ok, f"max |psi_force - psi_shifted| / m = {diff:.2e} "
                           f"(Phi = {grav:.4g} x2)")
