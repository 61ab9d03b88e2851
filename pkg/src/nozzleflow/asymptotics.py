"""Far-field states: inlet pressure, outlet pressure from the flux balance J, streamline end map."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from . import inlet as il
from .errors import DomainError


def _kappa(gamma):
    return (gamma / (gamma - 1)) ** (1 - 1 / gamma)


def pressure_bounds(profile, m):
    """(p_lower, p_upper) for the outlet pressure of a stagnation-free subsonic flow.

    The upper bound keeps u1+ > 0 on every streamline, the lower bound keeps
    u1+ below the local sound speed.
    """
    g = profile.gamma
    beta = (g - 1) / g
    k2 = 2 * _kappa(g)
    base = il.inlet_pressure(profile, m) ** beta
    upper = (il.min_speed_ratio(profile) / k2 + base) ** (1 / beta)
    lower = (2 / (g + 1)) ** (1 / beta) * (il.max_speed_ratio(profile) / k2 + base) ** (1 / beta)
    return lower, upper


def critical_pressure(profile, m):
    """Pressure below which some streamline of the inlet family turns sonic.

    Along a streamline with fixed (B, S) the flow is sonic at
    p^((g-1)/g) = 2 B S^(-1/g) / ((g+1) kappa); the largest such value over
    the inlet is attained where u^2 S^(-1/g) is largest.
    """
    g = profile.gamma
    beta = (g - 1) / g
    p_minus = il.inlet_pressure(profile, m)
    A = il.max_speed_ratio(profile)
    return (g - 1) / g * (1 / (g + 1)) ** (1 / beta) * (A + 2 * _kappa(g) * p_minus ** beta) ** (1 / beta)


def _outlet_pointwise(profile, m, p_plus, y):
    g = profile.gamma
    p_minus = il.inlet_pressure(profile, m)
    S = profile.Sm(y)
    u = profile.u1m(y)
    k = _kappa(g)
    rho_p = (g / (g - 1) * p_plus / S) ** (1 / g)
    rho_m = (g / (g - 1) * p_minus / S) ** (1 / g)
    beta = (g - 1) / g
    u2 = u * u + 2 * k * S ** (1 / g) * (p_minus ** beta - p_plus ** beta)
    return rho_m, u, rho_p, u2


def _argmin_speed_ratio(profile):
    x = profile.sample_points(20001)
    return float(x[int(np.argmin(profile.speed_ratio(x)))])


def _integrand(profile, m, p_plus):
    def f(y):
        rho_m, u, rho_p, u2 = _outlet_pointwise(profile, m, p_plus, y)
        if u2 <= 0:
            return np.inf
        return rho_m * u / (rho_p * np.sqrt(u2))
    return f


def _points(profile):
    pts = [xd for xd in profile.jumps]
    pts.append(_argmin_speed_ratio(profile))
    eps = profile.params.get("eps")
    if eps is not None:
        # edges of the mollified layers
        for c in (*profile.params.get("source_jumps", ()), profile.eps0, 1 - profile.eps0):
            pts.extend((c - eps, c, c + eps))
    return sorted({p for p in pts if 0.0 < p < 1.0})


def J_eval(p_plus, profile, m, bounds=None, epsabs=1e-13):
    """Width of the outlet cross-section that carries the inlet flux at pressure p_plus.

    At the upper bound the speed vanishes on the streamline(s) where
    u^2 S^(-1/g) is minimal; the integral then diverges and ``inf`` is returned.
    """
    lo, hi = pressure_bounds(profile, m) if bounds is None else bounds
    if not lo <= p_plus <= hi:
        raise DomainError(f"candidate {p_plus!r} outside [{lo!r}, {hi!r}]")
    if p_plus == hi:
        return np.inf
    f = _integrand(profile, m, p_plus)
    with warnings.catch_warnings():
        if hi - p_plus < 1e-6 * (hi - lo):
            # nearly divergent: only used to certify the bracket sign
            warnings.simplefilter("ignore", IntegrationWarning)
        total, _ = quad(f, 0.0, 1.0, points=_points(profile) or None, limit=1000,
                        epsabs=epsabs, epsrel=1e-12)
    return float(total)


@dataclass
class AsymptoticState:
    p_minus: float
    p_plus: float
    p_lower: float
    p_upper: float
    a: float
    b: float
    J_residual: float
    profile: object
    m: float
    x2_table: np.ndarray
    y_table: np.ndarray

    def rho_plus(self, y):
        g = self.profile.gamma
        return (g / (g - 1) * self.p_plus / self.profile.Sm(np.asarray(y, float))) ** (1 / g)

    def u1_plus(self, y):
        _, _, _, u2 = _outlet_pointwise(self.profile, self.m, self.p_plus, np.asarray(y, float))
        return np.sqrt(u2)

    def x2_of_y(self, y):
        """Terminal height of the streamline entering at height y."""
        y = np.atleast_1d(np.asarray(y, float))
        f = _integrand(self.profile, self.m, self.p_plus)
        out = np.empty(y.shape)
        pts = _points(self.profile)
        for i, yi in enumerate(y):
            inner = [p for p in pts if p < yi] or None
            out[i] = self.a + quad(f, 0.0, yi, points=inner, limit=500,
                                   epsabs=1e-13, epsrel=1e-12)[0] if yi > 0 else self.a
        return out

    def outlet_profile(self, x2):
        """(u1+, rho+) as functions of the outlet height, through the inverse end map."""
        x2 = np.asarray(x2, float)
        y = np.interp(x2, self.x2_table, self.y_table)
        return self.u1_plus(y), self.rho_plus(y)

    def mach_plus(self, y):
        g = self.profile.gamma
        c = np.sqrt(g * self.p_plus / self.rho_plus(y))
        return self.u1_plus(y) / c


def outlet_state(profile, m, geom, n_table=201):
    """Unique outlet pressure balancing the outlet width against J."""
    width = float(geom.b - geom.a)
    lo, hi = pressure_bounds(profile, m)
    if not lo < hi:
        raise DomainError(f"empty pressure window [{lo!r}, {hi!r}]; raise m")
    delta = 1e-9 * (hi - lo)
    left, right = lo + delta, hi - delta
    J_lo = J_eval(left, profile, m, (lo, hi))
    if not J_lo < width:
        raise DomainError(f"J(p_lower) = {J_lo:.6g} is not below the outlet width {width:.6g}; "
                          "the sonic-side inequality fails at this m")
    J_hi = J_eval(right, profile, m, (lo, hi))
    if not J_hi > width:
        raise DomainError(f"J(p_upper) = {J_hi:.6g} does not exceed the outlet width {width:.6g}; "
                          "the stagnation-side inequality fails at this m")
    p_plus = brentq(lambda p: J_eval(p, profile, m, (lo, hi)) - width, left, right,
                    xtol=1e-15 * hi, rtol=1e-15, maxiter=200)
    res = J_eval(p_plus, profile, m, (lo, hi)) - width
    state = AsymptoticState(il.inlet_pressure(profile, m), p_plus, lo, hi, float(geom.a),
                            float(geom.b), res, profile, m, np.empty(0), np.empty(0))
    y = np.linspace(0.0, 1.0, n_table)
    state.y_table = y
    state.x2_table = state.x2_of_y(y)
    return state


def mass_map_defect(state, y):
    """|int_0^y rho- u- dt - int_a^{x2(y)} rho+ u+ dx2| at the given labels.

    The outlet integral is taken in the label variable through a spline of
    the tabulated end map, so it does not reuse the J integrand.
    """
    y = np.atleast_1d(np.asarray(y, float))
    prof, m = state.profile, state.m
    rho_m = il.inlet_density(prof, m)
    pts = _points(prof)
    X = CubicSpline(state.y_table, state.x2_table)
    dX = X.derivative()
    out = np.empty(y.shape)
    for i, yi in enumerate(y):
        if yi <= 0:
            out[i] = 0.0
            continue
        inner = [p for p in pts if p < yi] or None
        left = quad(lambda t: rho_m(t) * prof.u1m(t), 0.0, yi, points=inner, limit=500,
                    epsabs=1e-13, epsrel=1e-12)[0]
        right = quad(lambda t: state.rho_plus(t) * state.u1_plus(t) * dX(t), 0.0, yi,
                     points=inner, limit=500, epsabs=1e-13, epsrel=1e-12)[0]
        out[i] = abs(left - right)
    return out
