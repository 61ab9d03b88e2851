"""Upstream data, inlet quantities and the stream-coordinate closure tables.

An inlet profile gives the far-upstream horizontal velocity u(x2) and entropy
function S(x2) on [0, 1].  Fixing the mass flux m determines the constant
upstream pressure, the Bernoulli function B(x2) and the stream function
psi(x2); transporting B and S along streamlines turns them into functions of
the stream value s in [0, m].
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator
from scipy.optimize import brentq, minimize_scalar

from . import quadrature
from .errors import DomainError, ParameterError, ValidationError

Func = Callable[[np.ndarray], np.ndarray]


def _zero(x):
    return np.zeros(np.shape(x))


def _left(x):
    return np.nextafter(x, -np.inf)


@dataclass(frozen=True)
class InletProfile:
    """Upstream velocity and entropy function on [0, 1].

    At a jump location the functions return the value from above; the value
    from below is obtained by evaluating just left of the jump.  ``phi_ext``
    is the potential of a conservative exterior force, given on the
    streamline that leaves the inlet at height x2.
    """

    u1m: Func
    Sm: Func
    du1m: Func
    dSm: Func
    gamma: float
    jumps: tuple = ()
    phi_ext: Optional[Func] = None
    dphi_ext: Optional[Func] = None
    eps0: float = 0.1
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.gamma > 1:
            raise ParameterError("adiabatic exponent must exceed 1")
        if len(self.jumps) > 1:
            raise ParameterError("at most one jump is supported")
        for xd in self.jumps:
            if not 0 < xd < 1:
                raise ParameterError("jump location must lie in (0, 1)")

    @property
    def breaks(self):
        return np.array([0.0, *self.jumps, 1.0])

    @property
    def x_d(self):
        return self.jumps[0] if self.jumps else None

    def speed_ratio(self, x):
        """u^2 S^(-1/gamma), the quantity whose extrema control choking."""
        return self.u1m(x) ** 2 * self.Sm(x) ** (-1.0 / self.gamma)

    def dspeed_ratio(self, x):
        g = self.gamma
        u, S = self.u1m(x), self.Sm(x)
        return (2 * u * self.du1m(x) * S ** (-1 / g)
                - u ** 2 / g * S ** (-1 / g - 1) * self.dSm(x))

    def with_force(self, phi, dphi=None):
        if dphi is None:
            def dphi(x, _f=phi):
                h = 1e-6
                return (_f(np.asarray(x) + h) - _f(np.asarray(x) - h)) / (2 * h)
        return replace(self, phi_ext=phi, dphi_ext=dphi)

    def sample_points(self, n=4001):
        """Dense samples including both one-sided limits at the jump."""
        x = np.linspace(0.0, 1.0, n)
        extra = [v for xd in self.jumps for v in (_left(xd), xd)]
        return np.unique(np.concatenate([x, extra]))


def constant(u=1.0, S=1.0, gamma=1.4):
    return InletProfile(lambda x: np.full(np.shape(x), float(u)),
                        lambda x: np.full(np.shape(x), float(S)),
                        _zero, _zero, gamma, kind="constant",
                        params={"u": u, "S": S})


def polynomial(u_coef, S_coef, gamma=1.4):
    """Profiles given by polynomial coefficients in increasing powers of x2."""
    pu = np.polynomial.Polynomial(u_coef)
    pS = np.polynomial.Polynomial(S_coef)
    du, dS = pu.deriv(), pS.deriv()
    return InletProfile(lambda x: pu(np.asarray(x, float)), lambda x: pS(np.asarray(x, float)),
                        lambda x: du(np.asarray(x, float)), lambda x: dS(np.asarray(x, float)),
                        gamma, kind="polynomial",
                        params={"u": list(u_coef), "S": list(S_coef)})


def two_state(x_d, u=(1.0, 1.0), S=(1.0, 1.0), gamma=1.4, eps0=0.1):
    """Piecewise-constant data with one jump at x_d (values below, above)."""
    def step(lo, hi):
        return lambda x: np.where(np.asarray(x, float) < x_d, float(lo), float(hi))

    return InletProfile(step(*u), step(*S), _zero, _zero, gamma, jumps=(float(x_d),),
                        eps0=eps0, kind="two-state",
                        params={"x_d": x_d, "u": tuple(u), "S": tuple(S)})


def table(x, u, S, gamma=1.4):
    pu = PchipInterpolator(np.asarray(x, float), np.asarray(u, float))
    pS = PchipInterpolator(np.asarray(x, float), np.asarray(S, float))
    du, dS = pu.derivative(), pS.derivative()
    return InletProfile(pu, pS, du, dS, gamma, kind="table")


def entropy_wave(x_d, m, S=(1.0, 0.95), u_below=1.0, gamma=1.4, eps0=0.1):
    """Two-state entropy with the upper velocity chosen so that B is continuous.

    Continuity of the Bernoulli function depends on the inlet pressure and
    hence on the mass flux, so the profile is tied to ``m``.  An entropy rise
    across the sheet needs a fast lower stream (the enthalpy gain must be paid
    for by kinetic energy); an entropy drop works at any subsonic speed.
    """
    g = gamma
    S_lo, S_hi = S

    def mismatch(u_hi):
        I = x_d * u_below * S_lo ** (-1 / g) + (1 - x_d) * u_hi * S_hi ** (-1 / g)
        C = m ** (g - 1) * I ** (1 - g)
        return 0.5 * u_hi ** 2 + C * S_hi ** (1 / g) - 0.5 * u_below ** 2 - C * S_lo ** (1 / g)

    lo, hi = 1e-9, 10.0 * u_below
    if mismatch(lo) * mismatch(hi) > 0:
        raise ParameterError("no velocity makes the Bernoulli function continuous at this mass flux")
    u_hi = brentq(mismatch, lo, hi, xtol=1e-15, rtol=1e-15)
    prof = two_state(x_d, (u_below, u_hi), S, gamma, eps0)
    return replace(prof, kind="entropy-wave", params={**prof.params, "m": m})


# ---------------------------------------------------------------- inlet quantities

def flux_integral(profile, n_panels=64):
    """Integral of u S^(-1/gamma) over [0, 1]."""
    g = profile.gamma
    return quadrature.integrate(lambda x: profile.u1m(x) * profile.Sm(x) ** (-1 / g),
                                profile.breaks, n_panels)


def inlet_pressure(profile, m):
    """Constant upstream pressure fixed by the mass flux."""
    if not m > 0:
        raise ParameterError("mass flux must be positive")
    g = profile.gamma
    return (g - 1) / g * m ** g * flux_integral(profile) ** (-g)


def inlet_density(profile, m):
    g = profile.gamma
    p = inlet_pressure(profile, m)
    return lambda x: (g * p / ((g - 1) * profile.Sm(x))) ** (1 / g)


def _bernoulli_constant(profile, m):
    g = profile.gamma
    return m ** (g - 1) * flux_integral(profile) ** (1 - g)


def bernoulli_profile(profile, m):
    """Upstream Bernoulli function B(x2), shifted by -Phi when a force is present."""
    g = profile.gamma
    C = _bernoulli_constant(profile, m)

    def B(x):
        val = 0.5 * profile.u1m(x) ** 2 + C * profile.Sm(x) ** (1 / g)
        if profile.phi_ext is not None:
            val = val - profile.phi_ext(x)
        return val

    return B


def _dbernoulli(profile, m):
    g = profile.gamma
    C = _bernoulli_constant(profile, m)

    def dB(x):
        S = profile.Sm(x)
        val = profile.u1m(x) * profile.du1m(x) + C / g * S ** (1 / g - 1) * profile.dSm(x)
        if profile.dphi_ext is not None:
            val = val - profile.dphi_ext(x)
        return val

    return dB


def max_speed_ratio(profile):
    """max over the inlet of u^2 S^(-1/gamma), one-sided values included."""
    x = profile.sample_points(20001)
    A = profile.speed_ratio(x)
    k = int(np.argmax(A))
    best = float(A[k])
    lo, hi = x[max(k - 1, 0)], x[min(k + 1, x.size - 1)]
    if hi > lo and not any(lo <= xd <= hi for xd in profile.jumps):
        res = minimize_scalar(lambda t: -profile.speed_ratio(t), bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-14})
        best = max(best, float(-res.fun))
    return best


def min_speed_ratio(profile):
    x = profile.sample_points(20001)
    A = profile.speed_ratio(x)
    k = int(np.argmin(A))
    best = float(A[k])
    lo, hi = x[max(k - 1, 0)], x[min(k + 1, x.size - 1)]
    if hi > lo and not any(lo <= xd <= hi for xd in profile.jumps):
        res = minimize_scalar(profile.speed_ratio, bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-14})
        best = min(best, float(res.fun))
    return best


def m_hat(profile):
    """Mass flux below which some upstream streamline is sonic or supersonic."""
    g = profile.gamma
    return ((g - 1) ** (-1 / (g - 1)) * max_speed_ratio(profile) ** (1 / (g - 1))
            * flux_integral(profile))


def inlet_mach(profile, m, x):
    g = profile.gamma
    p = inlet_pressure(profile, m)
    rho = inlet_density(profile, m)(x)
    return profile.u1m(x) / np.sqrt(g * p / rho)


# ---------------------------------------------------------------- validation

@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    detail: str


def validate_profile(profile, tol=1e-12):
    """Checks on positivity, wall monotonicity and jump signs."""
    x = profile.sample_points()
    u, S = profile.u1m(x), profile.Sm(x)
    checks = [Check("positivity", bool(u.min() > 0 and S.min() > 0),
                    f"min u = {u.min():.6g}, min S = {S.min():.6g}")]
    d0 = float(profile.dspeed_ratio(np.array([0.0]))[0])
    d1 = float(profile.dspeed_ratio(np.array([1.0]))[0])
    scale = tol * max(1.0, float(np.abs(profile.speed_ratio(x)).max()))
    checks.append(Check("wall-monotonicity", bool(d0 <= scale and d1 >= -scale),
                        f"(u^2 S^(-1/g))'(0) = {d0:.6g}, (u^2 S^(-1/g))'(1) = {d1:.6g}"))
    if profile.jumps:
        checks.append(_jump_check(profile, scale))
    return checks


def _jump_check(profile, tol):
    xd, e0 = profile.jumps[0], profile.eps0
    below = np.linspace(xd - e0, _left(xd), 201)[1:]
    above = np.linspace(xd, xd + e0, 201)[:-1]
    jA = float(profile.speed_ratio(np.array([xd]))[0] - profile.speed_ratio(np.array([_left(xd)]))[0])
    jS = float(profile.Sm(np.array([xd]))[0] - profile.Sm(np.array([_left(xd)]))[0])
    dA_lo, dS_lo = profile.dspeed_ratio(below), profile.dSm(below)
    dA_hi, dS_hi = profile.dspeed_ratio(above), profile.dSm(above)
    rising = (dA_lo.min() >= -tol and dS_lo.min() >= -tol and jA >= -tol and jS >= -tol
              and max(dA_lo.min(), dS_lo.min(), jA, jS) > tol)
    falling = (dA_hi.max() <= tol and dS_hi.max() <= tol and jA <= tol and jS <= tol
               and min(dA_hi.max(), dS_hi.max(), jA, jS) < -tol)
    return Check("jump-signs", bool(rising or falling),
                 f"[u^2 S^(-1/g)] = {jA:.6g}, [S] = {jS:.6g}")


def require_valid(profile, enforce_jump=True):
    for c in validate_profile(profile):
        if not c.ok and (enforce_jump or c.name != "jump-signs"):
            raise ValidationError(f"inlet condition '{c.name}' fails: {c.detail}", c.name)


# ---------------------------------------------------------------- stream function at the inlet

class InletStreamMap:
    """psi(x2) = int_0^x2 rho u and its inverse, accurate to round-off."""

    def __init__(self, flux_density, breaks, cells=2048):
        self.f = flux_density
        self.breaks = np.asarray(breaks, float)
        per = max(64, cells // (self.breaks.size - 1))
        edges = [np.linspace(lo, hi, per + 1) for lo, hi in zip(self.breaks[:-1], self.breaks[1:])]
        self.edges = np.unique(np.concatenate(edges))
        self.values = quadrature.cumulative(self._density, self.edges)
        if np.any(np.diff(self.values) <= 0):
            raise DomainError("inlet stream function is not strictly increasing")

    def _density(self, x):
        return self.f(np.asarray(x, float))

    @property
    def total(self):
        return float(self.values[-1])

    def psi(self, x):
        x = np.clip(np.asarray(x, float), 0.0, 1.0)
        if x.size == 0:
            return x.copy()
        k = np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, self.edges.size - 2)
        # nodes of the partial-cell rule lie strictly inside one cell
        xq, wq = quadrature.rule_on(self.edges[k].ravel(), x.ravel(), n_panels=1)
        part = (wq * self.f(xq)).sum(axis=1)
        return self.values[k] + part.reshape(x.shape)

    def inverse(self, s, iters=6):
        s = np.asarray(s, float)
        x = np.interp(s, self.values, self.edges)
        lo_b, hi_b = self._bracket(s)
        for _ in range(iters):
            r = self.psi(x) - s
            x = np.clip(x - r / self.f(x), lo_b, hi_b)
        return x

    def _bracket(self, s):
        k = np.clip(np.searchsorted(self.values, s, side="right") - 1, 0, self.edges.size - 2)
        return self.edges[k], self.edges[k + 1]


# ---------------------------------------------------------------- closure tables

def _ramp_integral(s, m, d0, dm):
    """Integral from 0 (or m) of the linear ramps that extend a derivative."""
    t_lo = np.maximum(s, -m)
    left = -d0 / (2 * m) * (m * m - (t_lo + m) ** 2)
    t_hi = np.minimum(s, 2 * m)
    right = dm / (2 * m) * (m * m - (2 * m - t_hi) ** 2)
    return left, right


def _ramp(s, m, d0, dm):
    left = np.where(s >= -m, d0 * (s + m) / m, 0.0)
    right = np.where(s <= 2 * m, dm * (2 * m - s) / m, 0.0)
    return left, right


@dataclass
class StreamClosure:
    """B and S (or the density law G in incompressible mode) as functions of psi.

    ``pieces`` holds one Hermite spline pair per smooth piece of [0, m]; at a
    jump m_d the left piece ends and the right piece starts, so no value is
    ever averaged across the jump.  Values outside [0, m] use the linear-ramp
    extensions of the derivatives of S and B S^(-1/gamma).
    """

    m: float
    gamma: float
    eps_cut: float
    s_edges: np.ndarray
    B_pieces: list
    S_pieces: list
    label_pieces: list = field(default_factory=list)
    p_minus: float = float("nan")
    incompressible: bool = False

    def __post_init__(self):
        self.m_d = float(self.s_edges[1]) if self.s_edges.size > 2 else None
        B0, S0, dB0, dS0 = self.table(np.array([0.0]))
        Bm, Sm, dBm, dSm = self.table(np.array([self.m]))
        self._ends = tuple(float(v[0]) for v in (B0, S0, dB0, dS0, Bm, Sm, dBm, dSm))
        if self.incompressible:
            self._K0, self._Km = float(B0[0]), float(Bm[0])
            self._dK0, self._dKm = float(dB0[0]), float(dBm[0])
        else:
            g = self.gamma
            K = lambda B, S: B * S ** (-1 / g)
            dK = lambda B, S, dB, dS: dB * S ** (-1 / g) - B / g * S ** (-1 / g - 1) * dS
            self._K0, self._Km = float(K(B0, S0)[0]), float(K(Bm, Sm)[0])
            self._dK0 = float(dK(B0, S0, dB0, dS0)[0])
            self._dKm = float(dK(Bm, Sm, dBm, dSm)[0])
        self._floor_S = 0.1 * min(float(S0[0]), float(Sm[0]))
        self._floor_K = 0.1 * min(self._K0, self._Km)

    # -- raw tables on [0, m]
    def _piece_index(self, s):
        return np.clip(np.searchsorted(self.s_edges, s, side="right") - 1, 0,
                       len(self.B_pieces) - 1)

    def table(self, s):
        """(B, S, B', S') on [0, m]; at m_d the value from above."""
        s = np.clip(np.asarray(s, float), 0.0, self.m)
        out = [np.empty(s.shape) for _ in range(4)]
        idx = self._piece_index(s)
        for k in range(len(self.B_pieces)):
            sel = idx == k
            if not np.any(sel):
                continue
            sk = s[sel]
            out[0][sel] = self.B_pieces[k](sk)
            out[1][sel] = self.S_pieces[k](sk)
            out[2][sel] = self.B_pieces[k](sk, 1)
            out[3][sel] = self.S_pieces[k](sk, 1)
        return tuple(out)

    def one_sided(self, s, side):
        """Table values with the piece chosen explicitly (side -1 below m_d)."""
        s = np.asarray(s, float)
        k = 0 if side < 0 else len(self.B_pieces) - 1
        return (self.B_pieces[k](s), self.S_pieces[k](s),
                self.B_pieces[k](s, 1), self.S_pieces[k](s, 1))

    def label(self, s):
        """Inlet height of the streamline with stream value s."""
        s = np.clip(np.asarray(s, float), 0.0, self.m)
        out = np.empty(s.shape)
        idx = self._piece_index(s)
        for k, spl in enumerate(self.label_pieces):
            sel = idx == k
            out[sel] = spl(s[sel])
        return out

    # -- extended functions on all of R
    def ext(self, s):
        """Extended (B, S, B', S') for arbitrary stream values."""
        s = np.asarray(s, float)
        B, S, dB, dS = self.table(s)
        below, above = s < 0, s > self.m
        if not (np.any(below) or np.any(above)):
            return B, S, dB, dS
        m = self.m
        _, S0, _, dS0, _, Sm, _, dSm = self._ends
        iS_lo, iS_hi = _ramp_integral(s, m, dS0, dSm)
        rS_lo, rS_hi = _ramp(s, m, dS0, dSm)
        iK_lo, iK_hi = _ramp_integral(s, m, self._dK0, self._dKm)
        rK_lo, rK_hi = _ramp(s, m, self._dK0, self._dKm)
        St = np.where(below, S0 + iS_lo, Sm + iS_hi)
        dSt = np.where(below, rS_lo, rS_hi)
        Kt = np.where(below, self._K0 + iK_lo, self._Km + iK_hi)
        dKt = np.where(below, rK_lo, rK_hi)
        low_S = St < self._floor_S
        St = np.where(low_S, self._floor_S, St)
        dSt = np.where(low_S, 0.0, dSt)
        low_K = Kt < self._floor_K
        Kt = np.where(low_K, self._floor_K, Kt)
        dKt = np.where(low_K, 0.0, dKt)
        if self.incompressible:
            Bt, dBt = Kt, dKt
        else:
            g = self.gamma
            Bt = St ** (1 / g) * Kt
            dBt = St ** (1 / g - 1) / g * dSt * Kt + St ** (1 / g) * dKt
        out = (np.where(below | above, Bt, B), np.where(below | above, St, S),
               np.where(below | above, dBt, dB), np.where(below | above, dSt, dS))
        return out

    def jump(self):
        """(B, S) jumps at m_d, value above minus value below."""
        if self.m_d is None:
            return 0.0, 0.0
        lo = self.one_sided(np.array([self.m_d]), -1)
        hi = self.one_sided(np.array([self.m_d]), +1)
        return float(hi[0][0] - lo[0][0]), float(hi[1][0] - lo[1][0])


def _hermite(s, v, dv):
    return CubicHermiteSpline(s, v, dv, extrapolate=True)


def _sample_counts(edges, n_table):
    lengths = np.diff(edges)
    raw = np.maximum(64, np.round(n_table * lengths / lengths.sum())).astype(int)
    return raw


def build_closure(profile, m, eps_cut=0.05, n_table=2048, check_subsonic=True):
    """Tabulate B and S along streamlines for mass flux m."""
    if check_subsonic:
        mh = m_hat(profile)
        if not m > mh:
            raise ParameterError(f"mass flux {m:.6g} does not exceed m_hat = {mh:.6g}")
    g = profile.gamma
    p = inlet_pressure(profile, m)
    rho = inlet_density(profile, m)
    smap = InletStreamMap(lambda x: rho(x) * profile.u1m(x), profile.breaks)
    B = bernoulli_profile(profile, m)
    dB = _dbernoulli(profile, m)
    breaks = profile.breaks
    s_breaks = np.concatenate([[0.0], smap.psi(breaks[1:-1]), [smap.total]])
    # rescale tiny quadrature drift so that the tables end exactly at m
    s_breaks[-1] = m
    B_pieces, S_pieces, lab_pieces = [], [], []
    for k, n in enumerate(_sample_counts(s_breaks, n_table)):
        s = np.linspace(s_breaks[k], s_breaks[k + 1], n)
        x = smap.inverse(s)
        x[0], x[-1] = breaks[k], breaks[k + 1]
        if k < breaks.size - 2:
            x[-1] = _left(breaks[k + 1])
        flux = rho(x) * profile.u1m(x)
        Bv, Sv = B(x), profile.Sm(x)
        B_pieces.append(_hermite(s, Bv, dB(x) / flux))
        S_pieces.append(_hermite(s, Sv, profile.dSm(x) / flux))
        lab_pieces.append(_hermite(s, np.clip(x, breaks[k], breaks[k + 1]), 1.0 / flux))
    cl = StreamClosure(float(m), float(g), float(eps_cut), s_breaks, B_pieces, S_pieces,
                       lab_pieces, p_minus=p)
    cl.profile = profile
    cl.stream_map = smap
    return cl


def closure_from_stream(m, B, dB, S, dS, gamma, m_d=None, eps_cut=0.05, n_table=2048,
                        incompressible=False, p_minus=float("nan"), side_aware=False):
    """Closure from B(s), S(s) (or G(s)) supplied directly as functions of psi.

    With a jump at m_d the callables receive ``side`` (-1 below, +1 above)
    when ``side_aware`` is set.
    """
    edges = np.array([0.0, m] if m_d is None else [0.0, m_d, m], float)
    B_pieces, S_pieces = [], []
    for k, n in enumerate(_sample_counts(edges, n_table)):
        s = np.linspace(edges[k], edges[k + 1], n)
        kw = {"side": -1 if k == 0 else 1} if side_aware else {}
        B_pieces.append(_hermite(s, B(s, **kw), dB(s, **kw)))
        S_pieces.append(_hermite(s, S(s, **kw), dS(s, **kw)))
    return StreamClosure(float(m), float(gamma), float(eps_cut), edges, B_pieces, S_pieces,
                         p_minus=p_minus, incompressible=incompressible)


def jump_transfer_report(closure, delta=None):
    """One-sided derivative and jump signs of B S^(-1/g) and B S^(-2/(g(g+1)))."""
    if closure.m_d is None:
        return None
    g = closure.gamma
    md = closure.m_d
    delta = 0.05 * md if delta is None else delta
    s = np.linspace(md - delta, md, 101)
    out = {}
    for name, k in (("K1", 1 / g), ("K2", 2 / (g * (g + 1)))):
        B, S, dB, dS = closure.one_sided(s, -1)
        dK = dB * S ** (-k) - k * B * S ** (-k - 1) * dS
        lo = closure.one_sided(np.array([md]), -1)
        hi = closure.one_sided(np.array([md]), +1)
        jump = float(hi[0][0] * hi[1][0] ** (-k) - lo[0][0] * lo[1][0] ** (-k))
        out[name] = {"min_derivative_below": float(dK.min()),
                     "max_derivative_below": float(dK.max()), "jump": jump}
    return out


# ---------------------------------------------------------------- mollification

def _bump(t):
    t = np.asarray(t, float)
    out = np.zeros(t.shape)
    inside = np.abs(t) < 1
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


def _dbump(t):
    t = np.asarray(t, float)
    out = np.zeros(t.shape)
    inside = np.abs(t) < 1
    ti = t[inside]
    out[inside] = -2 * ti / (1 - ti ** 2) ** 2 * np.exp(-1.0 / (1.0 - ti ** 2))
    return out


_KERNEL_PANELS = 32
_BUMP_MASS = quadrature.integrate(_bump, [-1.0, 1.0], 64)


def _bump_cdf_table(n=4097):
    # exact cell integrals, then a Hermite spline whose derivative is the kernel itself
    t = np.linspace(-1.0, 1.0, n)
    x, w = quadrature.rule_on(t[:-1], t[1:], 1)
    cells = (w * _bump(x)).sum(axis=1) / _BUMP_MASS
    F = np.concatenate([[0.0], np.cumsum(cells)])
    return CubicHermiteSpline(t, F, _bump(t) / _BUMP_MASS)


_BUMP_CDF = _bump_cdf_table()


def _bump_cdf(t):
    t = np.clip(np.asarray(t, float), -1.0, 1.0)
    return _BUMP_CDF(t)


class Mollifier:
    """M(g) = (1 - w) g + w (g * j) with w = I * j and I the indicator of [eps0, 1 - eps0].

    Data are left untouched next to the walls and convolved with the bump
    around interior jumps; constants are reproduced exactly.

    Convolutions are split at the jump of the data so that the 8-point
    panels never straddle a discontinuity.
    """

    def __init__(self, eps, eps0, jumps=()):
        if not 0 < eps < eps0:
            raise ParameterError(f"mollification width {eps} must lie in (0, {eps0})")
        self.eps, self.eps0 = float(eps), float(eps0)
        self.jumps = tuple(jumps)

    def window(self, y):
        e, e0 = self.eps, self.eps0
        y = np.asarray(y, float)
        return _bump_cdf((y - e0) / e) - _bump_cdf((y - 1 + e0) / e)

    def dwindow(self, y):
        e, e0 = self.eps, self.eps0
        y = np.asarray(y, float)
        return (_bump((y - e0) / e) - _bump((y - 1 + e0) / e)) / (e * _BUMP_MASS)

    def convolve(self, h, x, derivative=False):
        x = np.asarray(x, float)
        flat = x.ravel()
        if self.jumps:
            split = np.clip((flat - self.jumps[0]) / self.eps, -1.0, 1.0)
        else:
            split = np.zeros_like(flat)
        kernel = _dbump if derivative else _bump
        total = np.zeros_like(flat)
        for lo, hi in ((np.full_like(flat, -1.0), split), (split, np.ones_like(flat))):
            tq, wq = quadrature.rule_on(lo, hi, _KERNEL_PANELS)
            y = flat[:, None] - self.eps * tq
            total += (wq * kernel(tq) * h(np.clip(y, 0.0, 1.0))).sum(axis=1)
        total /= _BUMP_MASS
        if derivative:
            total /= self.eps
        return total.reshape(x.shape)

    def apply(self, g, dg):
        """Return callables for M(g) and its derivative."""
        def value(x):
            x = np.asarray(x, float)
            w = self.window(x)
            return (1 - w) * g(x) + w * self.convolve(g, x)

        def slope(x):
            x = np.asarray(x, float)
            w, dw = self.window(x), self.dwindow(x)
            return (dw * (self.convolve(g, x) - g(x)) + (1 - w) * dg(x)
                    + w * self.convolve(g, x, derivative=True))

        return value, slope


def _mollifier_nodes(eps, eps0, jumps, per_layer=1200, coarse=1000):
    """Graded nodes: spacing eps/300 where the mollifier acts, 1/coarse elsewhere."""
    pts = [np.linspace(0.0, 1.0, coarse + 1)]
    for c in (eps0, 1.0 - eps0, *jumps):
        pts.append(np.linspace(max(c - 2 * eps, 0.0), min(c + 2 * eps, 1.0), per_layer + 1))
    return np.unique(np.concatenate(pts))


def mollify(profile, eps, exact=False):
    """Smooth family member of a profile with a jump.

    S and u^2 S^(-1/g) are mollified.  By default each is tabulated once
    (values and slopes from the exact convolution) as a cubic Hermite
    spline on graded nodes; ``exact=True`` evaluates the convolutions on
    every call instead.
    """
    moll = Mollifier(eps, profile.eps0, profile.jumps)
    for xd in profile.jumps:
        if not (profile.eps0 + eps < xd < 1 - profile.eps0 - eps):
            raise ParameterError("jump too close to the wall blending zone for this width")
    g = profile.gamma
    S, dS = moll.apply(profile.Sm, profile.dSm)
    A, dA = moll.apply(profile.speed_ratio, profile.dspeed_ratio)
    if not exact:
        x = _mollifier_nodes(eps, profile.eps0, profile.jumps)
        S_tab = CubicHermiteSpline(x, S(x), dS(x))
        A_tab = CubicHermiteSpline(x, A(x), dA(x))
        S, dS = S_tab, S_tab.derivative()
        A, dA = A_tab, A_tab.derivative()

    def u(x):
        return np.sqrt(A(x)) * S(x) ** (1 / (2 * g))

    def du(x):
        a, s = A(x), S(x)
        return (dA(x) / (2 * np.sqrt(a)) * s ** (1 / (2 * g))
                + np.sqrt(a) / (2 * g) * s ** (1 / (2 * g) - 1) * dS(x))

    return replace(profile, u1m=u, Sm=S, du1m=du, dSm=dS, jumps=(), kind="mollified",
                   params={**profile.params, "eps": eps, "source_jumps": profile.jumps,
                           "tabulated": not exact})
