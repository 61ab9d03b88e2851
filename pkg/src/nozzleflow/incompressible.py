"""Inhomogeneous incompressible inlet data and the large-gamma ladder toward them.

Incompressible data are a density rho(x2) and velocity u(x2) at the inlet with
a reference pressure p_ref.  Transported along streamlines they give the
density law G(s) and Bernoulli function B(s) = u^2/2 + p_ref/rho.  The same
pair (G, B) defines a compressible problem for every gamma through
S = gamma/(gamma - 1) G^(-gamma).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import inlet as il
from .errors import ConvergenceError, ParameterError, ValidationError
from .inlet import Check, InletStreamMap, closure_from_stream
from .solver import SolveOptions, solve_bounded

LADDER = (1.4, 2.0, 5.0, 10.0, 25.0, 50.0)


def _const(v):
    return lambda x: np.full(np.shape(x), float(v))


@dataclass(frozen=True)
class IncompressibleInlet:
    rho: Callable
    u: Callable
    drho: Callable
    du: Callable
    p_ref: float = 1.0
    jumps: tuple = ()
    eps0: float = 0.1
    kind: str = "custom"

    @property
    def breaks(self):
        return np.array([0.0, *self.jumps, 1.0])

    def momentum(self, x):
        return self.rho(x) * self.u(x) ** 2

    def dmomentum(self, x):
        r, u = self.rho(x), self.u(x)
        return self.drho(x) * u * u + 2 * r * u * self.du(x)

    def sample_points(self, n=4001):
        x = np.linspace(0.0, 1.0, n)
        for xd in self.jumps:
            x = np.union1d(x, [np.nextafter(xd, 0.0), xd])
        return x


def constant(rho=1.0, u=1.0, p_ref=1.0):
    return IncompressibleInlet(_const(rho), _const(u), _const(0.0), _const(0.0), p_ref,
                               kind="constant")


def smooth_step(x, x_d, width):
    """C-infinity step from 0 to 1 on [x_d - width, x_d + width], exactly flat outside."""
    return il._bump_cdf((np.asarray(x, float) - x_d) / width)


def dsmooth_step(x, x_d, width):
    return il._bump((np.asarray(x, float) - x_d) / width) / (il._BUMP_MASS * width)


def smooth_two_state(x_d=0.5, rho=(2.0, 1.0), u=(1.0, 1.6), width=0.2, p_ref=10.0):
    """Two states joined by a smooth step of half-width ``width``."""
    r0, r1 = rho
    u0, u1 = u
    return IncompressibleInlet(
        lambda x: r0 + (r1 - r0) * smooth_step(x, x_d, width),
        lambda x: u0 + (u1 - u0) * smooth_step(x, x_d, width),
        lambda x: (r1 - r0) * dsmooth_step(x, x_d, width),
        lambda x: (u1 - u0) * dsmooth_step(x, x_d, width),
        p_ref, kind="smooth-two-state")


def uniform_flux_two_state(x_d=0.5, rho=(2.0, 1.0), flux_density=2.0, width=0.2, p_ref=10.0):
    """Smooth density step with rho u held constant.

    The inlet stream map is then linear in x2, so the far-field data psi = m y2
    is exact and no boundary layer forms at the truncation boundaries.
    """
    r0, r1 = rho

    def rho_f(x):
        return r0 + (r1 - r0) * smooth_step(x, x_d, width)

    def drho_f(x):
        return (r1 - r0) * dsmooth_step(x, x_d, width)

    return IncompressibleInlet(
        rho_f,
        lambda x: flux_density / rho_f(x),
        drho_f,
        lambda x: -flux_density * drho_f(x) / rho_f(x) ** 2,
        p_ref, kind="uniform-flux-two-state")


def two_state(x_d=0.5, rho=(2.0, 1.0), u=(1.0, 1.6), p_ref=10.0, eps0=0.1):
    """Piecewise-constant data with one jump (values at x_d taken from above)."""
    def step(lo, hi):
        return lambda x: np.where(np.asarray(x, float) >= x_d, hi, lo).astype(float)
    return IncompressibleInlet(step(*rho), step(*u), _const(0.0), _const(0.0), p_ref,
                               (float(x_d),), eps0, kind="two-state")


def flux(inlet):
    from .quadrature import integrate
    return integrate(lambda x: inlet.rho(x) * inlet.u(x), inlet.breaks, 64)


def validate(inlet, tol=1e-12):
    """Positivity, wall monotonicity of rho u^2, and jump signs for two-state data."""
    x = inlet.sample_points()
    r, u = inlet.rho(x), inlet.u(x)
    checks = [Check("positivity", bool(r.min() > 0 and u.min() > 0),
                    f"min rho = {r.min():.6g}, min u = {u.min():.6g}, m = {flux(inlet):.6g}")]
    d0 = float(inlet.dmomentum(np.array([0.0]))[0])
    d1 = float(inlet.dmomentum(np.array([1.0]))[0])
    checks.append(Check("wall-monotonicity", bool(d0 <= tol and d1 >= -tol),
                        f"(rho u^2)'(0) = {d0:.6g}, (rho u^2)'(1) = {d1:.6g}"))
    if inlet.jumps:
        xd, e0 = inlet.jumps[0], inlet.eps0
        left = np.nextafter(xd, 0.0)
        jM = float(inlet.momentum(np.array([xd]))[0] - inlet.momentum(np.array([left]))[0])
        jR = float(inlet.rho(np.array([xd]))[0] - inlet.rho(np.array([left]))[0])
        below = np.linspace(xd - e0, left, 201)[1:]
        above = np.linspace(xd, xd + e0, 201)[:-1]
        dM_lo, dR_lo = inlet.dmomentum(below), inlet.drho(below)
        dM_hi, dR_hi = inlet.dmomentum(above), inlet.drho(above)
        lower_side = (dM_lo.min() >= -tol and dR_lo.max() <= tol and jM >= -tol and jR <= tol)
        upper_side = (dM_hi.max() <= tol and dR_hi.min() >= -tol and jM <= tol and jR >= -tol)
        checks.append(Check("jump-signs", bool(lower_side or upper_side),
                            f"[rho u^2] = {jM:.6g}, [rho] = {jR:.6g}"))
    return checks


def require_valid(inlet):
    for c in validate(inlet):
        if not c.ok:
            raise ValidationError(f"incompressible inlet condition '{c.name}' fails: {c.detail}",
                                  c.name)


@dataclass
class StreamData:
    """(G, B) and their s-derivatives as functions of the stream value."""
    inlet: IncompressibleInlet
    stream_map: InletStreamMap
    m: float

    def label(self, s):
        return self.stream_map.inverse(np.clip(s, 0.0, self.m))

    def G(self, s, side=None):
        return self.inlet.rho(self._x(s, side))

    def B(self, s, side=None):
        x = self._x(s, side)
        return 0.5 * self.inlet.u(x) ** 2 + self.inlet.p_ref / self.inlet.rho(x)

    def dG(self, s, side=None):
        x = self._x(s, side)
        return self.inlet.drho(x) / (self.inlet.rho(x) * self.inlet.u(x))

    def dB(self, s, side=None):
        x = self._x(s, side)
        r, u = self.inlet.rho(x), self.inlet.u(x)
        dBdx = u * self.inlet.du(x) - self.inlet.p_ref * self.inlet.drho(x) / r ** 2
        return dBdx / (r * u)

    def _x(self, s, side):
        x = self.label(s)
        if side is not None and self.inlet.jumps:
            xd = self.inlet.jumps[0]
            # pin the label to the chosen side of the jump
            x = np.where(side < 0, np.minimum(x, np.nextafter(xd, 0.0)), np.maximum(x, xd))
        return x


def stream_data(inlet):
    smap = InletStreamMap(lambda x: inlet.rho(x) * inlet.u(x), inlet.breaks)
    return StreamData(inlet, smap, smap.total)


def _m_d(data):
    if not data.inlet.jumps:
        return None
    return float(data.stream_map.psi(np.array([data.inlet.jumps[0]]))[0])


def incompressible_closure_for(inlet, eps_cut=0.05):
    data = stream_data(inlet)
    md = _m_d(data)
    return closure_from_stream(data.m, data.B, data.dB, data.G, data.dG, np.inf, m_d=md,
                               eps_cut=eps_cut, incompressible=True, p_minus=inlet.p_ref,
                               side_aware=md is not None)


def compressible_closure_for(inlet, gamma, eps_cut=0.05):
    """Closure with the same (G, B) and S = gamma/(gamma-1) G^(-gamma)."""
    data = stream_data(inlet)
    md = _m_d(data)
    k = gamma / (gamma - 1)

    def S(s, side=None):
        return k * data.G(s, side) ** (-gamma)

    def dS(s, side=None):
        return -gamma * k * data.G(s, side) ** (-gamma - 1) * data.dG(s, side)

    if md is None:
        return closure_from_stream(data.m, lambda s: data.B(s), lambda s: data.dB(s),
                                   lambda s: S(s), lambda s: dS(s), gamma, eps_cut=eps_cut)
    return closure_from_stream(data.m, data.B, data.dB, S, dS, gamma, m_d=md, eps_cut=eps_cut,
                               side_aware=True)


@dataclass
class LadderResult:
    gammas: list
    distances: list
    pairwise: list
    fields: list
    reference: object
    failures: list = field(default_factory=list)

    @property
    def monotone(self):
        d = np.asarray(self.distances)
        return bool(np.all(np.diff(d) < 0))

    @property
    def complete(self):
        return not self.failures


def gamma_ladder(geom, inlet, gammas=LADDER, opts=None, L=None):
    """Solve the incompressible problem and a compressible problem per gamma on one grid.

    Distances are max |psi_gamma - psi_incompressible| / m.
    """
    opts = opts or SolveOptions()
    require_valid(inlet)
    inc = incompressible_closure_for(inlet)
    ref, _ = solve_bounded(geom, inc, None, L, opts)
    m = inc.m
    out = LadderResult([], [], [], [], ref)
    for gm in gammas:
        try:
            clo = compressible_closure_for(inlet, gm)
            f, _ = solve_bounded(geom, clo, None, L, opts)
        except (ConvergenceError, ParameterError, il.DomainError) as exc:
            out.failures.append((gm, str(exc)))
            continue
        out.gammas.append(gm)
        out.fields.append(f)
        out.distances.append(float(np.abs(f.psi - ref.psi).max() / m))
    out.pairwise = [float(np.abs(a.psi - b.psi).max() / m)
                    for a, b in zip(out.fields[:-1], out.fields[1:])]
    return out
