"""Bernoulli density closure, sonic threshold, elliptic cut-off and PDE coefficients.

For a stream value s and gradient magnitude g = |grad psi| the density solves

    g^2 / 2 + rho^(gamma+1) S(s) = rho^2 B(s)

on the subsonic branch.  Writing rho = t rho0 with rho0 = (B/S)^(1/(gamma-1))
the equation becomes t^2 - t^(gamma+1) = g^2 / (2 rho0^2 B), whose left side is
concave and decreasing on the subsonic interval [t_sonic, 1].
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BranchError, DomainError


@dataclass
class GasState:
    rho: np.ndarray
    q: np.ndarray
    c: np.ndarray
    M: np.ndarray
    p: np.ndarray
    B: np.ndarray
    S: np.ndarray


def stagnation_density(B, S, gamma):
    return (B / S) ** (1.0 / (gamma - 1.0))


def sonic_ratio(gamma):
    """rho_sonic / rho_stagnation."""
    return (2.0 / (gamma + 1.0)) ** (1.0 / (gamma - 1.0))


def sonic_flux(B, S, gamma):
    """Q_hat: the largest |grad psi| = rho q compatible with (B, S)."""
    g = gamma
    return np.sqrt(g - 1) * (2 * B / (g + 1)) ** ((g + 1) / (2 * (g - 1))) * S ** (-1 / (g - 1))


def critical_speed(B, gamma):
    return np.sqrt(2 * (gamma - 1) * B / (gamma + 1))


def _solve_ratio(kappa, gamma, iters=100):
    """Root t in [t_sonic, 1] of t^2 - t^(gamma+1) = kappa (kappa below the sonic value)."""
    g = gamma
    shape = np.shape(kappa)
    kappa = np.ravel(kappa)
    ts = sonic_ratio(g)
    lo = np.full(kappa.shape, ts)
    hi = np.ones(kappa.shape)
    # quadratic model about the sonic point as a starting guess
    hs = ts ** 2 * (g - 1) / (g + 1)
    curv = 2 - g * (g + 1) * ts ** (g - 1)
    t = np.clip(ts + np.sqrt(np.maximum(2 * (hs - kappa) / -curv, 0.0)), ts, 1.0)
    active = np.ones(kappa.shape, bool)
    for _ in range(iters):
        tp = t[active]
        k = kappa[active]
        h = tp * tp - tp ** (g + 1) - k
        dh = 2 * tp - (g + 1) * tp ** g
        # h > 0 means the root lies to the right
        lo_a = np.where(h > 0, tp, lo[active])
        hi_a = np.where(h > 0, hi[active], tp)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = tp - h / dh
        bad = ~np.isfinite(step) | (step <= lo_a) | (step >= hi_a)
        new = np.where(bad, 0.5 * (lo_a + hi_a), step)
        settled = np.abs(h) <= 4e-16 * tp * tp
        new = np.where(settled, tp, new)
        lo[active], hi[active] = lo_a, hi_a
        done = settled | (np.abs(new - tp) <= 2e-16 * tp)
        t[active] = new
        idx = np.flatnonzero(active)
        active[idx[done]] = False
        if not active.any():
            break
    return t.reshape(shape)


def density_from_gradient(closure, s, g, strict=True):
    """Subsonic density and gas state at stream values s and |grad psi| = g."""
    if closure.incompressible:
        return incompressible_closure(closure, s, g)
    gam = closure.gamma
    s = np.asarray(s, float)
    g = np.broadcast_to(np.asarray(g, float), s.shape)
    B, S, _, _ = closure.ext(s)
    rho0 = stagnation_density(B, S, gam)
    kappa = g * g / (2 * rho0 ** 2 * B)
    ts = sonic_ratio(gam)
    k_sonic = ts ** 2 * (gam - 1) / (gam + 1)
    bad = kappa >= k_sonic
    if np.any(bad):
        if strict:
            raise BranchError(f"{int(bad.sum())} points at or beyond the sonic flux")
        kappa = np.where(bad, k_sonic, kappa)
    t = _solve_ratio(np.atleast_1d(kappa).astype(float), gam).reshape(kappa.shape)
    rho = t * rho0
    return _state(rho, g, B, S, gam)


def _state(rho, g, B, S, gam):
    c2 = (gam - 1) * S * rho ** (gam - 1)
    q = g / rho
    c = np.sqrt(c2)
    p = (gam - 1) / gam * S * rho ** gam
    return GasState(rho, q, c, q / c, p, B, S)


def subsonic_criterion(closure, s, g):
    B, S, _, _ = closure.ext(np.asarray(s, float))
    g = np.asarray(g, float)
    gam = closure.gamma
    bound = (gam - 1) * (2 * B / (gam + 1)) ** ((gam + 1) / (gam - 1)) * S ** (-2 / (gam - 1))
    return g * g < bound


def incompressible_closure(closure, s, g):
    """rho = G(s) and p = rho (B - q^2 / 2)."""
    s = np.asarray(s, float)
    g = np.broadcast_to(np.asarray(g, float), s.shape)
    B, G, _, _ = closure.ext(s)
    q = g / G
    head = B - 0.5 * q * q
    if np.any(head < 0):
        raise DomainError("speed exceeds the stagnation head on some streamline")
    inf = np.full(s.shape, np.inf)
    return GasState(G, q, inf, np.zeros(s.shape), G * head, B, G)


# ---------------------------------------------------------------- cut-off

def zeta0(t, eps):
    """Smooth increasing clamp: t below -2 eps, constant -3 eps / 2 above -eps.

    The blend on [-2 eps, -eps] is the quintic with matching value, slope and
    curvature at both ends, so the clamp is C^2 with slope in [0, 1].
    """
    t = np.asarray(t, float)
    tau = (t + 2 * eps) / eps
    blend = -2 * eps + eps * (tau - tau ** 3 + 0.5 * tau ** 4)
    return np.where(t < -2 * eps, t, np.where(t >= -eps, -1.5 * eps, blend))


def sonic_threshold(closure, s):
    if closure.incompressible:
        return np.full(np.shape(s), np.inf)
    B, S, _, _ = closure.ext(np.asarray(s, float))
    return sonic_flux(B, S, closure.gamma)


def cutoff_gradient(closure, s, g, eps=None):
    """Q_tilde: equal to g while g <= (1 - 2 eps) Q_hat, never above (1 - eps) Q_hat."""
    eps = closure.eps_cut if eps is None else eps
    g = np.asarray(g, float)
    Qh = sonic_threshold(closure, s)
    t = g / Qh - 1.0
    return np.where(t < -2 * eps, g, (zeta0(t, eps) + 1.0) * Qh)


@dataclass
class Coefficients:
    a11: np.ndarray
    a12: np.ndarray
    a22: np.ndarray
    f: np.ndarray
    Qhat: np.ndarray
    active: np.ndarray


def elliptic_coefficients(closure, s, d1, d2, eps=None, slopes=None):
    """Coefficients of a11 psi_11 + a12 psi_12 + a22 psi_22 = f with the cut-off applied.

    ``d1``, ``d2`` are the physical derivatives of psi.  When the cut-off is
    active the gradient is rescaled to length Q_tilde, which keeps the
    operator uniformly elliptic.  ``slopes`` optionally replaces the
    derivatives (B', S') (or (B', G')) taken from the closure.
    """
    s = np.asarray(s, float)
    d1 = np.asarray(d1, float)
    d2 = np.asarray(d2, float)
    g2 = d1 * d1 + d2 * d2
    g = np.sqrt(g2)
    if closure.incompressible:
        B, G, dB, dG = closure.ext(s)
        if slopes is not None:
            dB, dG = slopes
        one = np.ones(s.shape)
        f = G * G * dB + G * dG * B + dG * g2 / (2 * G)
        return Coefficients(one, np.zeros(s.shape), one, f, np.full(s.shape, np.inf),
                            np.zeros(s.shape, bool))
    gam = closure.gamma
    eps = closure.eps_cut if eps is None else eps
    B, S, dB, dS = closure.ext(s)
    if slopes is not None:
        dB, dS = slopes
    Qh = sonic_flux(B, S, gam)
    t = g / Qh - 1.0
    active = t >= -2 * eps
    if np.any(active):
        Qt = np.where(active, (zeta0(t, eps) + 1.0) * Qh, g)
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(active & (g > 0), Qt / g, 1.0)
        d1 = d1 * scale
        d2 = d2 * scale
        g = Qt
    rho0 = stagnation_density(B, S, gam)
    ts = sonic_ratio(gam)
    kappa = g * g / (2 * rho0 ** 2 * B)
    rho = _solve_ratio(np.atleast_1d(kappa).astype(float), gam).reshape(kappa.shape) * rho0
    c2 = (gam - 1) * S * rho ** (gam - 1)
    q2 = g * g / (rho * rho)
    rc = rho * rho * c2
    rg = rho ** gam * dS / gam
    r3 = rho ** 3
    f = -r3 * q2 * (gam - 1) * rg + r3 * c2 * (rho * dB - rg)
    return Coefficients(rc - d2 * d2, 2 * d1 * d2, rc - d1 * d1, f, Qh, active)


def ellipticity_ratio(coef):
    """Largest-to-smallest eigenvalue ratio of the symmetric coefficient matrix."""
    tr = coef.a11 + coef.a22
    det = coef.a11 * coef.a22 - 0.25 * coef.a12 ** 2
    disc = np.sqrt(np.maximum(0.25 * tr * tr - det, 0.0))
    lam_max = 0.5 * tr + disc
    lam_min = 0.5 * tr - disc
    return lam_max / lam_min


def margin(closure, s, g):
    """1 - g / Q_hat (positive exactly on subsonic states)."""
    return 1.0 - np.asarray(g, float) / sonic_threshold(closure, s)
