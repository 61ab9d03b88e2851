"""Nozzle walls, far-field limits and the boundary-flattening map.

The physical nozzle is {w1(x1) < x2 < w2(x1)}.  All PDE work happens on the
strip R x [0, 1] through y = (x1, (x2 - w1) / (w2 - w1)).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, ValidationError

Func = Callable[[np.ndarray], np.ndarray]


def _const(value):
    return lambda x: np.full(np.shape(x), float(value))


@dataclass(frozen=True)
class NozzleGeometry:
    """Lower/upper walls with first and second derivatives.

    ``a`` and ``b`` are the downstream limits of the walls; upstream they tend
    to 0 and 1.  ``L`` is the truncation half-length used by the solver (the
    computational window is |x1| < 2L).
    """

    w1: Func
    w2: Func
    dw1: Func
    dw2: Func
    ddw1: Func
    ddw2: Func
    a: float = 0.0
    b: float = 1.0
    L: float = 5.0
    holder_bound: float = 10.0
    tail_tol: float = 1e-8
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def width(self, x1):
        return self.w2(x1) - self.w1(x1)

    def with_length(self, L):
        return replace(self, L=float(L))

    def max_inclination(self, x1=None):
        """theta_B: the largest wall angle |arctan w_j'| over the window."""
        if x1 is None:
            x1 = np.linspace(-2 * self.L, 2 * self.L, 4001)
        slopes = np.maximum(np.abs(self.dw1(x1)), np.abs(self.dw2(x1)))
        return float(np.arctan(slopes.max()))

    def validate(self, n=4001):
        """Return a list of (condition, ok, detail) tuples."""
        x = np.linspace(-2 * self.L, 2 * self.L, n)
        checks = []
        h = self.width(x)
        checks.append(("wall-order", bool(h.min() > 0), f"min width {h.min():.6g}"))
        up = x <= -self.L
        down = x >= self.L
        tail_up = max(np.abs(self.w1(x[up])).max(), np.abs(self.w2(x[up]) - 1).max())
        tail_down = max(np.abs(self.w1(x[down]) - self.a).max(),
                        np.abs(self.w2(x[down]) - self.b).max())
        slope_tail = max(np.abs(self.dw1(x[up | down])).max(),
                         np.abs(self.dw2(x[up | down])).max())
        tol = self.tail_tol * max(1.0, abs(self.b - self.a))
        checks.append(("tail-flatness", bool(max(tail_up, tail_down, slope_tail) <= tol),
                       f"tail deviation {max(tail_up, tail_down, slope_tail):.3g}"))
        bound = max(np.abs(self.dw1(x)).max(), np.abs(self.dw2(x)).max(),
                    np.abs(self.ddw1(x)).max(), np.abs(self.ddw2(x)).max())
        checks.append(("wall-regularity", bool(bound <= self.holder_bound),
                       f"max |w'|,|w''| = {bound:.3g}"))
        return checks

    def require_valid(self):
        for name, ok, detail in self.validate():
            if not ok and name != "tail-flatness":
                raise ValidationError(f"geometry check {name} failed: {detail}", name)


def straight(width=1.0, L=5.0):
    """Parallel walls at 0 and ``width``."""
    zero = _const(0.0)
    return NozzleGeometry(zero, _const(width), zero, zero, zero, zero,
                          a=0.0, b=float(width), L=L, kind="straight",
                          params={"width": width})


def tanh_nozzle(b=0.75, a=0.0, scale=1.0, L=5.0):
    """Walls blending from (0, 1) upstream to (a, b) downstream.

    w1 = a s(x), w2 = 1 + (b - 1) s(x) with s = (1 + tanh(x / scale)) / 2.
    """
    def s(x):
        return 0.5 * (1.0 + np.tanh(np.asarray(x, float) / scale))

    def ds(x):
        return 0.5 / scale / np.cosh(np.asarray(x, float) / scale) ** 2

    def dds(x):
        t = np.tanh(np.asarray(x, float) / scale)
        return -t / scale ** 2 / np.cosh(np.asarray(x, float) / scale) ** 2

    return NozzleGeometry(
        w1=lambda x: a * s(x), w2=lambda x: 1.0 + (b - 1.0) * s(x),
        dw1=lambda x: a * ds(x), dw2=lambda x: (b - 1.0) * ds(x),
        ddw1=lambda x: a * dds(x), ddw2=lambda x: (b - 1.0) * dds(x),
        a=float(a), b=float(b), L=L, kind="tanh",
        params={"a": a, "b": b, "scale": scale})


def from_table(x, lower, upper, L=5.0):
    """Walls from samples, interpolated with monotone cubics."""
    x = np.asarray(x, float)
    p1 = PchipInterpolator(x, np.asarray(lower, float), extrapolate=True)
    p2 = PchipInterpolator(x, np.asarray(upper, float), extrapolate=True)
    lo, hi = x[0], x[-1]

    def clamp(f):
        return lambda t: f(np.clip(t, lo, hi))

    def clamp_d(f):
        return lambda t: np.where((np.asarray(t) < lo) | (np.asarray(t) > hi), 0.0,
                                  f(np.clip(t, lo, hi)))

    return NozzleGeometry(
        clamp(p1), clamp(p2), clamp_d(p1.derivative()), clamp_d(p2.derivative()),
        clamp_d(p1.derivative(2)), clamp_d(p2.derivative(2)),
        a=float(lower[-1]), b=float(upper[-1]), L=L, kind="table")


def _split(x):
    x = np.asarray(x, float)
    return x[..., 0], x[..., 1]


def flatten(geom, x, tol=1e-12):
    """Map physical points (..., 2) to the strip coordinates (..., 2)."""
    x1, x2 = _split(x)
    lo, hi = geom.w1(x1), geom.w2(x1)
    h = hi - lo
    if np.any(h <= 0):
        raise DomainError("degenerate nozzle width")
    if np.any(x2 < lo - tol * h) or np.any(x2 > hi + tol * h):
        raise DomainError("point outside the nozzle")
    return np.stack([x1, (x2 - lo) / h], axis=-1)


def unflatten(geom, y):
    y1, y2 = _split(y)
    lo = geom.w1(y1)
    return np.stack([y1, lo + y2 * (geom.w2(y1) - lo)], axis=-1)


def metric_terms(geom, y1, y2):
    """Chain-rule factors of the flattening map at strip points.

    Returns (H, eta, dH, deta) where d/dx1 = d/dy1 + eta d/dy2,
    d/dx2 = (1/H) d/dy2 and deta is the x1-derivative of eta at fixed x2.
    """
    w1p, w2p = geom.dw1(y1), geom.dw2(y1)
    H = geom.w2(y1) - geom.w1(y1)
    dH = w2p - w1p
    ddH = geom.ddw2(y1) - geom.ddw1(y1)
    slope = w1p + y2 * dH
    eta = -slope / H
    deta = -(geom.ddw1(y1) + y2 * ddH) / H + 2.0 * slope * dH / H ** 2
    return H, eta, dH, deta


def jacobian_flatten(geom, x):
    """d(y1, y2)/d(x1, x2) at physical points; shape (..., 2, 2)."""
    y = flatten(geom, x)
    H, eta, _, _ = metric_terms(geom, y[..., 0], y[..., 1])
    J = np.zeros(np.shape(H) + (2, 2))
    J[..., 0, 0] = 1.0
    J[..., 1, 0] = eta
    J[..., 1, 1] = 1.0 / H
    return J


@dataclass(frozen=True)
class Grid:
    """Tensor grid on [-2L, 2L] x [0, 1]; arrays are indexed [i (x1), j (y2)]."""

    geom: NozzleGeometry
    y1: np.ndarray
    y2: np.ndarray

    @property
    def shape(self):
        return (self.y1.size, self.y2.size)

    @property
    def h1(self):
        return float(self.y1[1] - self.y1[0])

    @property
    def h2(self):
        return float(self.y2[1] - self.y2[0])

    @property
    def Y1(self):
        return np.broadcast_to(self.y1[:, None], self.shape)

    @property
    def Y2(self):
        return np.broadcast_to(self.y2[None, :], self.shape)

    @property
    def X2(self):
        lo = self.geom.w1(self.y1)[:, None]
        return lo + self.y2[None, :] * (self.geom.w2(self.y1)[:, None] - lo)

    def metrics(self):
        return metric_terms(self.geom, self.Y1, self.Y2)


def truncate(geom, L=None, nx=201, ny=41):
    """Boundary-fitted grid on the window |x1| <= 2L."""
    L = geom.L if L is None else float(L)
    if L <= 0:
        raise DomainError("truncation length must be positive")
    g = geom.with_length(L)
    return Grid(g, np.linspace(-2 * L, 2 * L, int(nx)), np.linspace(0.0, 1.0, int(ny)))
