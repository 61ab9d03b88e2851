"""Continuation in the mass flux down to the critical (choking) value."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import inlet as il
from .errors import ConvergenceError, ParameterError
from .solver import SolveOptions, field_margin, solve_bounded


def margin(field_):
    """min over nodes of 1 - |grad psi| / Q_hat(psi); positive iff strictly subsonic."""
    return field_margin(field_.psi, field_.grid, field_.closure)


def sonic_gap(field_):
    """max over nodes of q^2 - c^2; negative on a strictly subsonic field."""
    from .fields import reconstruct
    prim = reconstruct(field_)
    q2 = prim.q ** 2
    return float(np.max(q2 - q2 / prim.M ** 2))


@dataclass
class SweepOptions:
    m_start: float | None = None
    start_mach: float = 0.3
    shrink: float = 0.9
    bracket_tol: float = 1e-3
    eps: float = 0.05
    base_levels: int = 7
    max_level: int = 48
    max_steps: int = 200
    nx: int = 161
    ny: int = 33
    L: float | None = None
    solve_tol: float = 1e-10


@dataclass
class Trial:
    m: float
    outcome: str          # "accepted", "cutoff", "supersonic", "breakdown", "no-inlet-state"
    margin: float
    level: int
    iterations: int
    cold_retry: bool = False
    sonic_gap: float = float("nan")   # max over nodes of q^2 - c^2 (accepted trials only)


@dataclass
class ContinuationResult:
    m_c_bracket: tuple
    margin_curve: list
    terminal_kind: str
    trials: list = field(default_factory=list)
    level_brackets: dict = field(default_factory=dict)
    final_level: int = 0
    eps_final: float = 0.0
    m_hi_margin: float = float("nan")

    @property
    def width(self):
        lo, hi = self.m_c_bracket
        return (hi - lo) / hi

    def margin_table(self):
        return np.array(sorted(self.margin_curve))


def start_flux(profile, mach):
    """Mass flux at which the slowest-sounding inlet point has the given Mach number.

    Inlet Mach numbers scale like m^(-(g-1)/2) at fixed (u, S) shape.
    """
    g = profile.gamma
    mh = il.m_hat(profile)
    x = profile.sample_points(2001)
    m1 = 2.0 * mh
    M1 = float(np.max(il.inlet_mach(profile, m1, x)))
    return m1 * (M1 / mach) ** (2 / (g - 1))


class _Runner:
    def __init__(self, geom, profile, opts):
        self.geom, self.profile, self.opts = geom, profile, opts
        self.level = 0
        self.warm = None
        self.trials = []
        self.curve = []
        self.level_hi = {}

    def eps_of(self, level):
        return self.opts.eps * 2.0 ** (-level)

    def _solve(self, m, level, psi0):
        clo = il.build_closure(self.profile, m, eps_cut=self.eps_of(level))
        so = SolveOptions(nx=self.opts.nx, ny=self.opts.ny, tol=self.opts.solve_tol)
        return solve_bounded(self.geom, clo, m, self.opts.L, so, psi0=psi0)

    def _warm_guess(self, m):
        if self.warm is None:
            return None
        m0, psi = self.warm
        return psi * (m / m0)

    def trial(self, m):
        """Classify one mass flux; deepens the cut-off level while the outcome is inconclusive."""
        if not m > il.m_hat(self.profile):
            t = Trial(m, "no-inlet-state", float("-inf"), self.level, 0)
            self.trials.append(t)
            return t
        retried = False
        while True:
            try:
                f, rep = self._solve(m, self.level, self._warm_guess(m))
            except ConvergenceError:
                try:
                    f, rep = self._solve(m, self.level, None)
                    retried = True
                except ConvergenceError as exc:
                    rep = exc.report
                    t = Trial(m, "breakdown", float("nan"), self.level,
                              rep.iterations if rep else 0, True)
                    self.trials.append(t)
                    return t
            except ParameterError:
                t = Trial(m, "no-inlet-state", float("-inf"), self.level, 0)
                self.trials.append(t)
                return t
            mg = rep.margin
            if mg >= 2 * self.eps_of(self.level) and rep.activation_count == 0:
                t = Trial(m, "accepted", mg, self.level, rep.iterations, retried,
                          sonic_gap(f))
                self.trials.append(t)
                self.curve.append((m, mg))
                self.warm = (m, f.psi)
                self.level_hi[self.level] = min(self.level_hi.get(self.level, np.inf), m)
                return t
            if mg <= 0:
                t = Trial(m, "supersonic", mg, self.level, rep.iterations, retried)
                self.trials.append(t)
                return t
            # cut-off active with a positive margin: the threshold is too coarse here
            if self.level >= self.opts.max_level:
                t = Trial(m, "cutoff", mg, self.level, rep.iterations, retried)
                self.trials.append(t)
                return t
            need = int(np.ceil(np.log2(2 * self.opts.eps / mg))) + 1
            self.level = min(max(self.level + 1, need), self.opts.max_level)


def bers_sweep(geom, profile, opts=None):
    """Bracket the critical mass flux by geometric decrease then bisection."""
    opts = opts or SweepOptions()
    run = _Runner(geom, profile, opts)
    m = opts.m_start if opts.m_start is not None else start_flux(profile, opts.start_mach)
    first = run.trial(m)
    if first.outcome != "accepted":
        raise ParameterError(f"starting mass flux {m:.6g} is not admissible ({first.outcome}); "
                             "raise m_start or lower start_mach")
    hi, lo = m, None
    for _ in range(opts.max_steps):
        cand = hi * opts.shrink
        t = run.trial(cand)
        if t.outcome == "accepted":
            hi = cand
        else:
            lo = cand
            lo_trial = t
            break
    else:
        raise ConvergenceError("no failure found while decreasing m", None)
    while (hi - lo) / hi >= opts.bracket_tol:
        mid = 0.5 * (lo + hi)
        t = run.trial(mid)
        if t.outcome == "accepted":
            hi = mid
        else:
            lo, lo_trial = mid, t
    hi_margin = dict(run.curve)[hi]
    if lo_trial.outcome == "breakdown" and hi_margin >= 1e-2:
        kind = "solver-breakdown"
    else:
        kind = "sonic-approach"
    return ContinuationResult((lo, hi), sorted(run.curve), kind, run.trials, dict(run.level_hi),
                              run.level, run.eps_of(run.level), hi_margin)


def margin_monotone(result, slack=1e-3):
    """Margins never increase as m decreases (up to ``slack``)."""
    tab = result.margin_table()
    return bool(np.all(np.diff(tab[:, 1]) >= -slack))
