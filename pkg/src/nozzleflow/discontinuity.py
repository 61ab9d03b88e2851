"""Mollified families, extraction of the captured sheet psi = m_d, and its classification."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from . import inlet as il
from .errors import BranchError, ConvergenceError, DomainError, ExtractionError, ParameterError
from .fields import reconstruct
from .solver import SolveOptions, physical_gradient, solve_bounded

KINDS = ("vortex-sheet", "entropy-wave", "mixed", "degenerate")


@dataclass
class FamilyResult:
    eps: list
    fields: list
    failures: list = field(default_factory=list)
    profiles: list = field(default_factory=list)

    @property
    def complete(self):
        return not self.failures


def eps_family(geom, profile, m, eps_list=(0.08, 0.04, 0.02, 0.01), opts=None, eps_cut=0.05,
               refine_last=False):
    """One solve per mollification width on a common grid.

    A profile without jumps is solved unchanged for every member.  With
    ``refine_last`` an extra member at the smallest width is solved on the
    grid refined once in each direction.
    """
    opts = opts or SolveOptions()
    out = FamilyResult([], [])
    members = [(e, opts) for e in eps_list]
    if refine_last:
        fine = SolveOptions(**{**opts.__dict__, "nx": 2 * opts.nx - 1, "ny": 2 * opts.ny - 1})
        members.append((min(eps_list), fine))
    for e, o in members:
        prof = il.mollify(profile, e) if profile.jumps else profile
        try:
            clo = il.build_closure(prof, m, eps_cut=eps_cut)
            f, _ = solve_bounded(geom, clo, m, None, o)
        except (ConvergenceError, ParameterError, DomainError, BranchError) as exc:
            out.failures.append((e, str(exc)))
            continue
        out.eps.append(e)
        out.fields.append(f)
        out.profiles.append(prof)
    return out


def sheet_level(profile, m):
    """Stream value m_d carried by the inlet jump."""
    if not profile.jumps:
        raise ParameterError("profile has no jump")
    smap = il.build_closure(profile, m).stream_map
    return float(smap.psi(np.array([profile.x_d]))[0])


@dataclass
class DiscontinuityReport:
    m_d: float
    x1: np.ndarray
    y2: np.ndarray
    x2: np.ndarray
    cell: np.ndarray
    lipschitz_estimate: float
    wall_distance: float
    vertical_distance: float
    distance_bounds: dict
    traces: dict = field(default_factory=dict)
    jumps: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    classification: np.ndarray | None = None
    slope_full: float = float("nan")
    window: float = float("nan")

    @property
    def gamma_polyline(self):
        return np.column_stack([self.x1, self.x2])

    @property
    def kind(self):
        """Majority classification over the columns."""
        if self.classification is None:
            return None
        vals, counts = np.unique(self.classification, return_counts=True)
        return str(vals[np.argmax(counts)])

    def max_slope(self):
        return self.lipschitz_estimate


def _column_crossing(y2, col, level):
    j = int(np.searchsorted(col, level, side="right")) - 1
    if j < 0 or j >= col.size - 1:
        raise ExtractionError("no crossing")
    lo, hi = max(j - 2, 0), min(j + 4, col.size)
    spl = PchipInterpolator(y2[lo:hi], col[lo:hi])
    if col[j + 1] == level:
        return y2[j + 1], j
    r = brentq(lambda t: spl(t) - level, y2[j], y2[j + 1], xtol=1e-15, rtol=1e-15)
    return r, j


def extract_gamma(field_, m_d, window=None):
    """Per-column position of psi = m_d with slope and wall-distance diagnostics.

    Slope and distances are measured on |x1| <= window (default: the
    geometry's L), away from the truncation boundaries where the imposed
    linear data bend the sheet.
    """
    grid = field_.grid
    geom = grid.geom
    x1 = grid.y1
    ys, cells = np.empty(x1.size), np.empty(x1.size, int)
    for i in range(x1.size):
        try:
            ys[i], cells[i] = _column_crossing(grid.y2, field_.psi[i], m_d)
        except ExtractionError:
            raise ExtractionError(f"psi = {m_d:.6g} has no crossing in column {i} (x1 = {x1[i]:.6g})")
    lower, width = geom.w1(x1), geom.width(x1)
    x2 = lower + ys * width
    window = geom.L if window is None else window
    inside = np.abs(x1) <= window + 1e-12
    slopes = np.abs(np.diff(x2) / np.diff(x1))
    pair_inside = inside[:-1] & inside[1:]
    # Euclidean distance to the walls, sampled densely
    xs = np.linspace(x1[0], x1[-1], 20 * x1.size)
    bot = np.column_stack([xs, geom.w1(xs)])
    top = np.column_stack([xs, geom.w2(xs)])
    pts = np.column_stack([x1, x2])[inside]
    d_bot = np.min(np.hypot(pts[:, :1] - bot[None, :, 0], pts[:, 1:] - bot[None, :, 1]), axis=1)
    d_top = np.min(np.hypot(pts[:, :1] - top[None, :, 0], pts[:, 1:] - top[None, :, 1]), axis=1)
    vert = float(min((x2 - lower)[inside].min(), (geom.w2(x1) - x2)[inside].min()))
    bounds = _distance_bounds(field_, m_d, ys, inside)
    rep = DiscontinuityReport(m_d, x1.copy(), ys, x2, cells, float(slopes[pair_inside].max()),
                              float(min(d_bot.min(), d_top.min())), vert, bounds)
    rep.slope_full = float(slopes.max())
    rep.window = float(window)
    return rep


def _distance_bounds(field_, m_d, ys, inside=None):
    """Lower bounds for the sheet-to-wall distance from the flux carried between them.

    Between the sheet and the upper wall psi rises by m - m_d, so the
    vertical gap is at least (m - m_d)/max psi_x2 and the Euclidean gap at
    least (m - m_d)/max |grad psi|; likewise m_d for the lower wall.
    """
    grid = field_.grid
    d1, d2 = physical_gradient(field_.psi, grid)
    g = np.hypot(d1, d2)
    above = grid.Y2 >= ys[:, None]
    below = ~above
    if inside is not None:
        above = above & inside[:, None]
        below = below & inside[:, None]
    m = field_.closure.m
    flux_top, flux_bot = m - m_d, m_d
    out = {
        "vertical_top": flux_top / float(d2[above].max()),
        "vertical_bottom": flux_bot / float(d2[below].max()),
        "euclid_top": flux_top / float(g[above].max()),
        "euclid_bottom": flux_bot / float(g[below].max()),
    }
    out["vertical"] = min(out["vertical_top"], out["vertical_bottom"])
    out["euclid"] = min(out["euclid_top"], out["euclid_bottom"])
    return out


def _extrapolate(y2, values, idx, target):
    """Quadratic and linear extrapolation of values[idx] to ``target``."""
    yy, vv = y2[idx], values[idx]
    quad_c = np.polyfit(yy, vv, 2)
    lin_c = np.polyfit(yy[:2], vv[:2], 1)
    return np.polyval(quad_c, target), np.polyval(lin_c, target)


TRACE_NAMES = ("rho", "u1", "u2", "p", "B", "S", "ut")


def classify(field_, report, window=None, rel_tol=1e-3):
    """One-sided traces, jump brackets and per-column classification.

    Traces come from quadratic extrapolation in the flattened vertical
    coordinate using the nodes two to four cells beyond the band of cells
    around the crossing (the crossing cell dilated by one).
    """
    prim = reconstruct(field_)
    grid = field_.grid
    ny = grid.shape[1]
    x1 = grid.y1
    cols = np.arange(x1.size) if window is None else np.nonzero(np.abs(x1) <= window)[0]
    slope = np.gradient(report.x2, x1)
    tx, ty = 1 / np.hypot(1, slope), slope / np.hypot(1, slope)
    quantities = {"rho": prim.rho, "u1": prim.u1, "u2": prim.u2, "p": prim.p, "B": prim.B, "S": prim.S}
    traces = {n: np.full((x1.size, 2), np.nan) for n in TRACE_NAMES}
    noise = {n: np.zeros(x1.size) for n in TRACE_NAMES}
    mn = np.zeros(x1.size)
    for i in cols:
        j = report.cell[i]
        b_lo, b_hi = j - 1, j + 2
        below = np.array([b_lo - 2, b_lo - 3, b_lo - 4])
        above = np.array([b_hi + 2, b_hi + 3, b_hi + 4])
        if below.min() < 0 or above.max() > ny - 1:
            raise ExtractionError(f"not enough clean cells beside the sheet in column {i}")
        col_q = {n: v[i] for n, v in quantities.items()}
        col_q["ut"] = prim.u1[i] * tx[i] + prim.u2[i] * ty[i]
        for n in TRACE_NAMES:
            for side, idx in ((0, below), (1, above)):
                q, l = _extrapolate(grid.y2, col_q[n], idx, report.y2[i])
                traces[n][i, side] = q
                noise[n][i] = max(noise[n][i], abs(q - l) / 3.0)
        # normal velocity of the one-sided traces relative to the speed
        nx_, ny_ = -ty[i], tx[i]
        mn[i] = max(abs(traces["u1"][i, k] * nx_ + traces["u2"][i, k] * ny_)
                    / np.hypot(traces["u1"][i, k], traces["u2"][i, k]) for k in (0, 1))
    jumps = {n: traces[n][:, 1] - traces[n][:, 0] for n in TRACE_NAMES}
    scale = {n: float(np.nanmean(np.abs(traces[n][cols]))) for n in TRACE_NAMES}
    tol = {n: np.maximum(5 * noise[n], rel_tol * scale[n]) for n in TRACE_NAMES}
    kinds = np.full(x1.size, "", dtype=object)
    for i in cols:
        jb = abs(jumps["B"][i]) > tol["B"][i]
        js = abs(jumps["S"][i]) > tol["S"][i]
        kinds[i] = ("mixed" if jb and js else "vortex-sheet" if jb else
                    "entropy-wave" if js else "degenerate")
    report.traces = {n: traces[n][cols] for n in TRACE_NAMES}
    report.traces["x1"] = x1[cols]
    report.traces["normal_mass_flux"] = mn[cols]
    report.jumps = {n: jumps[n][cols] for n in TRACE_NAMES}
    report.tolerances = {n: tol[n][cols] for n in TRACE_NAMES}
    report.classification = kinds[cols].astype(str)
    return report


def member_level(field_):
    """Stream value through the (source) jump location for a solved member."""
    clo = field_.closure
    if clo.m_d is not None:
        return clo.m_d
    prof = clo.profile
    xd = prof.params.get("source_jumps", ())
    if not xd:
        raise ParameterError("member carries no sheet")
    return float(clo.stream_map.psi(np.array([xd[0]]))[0])


def inlet_jumps(profile, m):
    """Jumps of the transported pair (B, S) at the inlet sheet."""
    clo = il.build_closure(profile, m)
    dB, dS = clo.jump()
    return float(dB), float(dS)


def family_report(family, m_d=None, window=None):
    """Extract and classify every family member; returns a list of reports."""
    reports = []
    for f in family.fields:
        level = m_d if m_d is not None else member_level(f)
        rep = extract_gamma(f, level, window)
        reports.append(classify(f, rep, window))
    return reports
