"""Finite-difference solver for the stream-function equation.

The quasilinear equation a11 psi_11 + a12 psi_12 + a22 psi_22 = f is written on
the flattened strip through the chain rule and discretized with second-order
central differences (nine-point stencil).  Each Picard step freezes the
coefficients at the current iterate and solves the resulting sparse linear
system directly.  When Picard contracts slowly (steep transported data make
the lagged source term stiff) the iteration switches to Newton steps with a
finite-difference Jacobian and backtracking.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from . import closure as cl
from .errors import ConvergenceError, ParameterError
from .geometry import truncate


@dataclass
class SolveOptions:
    nx: int = 201
    ny: int = 41
    tol: float = 1e-10
    max_iter: int = 400
    plateau: int = 50
    damping: float = 1.0
    min_damping: float = 0.05
    eps_cut: float | None = None
    check_m_hat: bool = True
    method: str = "auto"          # "picard", "newton" or "auto" (Picard, then Newton when slow)
    newton_switch: float = 0.5    # Picard contraction ratio that triggers the switch
    newton_below: float = 1e-2    # ... but only once the scaled residual is this small
    newton_min_step: float = 1.0 / 64  # line-search floor; smaller steps fall back to Picard
    source: str = "auto"          # "chord", "nodal", or "auto" (chord only for mollified sheets)


@dataclass
class SolveReport:
    iterations: int = 0
    residual_history: list = field(default_factory=list)
    damping_history: list = field(default_factory=list)
    margin: float = float("nan")
    activation_count: int = 0
    max_ellipticity_ratio: float = float("nan")
    converged: bool = False
    message: str = ""
    newton_steps: int = 0


@dataclass
class FlowField:
    grid: object
    psi: np.ndarray
    closure: object
    report: SolveReport | None = None
    extension: dict | None = None

    @property
    def m(self):
        return self.closure.m

    @property
    def geom(self):
        return self.grid.geom


def diff1(values, h, axis):
    """Central differences inside, four-point one-sided stencils at the ends.

    The end stencils share the leading error h^2 f'''/6 of the central
    ones, so the derivative error varies smoothly with position and a further
    difference of any derived quantity stays second order next to the edge.
    """
    v = np.moveaxis(np.asarray(values, float), axis, 0)
    if v.shape[0] < 4:
        return np.moveaxis(np.gradient(v, h, axis=0, edge_order=1), 0, axis)
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2 * h)
    out[0] = (-4 * v[0] + 7 * v[1] - 4 * v[2] + v[3]) / (2 * h)
    out[-1] = (4 * v[-1] - 7 * v[-2] + 4 * v[-3] - v[-4]) / (2 * h)
    return np.moveaxis(out, 0, axis)


def strip_derivatives(psi, grid):
    """First derivatives in strip coordinates."""
    return diff1(psi, grid.h1, 0), diff1(psi, grid.h2, 1)


def physical_gradient(psi, grid):
    H, eta, _, _ = grid.metrics()
    s1, s2 = strip_derivatives(psi, grid)
    return s1 + eta * s2, s2 / H


def boundary_values(grid, m):
    psi = np.zeros(grid.shape)
    psi[:, -1] = m
    psi[0, :] = m * grid.y2
    psi[-1, :] = m * grid.y2
    return psi


def initial_guess(grid, m):
    return np.broadcast_to(m * grid.y2[None, :], grid.shape).copy()


def chord_slopes(psi, closure):
    """(B', S') at interior nodes as chord slopes between the vertical neighbours.

    (F(psi[j+1]) - F(psi[j-1])) / (psi[j+1] - psi[j-1]) differs from F'(psi[j])
    by O(h^2) for smooth data, but stays bounded and varies smoothly with the
    nodal values when a transported layer is thinner than a cell.
    """
    up, down = psi[1:-1, 2:], psi[1:-1, :-2]
    Bu, Su, _, _ = closure.ext(up)
    Bd, Sd, _, _ = closure.ext(down)
    B, S, dB, dS = closure.ext(psi[1:-1, 1:-1])
    dpsi = up - down
    ok = np.abs(dpsi) > 1e-12 * max(abs(closure.m), 1e-300)
    safe = np.where(ok, dpsi, 1.0)
    if not closure.incompressible:
        # S is differenced through log S: power-law entropies (large gamma)
        # span many decades across one cell
        dS_c = S * np.log(Su / Sd) / safe
        return (np.where(ok, (Bu - Bd) / safe, dB), np.where(ok, dS_c, dS))
    # Incompressible: the second slot holds G.  Differencing G B as one
    # product and G through 1/G keeps the reference pressure out of the
    # source and makes uniform-flux data an exact discrete solution.
    G = S
    dG_c = G * G * (Su - Sd) / (Su * Sd * safe)
    dGB = (Su * Bu - Sd * Bd) / safe
    return (np.where(ok, (dGB - dG_c * B) / G, dB), np.where(ok, dG_c, dS))


def resolve_source(source, closure):
    """Pick the source evaluation; "auto" uses chords only across a mollified sheet."""
    if source != "auto":
        return source
    prof = getattr(closure, "profile", None)
    sheet = prof is not None and bool(getattr(prof, "params", {}).get("source_jumps"))
    return "chord" if sheet else "nodal"


def _coefficients(grid, psi, closure, eps, source):
    d1, d2 = physical_gradient(psi, grid)
    inner = (slice(1, -1), slice(1, -1))
    slopes = chord_slopes(psi, closure) if resolve_source(source, closure) == "chord" else None
    return cl.elliptic_coefficients(closure, psi[inner], d1[inner], d2[inner], eps, slopes)


def _assemble(grid, psi, closure, eps, source="auto"):
    """Frozen-coefficient matrix (all nodes) and right-hand side.

    Boundary rows are identities.  Returns (A, b, coef) with every interior
    row divided by its diagonal magnitude.
    """
    nx, ny = grid.shape
    h1, h2 = grid.h1, grid.h2
    H, eta, dH, deta = grid.metrics()
    inner = (slice(1, -1), slice(1, -1))
    coef = _coefficients(grid, psi, closure, eps, source)
    Hi, ei, dHi, dei = H[inner], eta[inner], dH[inner], deta[inner]
    A11 = coef.a11
    A12 = 2 * ei * coef.a11 + coef.a12 / Hi
    A22 = ei * ei * coef.a11 + coef.a12 * ei / Hi + coef.a22 / Hi ** 2
    A2 = coef.a11 * dei - coef.a12 * dHi / Hi ** 2

    c_x = A11 / h1 ** 2
    c_y = A22 / h2 ** 2
    c_xy = A12 / (4 * h1 * h2)
    c_d = A2 / (2 * h2)
    stencil = {
        (0, 0): -2 * c_x - 2 * c_y,
        (1, 0): c_x, (-1, 0): c_x,
        (0, 1): c_y + c_d, (0, -1): c_y - c_d,
        (1, 1): c_xy, (-1, -1): c_xy, (1, -1): -c_xy, (-1, 1): -c_xy,
    }
    idx = np.arange(nx * ny).reshape(nx, ny)
    I, J = np.meshgrid(np.arange(1, nx - 1), np.arange(1, ny - 1), indexing="ij")
    rows, cols, vals = [], [], []
    for (di, dj), w in stencil.items():
        rows.append(idx[I, J].ravel())
        cols.append(idx[I + di, J + dj].ravel())
        vals.append(w.ravel())
    boundary = np.ones((nx, ny), bool)
    boundary[inner] = False
    bidx = idx[boundary]
    rows.append(bidx)
    cols.append(bidx)
    vals.append(np.ones(bidx.size))
    # rows are equilibrated by the diagonal magnitude so that boundary
    # identity rows and interior rows share one scale
    scale = np.ones((nx, ny))
    scale[inner] = np.abs(stencil[(0, 0)])
    rows = np.concatenate(rows)
    vals = np.concatenate(vals) / scale.ravel()[rows]
    A = sp.csc_matrix((vals, (rows, np.concatenate(cols))), shape=(nx * ny, nx * ny))
    b = np.zeros((nx, ny))
    b[inner] = coef.f / scale[inner]
    b[boundary] = psi[boundary]
    return A, b.ravel(), coef


def _stencil_residual(grid, psi, closure, eps, source="auto"):
    """Interior residual of the frozen-at-psi operator applied to psi, rows scaled as in _assemble."""
    h1, h2 = grid.h1, grid.h2
    H, eta, dH, deta = grid.metrics()
    inner = (slice(1, -1), slice(1, -1))
    coef = _coefficients(grid, psi, closure, eps, source)
    Hi, ei, dHi, dei = H[inner], eta[inner], dH[inner], deta[inner]
    A11 = coef.a11
    A12 = 2 * ei * coef.a11 + coef.a12 / Hi
    A22 = ei * ei * coef.a11 + coef.a12 * ei / Hi + coef.a22 / Hi ** 2
    A2 = coef.a11 * dei - coef.a12 * dHi / Hi ** 2
    p = psi
    c = p[1:-1, 1:-1]
    pxx = (p[2:, 1:-1] - 2 * c + p[:-2, 1:-1]) / h1 ** 2
    pyy = (p[1:-1, 2:] - 2 * c + p[1:-1, :-2]) / h2 ** 2
    pxy = (p[2:, 2:] - p[2:, :-2] - p[:-2, 2:] + p[:-2, :-2]) / (4 * h1 * h2)
    py = (p[1:-1, 2:] - p[1:-1, :-2]) / (2 * h2)
    diag = np.abs(2 * A11 / h1 ** 2 + 2 * A22 / h2 ** 2)
    return (A11 * pxx + A12 * pxy + A22 * pyy + A2 * py - coef.f) / diag


def _newton_matrix(grid, psi, closure, eps, F0, source="auto"):
    """Finite-difference Jacobian of the interior residual.

    The residual at a node depends on psi only through its 3x3 neighbourhood,
    so nine perturbations (one per residue class of the indices mod 3) give
    every column.
    """
    nx, ny = grid.shape
    idx = np.arange(nx * ny).reshape(nx, ny)
    I, J = np.meshgrid(np.arange(1, nx - 1), np.arange(1, ny - 1), indexing="ij")
    delta = 1e-7 * max(float(np.abs(psi).max()), 1e-300)
    rows, cols, vals = [], [], []
    interior = np.zeros((nx, ny), bool)
    interior[1:-1, 1:-1] = True
    for ci in range(3):
        for cj in range(3):
            mask = np.zeros((nx, ny), bool)
            mask[ci::3, cj::3] = True
            mask &= interior
            pert = psi.copy()
            pert[mask] += delta
            dF = (_stencil_residual(grid, pert, closure, eps, source) - F0) / delta
            # the single perturbed node in each row's neighbourhood
            ti = I + ((ci - I + 1) % 3) - 1
            tj = J + ((cj - J + 1) % 3) - 1
            ok = interior[ti, tj]
            rows.append(idx[I, J][ok])
            cols.append(idx[ti, tj][ok])
            vals.append(dF[ok])
    bidx = idx[~interior]
    rows.append(bidx)
    cols.append(bidx)
    vals.append(np.ones(bidx.size))
    return sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(nx * ny, nx * ny))


def _newton_step(grid, psi, closure, eps, res_now, m, source="auto", max_halvings=12):
    F0 = _stencil_residual(grid, psi, closure, eps, source)
    Jm = _newton_matrix(grid, psi, closure, eps, F0, source)
    rhs = np.zeros(grid.shape)
    rhs[1:-1, 1:-1] = -F0
    step = spsolve(Jm, rhs.ravel()).reshape(grid.shape)
    lam = 1.0
    for _ in range(max_halvings):
        trial = psi + lam * step
        Ft = _stencil_residual(grid, trial, closure, eps, source)
        r = float(np.abs(Ft).max()) / m
        if np.isfinite(r) and r < res_now:
            return trial, lam
        lam *= 0.5
    return psi, 0.0


def residual(field_or_psi, grid=None, closure=None, eps=None, source="auto"):
    """Scaled nonlinear residual at interior nodes (units of psi / m)."""
    if grid is None:
        f = field_or_psi
        psi, grid, closure = f.psi, f.grid, f.closure
    else:
        psi = field_or_psi
    A, b, _ = _assemble(grid, psi, closure, eps, source)
    r = A @ psi.ravel() - b
    r = r.reshape(grid.shape)
    r[0, :] = r[-1, :] = 0.0
    r[:, 0] = r[:, -1] = 0.0
    return r / closure.m


def field_margin(psi, grid, closure):
    """min over nodes of 1 - |grad psi| / Q_hat(psi)."""
    d1, d2 = physical_gradient(psi, grid)
    return float(np.min(cl.margin(closure, psi, np.hypot(d1, d2))))


def solve_bounded(geom, closure, m=None, L=None, opts=None, psi0=None, grid=None):
    """Solve the truncated problem; returns (FlowField, SolveReport)."""
    opts = opts or SolveOptions()
    m = closure.m if m is None else m
    if abs(m - closure.m) > 1e-12 * m:
        raise ParameterError("closure was built for a different mass flux")
    if opts.check_m_hat and not closure.incompressible and getattr(closure, "profile", None) is not None:
        from .inlet import m_hat
        if not m > m_hat(closure.profile):
            raise ParameterError("mass flux does not exceed m_hat")
    if grid is None:
        grid = truncate(geom, L, opts.nx, opts.ny)
    eps = closure.eps_cut if opts.eps_cut is None else opts.eps_cut
    bc = boundary_values(grid, m)
    psi = initial_guess(grid, m) if psi0 is None else np.array(psi0, float)
    inner = (slice(1, -1), slice(1, -1))
    psi[~_interior_mask(grid.shape)] = bc[~_interior_mask(grid.shape)]
    report = SolveReport()
    omega = opts.damping
    best, best_it, prev = np.inf, 0, np.inf
    in_newton = newton_off = False
    for it in range(opts.max_iter + 1):
        A, b, coef = _assemble(grid, psi, closure, eps, opts.source)
        r = np.abs(A @ psi.ravel() - b)
        res = float(r.max()) / m
        report.residual_history.append(res)
        report.iterations = it
        if not np.isfinite(res):
            report.message = "non-finite residual"
            raise ConvergenceError("Picard iteration produced non-finite values", report)
        if res < opts.tol:
            report.converged = True
            report.activation_count = int(coef.active.sum())
            report.max_ellipticity_ratio = float(cl.ellipticity_ratio(coef).max())
            break
        if res < best * (1 - 1e-3):
            best, best_it = res, it
        elif it - best_it >= opts.plateau:
            report.message = f"residual plateau at {best:.3e}"
            raise ConvergenceError(report.message, report)
        if it == opts.max_iter:
            report.message = f"no convergence in {opts.max_iter} iterations (residual {res:.3e})"
            raise ConvergenceError(report.message, report)
        slow = it >= 2 and res > opts.newton_switch * prev and res < opts.newton_below
        if opts.method == "auto" and slow and not newton_off:
            in_newton = True
        if opts.method == "newton" or in_newton:
            psi, lam = _newton_step(grid, psi, closure, eps, res, m, opts.source)
            report.newton_steps += 1
            report.damping_history.append(lam)
            prev = res
            if lam < opts.newton_min_step and opts.method == "auto":
                # poor Newton direction: finish with Picard
                in_newton, newton_off = False, True
            continue
        if res > prev:
            omega = max(0.5 * omega, opts.min_damping)
        else:
            omega = min(1.0, 1.25 * omega)
        prev = res
        report.damping_history.append(omega)
        new = spsolve(A, b).reshape(grid.shape)
        psi = psi + omega * (new - psi)
    report.margin = field_margin(psi, grid, closure)
    return FlowField(grid, psi, closure, report), report


def _interior_mask(shape):
    mask = np.zeros(shape, bool)
    mask[1:-1, 1:-1] = True
    return mask


def extend_domain(geom, closure, m=None, L0=None, opts=None, domain_tol=1e-8, max_doublings=3):
    """Repeat the solve at L0, 2 L0, 4 L0 ... until the inner window settles."""
    opts = opts or SolveOptions()
    L0 = geom.L if L0 is None else L0
    field0, _ = solve_bounded(geom, closure, m, L0, opts)
    inner_x = field0.grid.y1
    history = []
    prev = field0
    for k in range(1, max_doublings + 1):
        nx = (opts.nx - 1) * 2 ** k + 1
        cur, _ = solve_bounded(geom, closure, m, L0 * 2 ** k, replace(opts, nx=nx))
        diff = float(np.abs(_restrict(cur, inner_x) - _restrict(prev, inner_x)).max()) / closure.m
        history.append((L0 * 2 ** k, diff))
        prev = cur
        if diff < domain_tol:
            break
    diffs = [d for _, d in history]
    rates = [np.log(diffs[i] / diffs[i + 1]) / np.log(2) for i in range(len(diffs) - 1)
             if diffs[i + 1] > 0 and diffs[i] > 0]
    info = {"history": history, "decay_rates": rates, "converged": diffs[-1] < domain_tol}
    if not info["converged"] and len(diffs) >= 3 and not (diffs[-1] < diffs[0]):
        raise ConvergenceError("truncation error does not decay with L")
    prev.extension = info
    return prev


def _restrict(field, x1):
    y1 = field.grid.y1
    idx = np.searchsorted(y1, x1 - 1e-9 * field.grid.h1)
    return field.psi[idx, :]


def monotonicity_check(field):
    """Minimum of d psi / d x2 over interior nodes and where it is attained."""
    _, d2 = physical_gradient(field.psi, field.grid)
    inner = d2[1:-1, 1:-1]
    k = np.unravel_index(np.argmin(inner), inner.shape)
    node = (k[0] + 1, k[1] + 1)
    val = float(inner[k])
    return {"min_dpsi_dx2": val, "node": node,
            "x1": float(field.grid.y1[node[0]]), "y2": float(field.grid.y2[node[1]]),
            "ok": bool(val > 0)}
