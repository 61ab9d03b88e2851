"""Command-line runner: config parsing, orchestration and artifact output.

Configuration is INI-style text (see README for the schema).  Every run writes
a key-value report ``report.txt`` into the output directory, ending with a
table of named conditions and their PASS/FAIL status.  Numeric tables use 17
significant digits so that they round-trip exactly.
"""
from __future__ import annotations

import argparse
import configparser
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import asymptotics as asy
from . import continuation as cont
from . import discontinuity as disc
from . import fields as fl
from . import geometry as geo
from . import incompressible as inc
from . import inlet as il
from .errors import (ConvergenceError, DomainError, ExtractionError, NozzleFlowError,
                     ParameterError, TransformError, ValidationError)
from .solver import SolveOptions, monotonicity_check, solve_bounded

EXIT_OK, EXIT_VALIDATION, EXIT_CONVERGENCE, EXIT_PARTIAL = 0, 2, 3, 4
FIELD_COLUMNS = ("y1", "y2", "x1", "x2", "psi", "rho", "u1", "u2", "p", "M", "theta")


class PartialStudy(NozzleFlowError):
    """Some members of a multi-solve study failed; the rest were written."""


# ---------------------------------------------------------------- config

def _floats(text):
    return [float(v) for v in text.replace(",", " ").split()]


def _pair(section, key, default):
    if key not in section:
        return tuple(default)
    vals = _floats(section[key])
    if len(vals) != 2:
        raise ValidationError(f"[{section.name}] {key} needs two values (below, above)", key)
    return tuple(vals)


def load_config(path):
    cfg = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    path = Path(path)
    if not cfg.read(path):
        raise ValidationError(f"cannot read config file {path}", "config")
    cfg.base_dir = path.parent
    return cfg


def build_geometry(cfg):
    sec = cfg["geometry"] if cfg.has_section("geometry") else cfg["DEFAULT"]
    kind = sec.get("kind", "straight")
    L = sec.getfloat("L", 5.0)
    if kind == "straight":
        g = geo.straight(sec.getfloat("width", 1.0), L)
    elif kind == "tanh":
        g = geo.tanh_nozzle(sec.getfloat("b", 0.75), sec.getfloat("a", 0.0),
                            sec.getfloat("scale", 1.0), L)
    elif kind == "table":
        data = np.loadtxt(Path(cfg.base_dir) / sec["file"])
        g = geo.from_table(data[:, 0], data[:, 1], data[:, 2], L)
    else:
        raise ValidationError(f"unknown geometry kind '{kind}'", "geometry.kind")
    g.require_valid()
    return g


def incompressible_mode(cfg):
    return cfg.has_section("gas") and cfg["gas"].get("mode", "compressible") == "incompressible"


def build_profile(cfg, m=None):
    """Compressible inlet profile; entropy-wave data need the mass flux."""
    sec = cfg["inlet"]
    gamma = cfg["gas"].getfloat("gamma", 1.4) if cfg.has_section("gas") else 1.4
    kind = sec.get("kind", "constant")
    if kind == "constant":
        prof = il.constant(sec.getfloat("u", 1.0), sec.getfloat("S", 1.0), gamma)
    elif kind == "polynomial":
        prof = il.polynomial(_floats(sec.get("u", "1")), _floats(sec.get("S", "1")), gamma)
    elif kind == "two-state":
        prof = il.two_state(sec.getfloat("x_d", 0.5), _pair(sec, "u", (1, 1)),
                            _pair(sec, "S", (1, 1)), gamma, sec.getfloat("eps0", 0.1))
    elif kind == "table":
        data = np.loadtxt(Path(cfg.base_dir) / sec["file"])
        prof = il.table(data[:, 0], data[:, 1], data[:, 2], gamma)
    elif kind == "entropy-wave":
        if m is None:
            raise ValidationError("entropy-wave inlet data need [flow] m", "flow.m")
        prof = il.entropy_wave(sec.getfloat("x_d", 0.5), m, _pair(sec, "S", (1.0, 0.97)),
                               sec.getfloat("u_below", 1.0), gamma, sec.getfloat("eps0", 0.1))
    else:
        raise ValidationError(f"unknown inlet kind '{kind}'", "inlet.kind")
    if "phi" in sec or "gravity" in sec:
        c0 = sec.getfloat("phi", 0.0)
        gr = sec.getfloat("gravity", 0.0)
        prof = prof.with_force(lambda x: c0 + gr * np.asarray(x, float),
                               lambda x: np.full(np.shape(x), gr))
    return prof


def build_incompressible_inlet(cfg):
    sec = cfg["inlet"]
    kind = sec.get("kind", "constant")
    p_ref = cfg["gas"].getfloat("p_ref", 10.0)
    if kind == "constant":
        return inc.constant(sec.getfloat("rho", 1.0), sec.getfloat("u", 1.0), p_ref)
    if kind == "smooth-two-state":
        return inc.smooth_two_state(sec.getfloat("x_d", 0.5), _pair(sec, "rho", (2.0, 1.0)),
                                    _pair(sec, "u", (1.0, 1.6)), sec.getfloat("width", 0.2), p_ref)
    if kind == "uniform-flux-two-state":
        return inc.uniform_flux_two_state(sec.getfloat("x_d", 0.5), _pair(sec, "rho", (2.0, 1.0)),
                                          sec.getfloat("flux_density", 2.0),
                                          sec.getfloat("width", 0.2), p_ref)
    if kind == "two-state":
        return inc.two_state(sec.getfloat("x_d", 0.5), _pair(sec, "rho", (2.0, 1.0)),
                             _pair(sec, "u", (1.0, 1.6)), p_ref, sec.getfloat("eps0", 0.1))
    raise ValidationError(f"unknown incompressible inlet kind '{kind}'", "inlet.kind")


def flow_rate(cfg, profile):
    sec = cfg["flow"] if cfg.has_section("flow") else None
    if sec is not None and "m" in sec:
        return sec.getfloat("m")
    mach = sec.getfloat("mach", 0.3) if sec is not None else 0.3
    return cont.start_flux(profile, mach)


def solver_options(cfg, grid=None):
    sec = cfg["solver"] if cfg.has_section("solver") else cfg["DEFAULT"]
    opts = SolveOptions(nx=sec.getint("nx", 201), ny=sec.getint("ny", 41),
                        tol=sec.getfloat("tol", 1e-10), max_iter=sec.getint("max_iter", 400),
                        method=sec.get("method", "auto"), source=sec.get("source", "auto"))
    if "eps_cut" in sec:
        opts = replace(opts, eps_cut=sec.getfloat("eps_cut"))
    if grid is not None:
        opts = replace(opts, nx=grid[0], ny=grid[1])
    return opts


def _eps_cut(cfg):
    if cfg.has_section("solver") and "eps_cut" in cfg["solver"]:
        return cfg["solver"].getfloat("eps_cut")
    return 0.05


def _L(cfg):
    if cfg.has_section("solver") and "L" in cfg["solver"]:
        return cfg["solver"].getfloat("L")
    return None


# ---------------------------------------------------------------- output

def write_table(path, names, columns):
    cols = [np.ravel(np.asarray(c, float)) for c in columns]
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(" ".join(names) + "\n")
        for row in zip(*cols):
            fh.write(" ".join(format(float(v), ".17g") for v in row) + "\n")


def _value(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return " ".join(_value(x) for x in v)
    return str(v)


class Report:
    def __init__(self, command):
        self.items = [("command", command)]
        self.conditions = []

    def set(self, key, value):
        self.items.append((key, value))

    def check(self, cid, ok, detail=""):
        self.conditions.append((cid, bool(ok), detail))

    @property
    def all_pass(self):
        return all(ok for _, ok, _ in self.conditions)

    def text(self):
        lines = [f"{k} = {_value(v)}" for k, v in self.items]
        lines.append("[conditions]")
        for cid, ok, detail in self.conditions:
            lines.append(f"{cid} = {'PASS' if ok else 'FAIL'}  # {detail}")
        return "\n".join(lines) + "\n"

    def write(self, out):
        (Path(out) / "report.txt").write_text(self.text(), encoding="ascii")


def field_dump(path, field):
    prim = fl.reconstruct(field)
    g = field.grid
    Y1, Y2 = np.meshgrid(g.y1, g.y2, indexing="ij")
    write_table(path, FIELD_COLUMNS, (Y1, Y2, prim.x1, prim.x2, field.psi, prim.rho,
                                      prim.u1, prim.u2, prim.p, prim.M, prim.theta))
    return prim


def _record_inlet_checks(rep, checks, prefix="inlet"):
    for c in checks:
        rep.check(f"{prefix}.{c.name}", c.ok, c.detail)


def _record_geometry(rep, g):
    for name, ok, detail in g.validate():
        rep.check(f"geometry.{name}", ok, detail)


def _field_checks(rep, field, prim):
    m = field.closure.m
    mid, trap = fl.station_flux(prim)
    err = float(np.abs(mid - m).max()) / m
    rep.check("field.flux-constancy", err < 1e-6, f"max station flux error {err:.3e}")
    rep.set("trapezoid_flux_error", float(np.abs(trap - m).max()) / m)
    dB, dS = fl.transport_defect(prim)
    rep.check("field.transport", dB == 0.0 and dS == 0.0, f"B defect {dB:.3e}, S defect {dS:.3e}")
    mono = monotonicity_check(field)
    rep.check("field.monotone", mono["ok"], f"min dpsi/dx2 = {mono['min_dpsi_dx2']:.6g}")
    qmin = float(prim.q.min())
    rep.check("field.nondegenerate", qmin > 0, f"min q = {qmin:.6g}")
    if not field.closure.incompressible:
        mg = field.report.margin
        rep.check("field.subsonic", mg > 0, f"margin {mg:.6g}, max M = {float(prim.M.max()):.6g}")
        rep.check("field.cutoff-inactive", field.report.activation_count == 0,
                  f"{field.report.activation_count} activated nodes")
    mp = fl.max_principle_report(prim)
    rep.check("field.max-principle", mp["pass"],
              f"max|theta| = {mp['theta_max']:.6g}, theta_B = {mp['theta_B']:.6g}")


# ---------------------------------------------------------------- commands

def _prepare_compressible(cfg, rep, profile=None, m=None):
    if profile is None:
        flow = cfg["flow"] if cfg.has_section("flow") else {}
        profile = build_profile(cfg, m if m is not None or "m" not in flow
                                else flow.getfloat("m"))
    if m is None:
        m = flow_rate(cfg, profile)
    checks = il.validate_profile(profile)
    _record_inlet_checks(rep, checks)
    enforce = cfg["inlet"].getboolean("enforce_jump", True) if cfg.has_section("inlet") else True
    for c in checks:
        if not c.ok and (enforce or c.name != "jump-signs"):
            raise ValidationError(f"inlet condition '{c.name}' fails: {c.detail}", c.name)
    mh = il.m_hat(profile)
    rep.check("flow.above-m-hat", m > mh, f"m = {m:.17g}, m_hat = {mh:.17g}")
    if not m > mh:
        raise ParameterError(f"mass flux {m:.6g} does not exceed m_hat = {mh:.6g}; raise [flow] m")
    if cfg.has_section("inlet") and "mollify_eps" in cfg["inlet"] and profile.jumps:
        profile = il.mollify(profile, cfg["inlet"].getfloat("mollify_eps"))
    return profile, m


def _closure(cfg, rep):
    if incompressible_mode(cfg):
        inlet = build_incompressible_inlet(cfg)
        checks = inc.validate(inlet)
        _record_inlet_checks(rep, checks)
        inc.require_valid(inlet)
        clo = inc.incompressible_closure_for(inlet, _eps_cut(cfg))
        rep.set("mode", "incompressible")
        return clo, None
    profile, m = _prepare_compressible(cfg, rep)
    rep.set("mode", "compressible")
    rep.set("gamma", float(profile.gamma))
    return il.build_closure(profile, m, eps_cut=_eps_cut(cfg)), profile


def cmd_solve(cfg, out, grid, rep, diagnose=False):
    g = build_geometry(cfg)
    _record_geometry(rep, g)
    clo, _ = _closure(cfg, rep)
    opts = solver_options(cfg, grid)
    field, sr = solve_bounded(g, clo, None, _L(cfg), opts)
    rep.set("m", float(clo.m))
    rep.set("grid", f"{field.grid.shape[0]}x{field.grid.shape[1]}")
    rep.set("iterations", sr.iterations)
    rep.set("newton_steps", sr.newton_steps)
    rep.set("residual", float(sr.residual_history[-1]))
    rep.set("margin", float(sr.margin))
    prim = field_dump(Path(out) / "field.dat", field)
    _field_checks(rep, field, prim)
    if diagnose:
        r1, r2 = fl.theta_pressure_residual(prim)
        div = fl.mass_divergence(prim)
        a, _ = fl.physical_derivatives(prim.u2, prim.grid)
        _, b = fl.physical_derivatives(prim.u1, prim.grid)
        vort = a - b - prim.omega
        interior = np.zeros(div.shape, bool)
        interior[1:-1, 1:-1] = True
        div = np.where(interior, div, 0.0)
        vort = np.where(interior, vort, 0.0)
        Y1, Y2 = np.meshgrid(field.grid.y1, field.grid.y2, indexing="ij")
        write_table(Path(out) / "diagnostics.dat",
                    ("y1", "y2", "x1", "x2", "R1", "R2", "mass_divergence", "vorticity_defect"),
                    (Y1, Y2, prim.x1, prim.x2, r1, r2, div, vort))
        rep.set("max_R1", float(np.abs(r1).max()))
        rep.set("max_R2", float(np.abs(r2).max()))
        rep.set("max_mass_divergence", float(np.abs(div).max()))
        rep.set("max_vorticity_defect", float(np.abs(vort).max()))
        try:
            lag = fl.to_lagrangian(field)
            rt = fl.lagrangian_round_trip(lag, field)
            rep.check("lagrangian.round-trip", rt < 1e-8, f"round-trip error {rt:.3e}")
            rep.set("max_lagrangian_residual", float(np.abs(lag.momentum_residual()).max()))
        except TransformError as exc:
            rep.check("lagrangian.round-trip", False, str(exc))


def cmd_asymptotics(cfg, out, grid, rep):
    g = build_geometry(cfg)
    _record_geometry(rep, g)
    profile, m = _prepare_compressible(cfg, rep)
    st = asy.outlet_state(profile, m, g)
    rep.set("m", float(m))
    for key in ("p_minus", "p_plus", "p_lower", "p_upper", "J_residual"):
        rep.set(key, float(getattr(st, key)))
    rep.set("p_critical", float(asy.critical_pressure(profile, m)))
    rep.check("outlet.pressure-window", st.p_lower < st.p_plus < st.p_upper,
              f"{st.p_lower:.6g} < {st.p_plus:.6g} < {st.p_upper:.6g}")
    rep.check("outlet.width-balance", abs(st.J_residual) < 1e-10,
              f"J(p+) - width = {st.J_residual:.3e}")
    y = st.y_table
    write_table(Path(out) / "outlet.dat", ("y", "x2_plus", "rho_plus", "u1_plus", "M_plus"),
                (y, st.x2_table, st.rho_plus(y), st.u1_plus(y), st.mach_plus(y)))


def _sweep_options(cfg, grid):
    sec = cfg["continuation"] if cfg.has_section("continuation") else cfg["DEFAULT"]
    so = cont.SweepOptions(start_mach=sec.getfloat("start_mach", 0.3),
                           shrink=sec.getfloat("shrink", 0.9),
                           bracket_tol=sec.getfloat("bracket_tol", 1e-3),
                           eps=sec.getfloat("eps", 0.05), nx=sec.getint("nx", 161),
                           ny=sec.getint("ny", 33), L=_L(cfg))
    if "m_start" in sec:
        so = replace(so, m_start=sec.getfloat("m_start"))
    if grid is not None:
        so = replace(so, nx=grid[0], ny=grid[1])
    return so


def _run_sweep(cfg, grid, rep):
    g = build_geometry(cfg)
    _record_geometry(rep, g)
    profile = build_profile(cfg)
    _record_inlet_checks(rep, il.validate_profile(profile))
    il.require_valid(profile)
    res = cont.bers_sweep(g, profile, _sweep_options(cfg, grid))
    rep.set("m_c_lower", float(res.m_c_bracket[0]))
    rep.set("m_c_upper", float(res.m_c_bracket[1]))
    rep.set("bracket_width", float(res.width))
    rep.set("terminal_kind", res.terminal_kind)
    rep.set("eps_final", float(res.eps_final))
    rep.set("m_hat", float(il.m_hat(profile)))
    rep.set("trials", len(res.trials))
    rep.check("continuation.bracket-width", res.width < 1e-3, f"relative width {res.width:.3e}")
    rep.check("continuation.margin-monotone", cont.margin_monotone(res), "margin vs m")
    return res


def cmd_continuation(cfg, out, grid, rep):
    res = _run_sweep(cfg, grid, rep)
    tab = res.margin_table()
    write_table(Path(out) / "margin_curve.dat", ("m", "margin"), (tab[:, 0], tab[:, 1]))


def cmd_classify(cfg, out, grid, rep):
    g = build_geometry(cfg)
    _record_geometry(rep, g)
    profile, m = _prepare_compressible(cfg, rep)
    if not profile.jumps:
        raise ValidationError("classification needs inlet data with a jump", "inlet.x_d")
    sec = cfg["discontinuity"] if cfg.has_section("discontinuity") else cfg["DEFAULT"]
    eps_list = tuple(_floats(sec.get("eps_list", "0.08 0.04 0.02 0.01")))
    fam = disc.eps_family(g, profile, m, eps_list, solver_options(cfg, grid), _eps_cut(cfg),
                          sec.getboolean("refine_last", False))
    reports = disc.family_report(fam, window=g.L)
    dB, dS = disc.inlet_jumps(profile, m)
    p_m = il.inlet_pressure(profile, m)
    rep.set("m", float(m))
    rep.set("inlet_jump_B", dB)
    rep.set("inlet_jump_S", dS)
    rep.set("members", len(fam.fields))
    for (e, err) in fam.failures:
        rep.set(f"failed_member_eps_{e:g}", err)
    for k, (e, r) in enumerate(zip(fam.eps, reports)):
        rep.set(f"member_{k}_eps", float(e))
        rep.set(f"member_{k}_kind", r.kind)
        rep.set(f"member_{k}_max_rel_pressure_jump", float(np.abs(r.jumps["p"]).max() / p_m))
        rep.set(f"member_{k}_wall_distance", float(r.wall_distance))
        poly = r.gamma_polyline
        write_table(Path(out) / f"gamma_{k}.dat", ("x1", "x2"), (poly[:, 0], poly[:, 1]))
        tr = r.traces
        names, cols = ["x1"], [tr["x1"]]
        for n in disc.TRACE_NAMES:
            names += [f"{n}_below", f"{n}_above"]
            cols += [tr[n][:, 0], tr[n][:, 1]]
        write_table(Path(out) / f"traces_{k}.dat", names, cols)
    if reports:
        expect = "entropy-wave" if dB == 0.0 else "vortex-sheet" if dS == 0.0 else "mixed"
        last = reports[-1]
        rep.set("classification", last.kind)
        rep.check("discontinuity.kind", last.kind == expect, f"expected {expect}")
        rel = float(np.abs(last.jumps["p"]).max() / p_m)
        rep.check("discontinuity.pressure-continuity", rel < 1e-2, f"max |[p]|/p- = {rel:.3e}")
        rep.check("discontinuity.wall-distance", last.wall_distance > 0,
                  f"{last.wall_distance:.6g}")
    if fam.failures:
        raise PartialStudy(f"{len(fam.failures)} family members failed")


def cmd_limits(cfg, out, grid, rep, mode):
    if mode == "gamma":
        g = build_geometry(cfg)
        _record_geometry(rep, g)
        inlet = build_incompressible_inlet(cfg)
        _record_inlet_checks(rep, inc.validate(inlet))
        inc.require_valid(inlet)
        sec = cfg["limits"] if cfg.has_section("limits") else cfg["DEFAULT"]
        gammas = tuple(_floats(sec.get("gammas", " ".join(map(str, inc.LADDER)))))
        lad = inc.gamma_ladder(g, inlet, gammas, solver_options(cfg, grid), _L(cfg))
        write_table(Path(out) / "ladder.dat", ("gamma", "distance"), (lad.gammas, lad.distances))
        rep.set("gammas", [float(x) for x in lad.gammas])
        rep.set("distances", [float(x) for x in lad.distances])
        rep.set("pairwise", [float(x) for x in lad.pairwise])
        for gm, msg in lad.failures:
            rep.set(f"failed_gamma_{gm:g}", msg)
        d = np.asarray(lad.distances)
        degenerate = d.size > 0 and float(d.max()) < 1e-8
        rep.check("limit.monotone", lad.monotone or degenerate,
                  "degenerate (all equal)" if degenerate else "distance decreasing in gamma")
        if not lad.complete:
            raise PartialStudy(f"{len(lad.failures)} ladder members failed")
        return
    res = _run_sweep(cfg, grid, rep)
    acc = sorted((t.m, t.sonic_gap) for t in res.trials if t.outcome == "accepted")
    m_arr = np.array([a for a, _ in acc])
    gap = np.array([b for _, b in acc])
    write_table(Path(out) / "sonic_trend.dat", ("m", "sup_q2_minus_c2"), (m_arr, gap))
    rep.check("limit.subsonic-trials", bool(np.all(gap < 0)), f"max gap {gap.max():.3e}")
    rep.check("limit.sonic-trend", bool(np.all(np.diff(gap) <= 1e-9 * np.abs(gap).max())),
              "sup(q^2 - c^2) increases toward the bracket")


COMMANDS = ("solve", "diagnose", "asymptotics", "continuation", "classify", "limits")


def _grid(text):
    try:
        nx, ny = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError("grid must look like 201x41") from None
    return nx, ny


def make_parser():
    ap = argparse.ArgumentParser(prog="nozzleflow",
                                 description="Steady subsonic Euler flow through unbounded 2-D nozzles.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("-c", "--config", required=True, help="INI-style run configuration")
    ap.add_argument("--out", default="out", help="output directory (default: out)")
    ap.add_argument("--grid", type=_grid, help="override node counts, e.g. 201x41")
    ap.add_argument("--mode", choices=("gamma", "sonic"), default="gamma",
                    help="study for the limits command")
    ap.add_argument("--quiet", action="store_true", help="do not echo the report")
    return ap


def run(argv=None):
    args = make_parser().parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rep = Report(args.command)
    code = EXIT_OK
    try:
        cfg = load_config(args.config)
        if args.command in ("solve", "diagnose"):
            cmd_solve(cfg, out, args.grid, rep, diagnose=args.command == "diagnose")
        elif args.command == "asymptotics":
            cmd_asymptotics(cfg, out, args.grid, rep)
        elif args.command == "continuation":
            cmd_continuation(cfg, out, args.grid, rep)
        elif args.command == "classify":
            cmd_classify(cfg, out, args.grid, rep)
        else:
            cmd_limits(cfg, out, args.grid, rep, args.mode)
    except (ValidationError, ParameterError, DomainError) as exc:
        rep.set("error", str(exc))
        code = EXIT_VALIDATION
    except (ConvergenceError, ExtractionError, TransformError) as exc:
        rep.set("error", str(exc))
        code = EXIT_CONVERGENCE
    except PartialStudy as exc:
        rep.set("error", str(exc))
        code = EXIT_PARTIAL
    rep.set("exit_code", code)
    rep.write(out)
    if not args.quiet:
        sys.stdout.write(rep.text())
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
