"""Command-line experiment runner.

Usage::

    nmpl <command> <config> [--out DIR] [--seed N] [--threads K]

Every run writes ``summary.csv`` with one ``name, value, threshold, pass``
row per check plus command-specific CSV files.  Exit status is 0 when all
checks pass, 2 when a check fails or a numerical diagnostic aborts the run,
and 1 on usage or configuration errors.
"""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import config as C
from .barriers import (HorizontalBarrier, VerticalBarrier, gamma0, strict_supersolution_margin,
                       verify_component_lemmas, verify_exp_inequality, verify_nl_estimate)
from .csvio import write_csv
from .diagnostics import (nondegeneracy_probe, propagation_test, scaling_check,
                          vertical_nondegeneracy_check)
from .errors import ConfigError, NmplError
from .fields import GridField, cosine, quadratic
from .measures import measure_bound, mc_scaling_probe
from .operators import ellipticity_probe
from .reachability import BoxGrid, covers_domain, iterate_reachable
from .scheme import SchemeConfig, discrete_comparison_check, simulate

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class Summary:
    """Collects the check rows of one run."""

    def __init__(self):
        self.rows = []

    def add(self, name, value, threshold, ok):
        self.rows.append([name, value, threshold, bool(ok)])

    @property
    def ok(self):
        return all(r[3] for r in self.rows)


def pmap(fn, items, threads=1):
    """Ordered map, threaded when ``threads > 1``."""
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _measures(cfg):
    m = C.build_measure(cfg.table("measure"))
    if "measure2" in cfg.tables:
        return (m, C.build_measure(cfg.table("measure2")))
    return m


def _grid_field(cfg, initial=None):
    g = cfg.table("grid")
    lo, hi = g.floats("lower"), g.floats("upper")
    shape = tuple(int(v) for v in g.floats("shape"))
    periodic = g.str("boundary", "dirichlet") == "periodic"
    u0 = C.Expr(initial) if initial is not None else g.expr("initial")
    kw = dict(periodic=periodic)
    if not periodic:
        ext = g.expr("exterior", "0")
        kw["exterior"] = lambda y, t, e=ext: e(y, t)
    if "horizon" in g:
        kw["T"] = g.float("horizon", lo=0, strict_lo=True)
    return GridField.from_function(lambda y, t: u0(y, t), lo, hi, shape, 0.0, **kw)


def _scheme(cfg, field):
    g = cfg.table("grid")
    f = C.build_nonlinearity(cfg.table("nonlinearity"))
    dt = g.float("dt", lo=0, strict_lo=True) if "dt" in g else None
    return SchemeConfig(field, f, _measures(cfg), dt=dt,
                        t_end=g.float("t_end", 0.1, lo=0, strict_lo=True),
                        stride=g.int("stride", 10, lo=1))


def cmd_simulate(cfg, out, s: Summary, threads):
    field = _grid_field(cfg)
    traj = simulate(_scheme(cfg, field))
    d = field.dim
    coords = [f"x{i + 1}" for i in range(d)]
    write_csv(out / "trajectory.csv",
              ["step", "t", "max", *[f"argmax_{c}" for c in coords], "min",
               *[f"argmin_{c}" for c in coords]], traj.records)
    last = traj.states[-1]
    pts = last.points().reshape(-1, d)
    write_csv(out / "final_state.csv", [*coords, "u"],
              [[*p, v] for p, v in zip(pts, last.values.ravel())])
    prop = propagation_test(traj)
    write_csv(out / "propagation.csv", ["t", "max", "attaining_cells", "horizontal", "vertical"],
              [[t, mx, int(a.sum()), h, v] for t, mx, a, h, v in
               zip(prop.times, prop.maxima, prop.attaining, prop.horizontal, prop.vertical)])
    s.add("steps", len(traj.records) - 1, "monotone", True)
    s.add("dt", traj.dt, "stability bound", True)
    amp = 0.5 * float(np.ptp(last.values))
    s.add("final_amplitude", amp, "finite", np.isfinite(amp))
    g = cfg.table("grid")
    if "reference" in g:
        ref = float(g.expr("reference")())
        rtol = g.float("reference_rtol", 0.02, lo=0)
        s.add("amplitude_vs_reference", amp, f"{ref:.17g} +- {rtol:g} rel",
              abs(amp - ref) <= rtol * abs(ref))


def cmd_check_measure(cfg, out, s: Summary, threads):
    t = cfg.table("measure")
    m = C.build_measure(t)
    x = np.zeros(t.int("dim", 1)) if "x" not in t else np.asarray(t.floats("x"))
    bd = measure_bound(m, x=x)
    write_csv(out / "measure.csv", ["near", "far", "value", "error", "finite", "applicable"],
              [[bd.near, bd.far, bd.value, bd.error, bd.finite, bd.applicable]])
    s.add("C_mu_tilde", bd.value, "finite", bd.finite)
    s.add("near_moment", bd.near, "finite", np.isfinite(bd.near))
    s.add("far_mass", bd.far, "finite", np.isfinite(bd.far))
    if "probe" in cfg.tables:
        p = cfg.table("probe")
        dim = t.int("dim", 1)
        if t.str("kind") in ("cone", "axis_charging"):
            dim = 2
        dirn = np.asarray(p.floats("p", ",".join(["1"] + ["0"] * (dim - 1))))
        fit = mc_scaling_probe(m, dirn, p.float("eta", 0.5), C.gammas(p))
        write_csv(out / "cone_mass.csv", ["gamma", "mass"], list(zip(fit.gammas, fit.masses)))
        tol = p.float("exponent_tol", 0.05, lo=0)
        s.add("cone_mass_exponent", fit.slope, f"{fit.expected:.17g} +- {tol:g}",
              fit.deviation <= tol)


def cmd_reachability(cfg, out, s: Summary, threads):
    g = cfg.table("grid")
    r = cfg.table("reachability", required=False)
    grid = BoxGrid(g.floats("lower"), g.floats("upper"), [int(v) for v in g.floats("shape")])
    m = C.build_measure(cfg.table("measure"))
    pts = grid.points()
    omega = np.ones(grid.shape, bool)
    if "omega" in r:
        omega = np.asarray(r.expr("omega")(pts, 0.0) > 0, bool)
    x0 = r.floats("x0", ",".join(["0"] * grid.dim))
    res = iterate_reachable(m, x0, grid, restrict_to_omega=r.bool("restrict_to_omega", "false"),
                            omega=omega, samples_per_cell=r.int("samples_per_cell", 4, lo=1))
    coords = [f"x{i + 1}" for i in range(grid.dim)]
    write_csv(out / "reach_mask.csv", [*coords, "reached", "first_reach"], res.rows())
    covers, missing = covers_domain(res, omega)
    s.add("converged", res.iterations, "fixpoint", res.converged)
    expect = r.bool("expect_cover", "true")
    s.add("covers_domain", covers, str(expect).lower(), covers == expect)
    s.add("uncovered_cells", len(missing), "report", True)


def _barrier(cfg):
    t = cfg.table("barrier")
    kind = t.str("kind", "horizontal")
    if kind == "horizontal":
        R, eta = t.float("R", 1.0, lo=0, strict_lo=True), t.float("eta", 0.5, lo=0, hi=1)
        g = t.float("gamma_factor", 1.0, lo=1.0) * gamma0(R, eta) if "gamma" not in t \
            else t.float("gamma", lo=0, strict_lo=True)
        b = HorizontalBarrier(t.floats("center"), t.float("t0", 0.0), R,
                              t.float("lambda", 1.0, lo=0, strict_lo=True), g)
        return b, eta
    if kind == "vertical":
        b = VerticalBarrier(t.floats("center"), t.float("t0", 0.0),
                            t.float("lambda", 1.0, lo=0, strict_lo=True))
        return b, None
    raise ConfigError(f"[barrier] kind must be horizontal or vertical, got {kind!r}")


def cmd_verify_barrier(cfg, out, s: Summary, threads):
    t = cfg.table("barrier")
    b, eta = _barrier(cfg)
    m = _measures(cfg)
    n = t.int("samples", 100, lo=1)
    c = t.float("c") if "c" in t else None
    coords = [f"x{i + 1}" for i in range(b.dim)]
    head = [*coords, "t", "lhs", "rhs", "margin", "scale"]
    if isinstance(b, HorizontalBarrier):
        if isinstance(m, tuple):
            raise ConfigError("[measure2] is not used by verify-barrier")
        jobs = [lambda: verify_nl_estimate(b, m, eta, c, n, cfg.seed)]
        if t.bool("components", "true"):
            jobs.append(lambda: verify_component_lemmas(b, m, eta, c, n, cfg.seed))
        reps = pmap(lambda j: j(), jobs, threads)
        est = reps[0]
        write_csv(out / "nl_estimate.csv", head, est.rows())
        s.add("nl_estimate_margin", est.worst, f">= -{float(est.tol.max()):.3g}", est.ok)
        if len(reps) > 1:
            for name, rep in zip(("T1", "T2", "T3"), (reps[1].T1, reps[1].T2, reps[1].T3)):
                write_csv(out / f"component_{name}.csv", head, rep.rows())
                s.add(f"component_{name}_margin", rep.worst, f">= -{float(rep.tol.max()):.3g}",
                      rep.ok)
    if "nonlinearity" in cfg.tables:
        f = C.build_nonlinearity(cfg.table("nonlinearity"))
        rep = strict_supersolution_margin(f, b, t.float("eps", 1.0, lo=0, strict_lo=True), n, m,
                                          cfg.seed)
        write_csv(out / "supersolution.csv", [*coords, "t", "raw", "normalized", "error"],
                  [[*x, tt, r, v, e] for x, tt, r, v, e in
                   zip(rep.x, rep.t, rep.raw, rep.normalized, rep.error)])
        s.add("supersolution_margin", rep.margin, "> 0", rep.margin > 0)


def _phi(t, dim):
    kind = t.str("phi", "quadratic")
    if kind == "quadratic":
        return quadratic(t.float("curvature", -1.0) * np.eye(dim))
    if kind == "cosine":
        if dim != 1:
            raise ConfigError("[appendix] cosine phi is one-dimensional")
        return cosine(t.float("frequency", 1.0), t.float("amplitude", 1.0))
    raise ConfigError(f"[appendix] phi must be quadratic or cosine, got {kind!r}")


def cmd_verify_appendix(cfg, out, s: Summary, threads):
    t = cfg.table("appendix")
    m = C.build_measure(cfg.table("measure"))
    dim = cfg.table("measure").int("dim", 1)
    phi = _phi(t, dim)
    rng = np.random.default_rng(cfg.seed)
    n = t.int("samples", 100, lo=1)
    xs = rng.uniform(-1, 1, (n, dim))
    deltas = t.floats("delta", "0, 1, 3")
    reps = pmap(lambda dl: verify_exp_inequality(phi, m, dl, xs), deltas, threads)
    rows = []
    for dl, rep in zip(deltas, reps):
        fn = rep.functional
        rows += [[dl, *x, lhs, rhs, lhs - rhs, tol]
                 for x, lhs, rhs, tol in zip(fn.x, fn.rhs, fn.lhs, fn.tol)]
        s.add(f"scalar_delta_{dl:g}", rep.scalar_margin, ">= -1e-12", rep.scalar_ok)
        s.add(f"functional_delta_{dl:g}", fn.worst, f">= -{float(fn.tol.max()):.3g}", fn.ok)
    write_csv(out / "appendix.csv",
              ["delta", *[f"x{i + 1}" for i in range(dim)], "lhs", "rhs", "margin", "tol"], rows)


def cmd_probe(cfg, out, s: Summary, threads):
    p = cfg.table("probe")
    f = C.build_nonlinearity(cfg.table("nonlinearity"))
    m = _measures(cfg)
    xbar = p.floats("center", ",".join(["0"] * f.dim))
    rep = nondegeneracy_probe(f, m, xbar, p.float("t0", 0.5), p.float("R", 0.5, lo=0, strict_lo=True),
                              p.float("eta", 0.5, lo=0, hi=1), p.float("c", 1.0, lo=0),
                              C.gammas(p), p.int("samples", 16, lo=1), cfg.seed)
    write_csv(out / "probe.csv", ["gamma", "min_value"], rep.rows())
    expect = p.str("expect", "diverges")
    s.add("growth_exponent", rep.exponent, "report", True)
    s.add("verdict", rep.verdict, expect, rep.verdict == expect)
    if "expect_exponent" in p:
        e, tol = p.float("expect_exponent"), p.float("exponent_tol", 0.1, lo=0)
        s.add("exponent_check", rep.exponent, f"{e:g} +- {tol:g}", abs(rep.exponent - e) <= tol)
    vr = vertical_nondegeneracy_check(f, m, xbar, p.float("t0", 0.5))
    write_csv(out / "vertical.csv", ["lambda", "value"], list(zip(vr.lambdas, vr.values)))
    s.add("vertical_status", vr.status, "not none pass", vr.status != "none pass")


def cmd_check_scaling(cfg, out, s: Summary, threads):
    f = C.build_nonlinearity(cfg.table("nonlinearity"))
    p = cfg.table("probe", required=False)
    n = p.int("samples", 200, lo=1)
    rep = scaling_check(f, n, seed=cfg.seed)
    ell = ellipticity_probe(f, n, cfg.seed)
    write_csv(out / "scaling.csv", ["check", "worst_literal", "linearized", "passes"],
              [["S", rep.worst_S, rep.linear_S, rep.passes_S],
               ["S_prime", rep.worst_S_prime, rep.linear_S_prime, rep.passes_S_prime]])
    s.add("scaling_S", rep.worst_S, f">= -{rep.tol:g} or linearized", rep.passes_S)
    s.add("scaling_S_prime", rep.worst_S_prime, f">= -{rep.tol:g} or linearized",
          rep.passes_S_prime)
    s.add("degenerate_ellipticity", len(ell.violations), "0 violations", ell.elliptic)


def cmd_compare(cfg, out, s: Summary, threads):
    t = cfg.table("compare")
    tol = t.float("tol", 1e-12, lo=0)
    pairs = []
    if "lower_initial" in t:
        pairs.append((t.str("lower_initial"), t.str("upper_initial")))
    n = t.int("random_pairs", 0, lo=0)
    rng = np.random.default_rng(cfg.seed)
    base = _grid_field(cfg)
    for _ in range(n):
        a = rng.normal(size=base.shape)
        pairs.append((a - np.abs(rng.normal(size=base.shape)), a))
    if not pairs:
        raise ConfigError("[compare] needs lower_initial/upper_initial or random_pairs")

    def run(pair):
        trajs = []
        for init in pair:
            fld = _grid_field(cfg, init) if isinstance(init, str) else base.with_values(init)
            sc = _scheme(cfg, fld)
            sc.stride = 1
            trajs.append(simulate(sc))
        return discrete_comparison_check(trajs[0], trajs[1], tol)

    reps = pmap(run, pairs, threads)
    write_csv(out / "compare.csv", ["pair", "state", "max_lower_minus_upper"],
              [[i, k, d] for i, r in enumerate(reps) for k, d in enumerate(r.max_diff)])
    worst = max(r.increase for r in reps)
    s.add("ordering_violation", worst, f"<= {tol:g}", worst <= tol)
    s.add("pairs", len(reps), "report", True)


COMMANDS = {
    "simulate": cmd_simulate,
    "check-measure": cmd_check_measure,
    "reachability": cmd_reachability,
    "verify-barrier": cmd_verify_barrier,
    "verify-appendix": cmd_verify_appendix,
    "probe-nondegeneracy": cmd_probe,
    "check-scaling": cmd_check_scaling,
    "compare": cmd_compare,
}


def _parser():
    ap = argparse.ArgumentParser(prog="nmpl", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("config")
    ap.add_argument("--out", default="out")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--threads", type=int, default=None)
    return ap


def _threads(arg):
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("NMPL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"NMPL_THREADS={env!r} is not an integer") from None
    return 1


def run(argv=None) -> int:
    """Run one command; returns the exit status."""
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        threads = _threads(args.threads)
        cfg = C.load(args.config, seed=args.seed, command=args.command)
    except ConfigError as exc:
        print(f"nmpl: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out)
    s = Summary()
    status = EXIT_OK
    try:
        COMMANDS[args.command](cfg, out, s, threads)
    except ConfigError as exc:
        print(f"nmpl: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NmplError, FloatingPointError, ValueError) as exc:
        name = type(exc).__name__
        print(f"nmpl: check failed ({args.command}: {name}): {exc}", file=sys.stderr)
        s.add(f"{args.command}_completed", name, "no error", False)
        status = EXIT_FAIL
    s.add("seed", cfg.seed, "recorded", True)
    write_csv(out / "summary.csv", ["name", "value", "threshold", "pass"],
              [[*r[:3], "pass" if r[3] else "fail"] for r in s.rows])
    if status == EXIT_OK and not s.ok:
        status = EXIT_FAIL
    for r in s.rows:
        print(f"{r[0]}: {r[1]} [{r[2]}] {'pass' if r[3] else 'FAIL'}")
    return status


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
