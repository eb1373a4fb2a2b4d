"""Command line interface ``dsl``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .chsolver import Schedule, evolve, kdv_evolve, reference_resolution, reference_schedule
from .chsolver import write_energy_csv, write_snapshot_csv
from .hopf import critical_point, solve_hopf
from .multiscale import eval_multiscale, frame_at, solve_hastings_mcleod
from .onephase import RiemannTriple, derive_params, eval_onephase


def _writer(path):
    if path in (None, "-"):
        return sys.stdout, False
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", newline=""), True


def _write_rows(path, header, rows):
    fh, close = _writer(path)
    try:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) for v in r])
    finally:
        if close:
            fh.close()


def _floats(text):
    return [float(v) for v in text.replace(",", " ").split()]


def _datum(args, eps=None):
    return harness.make_datum(args.profile, args.nu, args.eps if eps is None else eps, args.amplitude)


def _xgrid(args, default):
    lo, hi = (args.xmin, args.xmax)
    lo = default[0] if lo is None else lo
    hi = default[1] if hi is None else hi
    return np.linspace(lo, hi, args.npts)


# -- subcommands ---------------------------------------------------------------

def cmd_run(args):
    cfg = harness.parse_config(args.config)
    if args.outdir:
        cfg.outdir = args.outdir
    fits = harness.run_experiment(cfg)
    for name, fit in fits.items():
        print(fit.line(name))
    print(f"report written to {Path(cfg.outdir) / (cfg.experiment + '_report.txt')}")
    return 0


def cmd_solve_ch(args):
    d = _datum(args)
    N = args.N or reference_resolution(args.eps)
    ref = reference_schedule(args.eps, (), N)
    dc = args.dt_coarse or ref.dt_coarse
    sched = Schedule(dt_coarse=dc, dt_fine=args.dt_fine or dc / 10.0, switch_time=args.switch_time,
                     snapshots=tuple(_floats(args.snapshots)) if args.snapshots else ())
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    if args.equation == "kdv":
        snaps = kdv_evolve(d, args.tmax, sched, N=N, L=args.L)
        recs = []
    else:
        snaps, recs = evolve(d, args.tmax, sched, N=N, L=args.L, check_energy=False)
        write_energy_csv(out / "energy.csv", recs)
    for s in snaps:
        write_snapshot_csv(out / f"{args.equation}_eps{args.eps:.6g}_t{s.t:.6g}.csv", s)
    drift = max((r.drift for r in recs), default=0.0)
    print(f"{len(snaps)} snapshot(s) in {out}; N={N}; max energy drift {drift:.3e}")
    return 0


def cmd_hopf(args):
    d = _datum(args)
    x = _xgrid(args, (-args.L, args.L))
    tc, xc, uc = critical_point(d)
    branch = None if args.t <= tc else "left"
    _write_rows(args.output, ["x", "u"], zip(x, solve_hopf(d, x, args.t, branch=branch)))
    return 0


def cmd_whitham(args):
    d = _datum(args)
    mod = harness._toolkit(d)
    le, te = mod.leading_edge(args.t), mod.trailing_edge(args.t)
    x = None
    if args.xmin is not None or args.xmax is not None:
        x = _xgrid(args, (le.xminus, te.xplus))
    sol = mod.solve_zone(args.t, xgrid=x, n=args.npts)
    C = sol.speeds()
    rows = [(xx, *b, *c) for xx, b, c in zip(sol.xgrid, sol.triples, C) if np.all(np.isfinite(b))]
    _write_rows(args.output, ["x", "b1", "b2", "b3", "C1", "C2", "C3"], rows)
    print(f"# x- = {float(sol.xminus)!r}, x+ = {float(sol.xplus)!r}", file=sys.stderr)
    return 0


def cmd_onephase(args):
    if args.triple:
        b = _floats(args.triple)
        if len(b) != 3:
            raise SystemExit("--triple needs three values")
        T = RiemannTriple(*b, args.nu)
        P = derive_params(T, qshift=args.q)
        lam = args.eps * P.wavelength
        x = _xgrid(args, (T.c * args.t, T.c * args.t + lam))
        u = eval_onephase(x, args.t, P, T, args.eps)
    else:
        asym = harness.composite_asymptotic(_datum(args), args.t)
        x = _xgrid(args, (asym.xminus, asym.xplus))
        u = asym(x)
    _write_rows(args.output, ["x", "u"], zip(x, u))
    return 0


def cmd_multiscale(args):
    d = _datum(args)
    fr = frame_at(d, args.t)
    span = args.span * args.eps ** (2.0 / 3.0)
    x = _xgrid(args, (fr.edge.xminus - span, fr.edge.xminus + span))
    _write_rows(args.output, ["x", "u_multiscale"], zip(x, eval_multiscale(x, args.t, args.eps, fr)))
    print(f"# x- = {float(fr.edge.xminus)!r}, alpha = {fr.alpha!r}, beta = {fr.beta!r}", file=sys.stderr)
    return 0


def cmd_hastings_mcleod(args):
    hm = solve_hastings_mcleod(Lz=args.Lz, n=args.n, seed=args.seed)
    _write_rows(args.output, ["z", "A", "Az"], zip(hm.zgrid, hm.A, hm.Az))
    print(f"# residual = {hm.residual:.3e}, A(0) = {float(hm(0.0))!r}", file=sys.stderr)
    return 0


def cmd_compare(args):
    cfg = harness.RunConfig(profile=args.profile, nu=args.nu, eps_list=(args.eps,), L=args.L,
                            outdir=args.outdir, amplitude=args.amplitude,
                            N_per_eps=(args.N,) if args.N else None)
    f = harness.ch_snapshots(cfg, times=(args.t,))[args.eps][args.t]
    d = _datum(args)
    tc = critical_point(d)[0]
    if args.t <= tc:
        ua = solve_hopf(d, f.x, args.t, branch="left")
        err = np.abs(f.values - ua)
        print(f"eps={args.eps:.6g} t={args.t:g}  Linf(u_CH - u_Hopf) = {err.max():.6e}")
    else:
        asym = harness.composite_asymptotic(d, args.t)
        ua = asym(f.x)
        re = harness.compare_regions(f, asym, values=ua)
        print(f"eps={args.eps:.6g} t={args.t:g}  x-={re.xminus:.6f} x+={re.xplus:.6f}")
        for k in ("interior", "leading", "trailing", "exterior"):
            print(f"  {k:<9s} {getattr(re, k):.6e}")
        for fl in re.flags:
            print(f"  note: {fl}")
    if args.output:
        _write_rows(args.output, ["x", "u_ch", "u_asym", "diff"], zip(f.x, f.values, ua, f.values - ua))
    return 0


def cmd_scaling(args):
    samples = []
    with open(args.csv) as fh:
        for row in csv.DictReader(fh):
            samples.append((float(row[args.eps_column]), float(row[args.value_column])))
    fit = harness.regress(samples)
    print(fit.line(args.label))
    return 0


# -- parser ------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="dsl", description="Small-dispersion CH: solvers, asymptotics and scaling experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, t=1.0, eps=0.1):
        sp.add_argument("--profile", default="sech2")
        sp.add_argument("--amplitude", type=float, default=1.0)
        sp.add_argument("--nu", type=float, default=1.2)
        sp.add_argument("--eps", type=float, default=eps)
        sp.add_argument("--t", type=float, default=t)
        sp.add_argument("-o", "--output", default=None, help="CSV path (default stdout)")

    def grid(sp, npts=401):
        sp.add_argument("--xmin", type=float)
        sp.add_argument("--xmax", type=float)
        sp.add_argument("--npts", type=int, default=npts)

    sp = sub.add_parser("run", help="run an experiment from a key = value config file")
    sp.add_argument("config")
    sp.add_argument("--outdir")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("solve-ch", help="integrate CH (or KdV) and write snapshots")
    sp.add_argument("--profile", default="sech2")
    sp.add_argument("--amplitude", type=float, default=1.0)
    sp.add_argument("--nu", type=float, default=1.2)
    sp.add_argument("--eps", type=float, default=0.1)
    sp.add_argument("--N", type=int)
    sp.add_argument("--L", type=float, default=20.0)
    sp.add_argument("--tmax", type=float, default=1.0)
    sp.add_argument("--dt-coarse", type=float)
    sp.add_argument("--dt-fine", type=float)
    sp.add_argument("--switch-time", type=float, default=0.4)
    sp.add_argument("--snapshots", default="", help="comma separated times")
    sp.add_argument("--equation", choices=("ch", "kdv"), default="ch")
    sp.add_argument("--outdir", default="dsl_out")
    sp.set_defaults(func=cmd_solve_ch)

    sp = sub.add_parser("hopf", help="Hopf solution (left branch after breaking)")
    common(sp)
    sp.add_argument("--L", type=float, default=20.0)
    grid(sp, 2001)
    sp.set_defaults(func=cmd_hopf)

    sp = sub.add_parser("whitham", help="Riemann invariants and speeds across the Whitham zone")
    common(sp)
    grid(sp, 120)
    sp.set_defaults(func=cmd_whitham)

    sp = sub.add_parser("onephase", help="one-phase wave for a fixed triple, or the modulated composite")
    common(sp)
    sp.add_argument("--triple", help="b1,b2,b3 (fixed wave); omit for the Whitham-modulated wave")
    sp.add_argument("--q", type=float, default=0.0, help="phase shift for a fixed triple")
    grid(sp, 801)
    sp.set_defaults(func=cmd_onephase)

    sp = sub.add_parser("multiscale", help="Painleve-II multiscale solution near the leading edge")
    common(sp, eps=0.01)
    sp.add_argument("--span", type=float, default=10.0, help="half-width in units of eps^(2/3)")
    grid(sp, 1001)
    sp.set_defaults(func=cmd_multiscale)

    sp = sub.add_parser("hastings-mcleod", help="Hastings-McLeod solution of Painleve II")
    sp.add_argument("--Lz", type=float, default=12.0)
    sp.add_argument("--n", type=int, default=6000)
    sp.add_argument("--seed", choices=("airy", "sqrt"), default="airy")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_hastings_mcleod)

    sp = sub.add_parser("compare", help="CH against Hopf / composite asymptotics for one eps")
    common(sp)
    sp.add_argument("--N", type=int)
    sp.add_argument("--L", type=float, default=20.0)
    sp.add_argument("--outdir", default="dsl_out")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("scaling", help="log-log regression of a CSV of (eps, value) samples")
    sp.add_argument("csv")
    sp.add_argument("--eps-column", default="eps")
    sp.add_argument("--value-column", default="value")
    sp.add_argument("--label", default="fit")
    sp.set_defaults(func=cmd_scaling)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
