"""Command line: ``angiometa {simulate,compare,sweep,converge,check}``.

Exit codes: 0 success, 1 configuration or usage error, 2 invariant failure,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import io
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from .characteristics import InflowError, NumericalError
from .config import ConfigError, RunConfig, load_config, same_discretization, with_override
from .transport import Quadrature, SimulationSeries, simulate
from .verify import check_bounds, convergence_study

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT, EXIT_NUMERICAL = 0, 1, 2, 3


class InvariantFailure(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def write_csv(ser: SimulationSeries, fh):
    fh.write(",".join(SimulationSeries.COLUMNS) + "\n")
    for row in ser.rows():
        fh.write(",".join(repr(float(v)) for v in row) + "\n")


def series_csv(ser: SimulationSeries) -> str:
    buf = io.StringIO()
    write_csv(ser, buf)
    return buf.getvalue()


def apply_flags(cfg: RunConfig, args) -> RunConfig:
    kw = {}
    if args.dirac is not None:
        kw["dirac_mode"] = args.dirac
    if args.quadrature is not None:
        kw["quadrature"] = args.quadrature
    if args.data_mode is not None:
        kw["data_mode"] = args.data_mode
    if not kw:
        return cfg
    try:
        return replace(cfg, disc=replace(cfg.disc, **kw))
    except ValueError as exc:
        raise ConfigError("--quadrature/--data-mode", str(exc)) from None


def run_config(cfg: RunConfig):
    """Simulate one configuration. Returns ``(run, report or None)``."""
    run = simulate(cfg.build_model(), cfg.disc, cfg.rho0(),
                   visible_threshold=cfg.visible_threshold)
    report = check_bounds(run.state) if cfg.check_bounds else None
    return run, report


def _summary(cfg: RunConfig):
    run, _ = run_config(cfg)
    s = run.series
    return dict(final_size=float(s.x_p[-1]), final_MI=float(s.MI[-1]), min_size=float(s.x_p.min()),
                final_theta=float(s.theta_p[-1]), final_visible=float(s.visible[-1]))


def _map(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _emit(text, path):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load(args, allow_many=False):
    paths = args.config or []
    if not paths:
        raise ConfigError("--config", "required")
    if len(paths) > 1 and not allow_many:
        raise ConfigError("--config", "this subcommand takes a single configuration")
    return [apply_flags(load_config(p), args) for p in paths]


def cmd_simulate(args):
    cfg, = _load(args)
    run, report = run_config(cfg)
    _emit(series_csv(run.series), args.output or cfg.output)
    if report is not None and not report.passed:
        sys.stderr.write(report.table(every=max(1, len(report.t) // 20)) + "\n")
        raise InvariantFailure("a priori estimate check failed")


def cmd_compare(args):
    cfgs = _load(args, allow_many=True)
    if len(cfgs) < 2:
        raise ConfigError("--config", "compare needs at least two configurations")
    for c, p in zip(cfgs[1:], args.config[1:]):
        if not same_discretization(cfgs[0], c):
            raise ConfigError("discretization", f"{p} does not share the discretization of {args.config[0]}")
    rows = _map(_summary, cfgs, args.jobs)
    names = [c.name or p for c, p in zip(cfgs, args.config)]
    lines = ["name,final_size_mm3,final_MI,min_size_mm3,final_theta_mm3,final_visible"]
    for n, r in zip(names, rows):
        lines.append(",".join([n] + [repr(r[k]) for k in
                                     ("final_size", "final_MI", "min_size", "final_theta", "final_visible")]))
    order = np.argsort([r["final_MI"] for r in rows], kind="stable")
    lines.append("")
    lines.append("rank by final MI (lowest first): " + ", ".join(names[i] for i in order))
    for a in range(len(rows)):
        for b in range(a + 1, len(rows)):
            rel = "<" if rows[a]["final_MI"] < rows[b]["final_MI"] else (
                ">" if rows[a]["final_MI"] > rows[b]["final_MI"] else "=")
            lines.append(f"MI[{names[a]}] {rel} MI[{names[b]}]")
    _emit("\n".join(lines) + "\n", args.output)


def cmd_sweep(args):
    cfg, = _load(args)
    if not cfg.sweep_key or not cfg.sweep_values:
        raise ConfigError("sweep.key", "sweep needs sweep.key and sweep.values")
    cfgs = [with_override(cfg, cfg.sweep_key, v) for v in cfg.sweep_values]
    rows = _map(_summary, cfgs, args.jobs)
    lines = [f"{cfg.sweep_key},final_size_mm3,final_MI,min_size_mm3,final_theta_mm3,final_visible"]
    for v, r in zip(cfg.sweep_values, rows):
        lines.append(",".join([v] + [repr(r[k]) for k in
                                     ("final_size", "final_MI", "min_size", "final_theta", "final_visible")]))
    mis = [r["final_MI"] for r in rows]
    trend = ("non-increasing" if all(b <= a for a, b in zip(mis, mis[1:])) else
             "non-decreasing" if all(b >= a for a, b in zip(mis, mis[1:])) else "not monotone")
    lines.append(f"# final MI is {trend} along the sweep")
    _emit("\n".join(lines) + "\n", args.output)


def cmd_converge(args):
    cfg, = _load(args)
    rep = convergence_study(cfg.build_model(), cfg.disc, cfg.converge_levels,
                            cfg.converge_ref_factor, label=cfg.disc.quadrature.value)
    _emit(rep.table() + "\n", args.output)
    if cfg.converge_min_order is not None and rep.order_MI < cfg.converge_min_order:
        raise InvariantFailure(f"observed order {rep.order_MI:.3f} < {cfg.converge_min_order}")


def cmd_check(args):
    cfg, = _load(args)
    run = simulate(cfg.build_model(), cfg.disc, cfg.rho0(), visible_threshold=cfg.visible_threshold)
    rep = check_bounds(run.state)
    _emit(rep.table(every=max(1, len(rep.t) // 20)) + "\n", args.output)
    if not rep.passed:
        raise InvariantFailure("a priori estimate check failed")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", action="append", metavar="PATH",
                        help="configuration file (repeat for compare)")
    common.add_argument("--output", metavar="PATH", help="write results here instead of stdout")
    common.add_argument("--dirac", action=argparse.BooleanOptionalAction, default=None,
                        help="collapse the birth repartition to a point mass")
    common.add_argument("--quadrature", choices=[q.value for q in Quadrature])
    common.add_argument("--data-mode", choices=["average", "point"])
    common.add_argument("--seedless", action="store_true",
                        help="reserved; the solver has no stochastic elements")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for compare/sweep")

    p = _Parser(prog="angiometa", description="Metastatic density under anti-angiogenic and cytotoxic drugs.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, fn, text in (
            ("simulate", cmd_simulate, "run one configuration and write the per-step CSV"),
            ("compare", cmd_compare, "run several configurations and rank them"),
            ("sweep", cmd_sweep, "vary one configuration key over a list"),
            ("converge", cmd_converge, "observed convergence order under refinement"),
            ("check", cmd_check, "check the a priori estimates on a run")):
        sp = sub.add_parser(name, parents=[common], help=text, description=text)
        sp.set_defaults(func=fn)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except InvariantFailure as exc:
        sys.stderr.write(f"invariant failure: {exc}\n")
        return EXIT_INVARIANT
    except (NumericalError, InflowError, FloatingPointError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
