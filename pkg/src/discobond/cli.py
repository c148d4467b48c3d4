"""Command-line front end.

    discobond price       [--config PATH] [--force] [--analytic] [--out PATH]
    discobond stability   [--config PATH] [--csv PATH]
    discobond figures     [--config PATH] [--force] --outdir DIR
    discobond dump-config [--config PATH] [--out PATH]

``--variant mu_r=printed|recomputed`` and ``--variant eq26=<name>`` may be
given with any command.  Exit codes: 0 ok, 2 configuration error, 3
stability refusal, 4 non-finite numbers.
"""

from __future__ import annotations

import argparse
import io
import logging
import os
import sys
from pathlib import Path

import numpy as np

from discobond import analytic, config as cfg
from discobond.errors import (
    AmbiguousTime,
    ConfigError,
    OutOfDomain,
    NonFiniteValue,
    StabilityViolation,
    UnsupportedCorrelation,
)
from discobond.fd import PriceSurface, solve
from discobond.model import ModelSpec
from discobond.risk import credit_spread, duration, duration_flat_rate
from discobond.stability import check_all

log = logging.getLogger("discobond")

EXIT_OK, EXIT_CONFIG, EXIT_STABILITY, EXIT_NUMERIC = 0, 2, 3, 4


def fmt(v: float) -> str:
    out = f"{float(v):.6f}"
    return "0.000000" if out == "-0.000000" else out


def write_csv(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _solve(config: cfg.RunConfig, force: bool, model: ModelSpec | None = None):
    """Solve, returning the surface and an optional warning line."""
    model = model or config.model
    grid = config.effective_grid()
    warning = None
    try:
        surface = solve(model, grid)
    except (StabilityViolation, UnsupportedCorrelation) as exc:
        if not force or isinstance(exc, UnsupportedCorrelation):
            raise
        warning = f"# WARNING: stability conditions fail, results may be meaningless: {exc}"
        surface = solve(model, grid, enforce_stability=False)
    return surface, warning


# price ---------------------------------------------------------------------

def price_rows(config: cfg.RunConfig, surface: PriceSurface | None, use_analytic=False):
    rows = []
    model = config.model
    for V in config.price_V:
        for r in config.price_r:
            for t in config.price_t:
                if use_analytic:
                    value = analytic.analytic_last_interval(V, r, t, model, variant=config.eq26)
                else:
                    value = surface.query(V, r, t, config.side)
                rows.append((V, r, t, float(value)))
    return rows


def cmd_price(config: cfg.RunConfig, force=False, use_analytic=False) -> str:
    surface, warning = (None, None) if use_analytic else _solve(config, force)
    text = write_csv(("V", "r", "t", "price"), price_rows(config, surface, use_analytic))
    return (warning + "\n" + text) if warning else text


# stability -----------------------------------------------------------------

STABILITY_HEADER = ("interval", "scheme", "condition", "attained", "bound", "margin",
                    "worst_r", "satisfied", "verdict")


def stability_table(config: cfg.RunConfig):
    rows = []
    for rep in check_all(config.effective_grid(), config.model):
        scheme = rep.scheme.value if rep.scheme else "none"
        if not rep.conditions:
            rows.append((rep.interval, scheme, "-", "", "", "", "", "", rep.verdict))
        for c in rep.conditions:
            rows.append((
                rep.interval, scheme, c.name, fmt(c.attained), fmt(c.bound), fmt(c.margin),
                "" if c.worst_r is None else fmt(c.worst_r), "yes" if c.satisfied else "no",
                rep.verdict,
            ))
    return rows


def cmd_stability(config: cfg.RunConfig) -> tuple[str, str]:
    """Plain-text report and the same table as CSV."""
    reports = check_all(config.effective_grid(), config.model)
    rows = stability_table(config)
    csv = ",".join(STABILITY_HEADER) + "\n" + "".join(
        ",".join(str(v) for v in row) + "\n" for row in rows
    )
    lines = []
    for rep in reports:
        scheme = rep.scheme.value if rep.scheme else "none"
        lines.append(
            f"interval {rep.interval}: scheme={scheme} verdict={rep.verdict} "
            f"dt={fmt(rep.dt)} mu_x={fmt(rep.mu_x)} mu_r={fmt(rep.mu_r)}"
        )
        for c in rep.conditions:
            at = "" if c.worst_r is None else f" at r={fmt(c.worst_r)}"
            op = "<" if c.strict else "<="
            lines.append(
                f"  {c.name:<14} {fmt(c.attained)} {op} {fmt(c.bound)}  "
                f"margin {fmt(c.margin)}{at}  {'ok' if c.satisfied else 'FAIL'}"
            )
        for note in rep.notes:
            lines.append(f"  note: {note}")
    return "\n".join(lines) + "\n", csv


# figures -------------------------------------------------------------------

FIG_V = 20.276


def _time_axis(surface: PriceSurface, include_maturity=True):
    """``(t, side)`` pairs in time order; coupon dates appear before then after."""
    out = []
    coupons = surface.coupon_dates
    seen = set()
    for t, owner in zip(surface.times, surface.interval_index):
        t = float(t)
        if not include_maturity and t >= surface.times[-1] - 1e-12:
            continue
        side = None
        for k, T in enumerate(coupons):
            if abs(t - T) <= 1e-9:
                side = "before" if owner == k else "after"
        key = (round(t, 12), side)
        if key in seen:
            continue
        seen.add(key)
        out.append((t, side))
    return out


def _t_series(surfaces, points, fn, include_maturity=True):
    axis = _time_axis(surfaces[0], include_maturity)
    rows = []
    for t, side in axis:
        rows.append([t] + [float(fn(s, p, t, side)) for s, p in zip(surfaces, points)])
    return rows


def figures(config: cfg.RunConfig, force=False) -> dict[str, str]:
    """CSV text per figure file name."""
    model = config.model
    base, _ = _solve(config, force)
    out = {}

    r_axis = np.round(np.arange(0.02, 0.1 + 1e-9, 0.005), 6)
    Vs = (5.0, 12.3, 33.4)
    rows = [[r] + [float(base.query(V, r, 0.0)) for V in Vs] for r in r_axis]
    out["figure_4_1.csv"] = write_csv(["r"] + [f"V={V:g}" for V in Vs], rows)

    V_axis = np.round(np.arange(5.0, 35.0 + 1e-9, 0.5), 6)
    rs = (0.02, 0.04, 0.08)
    rows = [[V] + [float(base.query(V, r, 0.0)) for r in rs] for V in V_axis]
    out["figure_4_2.csv"] = write_csv(["V"] + [f"r={r:g}" for r in rs], rows)

    price = lambda s, p, t, side: s.query(p[0], p[1], t, side)  # noqa: E731
    pts = [(FIG_V, r) for r in rs]
    out["figure_4_3.csv"] = write_csv(
        ["t"] + [f"r={r:g}" for r in rs], _t_series([base] * 3, pts, price))
    Vs = (9.11, 10.06, 11.13, 12.3)
    pts = [(V, 0.04) for V in Vs]
    out["figure_4_4.csv"] = write_csv(
        ["t"] + [f"V={V:g}" for V in Vs], _t_series([base] * 4, pts, price))

    def spread(s, p, t, side):
        return credit_spread(s, p[0], p[1], t, s.spec, side)

    Vs = (13.6, 20.3, 30.2)
    pts = [(V, 0.04) for V in Vs]
    out["figure_4_5.csv"] = write_csv(
        ["t"] + [f"V={V:g}" for V in Vs], _t_series([base] * 3, pts, spread, False))
    rs = (0.02, 0.04, 0.06)
    pts = [(20.3, r) for r in rs]
    out["figure_4_6.csv"] = write_csv(
        ["t"] + [f"r={r:g}" for r in rs], _t_series([base] * 3, pts, spread, False))

    sched = model.schedule
    cs = (0.0, 1.0, 2.0)
    surfs = [_solve(config, force, model.with_schedule(coupons=(c,) * sched.n))[0] for c in cs]
    out["figure_4_7.csv"] = write_csv(
        ["t"] + [f"C={c:g}" for c in cs],
        _t_series(surfs, [(FIG_V, 0.04)] * 3, spread, False))
    scales = (0.5, 1.0, 2.0)
    surfs = [
        _solve(config, force, model.with_schedule(
            intensities=tuple(k * v for v in sched.intensities)))[0]
        for k in scales
    ]
    out["figure_4_8.csv"] = write_csv(
        ["t"] + [f"lambda_scale={k:g}" for k in scales],
        _t_series(surfs, [(FIG_V, 0.04)] * 3, spread, False))

    out["figure_4_9a.csv"], out["figure_4_9b.csv"] = _figure_4_9(config)

    def dur(s, p, t, side):
        return duration(s, p[0], p[1], t, side)

    Vs = (13.6, 20.3, 30.2)
    out["figure_4_10.csv"] = write_csv(
        ["t"] + [f"V={V:g}" for V in Vs],
        _t_series([base] * 3, [(V, 0.04) for V in Vs], dur, False))
    rs = (0.02, 0.04, 0.06)
    out["figure_4_11.csv"] = write_csv(
        ["t"] + [f"r={r:g}" for r in rs],
        _t_series([base] * 3, [(FIG_V, r) for r in rs], dur, False))
    return out


def zcb_surface(config: cfg.RunConfig, maturity: float | None = None) -> PriceSurface:
    """Surface holding the Vasicek discount bond itself, on the run's lattice."""
    model = config.model
    grid = config.effective_grid()
    T = model.schedule.maturity if maturity is None else maturity
    n, dt = grid.steps(T)
    times = dt * np.arange(n + 1)
    times[-1] = T
    Z = analytic.zcb_price(grid.r_nodes[None, :], times[:, None], T, model.vasicek)
    values = np.repeat(Z[:, None, :], grid.nx, axis=1)
    return PriceSurface(grid.x_nodes, grid.r_nodes, times, values, np.zeros(len(times), int))


def _figure_4_9(config: cfg.RunConfig):
    model = config.model
    sched = model.schedule
    flows = list(zip(sched.dates, sched.coupons))
    zs = zcb_surface(config)
    r = 0.04
    rows_a, rows_b = [], []
    for t in zs.times[:-1]:
        t = float(t)
        live = [(ti, c) for ti, c in flows if ti > t + 1e-12]
        rows_a.append((t, duration_flat_rate(live, r, t)))
        bt = float(analytic.b_tilde(t, sched.maturity, model.vasicek))
        rows_b.append((t, bt, float(duration(zs, 1.0, r, t))))
    return (
        write_csv(("t", "flat_rate_duration"), rows_a),
        write_csv(("t", "b_tilde", "zcb_fd_duration"), rows_b),
    )


# entry point ---------------------------------------------------------------

def _variant(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError("expected NAME=VALUE")
    name, value = (p.strip() for p in text.split("=", 1))
    return name, value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value configuration file")
    common.add_argument("--variant", type=_variant, action="append", default=[],
                        metavar="NAME=VALUE", help="mu_r=printed|recomputed, eq26=<variant>")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="discobond", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("price", parents=[common], help="price table as CSV")
    sp.add_argument("--force", action="store_true", help="solve even if unstable")
    sp.add_argument("--analytic", action="store_true",
                    help="closed-form last-interval price instead of finite differences")
    sp.add_argument("--out", type=Path)
    ss = sub.add_parser("stability", parents=[common], help="stability conditions report")
    ss.add_argument("--csv", type=Path, help="also write the report as CSV")
    sf = sub.add_parser("figures", parents=[common], help="CSV data for every figure")
    sf.add_argument("--force", action="store_true")
    sf.add_argument("--outdir", type=Path, default=Path("."))
    sd = sub.add_parser("dump-config", parents=[common], help="print the effective configuration")
    sd.add_argument("--out", type=Path)
    return p


def load_config(args) -> cfg.RunConfig:
    config = cfg.parse(args.config.read_text()) if args.config else cfg.RunConfig()
    for name, value in args.variant:
        config = config.with_variant(name, value)
    return config


def _emit(text: str, path: Path | None):
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text, newline="\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if os.environ.get("DISCOBOND_THREADS"):
        log.info("DISCOBOND_THREADS is ignored: steps are vectorised in one process")
    try:
        config = load_config(args)
        if args.command == "price":
            _emit(cmd_price(config, args.force, args.analytic), args.out)
        elif args.command == "stability":
            text, csv = cmd_stability(config)
            sys.stdout.write(text)
            if args.csv:
                args.csv.write_text(csv, newline="\n")
        elif args.command == "figures":
            args.outdir.mkdir(parents=True, exist_ok=True)
            for name, text in figures(config, args.force).items():
                (args.outdir / name).write_text(text, newline="\n")
                log.info("wrote %s", args.outdir / name)
        else:
            _emit(cfg.dump(config), args.out)
    # UnsupportedCorrelation is also a ValueError, so it must be caught first
    except (StabilityViolation, UnsupportedCorrelation) as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_STABILITY
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OutOfDomain, AmbiguousTime, ValueError) as exc:
        print(f"bad request: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonFiniteValue as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
