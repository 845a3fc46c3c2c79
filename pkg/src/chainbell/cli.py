"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data or validation error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .bounds import bounds_report, coincidence_bound, eta_crit, gamma_crit, quantum_value
from .coincidence import tally
from .errors import DomainError, IncompleteDataError, MalformedInputError
from .experiment import ExperimentConfig, SweepRow, build_report, generate, run, sweep_row
from .formats import dumps_report, read_events, sha256_file, write_events, write_report, write_sweep

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _settings(text: str) -> int:
    v = _positive_int(text)
    if v < 2:
        raise argparse.ArgumentTypeError(f"number of settings must be >= 2, got {v}")
    return v


def _probability(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1], got {v}")
    return v


def _unit_interval(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not 0 <= v <= 1:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {v}")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _grid(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


MODES = ("sync", "stream")


def table_rows(max_n: int) -> list[dict]:
    return [
        {"n": n, "gamma_crit": gamma_crit(n), "eta_crit": eta_crit(n), "chsh": n == 2}
        for n in range(2, max_n + 1)
    ]


def format_table(rows: list[dict]) -> str:
    out = [f"{'N':<9}{'gamma_crit':>12}{'eta_crit':>12}"]
    for r in rows:
        label = f"{r['n']} (CHSH)" if r["chsh"] else str(r["n"])
        out.append(f"{label:<9}{100 * r['gamma_crit']:>11.2f}%{100 * r['eta_crit']:>11.2f}%")
    return "\n".join(out)


def cmd_table(args) -> int:
    rows = table_rows(args.max_n)
    print(format_table(rows))
    if args.json:
        write_report(args.json, {"version": __version__, "rows": rows})
    return EXIT_OK


def cmd_bounds(args) -> int:
    rep = bounds_report(args.n, args.gamma)
    print(f"N                 {rep.n}")
    print(f"local bound       {rep.local_bound:.6f}")
    print(f"quantum value     {rep.quantum_value:.6f}")
    print(f"gamma_crit        {100 * rep.gamma_crit:.2f}%  ({rep.gamma_crit:.15g})")
    print(f"eta_crit          {100 * rep.eta_crit:.2f}%  ({rep.eta_crit:.15g})")
    print(f"p_crit            {rep.p_crit:.6f}")
    cb = rep.coincidence_bound_at
    if cb is not None:
        flag = "  [vacuous: clamped to 2N]" if cb.vacuous else ""
        print(f"bound at gamma={cb.gamma:g}  raw {cb.raw:.6f}  clamped {cb.clamped:.6f}{flag}")
    if args.out:
        write_report(args.out, {"version": __version__, **rep.to_dict()})
    return EXIT_OK


def _config_from_args(args) -> ExperimentConfig:
    common = dict(
        trials_per_pair=args.trials, seed=args.seed, delta_t=args.delta_t,
        mode=args.mode, sampling=args.sampling,
    )
    if args.source == "quantum":
        return ExperimentConfig(n=args.n, source="quantum", **common)
    if args.gamma is not None:
        return ExperimentConfig.from_gamma(args.n, args.gamma, **common)
    if args.p is None:
        raise DomainError("one of --p or --gamma is required for the local model")
    return ExperimentConfig(n=args.n, p=args.p, **common)


def _summary(doc: dict) -> str:
    if doc["error"]:
        return f"error: {doc['error']}"
    return (f"s_hat = {doc['s_hat']:.6f} +- {doc['s_se']:.6f}   gamma_hat = {doc['gamma_hat']:.6f}   "
            f"quantum = {doc['bounds']['quantum']:.6f}   local = {doc['bounds']['local']:g}")


def cmd_simulate(args) -> int:
    config = _config_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trials = generate(config)
    report = run(config, trials=trials).to_dict()
    write_events(out / "events.csv", trials)
    write_report(out / "report.json", report)
    print(_summary(report))
    print(f"wrote {out / 'events.csv'} and {out / 'report.json'}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    trials = read_events(args.events)
    n = args.n
    if int(trials.alice_setting.max(initial=0)) > n or int(trials.bob_setting.max(initial=0)) > n:
        raise MalformedInputError(f"event file uses settings above --n {n}")
    t = tally(trials, n, args.delta_t, args.mode)
    cfg = {"n": n, "delta_t": args.delta_t, "mode": args.mode,
           "events_sha256": sha256_file(args.events)}
    report = build_report(cfg, t.stats, n, non_chained=t.non_chained, incomplete=t.incomplete,
                          singles=t.singles).to_dict()
    if t.non_chained:
        print(f"warning: {t.non_chained} coincidences with non-chained settings excluded", file=sys.stderr)
    if args.out:
        write_report(args.out, report)
    else:
        sys.stdout.write(dumps_report(report))
    print(_summary(report), file=sys.stderr if not args.out else sys.stdout)
    return EXIT_DATA if report["error"] else EXIT_OK


def cmd_sweep(args) -> int:
    n = args.n
    gc = gamma_crit(n)
    rows = []
    failed = False
    for k, g in enumerate(args.gammas):
        try:
            rows.append(sweep_row(n, g, args.trials, args.seed, k, delta_t=args.delta_t,
                                  mode=args.mode))
        except DomainError as exc:
            failed = True
            bound = coincidence_bound(n, g).clamped if 0 < g <= 1 else float("nan")
            rows.append(SweepRow(g, None, None, None, bound, quantum_value(n), error=str(exc)))
            print(f"error: row {k}: {exc}", file=sys.stderr)
    for r in rows:
        if r.error is None and r.s_hat is not None:
            print(f"gamma={r.gamma:.6f}  gamma_hat={r.gamma_hat:.6f}  s_hat={r.s_hat:.6f} +- {r.se:.6f}  "
                  f"bound={r.bound:.6f}  quantum={r.quantum:.6f}")
    if args.out:
        write_sweep(args.out, rows)
    if failed:
        print(f"gamma_crit,{n} = {100 * gc:.2f}%", file=sys.stderr)
    return EXIT_DATA if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chainbell", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"chainbell {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("table", help="critical coincidence probability and detection efficiency per N")
    p.add_argument("max_n", nargs="?", type=_settings, default=5)
    p.add_argument("--json", metavar="PATH", help="also write the rows as JSON")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("bounds", help="closed-form bounds for one N")
    p.add_argument("--n", type=_settings, required=True)
    p.add_argument("--gamma", type=_probability)
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_bounds)

    def experiment_flags(p, *, targets: bool):
        p.add_argument("--n", type=_settings, required=True)
        if targets:
            g = p.add_mutually_exclusive_group()
            g.add_argument("--p", type=_unit_interval)
            g.add_argument("--gamma", type=_probability)
            p.add_argument("--source", choices=("lhv", "quantum"), default="lhv")
            p.add_argument("--sampling", choices=("chained", "uniform"), default="chained")
        p.add_argument("--trials", type=_positive_int, required=True, help="trials per chained pair")
        p.add_argument("--seed", type=_seed, default=0)
        p.add_argument("--delta-t", type=_positive_float, default=1.5)
        p.add_argument("--mode", choices=MODES, default="sync")

    p = sub.add_parser("simulate", help="generate events and a report")
    experiment_flags(p, targets=True)
    p.add_argument("--out", required=True, metavar="DIR")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="match an event file and report statistics")
    p.add_argument("events", metavar="EVENTS")
    p.add_argument("--n", type=_settings, required=True)
    p.add_argument("--delta-t", type=_positive_float, default=1.5)
    p.add_argument("--mode", choices=MODES, default="sync")
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="fake the quantum value over a grid of coincidence probabilities")
    experiment_flags(p, targets=False)
    p.add_argument("--gammas", type=_grid, required=True, help="comma-separated grid")
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DomainError, MalformedInputError, IncompleteDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
