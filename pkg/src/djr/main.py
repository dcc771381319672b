from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from rich.console import Console
from rich.table import Table

from djr.core.errors import DJRError
from djr.core.logging_setup import level_for, setup_logging
from djr.core.settings import Settings
from djr.measure import (
    Atom,
    certified_measure,
    default_scan_level,
    density_in_level,
    rigidity_check,
    spacer_event,
)
from djr.modular import nq_set, skew_order, skew_orbit, sweep_rows
from djr.pipeline import VerificationPipeline
from djr.reporting import build_html_report, dump_json, write_csv_rows, write_json_report
from djr.tower import rank_one_report, tower_spec
from djr.utils.rationals import format_fraction, format_measure
from djr.words import (
    export_block,
    load_word,
    make_params,
    materialize_block,
    symbol_at,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def _positive(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return number


def _natural(value: str) -> int:
    number = int(value)
    if number < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {value}")
    return number


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="TOML file with a [djr] table.")
    common.add_argument("--cap", type=_positive, default=None, help="Materialization cap in symbols.")
    common.add_argument("--depth", type=_positive, default=None, help="Scan level offset M - N.")
    common.add_argument(
        "--format", choices=("text", "json", "csv"), default=None, help="Output format."
    )
    common.add_argument("--out", type=Path, default=None, help="Write output to this file.")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Debug logging.")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Warnings only.")

    family = argparse.ArgumentParser(add_help=False)
    family.add_argument("--a", type=_positive, required=True)
    family.add_argument("--b", type=_positive, required=True)

    parser = argparse.ArgumentParser(
        prog="djr",
        description="Verification toolkit for generalized del Junco-Rudolph shifts.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    block = subparsers.add_parser("block", parents=[common, family], help="Print B_k or one symbol.")
    block.add_argument("--k", type=_natural, required=True)
    block.add_argument("--pos", type=_natural, default=None, help="Read one symbol lazily.")

    density = subparsers.add_parser(
        "density", parents=[common, family], help="Exact density d_M of a word on B_M^Z."
    )
    density.add_argument("--word", required=True)
    density.add_argument("--level", type=_natural, required=True, help="Scan level M.")

    measure = subparsers.add_parser(
        "measure", parents=[common, family], help="Certified measure of a cylinder or S_k."
    )
    target = measure.add_mutually_exclusive_group(required=True)
    target.add_argument("--word", help="Cylinder of this word at offset 0.")
    target.add_argument("--spacer", type=_positive, metavar="K", help="The spacer event S_K.")
    measure.add_argument("--level", type=_natural, default=None, help="Scan level M.")

    rigidity = subparsers.add_parser(
        "rigidity", parents=[common, family], help="Certify delta(T^h_k) < 2^-k."
    )
    rigidity.add_argument("--k", type=_natural, required=True)
    rigidity.add_argument("--extra-levels", type=_positive, default=3)

    skew = subparsers.add_parser("skew", parents=[common], help="Iterate T_(q,b) from (1,0).")
    skew.add_argument("--q", type=int, required=True)
    skew.add_argument("--b", type=_positive, required=True)
    skew.add_argument("--steps", type=_natural, required=True)
    skew.add_argument("--order", action="store_true", help="Also print the orbit and permutation orders.")

    nq = subparsers.add_parser("nq", parents=[common], help="Levels k <= k_max with h_k = 1 mod q.")
    nq.add_argument("--b", type=_positive, required=True)
    nq.add_argument("--q", type=int, required=True, nargs="+")
    nq.add_argument("--k-max", type=_natural, required=True)

    tower = subparsers.add_parser(
        "tower", parents=[common, family], help="Tower report for one (q, N)."
    )
    tower.add_argument("--q", type=_positive, required=True)
    tower.add_argument("--N", type=_positive, required=True)
    tower.add_argument("--M", type=_positive, default=None)

    verify = subparsers.add_parser(
        "verify", parents=[common, family], help="Run the full verification suite."
    )
    verify.add_argument("--q-max", type=_positive, default=3)
    verify.add_argument("--k-max", type=_natural, default=4)
    verify.add_argument("--report", type=Path, default=None, help="JSON report path.")
    verify.add_argument("--html", type=Path, default=None, help="HTML report path.")

    return parser


def _settings(args: argparse.Namespace) -> Settings:
    return Settings(
        args.config,
        overrides={"cap": args.cap, "depth": args.depth, "format": args.format},
    )


def _output_format(args: argparse.Namespace, settings: Settings) -> str:
    if settings.format:
        return settings.format
    return "json" if args.out else "text"


def _emit(args: argparse.Namespace, text: str) -> None:
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
        log.info("Output written to %s", args.out)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def cmd_block(args: argparse.Namespace, settings: Settings) -> int:
    params = make_params(args.a, args.b)
    if args.pos is not None:
        _emit(args, str(symbol_at(params, args.k, args.pos)))
        return EXIT_OK
    handle = materialize_block(params, args.k, cap=settings.cap)
    if args.out:
        export_block(handle, args.out)
    else:
        _emit(args, str(handle))
    return EXIT_OK


def cmd_density(args: argparse.Namespace, settings: Settings) -> int:
    params = make_params(args.a, args.b)
    word = load_word(args.word)
    value = density_in_level(params, args.level, Atom(0, word), cap=settings.cap)
    if _output_format(args, settings) == "json":
        _emit(args, dump_json({"word": str(word), "level": args.level, "density": value}))
    else:
        _emit(args, f"d_{args.level}({word}) = {value} (≈ {format_fraction(value)})")
    return EXIT_OK


def cmd_measure(args: argparse.Namespace, settings: Settings) -> int:
    params = make_params(args.a, args.b)
    if args.spacer is not None:
        event, label = spacer_event(params, args.spacer, cap=settings.cap), f"S_{args.spacer}"
    else:
        word = load_word(args.word)
        event, label = Atom(0, word), f"[{word}]"
    level = args.level
    if level is None:
        level = default_scan_level(params, event, depth=settings.depth)
    result = certified_measure(params, level, event, cap=settings.cap)
    if _output_format(args, settings) == "json":
        _emit(args, dump_json({"event": label, "measure": result}))
    else:
        _emit(args, f"mu({label}) = {format_measure(result)} at level {result.level}")
    return EXIT_OK


def cmd_rigidity(args: argparse.Namespace, settings: Settings) -> int:
    params = make_params(args.a, args.b)
    result = rigidity_check(params, args.k, extra_levels=args.extra_levels, cap=settings.cap)
    if _output_format(args, settings) == "json":
        _emit(args, dump_json(result))
    else:
        limit = result.distance.limit
        verdict = "PASS" if result.passed else "FAIL"
        _emit(
            args,
            f"delta(T^h{args.k}) in [{format_fraction(limit.lower)}, "
            f"{format_fraction(limit.upper)}]\n"
            f"delta(T^h{args.k}) < {result.threshold}: {verdict}",
        )
    return EXIT_OK if result.passed else EXIT_FAILED


def cmd_skew(args: argparse.Namespace, settings: Settings) -> int:
    orbit = skew_orbit(args.q, args.b, args.steps)
    fmt = _output_format(args, settings)
    if fmt == "json":
        document = {"q": args.q, "b": args.b, "orbit": [[s.x, s.y] for s in orbit]}
        if args.order:
            order = skew_order(args.q, args.b)
            document["orbit_period"] = order.orbit_period
            document["permutation_order"] = order.permutation_order
        _emit(args, dump_json(document))
        return EXIT_OK
    lines = [" ".join(str(state) for state in orbit)]
    if args.order:
        order = skew_order(args.q, args.b)
        lines.append(f"orbit period {order.orbit_period}, permutation order {order.permutation_order}")
    _emit(args, "\n".join(lines))
    return EXIT_OK


def cmd_nq(args: argparse.Namespace, settings: Settings) -> int:
    # only b enters the heights
    params = make_params(1, args.b)
    fmt = _output_format(args, settings)
    if fmt == "csv":
        rows = sweep_rows(params, args.q, args.k_max)
        if args.out:
            write_csv_rows(rows, args.out)
        else:
            write_csv_rows(rows, sys.stdout)
        return EXIT_OK
    sets = {q: nq_set(params, q, args.k_max) for q in args.q}
    if fmt == "json":
        _emit(args, dump_json({"b": args.b, "k_max": args.k_max, "N_q": sets}))
    elif len(sets) == 1:
        _emit(args, " ".join(str(k) for k in next(iter(sets.values()))))
    else:
        _emit(args, "\n".join(f"q={q}: {' '.join(map(str, ks))}" for q, ks in sets.items()))
    return EXIT_OK


def _tower_table(report) -> Table:
    table = Table(title=f"Tower {report.spec}")
    table.add_column("quantity")
    table.add_column("value")
    table.add_row("mu(B*_N)", format_measure(report.mu_base))
    table.add_row("mu(A*_N)", format_measure(report.mu_A))
    table.add_row("A* return lhs", format_measure(report.a_star_return_lhs))
    table.add_row("A* return bound", format_fraction(report.a_star_return_bound))
    table.add_row("coverage", format_measure(report.coverage))
    table.add_row("coverage bound", format_fraction(report.coverage_bound))
    table.add_row("coverage bound q(q-1)/2", format_fraction(report.coverage_safe_bound))
    for name, ok in report.verdicts().items():
        label = f"{name} (informational)" if name in report.informational else name
        table.add_row(label, "[green]PASS[/green]" if ok else "[red]FAIL[/red]")
    return table


def cmd_tower(args: argparse.Namespace, settings: Settings) -> int:
    params = make_params(args.a, args.b)
    spec = tower_spec(params, args.q, args.N, args.M, depth=settings.depth)
    report = rank_one_report(spec, cap=settings.cap)
    fmt = _output_format(args, settings)
    if fmt == "json":
        _emit(args, dump_json(report))
    elif fmt == "csv":
        if args.out:
            write_csv_rows([report.to_row()], args.out)
        else:
            write_csv_rows([report.to_row()], sys.stdout)
    else:
        Console().print(_tower_table(report))
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_verify(args: argparse.Namespace, settings: Settings) -> int:
    params = make_params(args.a, args.b)
    pipeline = VerificationPipeline(settings, params, q_max=args.q_max, k_max=args.k_max)
    report = pipeline.run()
    document = report.to_json()

    report_path = args.report or args.out
    if report_path:
        write_json_report(document, report_path)
    if args.html:
        build_html_report(document, args.html, title="Verification Report")

    if _output_format(args, settings) == "json" and not report_path:
        sys.stdout.write(dump_json(document))
    else:
        table = Table(title=f"Verification suite for {params}")
        table.add_column("check")
        table.add_column("verdict")
        for check in sorted(report.checks, key=lambda c: c.name):
            table.add_row(check.name, "[green]PASS[/green]" if check.ok else "[red]FAIL[/red]")
        Console().print(table)

    if not report.passed:
        log.error("Failed checks: %s", ", ".join(report.failed_checks()))
        return EXIT_FAILED
    return EXIT_OK


COMMANDS = {
    "block": cmd_block,
    "density": cmd_density,
    "measure": cmd_measure,
    "rigidity": cmd_rigidity,
    "skew": cmd_skew,
    "nq": cmd_nq,
    "tower": cmd_tower,
    "verify": cmd_verify,
}


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point; returns 0 on success, 1 on a failed verdict, 2 on usage errors."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    setup_logging(level=level_for(args.verbose, args.quiet))

    try:
        settings = _settings(args)
        return COMMANDS[args.command](args, settings)
    except DJRError as e:
        log.error("%s", e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception:
        log.exception("An unexpected error occurred.")
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
