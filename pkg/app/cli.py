"""
Command-line front end.

    python app/cli.py analyze q1
    python app/cli.py render omega:1,1 --out output/omega.svg
    python app/cli.py trace q1 --at 0.3+0.2i
    python app/cli.py hyper 0.25 --extra 2+i
    python app/cli.py elliptic 0 1 -1 inf --c-prime 1
    python app/cli.py cover 0.25
    python app/cli.py verify-paper --out output

Exit codes: 0 success, 1 failed check, 2 verdict not Strebel or undecided,
64 usage or domain error, 70 numerical failure, 74 output error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

# Add the app directory to path for imports
sys.path.insert(0, str(Path(__file__).parent))

from core.config import settings
from core.errors import DomainError, NumericalError, UsageError
from services import constructions as cons
from services.acceptance import run_checks
from services.diffspec import parse_complex, parse_diff_spec, parse_point, parse_real
from services.flow import TraceConfig, critical_directions, horizontal_direction, trace, trace_critical
from services.render import render_graph, save
from services.reports import analysis_report, analyze, dumps, trace_report, write_text
from services.strebel import critical_graph

log = logging.getLogger("strebel.cli")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_NOT_STREBEL = 2
EXIT_USAGE = 64
EXIT_NUMERICAL = 70
EXIT_IO = 74


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _trace_config(args) -> TraceConfig:
    return TraceConfig.from_settings(
        step=args.step,
        length_budget=args.budget,
        sing_radius=args.sing_radius,
        close_tol=args.close_tol,
    )


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        write_text(Path(out), text)
    else:
        sys.stdout.write(text)


def _exit_for(verdict) -> int:
    return EXIT_OK if verdict.is_strebel else EXIT_NOT_STREBEL


# ─────────────────────────────────────────
# Commands
# ─────────────────────────────────────────

def cmd_analyze(args) -> int:
    parsed = parse_diff_spec(args.spec)
    result = analyze(parsed.omega, _trace_config(args))
    report = analysis_report(result, parsed.text, include_edges=args.edges)
    if args.format in ("json", "both"):
        target = args.out
        if args.format == "both":
            target = str(Path(args.out or settings.OUTPUT_DIR) / "report.json")
        _emit(dumps(report), target)
    if args.format in ("svg", "both"):
        base = Path(args.out or settings.OUTPUT_DIR)
        path = base / "critical-graph.svg" if args.format == "both" or base.suffix != ".svg" else base
        save(render_graph(result.graph, parsed.omega.entries, title=parsed.text), path)
    return _exit_for(result.graph.verdict)


def cmd_render(args) -> int:
    parsed = parse_diff_spec(args.spec)
    cfg = _trace_config(args)
    graph = critical_graph(parsed.omega, cfg)
    extra = []
    for text in args.leaf or []:
        z = parse_complex(text)
        extra.append(trace(parsed.omega, z, horizontal_direction(parsed.omega, z), cfg))
    out = Path(args.out) if args.out else Path(settings.OUTPUT_DIR) / "critical-graph.svg"
    save(render_graph(graph, parsed.omega.entries, extra, title=parsed.text), out)
    return _exit_for(graph.verdict)


def cmd_trace(args) -> int:
    parsed = parse_diff_spec(args.spec)
    cfg = _trace_config(args)
    if args.vertex is not None:
        vertex = parse_point(args.vertex)
        directions = critical_directions(parsed.omega, vertex)
        if not 0 <= args.slot < len(directions):
            raise UsageError(f"slot must be in 0..{len(directions) - 1}")
        traj = trace_critical(parsed.omega, vertex, directions[args.slot], cfg)
    else:
        if args.at is None:
            raise UsageError("trace needs --at or --vertex")
        z = parse_complex(args.at)
        direction = parse_complex(args.dir) if args.dir else horizontal_direction(parsed.omega, z)
        traj = trace(parsed.omega, z, direction, cfg)
    _emit(dumps(trace_report(traj, parsed.text, args.points)), args.out)
    return EXIT_OK if traj.termination.is_compact else EXIT_NOT_STREBEL


def cmd_hyper(args) -> int:
    extra = [parse_point(p) for p in args.extra or []]
    spec = cons.build_hyperelliptic(parse_real(args.r), extra)
    graph = critical_graph(spec.base_diff, _trace_config(args))
    report = spec.to_json()
    report["verdict"] = graph.verdict
    _emit(dumps(report), args.out)
    return _exit_for(graph.verdict)


def cmd_elliptic(args) -> int:
    points = [parse_point(p) for p in args.points]
    result = cons.elliptic_strebel_test(points, parse_complex(args.c_prime), args.q_bound)
    _emit(dumps(result), args.out)
    return EXIT_OK if result.strebel else EXIT_NOT_STREBEL


def cmd_cover(args) -> int:
    sol = cons.cover_solver(parse_real(args.r))
    report = {"solution": sol, "infinity_certificate": cons.infinity_certificate()}
    if not args.no_periods:
        report["periods"] = cons.verify_cover_periods(sol, _trace_config(args))
    _emit(dumps(report), args.out)
    return EXIT_OK


def cmd_verify_paper(args) -> int:
    out_dir = Path(args.out) if args.out else None
    results = run_checks(_trace_config(args), base_spec=args.base, out_dir=out_dir, only=args.only)
    width = max((len(r.name) for r in results), default=0)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        sys.stdout.write(f"{r.name:<{width}}  {status}  {r.seconds:7.2f}s  {r.detail}\n")
    failed = [r.name for r in results if not r.passed]
    if out_dir is not None:
        write_text(out_dir / "verify-report.json", dumps([r.to_json() for r in results]))
    if failed:
        sys.stdout.write(f"failed: {', '.join(failed)}\n")
        return EXIT_CHECK_FAILED
    sys.stdout.write(f"all {len(results)} checks passed\n")
    return EXIT_OK


# ─────────────────────────────────────────
# Parser
# ─────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    tolerances = _Parser(add_help=False)
    tolerances.add_argument("--step", type=float, default=None, help="flat-metric integration step")
    tolerances.add_argument("--budget", type=float, default=None, help="flat length budget per trace")
    tolerances.add_argument("--sing-radius", type=float, default=None, help="capture radius around zeros and simple poles")
    tolerances.add_argument("--close-tol", type=float, default=None, help="loop closure tolerance")
    tolerances.add_argument("--out", default=None, help="output file (or directory for verify-paper)")

    ap = _Parser(prog="strebel", description="Quadratic differentials, critical graphs and Strebel checks.")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("analyze", parents=[tolerances], help="divisor, verdict and periods of a diff-spec")
    p.add_argument("spec")
    p.add_argument("--format", choices=["json", "svg", "both"], default="json")
    p.add_argument("--edges", action="store_true", help="include edge polylines in the report")
    p.set_defaults(handler=cmd_analyze)

    p = sub.add_parser("render", parents=[tolerances], help="SVG picture of the critical graph")
    p.add_argument("spec")
    p.add_argument("--leaf", action="append", help="also draw the leaf through this point (repeatable)")
    p.set_defaults(handler=cmd_render)

    p = sub.add_parser("trace", parents=[tolerances], help="trace one horizontal leaf")
    p.add_argument("spec")
    p.add_argument("--at", default=None, help="start point")
    p.add_argument("--dir", default=None, help="start direction (default: horizontal at the start point)")
    p.add_argument("--vertex", default=None, help="trace a critical leaf from this zero or simple pole")
    p.add_argument("--slot", type=int, default=0, help="critical direction index at --vertex")
    p.add_argument("--points", action="store_true", help="include the traced points")
    p.set_defaults(handler=cmd_trace)

    p = sub.add_parser("hyper", parents=[tolerances], help="hyperelliptic branch data for r")
    p.add_argument("r")
    p.add_argument("--extra", nargs="*", help="further branch points")
    p.set_defaults(handler=cmd_hyper)

    p = sub.add_parser("elliptic", parents=[tolerances], help="slope test on an elliptic curve")
    p.add_argument("points", nargs=4)
    p.add_argument("--c-prime", required=True)
    p.add_argument("--q-bound", type=int, default=None)
    p.set_defaults(handler=cmd_elliptic)

    p = sub.add_parser("cover", parents=[tolerances], help="quartic cover for 0 < r < 1/2")
    p.add_argument("r")
    p.add_argument("--no-periods", action="store_true", help="skip tracing the pulled-back differential")
    p.set_defaults(handler=cmd_cover)

    p = sub.add_parser("verify-paper", parents=[tolerances], help="run every acceptance check")
    p.add_argument("--base", default="q1", help="diff-spec replacing q1 in the divisor and period checks")
    p.add_argument("--only", nargs="*", default=None, help="run only these checks")
    p.set_defaults(handler=cmd_verify_paper)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=settings.LOG_LEVEL, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        args = build_parser().parse_args(argv)
        log.debug("running %s", args.command)
        return args.handler(args)
    except DomainError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_USAGE
    except NumericalError as e:
        sys.stderr.write(f"numerical failure: {e}\n")
        return EXIT_NUMERICAL
    except OSError as e:
        sys.stderr.write(f"output error: {e}\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
