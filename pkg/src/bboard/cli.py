"""Command line entry point.

bboard run --rules rules.txt --services services.txt [--offers offers.txt]
           [--scenario s.json] [--oracle] [--seed 0] [--report out.txt]
           [--serve 127.0.0.1:8080] [--ui frontend/dist]

Without --serve this runs the scenario (or just the initial solve) and
writes the report; with --serve it additionally keeps the engine up
behind the HTTP API, serving the web console when a built UI is found.
"""

from __future__ import annotations

import argparse
import io
import sys
from pathlib import Path

from .scenario import EXIT_PARSE, run_scenario_with_engine


def _read(path: str, what: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FileNotFoundError(f"cannot read {what} file {path!r}: {exc}") from exc


def _parse_address(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"--serve wants addr:port, got {text!r}")
    return host or "127.0.0.1", int(port)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bboard",
        description="cheapest-chain provider selection over live rule "
                    "and service data")
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="solve, run a scenario, or serve the API")
    run_p.add_argument("--rules", required=True, help="rules file")
    run_p.add_argument("--services", required=True, help="service descriptor file")
    run_p.add_argument("--offers", help="separate offers file")
    run_p.add_argument("--scenario", help="scenario JSON with a timeline")
    run_p.add_argument("--oracle", action="store_true",
                       help="append brute-force totals and cross-check the engine")
    run_p.add_argument("--seed", type=int, default=0,
                       help="seed for simulated providers")
    run_p.add_argument("--report", help="write the report here instead of stdout")
    run_p.add_argument("--serve", help="addr:port; keep serving the HTTP API")
    run_p.add_argument("--ui", help="directory with the built web console "
                                    "(default: ./frontend/dist when present)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    try:
        rules_text = _read(args.rules, "rules")
        services_text = _read(args.services, "services")
        offers_text = _read(args.offers, "offers") if args.offers else None
        scenario_text = _read(args.scenario, "scenario") if args.scenario else None
    except FileNotFoundError as exc:
        print(f"PARSE-ERROR {exc}", file=sys.stderr)
        return EXIT_PARSE

    buffer = io.StringIO()
    code, engine = run_scenario_with_engine(
        rules_text, services_text, scenario_text, offers_text=offers_text,
        oracle=args.oracle, seed=args.seed, out=buffer)
    report = buffer.getvalue()
    if args.report:
        Path(args.report).write_text(report, encoding="utf-8")
    else:
        sys.stdout.write(report)

    if args.serve and engine is not None:
        try:
            host, port = _parse_address(args.serve)
        except ValueError as exc:
            print(str(exc), file=sys.stderr)
            return EXIT_PARSE
        import uvicorn

        from .api import create_app

        ui_dir = args.ui or ("frontend/dist" if Path("frontend/dist").is_dir() else None)
        app = create_app(engine, ui_dir=ui_dir)
        uvicorn.run(app, host=host, port=port, log_level="warning")
    return code


if __name__ == "__main__":
    raise SystemExit(main())
