"""pq-osc: batch front-end over the pq-deformed oscillator services.

Examples:
  pq-osc numbers --family fibonacci --n-max 10
  pq-osc uncertainty --p 1 --q 1 --alpha 0.5 --format json
  pq-osc concurrence --kind L --family fibonacci --alpha 0.2 --alpha-max 1 --steps 5
  pq-osc sweep --quantity identity_suite --family sym --q 1.2 --n-max 6
  pq-osc verify all
"""
import argparse
import cmath
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from pydantic import ValidationError

from core.config import settings
from core.errors import ConfigInvalid, PqOscError
from models.schemas import AlphaGrid, FamilyKind, OutputFormat, SuiteStatus, SweepConfig, SweepQuantity
from services.sweep import sweep_service
from services.verification import ALL_SUITES, verification_service

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors raised as ConfigInvalid instead of printed."""

    def error(self, message: str):
        raise ConfigInvalid("arguments", message)


def parse_complex(text: str) -> complex:
    parts = text.split(",")
    if len(parts) > 2:
        raise ConfigInvalid("alpha", f"expected re[,im], got '{text}'")
    try:
        values = [float(part) for part in parts]
    except ValueError:
        raise ConfigInvalid("alpha", f"expected re[,im], got '{text}'")
    return complex(values[0], values[1] if len(values) == 2 else 0.0)


def parse_dim(text: str):
    if text == "auto":
        return "auto"
    try:
        return int(text)
    except ValueError:
        raise ConfigInvalid("dim", f"expected an integer or 'auto', got '{text}'")


def _alpha_grid(args: argparse.Namespace) -> AlphaGrid:
    start = parse_complex(args.alpha) if args.alpha is not None else 0j
    if args.alpha_max is None:
        if args.steps not in (None, 1):
            raise ConfigInvalid("steps", "--steps needs --alpha-max")
        return AlphaGrid(point=[start.real, start.imag])
    try:
        return AlphaGrid(min=abs(start), max=args.alpha_max, steps=args.steps or 1, phase=cmath.phase(start))
    except ValidationError as e:
        raise ConfigInvalid("alpha", e.errors()[0]["msg"])


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--p", type=float)
    common.add_argument("--q", type=float)
    common.add_argument("--family", choices=[f.value for f in FamilyKind])
    common.add_argument("--k", type=int)
    common.add_argument("--alpha", help="complex point as re[,im]; grid start with --alpha-max")
    common.add_argument("--alpha-max", type=float)
    common.add_argument("--steps", type=int)
    common.add_argument("--n-max", type=int, default=10)
    common.add_argument("--dim", default="auto", help="N or auto")
    common.add_argument("--format", choices=[f.value for f in OutputFormat], default=OutputFormat.CSV.value)
    common.add_argument("--tol", type=float)
    common.add_argument("--out", help="output file (default stdout)")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = _Parser(prog="pq-osc", description="pq-deformed oscillator numerics")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, quantity, help_text in (
        ("numbers", SweepQuantity.PQ_NUMBER, "pq-numbers [n] for n = 0..n-max"),
        ("exp", SweepQuantity.EXPONENTIAL, "both pq-exponentials over the alpha grid"),
        ("spectrum", SweepQuantity.SPECTRUM, "oscillator energies E_n"),
        ("uncertainty", SweepQuantity.UNCERTAINTY, "coherent-state uncertainty product"),
    ):
        sub = commands.add_parser(name, parents=[common], help=help_text)
        sub.set_defaults(handler=run_sweep, quantity=quantity.value)

    sub = commands.add_parser("concurrence", parents=[common], help="concurrence of |alpha, L> or |alpha, B>")
    sub.add_argument("--kind", choices=["L", "B"], default="L")
    sub.set_defaults(handler=run_sweep, quantity=None)

    sub = commands.add_parser("sweep", parents=[common], help="any quantity over its grid")
    sub.add_argument("--quantity", required=True, choices=[q.value for q in SweepQuantity])
    sub.set_defaults(handler=run_sweep)

    sub = commands.add_parser("verify", help="run invariant suites")
    sub.add_argument("suite", nargs="?", default=ALL_SUITES, help=f"suite name or {ALL_SUITES}")
    sub.add_argument("--format", choices=[f.value for f in OutputFormat], default=OutputFormat.CSV.value)
    sub.add_argument("--out")
    sub.set_defaults(handler=run_verify)
    return parser


def sweep_config(args: argparse.Namespace) -> SweepConfig:
    quantity = args.quantity
    if quantity is None:
        quantity = SweepQuantity.CONCURRENCE_L.value if args.kind == "L" else SweepQuantity.CONCURRENCE_B.value
    try:
        return SweepConfig(
            quantity=quantity,
            family=args.family,
            p=args.p,
            q=args.q,
            k=args.k,
            alpha=_alpha_grid(args),
            n_max=args.n_max,
            dim=parse_dim(args.dim),
            output=args.format,
            tol=args.tol,
            hbar_omega=settings.hbar * settings.omega,
        )
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"]) or "config"
        raise ConfigInvalid(field, first["msg"])


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
        logger.info(f"Wrote {out}")
    else:
        sys.stdout.write(text)


def _error_line(error: PqOscError) -> None:
    record = {"error": error.kind, "message": error.message}
    if isinstance(error, ConfigInvalid):
        record["field"] = error.field
    sys.stderr.write(json.dumps(record) + "\n")


def run_sweep(args: argparse.Namespace) -> int:
    config = sweep_config(args)
    table = sweep_service.run_sync(config)
    _emit(sweep_service.render(table, config.output), args.out)
    if table.failed:
        errors = sum(1 for row in table.rows if str(row.get("status", "")).startswith("error:"))
        sys.stderr.write(json.dumps({"error": "RowErrors", "message": f"{errors} rows failed", "rows": errors}) + "\n")
        return 1
    return 0


def run_verify(args: argparse.Namespace) -> int:
    results = verification_service.run_sync(args.suite)
    _emit(sweep_service.render_suites(results, OutputFormat(args.format)), args.out)
    failing = [r.suite for r in results if r.status in (SuiteStatus.FAIL, SuiteStatus.ERROR)]
    if failing:
        sys.stderr.write(json.dumps({"error": "SuiteFailures", "message": ", ".join(failing), "suites": failing}) + "\n")
        return 1
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(
        level=logging.DEBUG if settings.debug else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        args = build_parser().parse_args(argv)
        return args.handler(args)
    except ConfigInvalid as e:
        logger.error(e.message)
        _error_line(e)
        return 2
    except PqOscError as e:
        logger.error(f"{e.kind}: {e.message}")
        _error_line(e)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
