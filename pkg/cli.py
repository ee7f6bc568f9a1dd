"""``qdisk`` command line: verification sweeps, tables and one-shot computations."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from config import Config
from services import bergman, function_theory as ft, opmat, polalg, reports, verification
from services.database import init_db, record_cells
from services.qnum import QContext, QContextError, parse_q

logger = logging.getLogger("qdisk")

MIN_DIM = 8
FORMATS = ("json", "csv")


class ConfigError(ValueError):
    """Raised for invalid command-line configuration or input documents."""


@dataclass(frozen=True)
class RunConfig:
    """Validated sweep request: every q in (0, 1) and every N >= 8."""

    q_list: List[str]
    dims: List[int]
    suites: List[str]
    seed: int
    tol_identity: Optional[float] = None
    tol_quadrature: Optional[float] = None
    tol_norm: Optional[float] = None
    out_dir: Optional[Path] = None
    fmt: str = "json"
    boundary_count: int = verification.RANDOM_BOUNDARY_COUNT
    record: bool = False

    def __post_init__(self) -> None:
        if not self.q_list or not self.dims:
            raise ConfigError("At least one q and one N are required.")
        for q in self.q_list:
            context(q, MIN_DIM)
        for dim in self.dims:
            if dim < MIN_DIM:
                raise ConfigError(f"Truncation dimension must be at least {MIN_DIM}, got {dim}.")
        unknown = [name for name in self.suites if name not in verification.SUITES]
        if unknown:
            raise ConfigError(f"Unknown suites {unknown}; choose from {list(verification.SUITES)}.")
        if self.fmt not in FORMATS:
            raise ConfigError(f"Unknown format {self.fmt!r}; use json or csv.")

    def contexts(self) -> List[QContext]:
        cells = []
        for q in self.q_list:
            for dim in self.dims:
                ctx = context(q, dim)
                overrides = {
                    name: value
                    for name, value in (
                        ("tol_identity", self.tol_identity),
                        ("tol_quadrature", self.tol_quadrature),
                        ("tol_norm", self.tol_norm),
                    )
                    if value is not None
                }
                cells.append(replace(ctx, **overrides) if overrides else ctx)
        return cells


def configure_logging(level: str = Config.LOG_LEVEL) -> None:
    """Single stderr handler so stdout carries only machine-readable output."""
    root = logging.getLogger()
    root.handlers.clear()
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(Config.LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(getattr(logging, level, logging.INFO))


def context(q: str, dim: int, tol: Optional[float] = None) -> QContext:
    try:
        ctx = QContext.from_config(Config, q=parse_q(q), dim=dim)
    except QContextError as exc:
        raise ConfigError(str(exc)) from exc
    if dim < MIN_DIM:
        raise ConfigError(f"Truncation dimension must be at least {MIN_DIM}, got {dim}.")
    return replace(ctx, tol_identity=tol) if tol is not None else ctx


def _csv_list(raw: str) -> List[str]:
    return [item.strip() for item in raw.split(",") if item.strip()]


def _int_list(raw: str) -> List[int]:
    try:
        return [int(item) for item in _csv_list(raw)]
    except ValueError as exc:
        raise ConfigError(f"Dimensions must be integers, got {raw!r}.") from exc


def _load_document(raw: str) -> Any:
    """Inline JSON, ``@path`` or a path to a JSON file."""
    text = raw
    if raw.startswith("@"):
        text = Path(raw[1:]).read_text(encoding="utf-8")
    elif not raw.lstrip().startswith(("{", "[")) and Path(raw).exists():
        text = Path(raw).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Input is not valid JSON: {exc}") from exc


def _load_poly(raw: str, ctx: QContext) -> polalg.NormalPoly:
    document = _load_document(raw)
    if isinstance(document, dict) and "q" not in document:
        document = {**document, "q": str(ctx.q_exact)}
    return polalg.poly_from_json(document, ctx)


def _emit(payload: Any, fmt: str, out: Optional[Path]) -> None:
    text = reports.render(payload, fmt)
    if out is None:
        sys.stdout.write(text)
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    logger.info("Wrote %s", out)


def _exact_map(boundary: polalg.BoundaryFunction) -> Dict[str, Dict[str, str]]:
    return {str(d): {"re": str(value.re), "im": str(value.im)} for d, value in sorted(boundary.fourier.items())}


def _dump_op(op: opmat.TruncOp, out: Optional[Path], binary: bool) -> Dict[str, Any]:
    """Inline JSON element, or a file reference when ``--out`` is given."""
    if out is None:
        return opmat.op_to_json(op)
    path = opmat.save_op_binary(op, out) if binary else opmat.save_op_json(op, out)
    logger.info("Wrote %s", path)
    return {"path": str(path), "N": op.dim, "margin": op.margin, "binary": binary}


# ----- subcommands -----
def cmd_verify(args: argparse.Namespace) -> int:
    run = RunConfig(
        q_list=_csv_list(",".join(args.q)) if args.q else list(Config.Q_SWEEP),
        dims=_int_list(",".join(args.dim)) if args.dim else list(Config.DIM_SWEEP),
        suites=args.suite or list(verification.SUITES),
        seed=args.seed,
        tol_identity=args.tol,
        tol_quadrature=args.tol_quadrature,
        tol_norm=args.tol_norm,
        out_dir=args.out,
        fmt=args.format,
        boundary_count=args.boundary_count,
        record=args.record,
    )
    cells = verification.run_sweep(
        run.contexts(), suites=run.suites, seed=run.seed, boundary_count=run.boundary_count
    )

    paths: Dict[tuple, str] = {}
    if run.out_dir is not None:
        paths = reports.write_cell_reports(cells, run.out_dir)
        logger.info("Reports written to %s", run.out_dir)
    if run.record:
        init_db(Config.DATABASE_URL)
        record_cells(cells, suites=run.suites, seed=run.seed, report_paths=paths)

    if run.fmt == "csv":
        sys.stdout.write(reports.summary_csv(cells))
    else:
        sys.stdout.write(reports.dumps({"seed": run.seed, "cells": [cell.to_dict() for cell in cells]}))

    failed = [cell for cell in cells if not cell.passed]
    for cell in failed:
        for check in cell.failures:
            logger.error(
                "FAIL q=%s N=%s %s/%s: value=%s tol=%s %s",
                cell.q,
                cell.dim,
                check.suite,
                check.name,
                check.value,
                check.tolerance,
                check.detail,
            )
    return 1 if failed else 0


def cmd_dirichlet(args: argparse.Namespace) -> int:
    ctx = context(args.q, args.dim, args.tol)
    document = _load_document(args.boundary)
    if not isinstance(document, dict):
        raise ConfigError("Boundary data must be a Fourier map {\"d\": [re, im]}.")
    boundary = polalg.BoundaryFunction.from_json(document)
    element = ft.dirichlet_solve(boundary, ctx)
    diagnostics = ft.harmonic_diagnostics(element, boundary, harnack_steps=args.harnack or None)
    payload = {
        "q": str(ctx.q_exact),
        "N": ctx.trunc_dim,
        "boundary": boundary.to_json(),
        "element": _dump_op(element, args.out, args.binary),
        "symbol": ft.symbol_extract(element).to_json(),
        "mean": diagnostics.mean_value,
        "norm": diagnostics.op_norm,
        "boundary_sup": diagnostics.boundary_sup,
        "positivity": {
            "min_eigenvalue": diagnostics.min_eigenvalue,
            "boundary_min": diagnostics.boundary_min,
        },
        "diagnostics": diagnostics.to_dict(),
    }
    _emit(payload, "json", None)
    return 0 if diagnostics.passed else 1


def cmd_quantize(args: argparse.Namespace) -> int:
    ctx = context(args.q, args.dim, args.tol)
    document: Any = args.symbol
    if args.symbol.startswith("@") or args.symbol.lstrip().startswith("{"):
        document = _load_document(args.symbol)
    symbol = bergman.parse_symbol(document, ctx)
    grid = bergman.BergmanGrid.build(ctx)
    op = bergman.toeplitz_quantize(symbol, grid, ctx)
    payload = {
        "q": str(ctx.q_exact),
        "N": ctx.trunc_dim,
        "element": _dump_op(op, args.out, args.binary),
        "meta": op.meta,
    }
    _emit(payload, "json", None)
    return 0


def cmd_derive(args: argparse.Namespace) -> int:
    ctx = context(args.q, args.dim, args.tol)
    p = _load_poly(args.poly, ctx)
    operations = {
        "partial": polalg.partial,
        "barpartial": polalg.barpartial,
        "J": polalg.scale_J,
        "laplacian": lambda poly: polalg.laplacian(poly, args.order),
    }
    result = operations[args.op](p)
    payload: Dict[str, Any] = {"op": args.op, "input": polalg.poly_to_json(p), "result": polalg.poly_to_json(result)}
    if args.matrix:
        if args.op == "J":
            op = opmat.scale_J_matrix(opmat.to_matrix(p, ctx, exact=True))
        elif args.op == "laplacian":
            op = opmat.to_matrix(result, ctx)
        else:
            op = opmat.d_op(opmat.to_matrix(p, ctx, exact=True), args.op)
        payload["matrix"] = _dump_op(op, args.out, args.binary)
    _emit(payload, "json", None)
    return 0


def cmd_integrate(args: argparse.Namespace) -> int:
    ctx = context(args.q, args.dim, args.tol)
    p = _load_poly(args.poly, ctx)
    exact = polalg.integrate(p)
    matrix = opmat.to_matrix(p, ctx)
    numeric = complex(opmat.integral_matrix(matrix))
    payload = {
        "q": str(ctx.q_exact),
        "N": ctx.trunc_dim,
        "exact": {"re": str(exact.re), "im": str(exact.im)},
        "weighted_trace": numeric,
        "abs_diff": abs(numeric - complex(exact)),
        "truncation_bound": opmat.integral_truncation_bound(matrix),
    }
    _emit(payload, "json", None)
    return 0


def cmd_symbol(args: argparse.Namespace) -> int:
    ctx = context(args.q, args.dim, args.tol)
    p = _load_poly(args.poly, ctx)
    boundary = polalg.symbol(p)
    _emit({"fourier": boundary.to_json(), "exact": _exact_map(boundary)}, "json", None)
    return 0


def cmd_table(args: argparse.Namespace) -> int:
    ctx = context(args.q, args.dim, args.tol)
    rows = reports.build_table(args.which, ctx, args.rows)
    _emit(rows, args.format, args.out)
    return 0


# ----- parser -----
def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--q", default=Config.Q, help='Exact rational q in (0, 1), e.g. "1/2".')
    parser.add_argument("--dim", type=int, default=Config.DIM, help="Truncation dimension N.")
    parser.add_argument("--tol", type=float, default=None, help="Identity tolerance override.")


def _dump_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", type=Path, default=None, help="Write the element to this file.")
    parser.add_argument("--binary", action="store_true", help="Binary dump instead of JSON when --out is set.")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qdisk", description="Calculus and function theory on the quantum disk.")
    parser.add_argument("--log-level", default=Config.LOG_LEVEL, help="Logging level for stderr output.")
    sub = parser.add_subparsers(dest="command", required=True)

    verify = sub.add_parser("verify", help="Run identity suites across a q/N sweep.")
    verify.add_argument("--q", action="append", help="q values (repeat or comma separate).")
    verify.add_argument("--dim", action="append", help="N values (repeat or comma separate).")
    verify.add_argument("--tol", type=float, default=None, help="Identity tolerance override.")
    verify.add_argument("--tol-quadrature", type=float, default=None)
    verify.add_argument("--tol-norm", type=float, default=None)
    verify.add_argument("--suite", action="append", choices=verification.SUITES, help="Restrict to these suites.")
    verify.add_argument("--out", type=Path, default=None, help="Directory for per-cell JSON and summary.csv.")
    verify.add_argument("--format", choices=FORMATS, default="json")
    verify.add_argument("--seed", type=int, default=Config.SEED)
    verify.add_argument("--boundary-count", type=int, default=verification.RANDOM_BOUNDARY_COUNT)
    verify.add_argument("--record", action="store_true", help="Store cell summaries in the run ledger.")
    verify.set_defaults(handler=cmd_verify)

    dirichlet = sub.add_parser("dirichlet", help="Solve the Dirichlet problem for boundary Fourier data.")
    dirichlet.add_argument("boundary", help='Fourier map JSON, e.g. \'{"1": [1, 0]}\', or @file.')
    dirichlet.add_argument("--harnack", type=int, default=0, help="Also run this many Harnack steps.")
    _common(dirichlet)
    _dump_flags(dirichlet)
    dirichlet.set_defaults(handler=cmd_dirichlet)

    quantize = sub.add_parser("quantize", help="Toeplitz-quantize a symbol.")
    quantize.add_argument("symbol", help="Fourier JSON, 'poisson_kernel[:pole]' or 'monomial:m,n'.")
    _common(quantize)
    _dump_flags(quantize)
    quantize.set_defaults(handler=cmd_quantize)

    derive = sub.add_parser("derive", help="Apply a derivative, J or the Laplacian to a polynomial.")
    derive.add_argument("poly", help="Polynomial JSON or @file.")
    derive.add_argument("--op", choices=("partial", "barpartial", "J", "laplacian"), default="partial")
    derive.add_argument("--order", choices=("dbar_d", "d_dbar"), default="dbar_d")
    derive.add_argument("--matrix", action="store_true", help="Also emit the truncated matrix.")
    _common(derive)
    _dump_flags(derive)
    derive.set_defaults(handler=cmd_derive)

    integrate = sub.add_parser("integrate", help="Exact integral and its weighted-trace value.")
    integrate.add_argument("poly", help="Polynomial JSON or @file.")
    _common(integrate)
    integrate.set_defaults(handler=cmd_integrate)

    symbol = sub.add_parser("symbol", help="Boundary symbol of a polynomial.")
    symbol.add_argument("poly", help="Polynomial JSON or @file.")
    _common(symbol)
    symbol.set_defaults(handler=cmd_symbol)

    table = sub.add_parser("table", help="Moments, integrals or Green's theorem table.")
    table.add_argument("which", choices=reports.TABLES)
    table.add_argument("--rows", type=int, default=None)
    table.add_argument("--format", choices=FORMATS, default="csv")
    table.add_argument("--out", type=Path, default=None)
    _common(table)
    table.set_defaults(handler=cmd_table)
    return parser


INPUT_ERRORS = (
    ConfigError,
    QContextError,
    reports.ReportError,
    polalg.PolynomialError,
    bergman.QuadratureError,
    ft.FunctionTheoryError,
    opmat.TruncationError,
    OSError,
)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    configure_logging(str(args.log_level).upper())
    try:
        return args.handler(args)
    except INPUT_ERRORS as exc:
        logger.error("%s", exc)
        return 2
    except opmat.ConvergenceError as exc:
        logger.error("%s (after %s iterations)", exc, exc.iterations)
        return 1


if __name__ == "__main__":
    sys.exit(main())
