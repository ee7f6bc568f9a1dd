"""Deterministic JSON and CSV output for cells, tables and solved elements."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Sequence

import numpy as np

from services import bergman, opmat, polalg
from services.gaussian import GaussianRational
from services.polalg import NormalPoly
from services.qnum import QContext, q_factorial_product

TABLES = ("moments", "integrals", "green")
SUMMARY_COLUMNS = ["q", "N", "passed", "pass", "fail", "skip", "failures"]


class ReportError(ValueError):
    """Raised for unknown tables or output formats."""


def make_json_safe(obj: Any) -> Any:
    """Convert dataclasses, numpy values, exact scalars and paths to plain JSON types."""
    if isinstance(obj, (Fraction, GaussianRational)):
        return str(obj)
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        to_dict = getattr(obj, "to_dict", None)
        return make_json_safe(to_dict() if callable(to_dict) else dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(key): make_json_safe(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [make_json_safe(value) for value in obj]
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer, np.floating)):
        obj = obj.item()
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, np.ndarray):
        return make_json_safe(obj.tolist())
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(payload: Any) -> str:
    return json.dumps(make_json_safe(payload), indent=2, sort_keys=True) + "\n"


def write_json(payload: Any, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload), encoding="utf-8")
    return path


def cell_filename(q: str, dim: int) -> str:
    return f"verify_q{q.replace('/', '-')}_N{dim}.json"


def write_cell_reports(cells: Sequence[Any], out_dir: Path) -> Dict[tuple, str]:
    """One JSON file per (q, N) cell plus ``summary.csv``; returns the cell paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    for cell in cells:
        path = write_json(cell.to_dict(), out_dir / cell_filename(cell.q, cell.dim))
        paths[(cell.q, cell.dim)] = str(path)
    (out_dir / "summary.csv").write_text(summary_csv(cells), encoding="utf-8")
    return paths


def summary_csv(cells: Sequence[Any]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for cell in cells:
        counts = cell.counts()
        failures = ";".join(f"{check.suite}/{check.name}" for check in cell.failures)
        writer.writerow([cell.q, cell.dim, cell.passed, counts["pass"], counts["fail"], counts["skip"], failures])
    return buffer.getvalue()


def rows_to_csv(rows: List[Dict[str, Any]]) -> str:
    buffer = io.StringIO()
    if not rows:
        return ""
    writer = csv.DictWriter(buffer, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({key: make_json_safe(value) for key, value in row.items()})
    return buffer.getvalue()


def render(payload: Any, fmt: str) -> str:
    if fmt == "json":
        return dumps(payload)
    if fmt == "csv":
        if not isinstance(payload, list):
            raise ReportError("CSV output needs a list of rows.")
        return rows_to_csv(payload)
    raise ReportError(f"Unknown format {fmt!r}; use json or csv.")


# ----- tables -----
def moments_table(ctx: QContext, rows: int = 4) -> List[Dict[str, Any]]:
    grid = bergman.BergmanGrid.build(ctx)
    table = []
    for n in range(rows):
        exact = q_factorial_product(n, ctx)
        numeric = bergman.moment(n, grid)
        table.append({"n": n, "exact": str(exact), "numeric": numeric, "abs_diff": abs(numeric - float(exact))})
    return table


def integrals_table(ctx: QContext, rows: int = 6) -> List[Dict[str, Any]]:
    table = []
    for n in range(rows):
        p = NormalPoly.monomial(n, n, ctx)
        exact = polalg.integrate(p)
        numeric = opmat.integral_matrix(opmat.to_matrix(p, ctx)).real
        table.append({"n": n, "exact": str(exact), "numeric": numeric, "abs_diff": abs(numeric - float(exact.re))})
    return table


def green_table(ctx: QContext, rows: int = 5) -> List[Dict[str, Any]]:
    table = []
    for n in range(rows):
        check = polalg.green_check(NormalPoly.monomial(n + 1, n, ctx))
        table.append(
            {
                "m": n + 1,
                "n": n,
                "lhs": str(check.lhs),
                "rhs": str(check.rhs),
                "abs_diff": abs(complex(check.lhs) - complex(check.rhs)),
                "passed": check.passed,
            }
        )
    return table


def build_table(which: str, ctx: QContext, rows: int | None = None) -> List[Dict[str, Any]]:
    builders = {"moments": (moments_table, 4), "integrals": (integrals_table, 6), "green": (green_table, 5)}
    if which not in builders:
        raise ReportError(f"Unknown table {which!r}; choose from {list(TABLES)}.")
    builder, default_rows = builders[which]
    return builder(ctx, rows or default_rows)
