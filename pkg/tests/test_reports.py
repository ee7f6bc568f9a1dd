import csv
import io
import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from services import reports, verification
from services.database import record_cells, recent_runs
from services.gaussian import GaussianRational
from services.qnum import QContext
from services.reports import ReportError


@pytest.fixture(scope="module")
def cells():
    ctx = QContext("1/2", trunc_dim=16)
    return verification.run_sweep([ctx, ctx.with_dim(24)], suites=["qnum"], seed=3)


def test_integrals_table_has_exact_fractions(ctx):
    rows = reports.build_table("integrals", ctx)
    assert [row["exact"] for row in rows] == ["1", "2/3", "4/7", "8/15", "16/31", "32/63"]
    assert all(row["abs_diff"] < 1e-12 for row in rows)


def test_moments_and_green_tables(ctx):
    moments = reports.build_table("moments", ctx, rows=3)
    assert [row["exact"] for row in moments] == ["1", "1/2", "3/8"]
    assert moments[2]["numeric"] == pytest.approx(0.375, abs=1e-12)
    green = reports.build_table("green", ctx)
    assert len(green) == 5
    assert all(row["passed"] and row["lhs"] == "1" for row in green)


def test_unknown_table_and_format(ctx):
    with pytest.raises(ReportError):
        reports.build_table("volumes", ctx)
    with pytest.raises(ReportError):
        reports.render([], "xml")
    with pytest.raises(ReportError):
        reports.render({"a": 1}, "csv")


def test_render_csv_rows(ctx):
    text = reports.render(reports.build_table("integrals", ctx, rows=2), "csv")
    rows = list(csv.DictReader(io.StringIO(text)))
    assert list(rows[0]) == ["n", "exact", "numeric", "abs_diff"]
    assert rows[1]["exact"] == "2/3"


def test_make_json_safe_handles_exact_and_special_values():
    payload = {
        1: Fraction(2, 3),
        "z": 1 + 2j,
        "g": GaussianRational(Fraction(1, 2), 1),
        "inf": math.inf,
        "nan": math.nan,
        "array": np.array([1.5, 2.5]),
        "path": Path("reports"),
        "status": verification.CheckStatus.SKIP,
    }
    safe = reports.make_json_safe(payload)
    assert safe == {
        "1": "2/3",
        "z": [1.0, 2.0],
        "g": "(1/2+1i)",
        "inf": "inf",
        "nan": None,
        "array": [1.5, 2.5],
        "path": "reports",
        "status": "skip",
    }
    json.dumps(safe)


def test_cell_filename():
    assert reports.cell_filename("1/2", 64) == "verify_q1-2_N64.json"


def test_cell_reports_are_reproducible(tmp_path, cells):
    paths = reports.write_cell_reports(cells, tmp_path)
    assert set(paths) == {("1/2", 16), ("1/2", 24)}
    first = {name: (tmp_path / name).read_bytes() for name in ("summary.csv", "verify_q1-2_N16.json")}

    reports.write_cell_reports(cells, tmp_path)
    assert {name: (tmp_path / name).read_bytes() for name in first} == first

    summary = list(csv.DictReader(io.StringIO(first["summary.csv"].decode())))
    assert [row["N"] for row in summary] == ["16", "24"]
    assert all(row["fail"] == "0" for row in summary)
    assert json.loads(first["verify_q1-2_N16.json"])["passed"] is True


def test_run_ledger_records_cells(test_storage, cells):
    ids = record_cells(cells, suites=["qnum"], seed=3, report_paths={("1/2", 16): "verify_q1-2_N16.json"})
    assert len(ids) == 2
    runs = recent_runs(limit=2)
    assert [run["id"] for run in runs] == sorted(ids, reverse=True)
    by_dim = {run["N"]: run for run in runs}
    assert by_dim[16]["report_path"] == "verify_q1-2_N16.json"
    assert by_dim[24]["report_path"] is None
    assert by_dim[16]["suites"] == ["qnum"]
    assert by_dim[16]["passed"] is True
    assert by_dim[16]["summary"]["counts"]["fail"] == 0
