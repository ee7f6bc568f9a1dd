import json

import pytest

import cli
from services import function_theory as ft, opmat
from services.database import recent_runs
from services.qnum import QContext

Z_SQUARED = json.dumps({"terms": [{"m": 0, "n": 2, "re": "1"}]})
ZBAR_Z = json.dumps({"terms": [{"m": 1, "n": 1, "re": "1"}]})


def _json_output(capsys):
    return json.loads(capsys.readouterr().out)


def test_integrals_table_csv(capsys):
    assert cli.main(["table", "integrals", "--q", "1/2"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "n,exact,numeric,abs_diff"
    assert ",2/3," in out


@pytest.mark.parametrize(
    "argv",
    [
        ["verify", "--q", "0"],
        ["verify", "--q", "0.5"],
        ["verify", "--q", "3/2"],
        ["verify", "--q", "1/2", "--dim", "4"],
        ["verify", "--q", "1/2", "--dim", "sixty"],
        ["table", "integrals", "--q", "1"],
    ],
)
def test_invalid_configuration_exits_with_two(argv):
    assert cli.main(argv) == 2


def test_unknown_subcommand_is_a_usage_error():
    assert cli.main(["plot"]) == 2


def test_verify_writes_reports(tmp_path, capsys):
    out_dir = tmp_path / "reports"
    assert cli.main(["verify", "--q", "1/2", "--dim", "64", "--out", str(out_dir)]) == 0
    payload = _json_output(capsys)
    (cell,) = payload["cells"]
    assert cell["q"] == "1/2"
    assert cell["N"] == 64
    assert cell["passed"] is True
    assert (out_dir / "verify_q1-2_N64.json").exists()
    assert (out_dir / "summary.csv").exists()


def test_verify_csv_and_record(test_storage, capsys):
    code = cli.main(["verify", "--q", "1/2", "--dim", "32", "--suite", "qnum", "--format", "csv", "--record"])
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "q,N,passed,pass,fail,skip,failures"
    assert lines[1].startswith("1/2,32,True,")
    latest = recent_runs(limit=1)[0]
    assert latest["N"] == 32
    assert latest["suites"] == ["qnum"]


def test_dirichlet_for_z(capsys):
    assert cli.main(["dirichlet", '{"1": [1, 0]}', "--dim", "32"]) == 0
    payload = _json_output(capsys)
    assert payload["mean"] == pytest.approx([0.0, 0.0], abs=1e-12)
    assert payload["boundary_sup"] == pytest.approx(1.0)
    assert payload["symbol"]["1"] == pytest.approx([1.0, 0.0], abs=1e-6)
    assert payload["element"]["N"] == 32


def test_dirichlet_for_constant(capsys):
    assert cli.main(["dirichlet", '{"0": [1, 0]}', "--dim", "32"]) == 0
    payload = _json_output(capsys)
    assert payload["mean"] == pytest.approx([1.0, 0.0], abs=1e-9)
    assert payload["norm"] == pytest.approx(1.0, abs=1e-9)
    assert payload["positivity"]["boundary_min"] == pytest.approx(1.0)


def test_dirichlet_rejects_non_map(capsys):
    assert cli.main(["dirichlet", "[1, 2]", "--dim", "16"]) == 2


def test_quantize_binary_dump(tmp_path, capsys):
    target = tmp_path / "z.bin"
    assert cli.main(["quantize", "monomial:0,1", "--dim", "16", "--out", str(target), "--binary"]) == 0
    payload = _json_output(capsys)
    assert payload["element"]["binary"] is True
    ctx = QContext("1/2", trunc_dim=16)
    loaded = opmat.load_op_binary(target, ctx)
    assert opmat.interior_residual(loaded, opmat.build_generators(ctx).z) < 1e-10


def test_derive_partial_of_z_squared(capsys):
    assert cli.main(["derive", Z_SQUARED, "--op", "partial", "--dim", "16"]) == 0
    payload = _json_output(capsys)
    assert payload["result"]["terms"] == [{"m": 0, "n": 1, "re": "3", "im": "0"}]
    assert "matrix" not in payload


def test_derive_laplacian_orders(capsys):
    assert cli.main(["derive", ZBAR_Z, "--op", "laplacian", "--order", "d_dbar", "--dim", "16", "--matrix"]) == 0
    payload = _json_output(capsys)
    assert payload["result"]["terms"] == [{"m": 0, "n": 0, "re": "1", "im": "0"}]
    assert payload["matrix"]["N"] == 16


def test_integrate_zbar_z(capsys):
    assert cli.main(["integrate", ZBAR_Z, "--dim", "32"]) == 0
    payload = _json_output(capsys)
    assert payload["exact"] == {"re": "2/3", "im": "0"}
    assert payload["abs_diff"] <= 1e-12 + payload["truncation_bound"]


def test_symbol_of_polynomial(tmp_path, capsys):
    source = tmp_path / "poly.json"
    source.write_text(ZBAR_Z, encoding="utf-8")
    assert cli.main(["symbol", f"@{source}", "--dim", "16"]) == 0
    payload = _json_output(capsys)
    assert payload["fourier"] == {"0": [1.0, 0.0]}
    assert payload["exact"] == {"0": {"re": "1", "im": "0"}}


def test_malformed_json_exits_with_two():
    assert cli.main(["integrate", "{not json", "--dim", "16"]) == 2
    assert cli.main(["derive", json.dumps({"q": "1/3", "terms": []}), "--dim", "16"]) == 2


def test_dirichlet_exit_code_follows_mean_value(monkeypatch, capsys):
    monkeypatch.setattr(ft, "integral_matrix", lambda a: 1.5)
    assert cli.main(["dirichlet", '{"0": [1, 0]}', "--dim", "32"]) == 1
    payload = _json_output(capsys)
    assert payload["diagnostics"]["passed"] is False
    assert payload["diagnostics"]["mean_error"] == pytest.approx(0.5)
