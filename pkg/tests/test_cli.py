import csv
import io
import json
import math

import numpy
import pytest

import cli
from models.schemas import FamilyKind
from services import fock, pq_core

TWO_OVER_ROOT_FIVE = 2.0 / math.sqrt(5.0)


def _csv_rows(text: str):
    return list(csv.DictReader(io.StringIO(text)))


def _last_error(err: str) -> dict:
    return json.loads(err.strip().splitlines()[-1])


def test_numbers_fibonacci(capsys):
    assert cli.main(["numbers", "--family", "fibonacci", "--n-max", "10"]) == 0
    rows = _csv_rows(capsys.readouterr().out)
    assert [int(r["n"]) for r in rows] == list(range(11))
    for row in rows:
        assert float(row["value"]) == pytest.approx(pq_core.fibonacci(int(row["n"])), abs=1e-9)
        assert row["status"] == "ok"
        assert "e" in row["value"]


def test_uncertainty_json(capsys):
    assert cli.main(["uncertainty", "--p", "1", "--q", "1", "--alpha", "0.5", "--format", "json"]) == 0
    document = json.loads(capsys.readouterr().out)
    assert document["metadata"]["tool"] == "pq-osc"
    assert document["metadata"]["resolved"] == {"p": 1.0, "q": 1.0}
    assert document["metadata"]["columns"] == ["alpha_re", "alpha_im", "value", "source", "residual", "status"]
    (row,) = document["rows"]
    assert row["value"] == pytest.approx(0.5, abs=1e-12)
    assert row["status"] == "ok"


def test_concurrence_at_origin(capsys):
    assert cli.main(["concurrence", "--kind", "L", "--family", "fibonacci", "--alpha", "0"]) == 0
    (row,) = _csv_rows(capsys.readouterr().out)
    assert float(row["value"]) == pytest.approx(TWO_OVER_ROOT_FIVE, abs=1e-9)


def test_alpha_grid(capsys):
    args = ["concurrence", "--kind", "B", "--family", "sym", "--alpha", "0.2", "--alpha-max", "1", "--steps", "5"]
    assert cli.main(args) == 0
    rows = _csv_rows(capsys.readouterr().out)
    assert [float(r["alpha_re"]) for r in rows] == pytest.approx([0.2, 0.4, 0.6, 0.8, 1.0])


def test_output_is_deterministic(capsys):
    args = ["sweep", "--quantity", "identity_suite", "--family", "nonsym", "--n-max", "3"]
    cli.main(args)
    first = capsys.readouterr().out
    cli.main(args)
    assert capsys.readouterr().out == first


def test_output_file(tmp_path, capsys):
    target = tmp_path / "numbers.csv"
    assert cli.main(["numbers", "--p", "2", "--q", "1", "--n-max", "4", "--out", str(target)]) == 0
    assert capsys.readouterr().out == ""
    rows = _csv_rows(target.read_text())
    assert [float(r["value"]) for r in rows] == pytest.approx([0, 1, 3, 7, 15])


@pytest.mark.parametrize(
    "argv, field",
    [
        (["numbers", "--p", "1.2"], "q"),
        (["numbers", "--family", "sym", "--p", "1.2"], "p"),
        (["uncertainty", "--dim", "many"], "dim"),
        (["uncertainty", "--dim", "1"], "dim"),
        (["numbers", "--k", "3"], "k"),
        (["frobnicate"], "arguments"),
    ],
)
def test_config_errors_exit_two(capsys, argv, field):
    assert cli.main(argv) == 2
    captured = capsys.readouterr()
    assert captured.out == ""
    record = _last_error(captured.err)
    assert record["error"] == "ConfigInvalid"
    assert record["field"] == field


def test_row_errors_exit_one(capsys):
    assert cli.main(["concurrence", "--p", "0", "--q", "0.5", "--alpha", "0.3"]) == 1
    captured = capsys.readouterr()
    (row,) = _csv_rows(captured.out)
    assert row["status"] == "error:ZeroDeformationParameter"
    assert row["value"] == ""
    assert _last_error(captured.err) == {"error": "RowErrors", "message": "1 rows failed", "rows": 1}


def test_spectrum_inapplicable_past_positivity(capsys):
    assert cli.main(["spectrum", "--p", "-2", "--q", "0.5", "--n-max", "4"]) == 0
    rows = _csv_rows(capsys.readouterr().out)
    assert {r["status"] for r in rows} == {"inapplicable"}
    assert float(rows[0]["value"]) == pytest.approx(0.5)


def test_verify_single_suite(capsys):
    assert cli.main(["verify", "pq-numbers", "--format", "json"]) == 0
    document = json.loads(capsys.readouterr().out)
    (row,) = document["rows"]
    assert row["suite"] == "pq-numbers"
    assert row["status"] == "pass"


def test_verify_unknown_suite(capsys):
    assert cli.main(["verify", "nothing"]) == 2
    assert _last_error(capsys.readouterr().err)["field"] == "suite"


def test_csv_floats_round_trip_exactly(capsys):
    assert cli.main(["numbers", "--family", "sym", "--n-max", "30"]) == 0
    params = pq_core.resolve_family(FamilyKind.SYMMETRIC_Q).resolved
    rows = _csv_rows(capsys.readouterr().out)
    assert len(rows) == 31
    for row in rows:
        assert float(row["value"]) == pq_core.pq_number(params, int(row["n"]))


def test_verify_all(capsys):
    assert cli.main(["verify", "all"]) == 0
    rows = _csv_rows(capsys.readouterr().out)
    assert len(rows) == 15
    assert {r["status"] for r in rows} <= {"pass", "paper-divergence"}


def test_non_finite_operator_exits_one(monkeypatch, capsys):
    monkeypatch.setattr(fock, "ladder_elements", lambda params, dim: numpy.full(dim - 1, math.inf))
    assert cli.main(["sweep", "--quantity", "algebra_residuals", "--p", "1", "--q", "1.3", "--dim", "4"]) == 1
    captured = capsys.readouterr()
    (row,) = _csv_rows(captured.out)
    assert row["status"] == "error:NonFiniteResult"
    assert _last_error(captured.err)["error"] == "RowErrors"
