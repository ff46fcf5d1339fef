"""Tests for the batch driver."""

import csv
import json
import logging
import math

import pytest

from src import cli
from src.cli import CommandResult, emit, load_config, run
from src.core.errors import ConfigError, NumericalError, PottsError
from src.core.models import OutputFormat
from src.core.polynomials import BivariatePolynomial
from src.services import acceptance


@pytest.fixture(autouse=True)
def _drop_cli_handlers():
    yield
    root = logging.getLogger()
    for handler in list(root.handlers):
        if type(handler) is logging.StreamHandler:
            root.removeHandler(handler)


def _read_json(path):
    with open(path, encoding="utf-8") as handle:
        return json.load(handle)


def test_critical_point_json(tmp_path):
    out = tmp_path / "critical.json"
    assert run(["critical", "--q", "3", "--output", str(out)]) == 0
    data = _read_json(out)
    assert data["t2c"] == pytest.approx(3 + math.sqrt(47), abs=1e-8)
    assert data["gamma_s"] == "-1/5"
    assert data["columns"] == ["t2c", "t3c"]


def test_density_csv(tmp_path):
    out = tmp_path / "density.csv"
    assert run(["density", "--points", "11", "--format", "csv", "--output", str(out)]) == 0
    with open(out, newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["x", "density"]
    assert len(rows) == 12
    assert float(rows[6][1]) == pytest.approx(1 / math.pi, abs=1e-15)


def test_sample_is_reproducible(tmp_path):
    outputs = []
    for k in range(2):
        out = tmp_path / f"sample{k}.csv"
        argv = ["sample", "--method", "gaussian", "--N", "20", "--draws", "2", "--seed", "7"]
        assert run(argv + ["--format", "csv", "--output", str(out)]) == 0
        outputs.append(out.read_text(encoding="utf-8"))
    assert outputs[0] == outputs[1]
    assert outputs[0].splitlines()[0] == "bin_center,density,stderr"


def test_metropolis_sample(tmp_path):
    out = tmp_path / "chain.json"
    argv = ["sample", "--N", "4", "--steps", "10", "--burn_in", "2", "--chains", "2", "--seed", "7"]
    assert run(argv + ["--output", str(out)]) == 0
    data = _read_json(out)
    assert data["seed"] == 7
    assert len(data["rows"]) == 40


def test_stochastic_subcommand_needs_seed():
    assert run(["sample", "--method", "gaussian"]) == 2


def test_bad_input_exit_codes():
    assert run(["nonsense"]) == 2
    assert run(["critical", "--q", "abc"]) == 2
    assert run(["wronskian", "--format", "csv"]) == 2


def test_config_file_merging(tmp_path):
    config = tmp_path / "run.cfg"
    config.write_text("# critical couplings\nq = 1\n", encoding="utf-8")
    assert load_config(str(config), "critical").parameters == {"q": "1"}
    assert load_config(str(config), "critical", {"q": "3"}).parameters == {"q": "3"}

    empty = tmp_path / "empty.cfg"
    empty.write_text("", encoding="utf-8")
    resolved = load_config(str(empty), "critical")
    assert resolved.parameters == {} and resolved.format == OutputFormat.JSON

    out = tmp_path / "c.json"
    assert run(["critical", "--config", str(config), "--q", "2", "--output", str(out)]) == 0
    assert _read_json(out)["q"] == 2


def test_config_file_errors(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("q=1\nthis line is broken\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(str(bad), "critical")
    assert run(["critical", "--config", str(bad)]) == 2
    assert ":2:" in capsys.readouterr().err

    unknown = tmp_path / "unknown.cfg"
    unknown.write_text("colour=blue\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(str(unknown), "critical")


def test_nan_results_are_rejected(tmp_path, monkeypatch):
    with pytest.raises(NumericalError):
        emit(CommandResult(summary="nan", payload={"value": float("nan")}), OutputFormat.JSON, None)

    monkeypatch.setitem(
        cli.COMMANDS, "critical", lambda params, seed: CommandResult(summary="nan", payload={"v": math.nan})
    )
    out = tmp_path / "nan.json"
    assert run(["critical", "--output", str(out)]) == 3
    assert not out.exists()


def test_kac_table_csv(tmp_path):
    out = tmp_path / "kac.csv"
    assert run(["kac", "--p", "5", "--pprime", "2", "--n", "2", "--format", "csv", "--output", str(out)]) == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "r,s,quantum_dimension,entropy_residual"
    assert len(lines) == 5


def test_acceptance_subset(tmp_path):
    out = tmp_path / "acceptance.json"
    assert run(["acceptance", "--only", "2,3,7", "--output", str(out)]) == 0
    data = _read_json(out)
    assert data["passed"] is True
    assert [row[0] for row in data["rows"]] == [2, 3, 7]


def test_curve_export_round_trips(tmp_path):
    out = tmp_path / "curve.json"
    argv = ["dsl-curve", "--p", "3", "--pprime", "2", "--background", "chebyshev", "--output", str(out)]
    assert run(argv) == 0
    data = _read_json(out)
    assert data["polynomial"]["monomials"] == [[0, 0, 1, 4], [0, 1, -3, 4], [0, 3, 1, 1], [2, 0, -1, 2]]
    restored = BivariatePolynomial.from_json(json.dumps(data["polynomial"]))
    assert BivariatePolynomial.from_json(restored.to_json()).coefficients == restored.coefficients
    assert len(data["rows"]) == 4


def test_acceptance_failure_exit_code(monkeypatch, tmp_path):
    def boom(opts):
        raise PottsError("broken")

    monkeypatch.setitem(acceptance.CHECKS, 7, boom)
    out = tmp_path / "report.csv"
    assert run(["acceptance", "--only", "7", "--format", "csv", "--output", str(out)]) == 1
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "criterion,name,passed,measured,threshold,seconds,detail"
    assert lines[1].startswith("7,boom,False,,")
