# tests/test_cli.py
import json
import shutil
import pytest
from click.testing import CliRunner
from pydantic import ValidationError

from cli.main import crbm, parse_queries
from core.exceptions import ConfigError
from models.parameters import ParameterPoint
from tests.conftest import FIXTURES


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def box(tmp_path, monkeypatch):
    """box.toml copied next to an output directory set through the environment."""
    config = tmp_path / "box.toml"
    shutil.copy(FIXTURES / "box.toml", config)
    monkeypatch.setenv("CRBM_OUTPUT_DIR", str(tmp_path / "out"))
    return config


def test_offline_online_validate(runner, box, tmp_path):
    result = runner.invoke(crbm, ["offline", "--config", str(box)])
    assert result.exit_code == 0, result.output
    assert "N=" in result.output and "stopped=" in result.output
    basis = tmp_path / "out" / "basis.npz"
    assert basis.is_file()
    assert (tmp_path / "out" / "trace.csv").is_file()

    result = runner.invoke(crbm, ["online", "--config", str(box), "--basis", str(basis), "--query", "1.5,0.2; 1.1,0.05"])
    assert result.exit_code == 0, result.output
    assert "2 queries" in result.output
    assert (tmp_path / "out" / "online.csv").is_file()

    # without --query the config's query list is used
    result = runner.invoke(crbm, ["online", "--config", str(box), "--basis", str(basis)])
    assert "1 queries" in result.output

    result = runner.invoke(crbm, ["validate", "--config", str(box), "--basis", str(basis)])
    assert result.exit_code == 0, result.output
    assert "1 parameters validated" in result.output
    assert (tmp_path / "out" / "validate.csv").is_file()


def test_no_timings_drops_the_seconds_columns(runner, box, tmp_path):
    result = runner.invoke(crbm, ["offline", "--config", str(box), "--no-timings"])
    assert result.exit_code == 0, result.output
    header = (tmp_path / "out" / "trace.csv").read_text(encoding="utf-8").splitlines()[0]
    assert "iter" in header and "seconds" not in header

    basis = tmp_path / "out" / "basis.npz"
    result = runner.invoke(crbm, ["online", "--config", str(box), "--basis", str(basis), "--no-timings"])
    assert result.exit_code == 0, result.output
    header = (tmp_path / "out" / "online.csv").read_text(encoding="utf-8").splitlines()[0]
    assert "seconds" not in header


def test_invalid_config_exits_with_1(runner, tmp_path):
    config = tmp_path / "bad.toml"
    config.write_text("[mesh.generator]\nnx = 0\nny = 2\n\n[grid]\nk_min = 1.0\nk_max = 2.0\nn_k = 2\n", encoding="utf-8")
    result = runner.invoke(crbm, ["offline", "--config", str(config)])
    assert result.exit_code == 1


def test_missing_basis_exits_with_1(runner, box, tmp_path):
    result = runner.invoke(crbm, ["online", "--config", str(box), "--basis", str(tmp_path / "none.npz")])
    assert result.exit_code == 1


def test_bad_query_exits_with_1(runner, box, tmp_path):
    result = runner.invoke(crbm, ["online", "--config", str(box), "--basis", str(tmp_path / "none.npz"), "--query", "1.5"])
    assert result.exit_code == 1


def test_mesh_gen_and_info(runner, tmp_path):
    out = tmp_path / "square.msh"
    result = runner.invoke(crbm, ["mesh", "gen", "--nx", "2", "--ny", "2", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "vertices 9" in result.output
    assert out.is_file()

    result = runner.invoke(crbm, ["mesh", "info", str(out)])
    assert result.exit_code == 0
    assert "elements 8" in result.output


def test_mesh_gen_from_config(runner, box, tmp_path):
    out = tmp_path / "box.msh"
    result = runner.invoke(crbm, ["mesh", "gen", "--config", str(box), "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "vertices 49" in result.output


def test_misaligned_hole_exits_with_2(runner, tmp_path):
    args = ["mesh", "gen", "--nx", "2", "--ny", "2", "--hole", "-0.3", "0.3", "-0.3", "0.3", "--out", str(tmp_path / "h.msh")]
    result = runner.invoke(crbm, args)
    assert result.exit_code == 2


def test_malformed_mesh_file_exits_with_2(runner, tmp_path):
    path = tmp_path / "broken.msh"
    path.write_text("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n", encoding="ascii")
    result = runner.invoke(crbm, ["mesh", "info", str(path)])
    assert result.exit_code == 2


def test_non_numeric_node_exits_with_2(runner, tmp_path, unit_square_text):
    path = tmp_path / "bad_node.msh"
    path.write_text(unit_square_text.replace("2 1 0 0", "2 abc 0 0"), encoding="ascii")
    result = runner.invoke(crbm, ["mesh", "info", str(path)])
    assert result.exit_code == 2
    assert not isinstance(result.exception, ValueError)


def test_parse_queries_inline_and_file(tmp_path):
    assert parse_queries(None) is None
    assert parse_queries("1.5,0.2;2,0") == [ParameterPoint(k=1.5, M=0.2), ParameterPoint(k=2.0, M=0.0)]
    path = tmp_path / "queries.json"
    path.write_text(json.dumps({"queries": [{"k": 3.0, "M": 0.1}]}), encoding="utf-8")
    assert parse_queries(str(path)) == [ParameterPoint(k=3.0, M=0.1)]


def test_parse_queries_rejects_bad_input():
    with pytest.raises(ConfigError):
        parse_queries("1.5,0.2;abc")
    with pytest.raises(ValidationError):
        parse_queries("1.5,1.2")
