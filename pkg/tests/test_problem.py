# tests/test_problem.py
import math
import numpy as np
import pytest
from pydantic import ValidationError

from core.exceptions import ConfigError
from core.run_config import RunConfig, load_run_config
from models.parameters import ParameterPoint
from models.pml import PmlConfig
from models.problem import DirichletMode
from models.run_spec import BoundarySpec, GeneratorSpec, MeshSpec
from services.analytic_service import fundamental_solution
from services.problem_service import build_problem
from services.rbm_service import truth_solve
from tests.conftest import FIXTURES, GRID, make_config

MU = ParameterPoint(k=1.5, M=0.2)


def _pml_config(tmp_path, **pml) -> RunConfig:
    return make_config(
        tmp_path,
        problem="pml",
        mesh=MeshSpec(generator=GeneratorSpec(x_range=(-2.0, 2.0), y_range=(-0.5, 0.5), nx=16, ny=4)),
        pml=PmlConfig(**pml),
    )


def test_bounded_problem(bounded_problem):
    assert bounded_problem.kind == "bounded"
    assert bounded_problem.n_dofs == 25
    assert bounded_problem.operator.n_blocks == 4
    assert bounded_problem.rhs.n_blocks == 1
    assert bounded_problem.affine_rhs
    assert bounded_problem.output is not None


def test_constant_dirichlet_keeps_the_affine_split(tmp_path):
    cfg = make_config(tmp_path, boundary=BoundarySpec(value="constant", constant_re=1.0, constant_im=-0.5))
    problem = build_problem(cfg)
    assert problem.dirichlet.mode == DirichletMode.PARAMETER_INDEPENDENT
    assert problem.rhs.n_blocks == 5
    assert problem.rhs.coefficient_ids[1:] == tuple(f"neg:{cid}" for cid in problem.operator.coefficient_ids)
    full = problem.reconstruct(truth_solve(problem.operator, problem.rhs, MU), MU)
    np.testing.assert_array_equal(full[problem.dofmap.boundary], 1.0 - 0.5j)


def test_fundamental_dirichlet_is_not_affine(tmp_path):
    cfg = make_config(tmp_path, boundary=BoundarySpec(value="fundamental", source_point=(0.0, 2.0)))
    problem = build_problem(cfg)
    assert not problem.affine_rhs
    assert problem.dirichlet.mode == DirichletMode.PER_PARAMETER
    boundary_points = problem.mesh.vertices[problem.dofmap.boundary]
    full = problem.reconstruct(np.zeros(problem.n_dofs), MU)
    expected = fundamental_solution(boundary_points[:, 0], boundary_points[:, 1], MU, (0.0, 2.0))
    np.testing.assert_allclose(full[problem.dofmap.boundary], expected)
    assert not np.allclose(problem.rhs_at(MU), problem.rhs_at(ParameterPoint(k=1.9, M=0.0)))


def test_pml_problem(tmp_path):
    problem = build_problem(_pml_config(tmp_path, sigma0=10.0))
    assert problem.kind == "pml"
    assert problem.operator.n_blocks == 6
    assert problem.dirichlet.tags == ("left", "right")
    # top and bottom are natural: only the two end columns of the 17 x 5 grid are prescribed
    assert problem.n_dofs == 17 * 5 - 2 * 5
    assert problem.physical_mask.sum() == 2 * 8 * 4


def test_pml_frequency_defaults_to_the_geometric_mean_of_the_k_range(tmp_path):
    cfg = _pml_config(tmp_path)
    assert cfg.pml.omega == pytest.approx(math.sqrt(GRID.k_min * GRID.k_max))
    assert _pml_config(tmp_path, omega=7.0).pml.omega == 7.0


def test_pml_problem_needs_a_pml_section(tmp_path):
    with pytest.raises(ValidationError):
        make_config(tmp_path, problem="pml")


def test_no_free_dofs(tmp_path):
    cfg = make_config(tmp_path, mesh=MeshSpec(generator=GeneratorSpec(nx=1, ny=1)))
    with pytest.raises(ConfigError):
        build_problem(cfg)


def test_unknown_dirichlet_tag(tmp_path):
    cfg = make_config(tmp_path, boundary=BoundarySpec(dirichlet_tags=["inlet"]))
    with pytest.raises(ConfigError):
        build_problem(cfg)


def test_mesh_spec_needs_exactly_one_source():
    with pytest.raises(ValidationError):
        MeshSpec()
    with pytest.raises(ValidationError):
        MeshSpec(file="a.msh", generator=GeneratorSpec(nx=2, ny=2))


def test_load_run_config():
    cfg = load_run_config(FIXTURES / "box.toml")
    assert cfg.problem == "bounded"
    assert cfg.mesh.generator.nx == 6
    assert cfg.grid.n_k == 5
    assert cfg.greedy.n_max == 4
    assert cfg.validation == [ParameterPoint(k=1.3, M=0.1)]
    assert cfg.queries == [ParameterPoint(k=1.5, M=0.2)]


def test_environment_overrides_the_file(monkeypatch):
    monkeypatch.setenv("CRBM_GREEDY__N_MAX", "7")
    cfg = load_run_config(FIXTURES / "box.toml")
    assert cfg.greedy.n_max == 7
    assert cfg.greedy.tolerance == 1e-9


def test_relative_mesh_file_is_resolved_against_the_config(tmp_path, unit_square_text):
    (tmp_path / "meshes").mkdir()
    (tmp_path / "meshes" / "square.msh").write_text(unit_square_text, encoding="ascii")
    path = tmp_path / "run.toml"
    path.write_text(
        '[mesh]\nfile = "meshes/square.msh"\n\n[grid]\nk_min = 1.0\nk_max = 2.0\nn_k = 2\n', encoding="utf-8"
    )
    cfg = load_run_config(path)
    assert cfg.mesh.file == str((tmp_path / "meshes" / "square.msh").resolve())


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_run_config(tmp_path / "missing.toml")


def test_malformed_config_file(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[grid\nk_min = 1\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_run_config(path)


def test_invalid_config_values(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text(
        "[mesh.generator]\nnx = 0\nny = 2\n\n[grid]\nk_min = 1.0\nk_max = 2.0\nn_k = 2\n", encoding="utf-8"
    )
    with pytest.raises(ConfigError, match="Invalid configuration"):
        load_run_config(path)
