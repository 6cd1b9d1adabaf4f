# tests/conftest.py
from pathlib import Path
import numpy as np
import pytest

from core.run_config import RunConfig
from models.parameters import ParameterGrid, ParameterPoint
from models.run_spec import GeneratorSpec, GreedySettings, MeshSpec, SourceSpec
from services.mesh_service import generate_rect_mesh
from services.problem_service import build_problem
from services.rbm_service import dual_build, greedy_build
from services.run_service import build_training_set

FIXTURES = Path(__file__).parent / "fixtures"

# k^2 stays below the first Dirichlet eigenvalue of [-1, 1]^2 for every M in the box
GRID = ParameterGrid(k_min=1.0, k_max=2.0, n_k=5, M_min=0.0, M_max=0.3, n_M=3)


def make_config(output_dir, **overrides) -> RunConfig:
    """Bounded 6x6 box with a gaussian source; keyword arguments replace sections."""
    values = dict(
        problem="bounded",
        mesh=MeshSpec(generator=GeneratorSpec(nx=6, ny=6)),
        grid=GRID,
        greedy=GreedySettings(tolerance=1e-9, n_max=15),
        source=SourceSpec(kind="gaussian", center=(0.1, -0.2), width=0.3),
        output_dir=str(output_dir),
    )
    values.update(overrides)
    return RunConfig(**values)


def random_points(n: int, seed: int = 7):
    rng = np.random.default_rng(seed)
    return [
        ParameterPoint(k=float(k), M=float(M))
        for k, M in zip(rng.uniform(GRID.k_min, GRID.k_max, n), rng.uniform(GRID.M_min, GRID.M_max, n))
    ]


@pytest.fixture
def square_mesh():
    return generate_rect_mesh((-1.0, 1.0), (-1.0, 1.0), 6, 6)


@pytest.fixture
def unit_square_text() -> str:
    return (FIXTURES / "unit_square.msh").read_text(encoding="ascii")


@pytest.fixture
def config(tmp_path) -> RunConfig:
    return make_config(tmp_path / "results")


@pytest.fixture(scope="session")
def bounded_problem(tmp_path_factory):
    return build_problem(make_config(tmp_path_factory.mktemp("problem")))


@pytest.fixture(scope="session")
def training():
    return build_training_set(GRID)


@pytest.fixture(scope="session")
def greedy_result(bounded_problem, training):
    """(basis, trace) of a greedy run that visits most of the training set."""
    return greedy_build(bounded_problem, training, GreedySettings(tolerance=1e-9, n_max=15))


@pytest.fixture(scope="session")
def small_basis(bounded_problem, training):
    """Three-function basis; its residuals stay far above round-off."""
    rb, _ = greedy_build(bounded_problem, training, GreedySettings(tolerance=1e-12, n_max=3))
    return rb


@pytest.fixture(scope="session")
def small_dual(bounded_problem, small_basis):
    return dual_build(bounded_problem, small_basis.snapshot_params, small_basis)
