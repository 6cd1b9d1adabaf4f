# tests/test_analytic.py
import numpy as np
import pytest

from models.analytic import ExactField
from models.parameters import ParameterPoint
from models.run_spec import ExactSpec, SourceSpec
from services.analytic_service import (
    duct_mode,
    duct_wavenumbers,
    error_norms,
    exact_field,
    fundamental_field,
    fundamental_solution,
    fundamental_solution_gradient,
    interpolate,
)
from services.mesh_service import generate_rect_mesh

MU = ParameterPoint(k=4.0, M=0.3)


def _linear_field():
    return ExactField(
        name="x1",
        value=lambda p: p[:, 0],
        gradient=lambda p: np.column_stack([np.ones(len(p)), np.zeros(len(p))]),
    )


def _operator_residual(u, x1, x2, mu, h=1e-3):
    """(1 - M^2) u_11 + u_22 + 2ikM u_1 + k^2 u by central differences."""
    u11 = (u(x1 + h, x2) - 2 * u(x1, x2) + u(x1 - h, x2)) / h ** 2
    u22 = (u(x1, x2 + h) - 2 * u(x1, x2) + u(x1, x2 - h)) / h ** 2
    u1 = (u(x1 + h, x2) - u(x1 - h, x2)) / (2 * h)
    return (1 - mu.M ** 2) * u11 + u22 + 2j * mu.k * mu.M * u1 + mu.k ** 2 * u(x1, x2)


@pytest.mark.parametrize("point", [(0.7, 0.2), (-1.1, 0.5), (0.3, -1.4)])
def test_fundamental_solution_solves_the_homogeneous_equation(point):
    def u(x1, x2):
        return fundamental_solution(x1, x2, MU)

    residual = _operator_residual(u, *point, MU)
    assert abs(residual) <= 1e-4 * MU.k ** 2 * abs(u(*point))


def test_fundamental_solution_without_flow_is_the_helmholtz_kernel():
    import scipy.special as sc

    mu = ParameterPoint(k=2.0, M=0.0)
    r = np.hypot(0.3, 0.4)
    assert fundamental_solution(0.3, 0.4, mu) == pytest.approx(0.25j * sc.hankel1(0, 2.0 * r), rel=1e-8)


def test_fundamental_gradient_matches_finite_differences():
    x1, x2, h = np.array([0.4, -0.9]), np.array([0.6, 0.1]), 1e-6
    g1, g2 = fundamental_solution_gradient(x1, x2, MU, source=(0.1, 0.0))
    fd1 = (fundamental_solution(x1 + h, x2, MU, (0.1, 0.0)) - fundamental_solution(x1 - h, x2, MU, (0.1, 0.0))) / (2 * h)
    fd2 = (fundamental_solution(x1, x2 + h, MU, (0.1, 0.0)) - fundamental_solution(x1, x2 - h, MU, (0.1, 0.0))) / (2 * h)
    np.testing.assert_allclose(g1, fd1, rtol=1e-6)
    np.testing.assert_allclose(g2, fd2, rtol=1e-6)


def test_fundamental_solution_is_singular_at_the_source():
    with pytest.raises(ValueError):
        fundamental_solution(0.5, 0.5, MU, source=(0.5, 0.5))


def test_duct_mode_wavenumbers_and_jump():
    kappa_plus, kappa_minus = duct_wavenumbers(MU)
    assert kappa_plus == pytest.approx(4.0 / 1.3)
    assert kappa_minus == pytest.approx(-4.0 / 0.7)
    # continuous across the source
    h = 1e-7
    left, right = duct_mode(-h, MU), duct_mode(h, MU)
    assert left == pytest.approx(right, abs=1e-6)


@pytest.mark.parametrize("x", [-2.0, -0.5, 0.7, 3.0])
def test_duct_mode_solves_the_duct_equation_away_from_the_source(x):
    h = 1e-4
    u = lambda t: duct_mode(t, MU)  # noqa: E731
    u2 = (u(x + h) - 2 * u(x) + u(x - h)) / h ** 2
    u1 = (u(x + h) - u(x - h)) / (2 * h)
    residual = (1 - MU.M ** 2) * u2 + 2j * MU.k * MU.M * u1 + MU.k ** 2 * u(x)
    assert abs(residual) <= 1e-5 * MU.k ** 2 * abs(u(x))


def test_exact_field_selection():
    assert exact_field(ExactSpec(), MU) is None
    assert exact_field(ExactSpec(kind="fundamental", source_point=(0.0, 2.0)), MU).singular_point == (0.0, 2.0)
    line = exact_field(ExactSpec(kind="duct_mode", x0=0.5), MU, SourceSpec(kind="line", x0=0.5, amplitude=2.0))
    assert line(np.array([[0.5, 0.0]]))[0] == pytest.approx(2.0 / (2j * MU.k))


def test_error_norms_of_a_linear_field():
    mesh = generate_rect_mesh((-1.0, 1.0), (-1.0, 1.0), 4, 4)
    exact = _linear_field()
    exact_norms = error_norms(mesh, interpolate(mesh, exact), exact)
    assert exact_norms.linf == pytest.approx(0.0, abs=1e-14)
    assert exact_norms.l2 == pytest.approx(0.0, abs=1e-14)
    assert exact_norms.h1 == pytest.approx(0.0, abs=1e-13)

    # against the zero field the norms are those of x1 on [-1, 1]^2
    zero = error_norms(mesh, np.zeros(mesh.n_vertices), exact)
    assert zero.linf == pytest.approx(1.0)
    assert zero.l2 == pytest.approx(np.sqrt(4.0 / 3.0), rel=1e-12)
    assert zero.h1 == pytest.approx(np.sqrt(4.0 / 3.0 + 4.0), rel=1e-12)
    assert zero.rel_l2 == pytest.approx(1.0)


def test_error_norms_with_numerical_gradient():
    mesh = generate_rect_mesh((-1.0, 1.0), (-1.0, 1.0), 4, 4)
    field = ExactField(name="x1", value=lambda p: p[:, 0])
    norms = error_norms(mesh, np.zeros(mesh.n_vertices), field)
    assert norms.h1 == pytest.approx(np.sqrt(4.0 / 3.0 + 4.0), rel=1e-8)


def test_error_norms_on_a_subregion():
    mesh = generate_rect_mesh((-1.0, 1.0), (-1.0, 1.0), 4, 4)
    mask = mesh.centroids()[:, 0] > 0
    norms = error_norms(mesh, np.zeros(mesh.n_vertices), _linear_field(), mask)
    # int_0^1 int_-1^1 x^2 = 2/3
    assert norms.l2 == pytest.approx(np.sqrt(2.0 / 3.0), rel=1e-12)


def test_fundamental_field_matches_its_function():
    field = fundamental_field(MU, (0.0, 2.0))
    points = np.array([[0.1, 0.2], [0.5, -0.3]])
    np.testing.assert_allclose(field(points), fundamental_solution(points[:, 0], points[:, 1], MU, (0.0, 2.0)))
