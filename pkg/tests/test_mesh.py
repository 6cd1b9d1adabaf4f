# tests/test_mesh.py
import numpy as np
import pytest

from core.exceptions import MeshError
from models.mesh import Mesh
from models.run_spec import HoleSpec
from services.external.msh_handler import parse_msh, read_msh, write_msh
from services.mesh_service import element_map, generate_rect_mesh, mesh_summary

MINIMAL = """$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
3
1 0 0 0
2 1 0 0
3 0 1 0
$EndNodes
$Elements
1
1 2 2 0 0 {nodes}
$EndElements
"""


def _triangle(points):
    return Mesh(
        vertices=points,
        elements=[[0, 1, 2]],
        boundary_edges=np.zeros((0, 2)),
        boundary_tags=(),
        element_regions=("interior",),
    )


# --- parse_msh ---

def test_parse_minimal_file():
    mesh = parse_msh(MINIMAL.format(nodes="1 2 3"))
    assert (mesh.n_vertices, mesh.n_elements, len(mesh.boundary_edges)) == (3, 1, 0)
    assert mesh.element_regions == ("interior",)


def test_parse_reorients_clockwise_triangles():
    mesh = parse_msh(MINIMAL.format(nodes="1 3 2"))
    assert mesh.signed_areas()[0] == pytest.approx(0.5)
    assert list(mesh.elements[0]) == [0, 1, 2]


def test_parse_unit_square(unit_square_text):
    mesh = parse_msh(unit_square_text)
    assert (mesh.n_vertices, mesh.n_elements, len(mesh.boundary_edges)) == (4, 2, 4)
    assert sorted(mesh.boundary_tags) == ["bottom", "left", "right", "top"]
    assert mesh.total_area() == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize(
    "text, message",
    [
        (MINIMAL.replace("$Nodes\n3", "$Nodes\n4").format(nodes="1 2 3"), "Malformed"),
        (MINIMAL.replace("1 2 2 0 0", "1 4 2 0 0").format(nodes="1 2 3 3"), "Unsupported element type"),
        (MINIMAL.replace("$EndNodes\n", "").format(nodes="1 2 3"), "expected"),
        (MINIMAL.replace("2.2 0 8", "4.1 0 8").format(nodes="1 2 3"), "Unsupported mesh format"),
        (MINIMAL.replace("2 1 0 0", "2 abc 0 0").format(nodes="1 2 3"), "Malformed"),
        (MINIMAL.format(nodes="1 2 x"), "Malformed"),
    ],
)
def test_parse_rejects_malformed_files(text, message):
    with pytest.raises(MeshError, match=message):
        parse_msh(text)


def test_parse_rejects_dangling_node_reference():
    with pytest.raises(MeshError):
        parse_msh(MINIMAL.format(nodes="1 2 9"))


def test_parse_rejects_non_ascii_content():
    with pytest.raises(MeshError, match="not ASCII"):
        parse_msh(MINIMAL.format(nodes="1 2 3").replace("$EndElements", "$EndElements\nü"))


def test_parse_rejects_missing_elements_section():
    text = MINIMAL.split("$Elements")[0]
    with pytest.raises(MeshError, match="Missing section"):
        parse_msh(text)


# --- Mesh invariants ---

def test_mesh_rejects_coincident_vertices():
    with pytest.raises(MeshError, match="coincide"):
        Mesh(
            vertices=[[0, 0], [1, 0], [0, 1], [0, 1]],
            elements=[[0, 1, 2]],
            boundary_edges=np.zeros((0, 2)),
            boundary_tags=(),
            element_regions=("interior",),
        )


def test_mesh_rejects_dangling_element_index():
    with pytest.raises(MeshError, match="outside the vertex table"):
        Mesh(
            vertices=[[0, 0], [1, 0], [0, 1]],
            elements=[[0, 1, 3]],
            boundary_edges=np.zeros((0, 2)),
            boundary_tags=(),
            element_regions=("interior",),
        )


def test_mesh_rejects_interior_boundary_edge(square_mesh):
    interior_edge = [0, square_mesh.elements[0][2]]  # diagonal of the first cell
    with pytest.raises(MeshError, match="exactly one element"):
        Mesh(
            vertices=square_mesh.vertices,
            elements=square_mesh.elements,
            boundary_edges=[interior_edge],
            boundary_tags=("left",),
            element_regions=square_mesh.element_regions,
        )


# --- generate_rect_mesh ---

@pytest.mark.parametrize("n, vertices, elements", [(1, 4, 2), (2, 9, 8), (3, 16, 18)])
def test_generator_counts(n, vertices, elements):
    mesh = generate_rect_mesh((-1.0, 1.0), (-1.0, 1.0), n, n)
    assert (mesh.n_vertices, mesh.n_elements) == (vertices, elements)
    assert mesh.total_area() == pytest.approx(4.0, rel=1e-12)


def test_generator_with_hole_forms_an_annulus():
    hole = HoleSpec(x_min=-0.5, x_max=0.5, y_min=-0.5, y_max=0.5)
    mesh = generate_rect_mesh((-1.0, 1.0), (-1.0, 1.0), 4, 4, hole=hole)
    n_edges = len(mesh.edges())
    assert mesh.n_vertices - n_edges + mesh.n_elements == 0
    assert (mesh.n_vertices, mesh.n_elements) == (24, 24)
    assert mesh.total_area() == pytest.approx(3.0, rel=1e-10)
    summary = mesh_summary(mesh)
    assert summary.boundary_tags == {"hole": 8, "left": 4, "right": 4, "bottom": 4, "top": 4}


def test_generator_is_deterministic():
    a = generate_rect_mesh((0.0, 2.0), (0.0, 1.0), 5, 3)
    b = generate_rect_mesh((0.0, 2.0), (0.0, 1.0), 5, 3)
    np.testing.assert_array_equal(a.vertices, b.vertices)
    np.testing.assert_array_equal(a.elements, b.elements)
    assert a.boundary_tags == b.boundary_tags


@pytest.mark.parametrize(
    "hole",
    [
        HoleSpec(x_min=-0.3, x_max=0.5, y_min=-0.5, y_max=0.5),  # off the grid lines
        HoleSpec(x_min=-1.0, x_max=0.5, y_min=-0.5, y_max=0.5),  # touches the outer boundary
    ],
)
def test_generator_rejects_bad_holes(hole):
    with pytest.raises(MeshError):
        generate_rect_mesh((-1.0, 1.0), (-1.0, 1.0), 4, 4, hole=hole)


def test_generator_rejects_empty_rectangle():
    with pytest.raises(MeshError, match="Empty rectangle"):
        generate_rect_mesh((1.0, 1.0), (0.0, 1.0), 2, 2)


# --- element_map ---

@pytest.mark.parametrize(
    "points, B, b, area",
    [
        ([[0, 0], [1, 0], [0, 1]], np.eye(2), [0, 0], 0.5),
        ([[5, 7], [6, 7], [5, 8]], np.eye(2), [5, 7], 0.5),
        ([[0, 0], [2, 0], [0, 3]], np.diag([2.0, 3.0]), [0, 0], 3.0),
    ],
)
def test_element_map(points, B, b, area):
    emap = element_map(_triangle(points), 0)
    np.testing.assert_allclose(emap.B, B)
    np.testing.assert_allclose(emap.b, b)
    assert emap.area == pytest.approx(area)


def test_element_map_inverse_reproduces_vertices(square_mesh):
    reference = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    for index in range(square_mesh.n_elements):
        emap = element_map(square_mesh, index)
        vertices = square_mesh.vertices[square_mesh.elements[index]]
        np.testing.assert_allclose(emap.apply(reference), vertices, atol=1e-14)
        np.testing.assert_allclose(emap.inverse(vertices), reference, atol=1e-14)


def test_element_map_rejects_bad_index(square_mesh):
    with pytest.raises(IndexError):
        element_map(square_mesh, square_mesh.n_elements)


# --- MSH output ---

def test_write_read_round_trip(tmp_path):
    hole = HoleSpec(x_min=-0.5, x_max=0.5, y_min=-0.5, y_max=0.5)
    mesh = generate_rect_mesh((-1.0, 1.0), (-1.0, 1.0), 4, 4, hole=hole)
    path = tmp_path / "annulus.msh"
    write_msh(mesh, path)
    assert path.read_text(encoding="ascii").splitlines()[1].startswith("2.2 0")
    again = read_msh(path)
    np.testing.assert_array_equal(again.vertices, mesh.vertices)
    np.testing.assert_array_equal(again.elements, mesh.elements)
    np.testing.assert_array_equal(again.boundary_edges, mesh.boundary_edges)
    assert again.boundary_tags == mesh.boundary_tags
    assert again.element_regions == mesh.element_regions


def test_write_read_file(tmp_path, square_mesh):
    path = tmp_path / "meshes" / "square.msh"
    write_msh(square_mesh, path)
    mesh = read_msh(path)
    assert mesh_summary(mesh) == mesh_summary(square_mesh)


def test_read_missing_file(tmp_path):
    with pytest.raises(MeshError, match="not found"):
        read_msh(tmp_path / "absent.msh")


def test_summary_text(unit_square_text):
    text = mesh_summary(parse_msh(unit_square_text)).to_text()
    assert text.splitlines()[:4] == ["vertices 4", "elements 2", "boundary_edges 4", "area 1"]
    assert "region interior 2" in text
    assert "boundary left 1" in text
