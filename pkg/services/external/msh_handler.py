# services/external/msh_handler.py
from core.exceptions import MeshError
from models.mesh import Mesh, REGION_TAGS
from pathlib import Path
from typing import Dict, List, Tuple
import logging
import tempfile
import meshio
import numpy as np

logger = logging.getLogger(__name__)

SUPPORTED_CELLS = ("line", "triangle")
PHYSICAL = "gmsh:physical"
GEOMETRICAL = "gmsh:geometrical"

REGION_PHYSICAL_BASE = 101  # physical ids used for region tags when writing

# meshio surfaces malformed gmsh content through these besides ReadError
_READ_FAILURES = (meshio.ReadError, ValueError, IndexError, KeyError, EOFError)


def _check_format(path: Path) -> None:
    """Accepts only the ASCII 2.2 flavour of the gmsh format."""
    try:
        with open(path, encoding="ascii") as fh:
            lines = [line.strip() for line in fh]
    except UnicodeDecodeError:
        raise MeshError(f"Mesh file {path} is not ASCII.") from None
    lines = [line for line in lines if line]
    if not lines or lines[0] != "$MeshFormat":
        raise MeshError(f"Mesh file {path} does not start with '$MeshFormat'.")
    parts = lines[1].split() if len(lines) > 1 else []
    if len(parts) < 2 or not parts[0].startswith("2.2") or parts[1] != "0":
        raise MeshError(f"Unsupported mesh format '{lines[1] if len(lines) > 1 else ''}', expected ASCII 2.2.")
    current = None
    for line in lines:
        if not line.startswith("$"):
            continue
        if current is None:
            if line.startswith("$End"):
                raise MeshError(f"'{line}' without a matching section start.")
            current = line[1:]
        elif line != f"$End{current}":
            raise MeshError(f"Section '${current}' expected '$End{current}', found '{line}'.")
        else:
            current = None
    if current is not None:
        raise MeshError(f"Section '${current}' is not terminated.")
    for section in ("$Nodes", "$Elements"):
        if section not in lines:
            raise MeshError(f"Missing section '{section}'.")


def _physical_names(field_data: Dict[str, np.ndarray]) -> Dict[Tuple[int, int], str]:
    """(dimension, physical id) -> name, from meshio's field_data."""
    names: Dict[Tuple[int, int], str] = {}
    for name, data in field_data.items():
        data = np.asarray(data).ravel()
        if len(data) >= 2:
            names[(int(data[1]), int(data[0]))] = name
    return names


def _orient_counterclockwise(vertices: np.ndarray, elements: np.ndarray) -> np.ndarray:
    if len(elements) == 0:
        return elements
    p = vertices[elements]
    signed = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    clockwise = signed < 0
    elements = elements.copy()
    elements[clockwise] = elements[clockwise][:, [0, 2, 1]]
    return elements


def from_meshio(mio: meshio.Mesh) -> Mesh:
    """
    Converts a meshio mesh read from gmsh into a Mesh.

    Physical names 'interior', 'pml_left' and 'pml_right' on triangles become
    region tags (anything else is 'interior'); line physical names (or the
    numeric physical id) become boundary tags.

    Raises:
        MeshError: On cell types other than 2-node lines and 3-node
            triangles, or dangling vertex references.
    """
    names = _physical_names(mio.field_data)
    physical = mio.cell_data.get(PHYSICAL)
    vertices = np.asarray(mio.points, dtype=np.float64)[:, :2]

    triangles: List[np.ndarray] = []
    regions: List[str] = []
    lines: List[np.ndarray] = []
    line_tags: List[str] = []
    for i, block in enumerate(mio.cells):
        if block.type not in SUPPORTED_CELLS:
            raise MeshError(f"Unsupported element type '{block.type}'; only lines and triangles are read.")
        data = np.asarray(block.data, dtype=np.int64)
        ids = np.asarray(physical[i], dtype=np.int64) if physical is not None else np.zeros(len(data), dtype=np.int64)
        if block.type == "triangle":
            triangles.append(data)
            for pid in ids:
                name = names.get((2, int(pid)), "interior")
                regions.append(name if name in REGION_TAGS else "interior")
        else:
            lines.append(data)
            line_tags += [names.get((1, int(pid)), str(int(pid))) for pid in ids]

    elements = np.concatenate(triangles) if triangles else np.zeros((0, 3), dtype=np.int64)
    if len(elements) and (elements.min() < 0 or elements.max() >= len(vertices)):
        raise MeshError("Element references an unknown node.")
    elements = _orient_counterclockwise(vertices, elements)
    segments = np.concatenate(lines) if lines else np.zeros((0, 2), dtype=np.int64)

    edges, tags = _boundary_lines(elements, segments, line_tags)
    logger.debug(f"Parsed mesh: {len(vertices)} nodes, {len(elements)} triangles, {len(edges)} boundary edges")
    return Mesh(
        vertices=vertices,
        elements=elements,
        boundary_edges=np.array(edges, dtype=np.int64).reshape(-1, 2),
        boundary_tags=tuple(tags),
        element_regions=tuple(regions),
    )


def _boundary_lines(elements: np.ndarray, lines: np.ndarray, line_tags: List[str]):
    """Keeps lines that are boundary edges; interior interface lines are dropped."""
    if len(lines) == 0:
        return [], []
    raw = np.concatenate([elements[:, [0, 1]], elements[:, [1, 2]], elements[:, [2, 0]]])
    raw.sort(axis=1)
    unique, counts = np.unique(raw, axis=0, return_counts=True)
    count_of = {(int(a), int(b)): int(c) for (a, b), c in zip(unique, counts)}
    edges, tags = [], []
    dropped = 0
    for (a, b), tag in zip(lines, line_tags):
        a, b = int(a), int(b)
        count = count_of.get((min(a, b), max(a, b)), 0)
        if count == 0:
            raise MeshError(f"Line ({a + 1}, {b + 1}) is not an edge of any triangle.")
        if count == 1:
            edges.append((a, b))
            tags.append(tag)
        else:
            dropped += 1
    if dropped:
        logger.debug(f"Dropped {dropped} tagged interior interface lines.")
    return edges, tags


def to_meshio(mesh: Mesh) -> meshio.Mesh:
    """Mesh as a meshio mesh with gmsh physical groups for boundary and region tags."""
    boundary_ids = {name: i + 1 for i, name in enumerate(sorted(set(mesh.boundary_tags)))}
    region_ids = {name: REGION_PHYSICAL_BASE + i for i, name in enumerate(REGION_TAGS)}

    cells, physical = [], []
    if len(mesh.boundary_edges):
        cells.append(("line", np.asarray(mesh.boundary_edges)))
        physical.append(np.array([boundary_ids[t] for t in mesh.boundary_tags], dtype=np.int64))
    cells.append(("triangle", np.asarray(mesh.elements)))
    physical.append(np.array([region_ids[r] for r in mesh.element_regions], dtype=np.int64))

    field_data = {name: np.array([pid, 1]) for name, pid in boundary_ids.items()}
    field_data.update({name: np.array([pid, 2]) for name, pid in region_ids.items()})
    points = np.column_stack([mesh.vertices, np.zeros(mesh.n_vertices)])
    return meshio.Mesh(
        points=points,
        cells=cells,
        cell_data={PHYSICAL: physical, GEOMETRICAL: [p.copy() for p in physical]},
        field_data=field_data,
    )


def read_msh(path: str | Path) -> Mesh:
    """
    Reads an ASCII MSH v2.2 file (MeshFormat, PhysicalNames, Nodes, Elements).

    Raises:
        MeshError: If the file is missing, not ASCII 2.2, malformed, or
            holds unsupported elements.
    """
    path = Path(path)
    logger.info(f"Reading mesh file {path}")
    if not path.is_file():
        raise MeshError(f"Mesh file not found: {path}")
    _check_format(path)
    try:
        mio = meshio.read(path, file_format="gmsh")
    except _READ_FAILURES as e:
        raise MeshError(f"Malformed mesh file {path}: {e}") from None
    return from_meshio(mio)


def parse_msh(text: str) -> Mesh:
    """Parses mesh-file content; see read_msh. 1-based file indices become 0-based."""
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "mesh.msh"
        try:
            path.write_text(text, encoding="ascii")
        except UnicodeEncodeError:
            raise MeshError("Mesh content is not ASCII.") from None
        return read_msh(path)


def write_msh(mesh: Mesh, path: str | Path) -> None:
    """Writes a mesh as ASCII MSH v2.2 that read_msh reads back unchanged."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meshio.write(path, to_meshio(mesh), file_format="gmsh22", binary=False)
    logger.info(f"Wrote mesh with {mesh.n_vertices} vertices to {path}")
