# services/external/results_handler.py
from models.costs import CostReport
from models.greedy import GreedyTrace
from models.mesh import Mesh
from models.online import OnlineResult
from models.validation import ValidationRow
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence
import csv
import logging
import meshio
import numpy as np

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ("iter", "k", "M", "residuum", "dimension", "seconds", "galerkin_seconds", "offline_ops", "accepted")
# Wall-clock columns; everything else is reproducible for a fixed config and seed.
TIMING_COLUMNS = ("seconds", "galerkin_seconds")
ONLINE_COLUMNS = (
    "k", "M", "N", "delta", "s_N_re", "s_N_im", "s_pd_re", "s_pd_im", "seconds", "extrapolated",
)
FIELD_COLUMNS = ("vertex", "x1", "x2", "re", "im")
COST_COLUMNS = ("section", "label", "seconds", "operations", "count")


def fmt(value: Any) -> str:
    """Full round-trip precision for floats, empty cell for None."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def _split_complex(row: Dict[str, Any]) -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    for key, value in row.items():
        if isinstance(value, complex):
            out[f"{key}_re"], out[f"{key}_im"] = value.real, value.imag
        else:
            out[key] = value
    return out


def write_rows(path: str | Path, columns: Sequence[str], rows: Iterable[Dict[str, Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        n = 0
        for row in rows:
            writer.writerow([fmt(row.get(c)) for c in columns])
            n += 1
    logger.debug(f"Wrote {n} rows to {path}")
    return path


def read_rows(path: str | Path) -> List[Dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _without_timings(columns: Sequence[str], timings: bool) -> Sequence[str]:
    return columns if timings else tuple(c for c in columns if c not in TIMING_COLUMNS)


def write_trace(trace: GreedyTrace, path: str | Path, timings: bool = True) -> Path:
    rows = (
        dict(
            iter=r.iteration,
            k=r.mu.k,
            M=r.mu.M,
            residuum=r.residuum,
            dimension=r.dimension,
            seconds=r.seconds,
            galerkin_seconds=r.galerkin_seconds,
            offline_ops=r.offline_ops,
            accepted=r.accepted,
        )
        for r in trace.records
    )
    return write_rows(path, _without_timings(TRACE_COLUMNS, timings), rows)


def write_online(results: Sequence[OnlineResult], path: str | Path, timings: bool = True) -> Path:
    rows = []
    for r in results:
        rows.append(
            dict(
                k=r.k,
                M=r.M,
                N=len(r.xi),
                delta=r.delta,
                s_N_re=r.s_N[0] if r.s_N else None,
                s_N_im=r.s_N[1] if r.s_N else None,
                s_pd_re=r.s_pd[0] if r.s_pd else None,
                s_pd_im=r.s_pd[1] if r.s_pd else None,
                seconds=r.seconds,
                extrapolated=r.extrapolated,
            )
        )
    return write_rows(path, _without_timings(ONLINE_COLUMNS, timings), rows)


def validation_columns() -> List[str]:
    columns = ["row"]
    for name, field in ValidationRow.model_fields.items():
        if "complex" in str(field.annotation):
            columns += [f"{name}_re", f"{name}_im"]
        else:
            columns.append(name)
    return columns


def write_validation(
    rows: Sequence[ValidationRow], path: str | Path, aggregates: Optional[Dict[str, Dict[str, float]]] = None
) -> Path:
    """Per-parameter rows (row='mu') followed by one row per aggregate (row='max', 'mean')."""
    records = [{"row": "mu", **_split_complex(r.model_dump())} for r in rows]
    for label, values in (aggregates or {}).items():
        records.append({"row": label, **values})
    return write_rows(path, validation_columns(), records)


def write_costs(reports: Sequence[CostReport], path: str | Path) -> Path:
    """Seconds and operation-count reports side by side, then measured phases and model inputs."""
    by_unit = {r.unit: r for r in reports}
    seconds, ops = by_unit.get("seconds"), by_unit.get("operations")
    rows: List[Dict[str, Any]] = []
    for label in ("C_off", "C_on", "C_galerkin", "marginal"):
        rows.append(
            dict(
                section="summary",
                label=label,
                seconds=getattr(seconds, label) if seconds else None,
                operations=getattr(ops, label) if ops else None,
            )
        )
    if seconds is not None:
        rows += [dict(section="phase", label=p.label, seconds=p.seconds, count=p.count) for p in seconds.phases]
    if ops is not None:
        rows += [dict(section="model", label=name, operations=value) for name, value in ops.model.items()]
    return write_rows(path, COST_COLUMNS, rows)


def write_field(mesh: Mesh, u: np.ndarray, path: str | Path) -> Path:
    """Nodal field as (vertex, x1, x2, re, im) rows."""
    u = np.asarray(u, dtype=np.complex128)
    if len(u) != mesh.n_vertices:
        raise ValueError(f"Field has {len(u)} values for {mesh.n_vertices} vertices")
    rows = (
        dict(vertex=i, x1=float(x[0]), x2=float(x[1]), re=float(v.real), im=float(v.imag))
        for i, (x, v) in enumerate(zip(mesh.vertices, u))
    )
    return write_rows(path, FIELD_COLUMNS, rows)


def write_vtk(mesh: Mesh, u: np.ndarray, path: str | Path) -> Path:
    """Legacy-VTK ASCII unstructured grid with real part, imaginary part and modulus as point data."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    u = np.asarray(u, dtype=np.complex128)
    if len(u) != mesh.n_vertices:
        raise ValueError(f"Nodal field has {len(u)} values for {mesh.n_vertices} vertices")
    grid = meshio.Mesh(
        points=np.column_stack([mesh.vertices, np.zeros(mesh.n_vertices)]),
        cells=[("triangle", np.asarray(mesh.elements))],
        point_data={"re": u.real.copy(), "im": u.imag.copy(), "abs": np.abs(u)},
    )
    meshio.write(path, grid, file_format="vtk", binary=False)
    logger.debug(f"Wrote VTK field to {path}")
    return path
