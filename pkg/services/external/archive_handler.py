# services/external/archive_handler.py
from core.exceptions import ArchiveError
from models.reduced_basis import ARCHIVE_VERSION, ArchiveHeader, DualBasis, ReducedBasis
from pathlib import Path
from pydantic import ValidationError
from typing import Dict, Optional, Tuple
import logging
import zipfile
import numpy as np

logger = logging.getLogger(__name__)

COMPLEX_DTYPE = "<c16"  # little-endian complex128

_PRIMAL_ARRAYS = ("phi", "reduced_blocks", "reduced_rhs", "reduced_output", "gram_ff", "gram_fa", "gram_aa")
_DUAL_ARRAYS = ("phi_du", "reduced_blocks_du", "reduced_output_du", "cross_blocks", "cross_rhs")


def save_basis(
    rb: ReducedBasis,
    path: str | Path,
    dual: Optional[DualBasis] = None,
    config_path: Optional[str] = None,
    costs: Optional[Dict[str, float]] = None,
) -> Path:
    """
    Writes a basis archive: compressed little-endian complex arrays plus a
    JSON header. Offline-only Riesz representatives are not stored.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ArchiveHeader(
        problem_kind=rb.problem_kind,
        n_dofs=rb.n_dofs,
        N=rb.N,
        N_du=dual.N_du if dual is not None else 0,
        operator_ids=rb.operator_ids,
        rhs_ids=rb.rhs_ids,
        output_ids=rb.output_ids,
        affine_rhs=rb.affine_rhs,
        beta_const=rb.beta_const,
        output_offset=(rb.output_offset.real, rb.output_offset.imag),
        snapshot_params=rb.snapshot_params,
        dual_snapshot_params=dual.snapshot_params if dual is not None else [],
        config_path=config_path,
        costs=costs or {},
    )
    arrays = {name: np.asarray(getattr(rb, name), dtype=COMPLEX_DTYPE) for name in _PRIMAL_ARRAYS}
    if dual is not None:
        arrays.update({name: np.asarray(getattr(dual, name), dtype=COMPLEX_DTYPE) for name in _DUAL_ARRAYS})
    with open(path, "wb") as fh:
        np.savez_compressed(fh, header=np.array(header.model_dump_json()), **arrays)
    logger.info(f"Basis archive written to {path} (N={rb.N}, N_du={header.N_du}, n_dofs={rb.n_dofs})")
    return path


def read_header(path: str | Path) -> ArchiveHeader:
    """
    Raises:
        ArchiveError: If the file is missing, not an archive, or of another version.
    """
    with _open(path) as data:
        return _header(data, path)


def load_basis(path: str | Path) -> Tuple[ReducedBasis, Optional[DualBasis], ArchiveHeader]:
    """
    Reads a basis archive written by save_basis.

    Raises:
        ArchiveError: On a missing file, bad header, unsupported version or
            missing/inconsistent arrays.

    Returns:
        (primal basis, dual basis or None, header).
    """
    with _open(path) as data:
        header = _header(data, path)
        try:
            arrays = {name: data[name].astype(np.complex128) for name in _PRIMAL_ARRAYS}
            dual_arrays = (
                {name: data[name].astype(np.complex128) for name in _DUAL_ARRAYS} if "phi_du" in data.files else None
            )
        except KeyError as e:
            raise ArchiveError(f"Basis archive {path} lacks array {e}") from e

    try:
        rb = ReducedBasis(
            problem_kind=header.problem_kind,
            operator_ids=header.operator_ids,
            rhs_ids=header.rhs_ids,
            output_ids=header.output_ids,
            affine_rhs=header.affine_rhs,
            beta_const=header.beta_const,
            output_offset=complex(*header.output_offset),
            snapshot_params=header.snapshot_params,
            **arrays,
        )
        dual = DualBasis(snapshot_params=header.dual_snapshot_params, **dual_arrays) if dual_arrays else None
    except ValidationError as e:
        raise ArchiveError(f"Basis archive {path} is inconsistent with its header: {e}") from e
    if rb.N != header.N or rb.n_dofs != header.n_dofs:
        raise ArchiveError(f"Basis archive {path}: header declares N={header.N}, n_dofs={header.n_dofs}")
    logger.info(f"Loaded basis archive {path}: N={rb.N}, N_du={dual.N_du if dual else 0}, kind={rb.problem_kind}")
    return rb, dual, header


def _open(path: str | Path):
    path = Path(path)
    if not path.is_file():
        raise ArchiveError(f"Basis archive not found: {path}")
    try:
        return np.load(path, allow_pickle=False)
    except (OSError, ValueError, zipfile.BadZipFile) as e:
        raise ArchiveError(f"{path} is not a basis archive: {e}") from e


def _header(data, path) -> ArchiveHeader:
    if "header" not in data.files:
        raise ArchiveError(f"Basis archive {path} has no header")
    try:
        header = ArchiveHeader.model_validate_json(str(data["header"]))
    except ValidationError as e:
        raise ArchiveError(f"Basis archive {path} has a malformed header: {e}") from e
    if header.version != ARCHIVE_VERSION:
        raise ArchiveError(f"Basis archive {path} has version {header.version}; this build reads version {ARCHIVE_VERSION}")
    return header
