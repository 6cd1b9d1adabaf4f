# core/basis_store.py
from dataclasses import dataclass
from typing import Optional
import logging

from .config import settings  # Import settings from config.py
from .exceptions import ArchiveError, ConfigError
from .run_config import RunConfig, load_run_config
from models.parameters import ParameterGrid
from models.problem import TruthProblem
from models.reduced_basis import ArchiveHeader, DualBasis, ReducedBasis

logger = logging.getLogger(__name__)


@dataclass
class LoadedBasis:
    """Everything the online stage needs for one served basis."""
    rb: ReducedBasis
    dual: Optional[DualBasis]
    header: ArchiveHeader
    grid: Optional[ParameterGrid] = None
    problem: Optional[TruthProblem] = None  # only for non-affine right-hand sides


class BasisStore:
    """Holds the basis archive served by the online API."""
    loaded: Optional[LoadedBasis] = None

    def load(self, basis_path: Optional[str] = None, config_path: Optional[str] = None) -> LoadedBasis:
        """
        Loads a basis archive, and the run config when the basis needs the
        truth problem online (non-affine right-hand side) or a parameter box.

        Raises:
            ArchiveError: If no archive path is configured or the archive is unreadable.
            ConfigError: If the run config is needed but missing or invalid.
        """
        from services.external.archive_handler import load_basis
        from services.problem_service import build_problem

        basis_path = basis_path or settings.basis_path
        if basis_path is None:
            raise ArchiveError("No basis archive configured (set CRBM_BASIS_PATH or pass --basis).")
        logger.info(f"Loading basis archive {basis_path}...")
        rb, dual, header = load_basis(basis_path)

        config_path = config_path or settings.config_path or header.config_path
        cfg: Optional[RunConfig] = None
        if config_path is not None:
            try:
                cfg = load_run_config(config_path)
            except ConfigError:
                if not rb.affine_rhs:
                    raise
                logger.warning(f"Run config {config_path} unavailable; extrapolation is not flagged")
        elif not rb.affine_rhs:
            raise ConfigError("A basis with a non-affine right-hand side needs its run config online.")

        problem = build_problem(cfg) if (cfg is not None and not rb.affine_rhs) else None
        if problem is not None and problem.n_dofs != rb.n_dofs:
            raise ArchiveError(f"Run config yields {problem.n_dofs} dofs, the basis has {rb.n_dofs}.")
        self.loaded = LoadedBasis(rb=rb, dual=dual, header=header, grid=cfg.grid if cfg else None, problem=problem)
        logger.info(f"Basis ready: N={rb.N}, N_du={dual.N_du if dual else 0}")
        return self.loaded

    def close(self) -> None:
        if self.loaded is not None:
            logger.info("Releasing basis archive.")
        self.loaded = None

    def get(self) -> Optional[LoadedBasis]:
        """Returns the loaded basis, or None when nothing is loaded."""
        if self.loaded is None:
            logger.warning("Basis store is empty.")
        return self.loaded


# Single process-wide store
basis_store = BasisStore()


def get_basis() -> Optional[LoadedBasis]:
    """Dependency function returning the served basis (None when not loaded)."""
    return basis_store.get()
