# api/routers/basis.py
from fastapi import APIRouter, Depends, HTTPException, status
from typing import Optional
import logging

from core.basis_store import LoadedBasis, get_basis
from models.online import BasisSummary

logger = logging.getLogger(__name__)
router = APIRouter()


def require_basis(loaded: Optional[LoadedBasis] = Depends(get_basis)) -> LoadedBasis:
    """Dependency that answers 503 while no basis archive is loaded."""
    if loaded is None:
        raise HTTPException(
            status_code=status.HTTP_503_SERVICE_UNAVAILABLE,
            detail="No reduced basis is loaded.",
        )
    return loaded


@router.get(
    "/basis",
    response_model=BasisSummary,
    summary="Describe the Served Basis",
    description="Dimensions, affine term counts and snapshot parameters of the loaded reduced basis.",
)
async def get_basis_summary(loaded: LoadedBasis = Depends(require_basis)):
    rb = loaded.rb
    logger.debug(f"GET /basis: N={rb.N}")
    return BasisSummary(
        problem_kind=rb.problem_kind,
        n_dofs=rb.n_dofs,
        N=rb.N,
        N_du=loaded.dual.N_du if loaded.dual is not None else 0,
        M_a=rb.M_a,
        M_f=rb.M_f,
        M_l=rb.M_l,
        affine_rhs=rb.affine_rhs,
        snapshot_params=rb.snapshot_params,
    )
