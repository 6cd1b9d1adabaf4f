# api/routers/online.py
from fastapi import APIRouter, Depends, HTTPException, status
import logging

from api.routers.basis import require_basis
from core.basis_store import LoadedBasis
from core.exceptions import NumericalError
from models.online import OnlineRequest, OnlineResponse
from services.run_service import online_batch

logger = logging.getLogger(__name__)
router = APIRouter()


@router.post(
    "/online",
    response_model=OnlineResponse,
    summary="Evaluate the Reduced Model",
    description="Reduced solution coefficients, error estimator and (dual-corrected) outputs "
                "for each queried parameter point (k, M).",
)
def post_online(request: OnlineRequest, loaded: LoadedBasis = Depends(require_basis)):
    """
    Runs the online stage for a batch of queries. Parameter points outside
    the configured box are computed and flagged as extrapolated.
    """
    logger.debug(f"POST /online received {len(request.queries)} queries")
    try:
        return online_batch(loaded.rb, loaded.dual, request.queries, loaded.problem, loaded.grid)
    except HTTPException as http_exc:
        raise http_exc
    except NumericalError as e:
        logger.error(f"Numerical failure in POST /online: {e}", exc_info=True)
        raise HTTPException(
            status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
            detail=f"Online evaluation failed: {e}",
        )
