from fastapi import APIRouter, Depends, HTTPException
import logging

from core.errors import PqOscError
from models.schemas import GridRequest, SweepConfig, SweepQuantity
from services.susy import SuperKind
from services.sweep import SweepService, sweep_service

logger = logging.getLogger(__name__)

router = APIRouter()


def get_sweep_service() -> SweepService:
    return sweep_service


@router.post("/concurrence")
async def get_concurrence(
    request: GridRequest,
    kind: SuperKind = SuperKind.L,
    service: SweepService = Depends(get_sweep_service),
):
    """Gram-determinant concurrence of |alpha, L> or |alpha, B>, with the closed-form gap as residual"""
    quantity = SweepQuantity.CONCURRENCE_L if kind == SuperKind.L else SweepQuantity.CONCURRENCE_B
    try:
        config = SweepConfig(quantity=quantity, **request.model_dump())
        return service.document(await service.run(config))
    except PqOscError as e:
        raise HTTPException(status_code=422, detail={"error": e.kind, "message": e.message})


@router.post("/reference")
async def get_reference_values(request: GridRequest, service: SweepService = Depends(get_sweep_service)):
    """alpha -> 0 concurrence and uncertainty for both kinds"""
    try:
        config = SweepConfig(quantity=SweepQuantity.REFERENCE_VALUES, **request.model_dump())
        return service.document(await service.run(config))
    except PqOscError as e:
        raise HTTPException(status_code=422, detail={"error": e.kind, "message": e.message})
