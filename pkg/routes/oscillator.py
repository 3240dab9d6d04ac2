from fastapi import APIRouter, Depends, HTTPException
import logging

from core.errors import PqOscError
from models.schemas import GridRequest, SweepConfig, SweepQuantity
from services.sweep import SweepService, sweep_service

logger = logging.getLogger(__name__)

router = APIRouter()


def get_sweep_service() -> SweepService:
    return sweep_service


async def _run(service: SweepService, request: GridRequest, quantity: SweepQuantity) -> dict:
    try:
        config = SweepConfig(quantity=quantity, **request.model_dump())
        return service.document(await service.run(config))
    except PqOscError as e:
        raise HTTPException(status_code=422, detail={"error": e.kind, "message": e.message})


@router.post("/spectrum")
async def get_spectrum(request: GridRequest, service: SweepService = Depends(get_sweep_service)):
    """Energies E_n = (hbar omega / 2)([n] + [n+1]) for n = 0..n_max"""
    return await _run(service, request, SweepQuantity.SPECTRUM)


@router.post("/uncertainty")
async def get_uncertainty(request: GridRequest, service: SweepService = Depends(get_sweep_service)):
    """Coherent-state uncertainty product over the alpha grid"""
    return await _run(service, request, SweepQuantity.UNCERTAINTY)


@router.post("/algebra")
async def get_algebra_residuals(request: GridRequest, service: SweepService = Depends(get_sweep_service)):
    """Ladder-algebra residuals of the truncated operators"""
    return await _run(service, request, SweepQuantity.ALGEBRA_RESIDUALS)
