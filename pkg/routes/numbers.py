from fastapi import APIRouter, Depends, HTTPException, Query
from typing import List, Optional
import logging

from core.errors import PqOscError
from models.schemas import FamilyKind, IdentityReport, ParamsSelection, SweepConfig, SweepQuantity
from services import pq_core
from services.sweep import SweepService, resolve_params, sweep_service

logger = logging.getLogger(__name__)

router = APIRouter()


def get_sweep_service() -> SweepService:
    """Dependency to get the sweep service instance"""
    return sweep_service


@router.get("/")
async def get_numbers(
    family: Optional[FamilyKind] = None,
    p: Optional[float] = None,
    q: Optional[float] = None,
    k: Optional[int] = Query(None, ge=1),
    n_max: int = Query(10, ge=0, le=2000),
    service: SweepService = Depends(get_sweep_service),
):
    """pq-numbers [n] for n = 0..n_max with the recursion residual"""
    try:
        config = SweepConfig(quantity=SweepQuantity.PQ_NUMBER, family=family, p=p, q=q, k=k, n_max=n_max)
        return service.document(await service.run(config))
    except PqOscError as e:
        raise HTTPException(status_code=422, detail={"error": e.kind, "message": e.message})


@router.get("/families")
async def get_families():
    """Available presets at their default parameters"""
    return {
        "families": [
            {"kind": preset.kind.value, "label": preset.label, "p": preset.resolved.p, "q": preset.resolved.q}
            for preset in pq_core.default_presets()
        ]
    }


@router.get("/identities", response_model=IdentityReport)
async def get_identities(
    n: int = Query(..., ge=-12, le=12),
    m: int = Query(..., ge=-12, le=12),
    family: Optional[FamilyKind] = None,
    p: Optional[float] = None,
    q: Optional[float] = None,
    k: Optional[int] = Query(None, ge=1),
):
    """Residual of every algebraic identity at (n, m)"""
    try:
        params = resolve_params(ParamsSelection(family=family, p=p, q=q, k=k))
        return pq_core.identity_suite(params, n, m)
    except PqOscError as e:
        raise HTTPException(status_code=422, detail={"error": e.kind, "message": e.message})
