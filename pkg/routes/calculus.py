from fastapi import APIRouter, HTTPException
import logging

from core.errors import PqOscError
from models.schemas import ExpRequest
from services import pq_calculus
from services.sweep import resolve_params

logger = logging.getLogger(__name__)

router = APIRouter()


def _series_record(series: pq_calculus.SeriesValue) -> dict:
    return {
        "re": series.value.real,
        "im": series.value.imag,
        "last_term": series.last_term_magnitude,
        "terms_used": series.terms_used,
        "classification": series.classification.value,
    }


@router.post("/exp")
async def evaluate_exponentials(request: ExpRequest):
    """Both pq-exponentials at z with their series metadata and consistency residuals"""
    try:
        params = resolve_params(request)
        z = complex(request.z_re, request.z_im)
        small = pq_calculus.pq_exp_small(params, z, request.tol)
        big = pq_calculus.pq_exp_big(params, z, request.tol)
        inverted_gap = None
        if params.product != 0.0:
            inverted = pq_calculus.exp_small(params.with_bases(1.0 / params.p, 1.0 / params.q), z, request.tol)
            inverted_gap = abs(big.value - inverted) / max(1.0, abs(big.value))
        return {
            "p": params.p,
            "q": params.q,
            "small": _series_record(small),
            "big": _series_record(big),
            "relation_residual": pq_calculus.exp_relation_residual(params, z, request.tol),
            "inverted_bases_residual": inverted_gap,
        }
    except PqOscError as e:
        raise HTTPException(status_code=422, detail={"error": e.kind, "message": e.message})
