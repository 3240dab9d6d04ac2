from fastapi import APIRouter, HTTPException
from typing import List
import logging

from core.errors import PqOscError
from models.schemas import SuiteResult
from services.verification import verification_service

logger = logging.getLogger(__name__)

router = APIRouter()


@router.get("/")
async def list_suites():
    return {"suites": verification_service.suite_names}


@router.get("/{suite}", response_model=List[SuiteResult])
async def run_suite(suite: str):
    """Run one invariant suite, or every suite with `all`"""
    try:
        return await verification_service.run(suite)
    except PqOscError as e:
        raise HTTPException(status_code=422, detail={"error": e.kind, "message": e.message})
