import pytest

from models.schemas import DeformationParams, FamilyKind
from services import pq_core


@pytest.fixture(params=list(FamilyKind), ids=lambda kind: kind.value)
def preset(request):
    """Every family at its configured defaults"""
    return pq_core.resolve_family(request.param)


@pytest.fixture
def fibonacci() -> DeformationParams:
    return pq_core.resolve_family(FamilyKind.FIBONACCI).resolved


@pytest.fixture
def undeformed() -> DeformationParams:
    return DeformationParams(p=1.0, q=1.0)


@pytest.fixture
def nonsym() -> DeformationParams:
    return pq_core.resolve_family(FamilyKind.NON_SYMMETRIC_Q, q=1.3).resolved
