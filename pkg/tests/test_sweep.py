import math

import numpy
import pytest

from core.errors import ConfigInvalid, NegativePqNumber
from models.schemas import AlphaGrid, FamilyKind, ParamsSelection, SweepConfig, SweepQuantity
from services import coherent, fock, pq_core
from services.sweep import resolve_params, sweep_service


def test_resolve_params_defaults_to_the_undeformed_point():
    params = resolve_params(ParamsSelection())
    assert (params.p, params.q) == (1.0, 1.0)


def test_resolve_params_uses_the_family_preset():
    params = resolve_params(ParamsSelection(family=FamilyKind.SYMMETRIC_Q, q=2.0))
    assert params == pq_core.resolve_family(FamilyKind.SYMMETRIC_Q, q=2.0).resolved


@pytest.mark.parametrize(
    "selection, field",
    [
        (ParamsSelection(p=1.2), "q"),
        (ParamsSelection(q=1.2), "p"),
        (ParamsSelection(family=FamilyKind.FIBONACCI, p=1.0), "p"),
        (ParamsSelection(k=2), "k"),
    ],
)
def test_resolve_params_rejects_partial_selections(selection, field):
    with pytest.raises(ConfigInvalid) as excinfo:
        resolve_params(selection)
    assert excinfo.value.field == field


def test_uncertainty_row_is_inapplicable_without_a_matrix_path(monkeypatch):
    def no_fock_representation(params, alpha, dim=None, **kwargs):
        raise NegativePqNumber(2, -1.0)

    monkeypatch.setattr(coherent, "uncertainty_numeric", no_fock_representation)
    config = SweepConfig(quantity=SweepQuantity.UNCERTAINTY, p=1.0, q=1.0, alpha=AlphaGrid(point=[0.3, 0.0]))
    table = sweep_service.run_sync(config)

    (row,) = table.rows
    assert row["status"] == "inapplicable"
    assert row["source"] == "closed_form"
    assert row["value"] == pytest.approx(0.5, abs=1e-12)
    assert row["residual"] is not None and row["residual"] <= 1e-8
    assert not table.failed


def test_uncertainty_row_checks_the_matrix_path():
    config = SweepConfig(quantity=SweepQuantity.UNCERTAINTY, p=1.0, q=1.3, alpha=AlphaGrid(point=[0.3, 0.0]))
    (row,) = sweep_service.run_sync(config).rows
    assert row["status"] == "ok"
    assert row["residual"] <= 1e-8


def test_non_finite_ladder_becomes_an_error_row(monkeypatch):
    def overflowing(params, dim):
        values = numpy.ones(dim - 1)
        values[-1] = math.inf
        return values

    monkeypatch.setattr(fock, "ladder_elements", overflowing)
    config = SweepConfig(quantity=SweepQuantity.ALGEBRA_RESIDUALS, p=1.0, q=1.3, dim=4)
    table = sweep_service.run_sync(config)

    assert table.failed
    (row,) = table.rows
    assert row["status"] == "error:NonFiniteResult"
    assert row["value"] is None
