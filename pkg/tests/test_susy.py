import math

import numpy
import pytest
from hypothesis import given, seed, settings as hypothesis_settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from core.errors import IndexOutOfRange, NotNormalized, ZeroDeformationParameter
from models.schemas import DeformationParams
from services import coherent, susy
from services.susy import SuperKind, SuperState, SuperVariant

TWO_OVER_ROOT_FIVE = 2.0 / math.sqrt(5.0)


def test_super_number_state_concurrence(fibonacci):
    for theta in numpy.linspace(0.0, math.pi, 9):
        for phi in (0.0, 1.0, 4.0):
            state = susy.super_number_state(fibonacci, 3, theta, phi, 8)
            assert abs(susy.concurrence(state) - math.sin(theta)) <= 1e-12
    assert susy.concurrence(susy.super_number_state(fibonacci, 3, 0.0, 0.0, 8)) == 0.0
    assert susy.concurrence(susy.super_number_state(fibonacci, 3, math.pi / 2, 0.0, 8)) == pytest.approx(1.0, abs=1e-12)


def test_super_number_eigenvalue(fibonacci):
    state = susy.super_number_state(fibonacci, 5, 0.7, 0.3, 8)
    assert susy.super_number_residual(fibonacci, state, 5) <= 1e-12
    with pytest.raises(IndexOutOfRange):
        susy.super_number_state(fibonacci, 0, 0.7, 0.3, 8)


def test_supercharges_and_partial_trace(preset):
    params = preset.resolved
    assert susy.supercharge_residual(params, 16) <= 1e-12
    assert susy.partial_trace_residual(params, 16) <= 1e-13


def test_spectrum_degeneracy(nonsym):
    levels = susy.super_spectrum_degeneracy(nonsym, 8)
    assert levels[0] == (0, 0.0, 1)
    assert all(multiplicity == 2 for _, _, multiplicity in levels[1:])


def test_fibonacci_levels_merge(fibonacci):
    levels = {n: multiplicity for n, _, multiplicity in susy.super_spectrum_degeneracy(fibonacci, 8)}
    assert levels[1] == levels[2] == 4


def test_separable_states(nonsym):
    for up, transposed in ((True, False), (False, True)):
        state = susy.separable_super_coherent(nonsym, 0.4 - 0.2j, up=up)
        assert susy.concurrence(state) <= 1e-12
        op = susy.super_annihilation(nonsym, state.dim_boson, transposed=transposed)
        assert susy.eigen_residual(op, state, 0.4 - 0.2j) <= 1e-8
    vacuum = susy.separable_super_coherent(nonsym, 0.0, up=True)
    assert vacuum.psi0.coeffs[0] == 1.0
    with pytest.raises(ZeroDeformationParameter):
        susy.separable_super_coherent(DeformationParams(p=0.0, q=1.0), 0.1, up=True)


def test_separable_uncertainty(nonsym):
    assert susy.separable_uncertainty(nonsym, 0.0).product == pytest.approx(0.5, abs=1e-12)
    alpha = 0.6
    expected = coherent.uncertainty_closed(nonsym, alpha / nonsym.p, 1.0, 1.0, 1.0).product
    assert susy.separable_uncertainty(nonsym, alpha, up=True).product == pytest.approx(expected)
    numeric = susy.super_uncertainty_numeric(nonsym, susy.separable_super_coherent(nonsym, alpha, up=False))
    assert susy.separable_uncertainty(nonsym, alpha, up=False).product == pytest.approx(numeric.product, rel=1e-8)


@pytest.mark.parametrize("kind, transposed", [(SuperKind.L, False), (SuperKind.B, True)])
def test_entangled_eigen_relation(preset, kind, transposed):
    params = preset.resolved
    for alpha in (0.0, 0.3, 0.5j, -0.7 + 0.7j):
        state = susy.entangled_super_coherent(params, alpha, kind)
        op = susy.super_annihilation(params, state.dim_boson, transposed=transposed)
        assert susy.eigen_residual(op, state, alpha) <= 1e-8


def test_orthogonal_variant(nonsym):
    printed = susy.entangled_super_coherent(nonsym, 0.5, SuperKind.L)
    companion = susy.entangled_super_coherent(nonsym, 0.5, SuperKind.L, variant=SuperVariant.ORTHOGONAL)
    assert abs(numpy.vdot(printed.vector, companion.vector)) <= 1e-12
    op = susy.super_annihilation(nonsym, companion.dim_boson)
    assert susy.eigen_residual(op, companion, 0.5) <= 1e-8


def test_reference_states(fibonacci):
    reference = susy.reference_state(fibonacci, SuperKind.L)
    assert susy.concurrence(reference) == pytest.approx(TWO_OVER_ROOT_FIVE, abs=1e-12)
    limit = susy.entangled_super_coherent(fibonacci, 1e-4, SuperKind.L, dim=4)
    assert numpy.allclose(numpy.abs(limit.vector), numpy.abs(reference.vector), atol=1e-3)


def test_reference_limits(preset):
    params = preset.resolved
    for kind, weight in ((SuperKind.L, params.p), (SuperKind.B, params.q)):
        expected = 2.0 * abs(weight) / (1.0 + weight ** 2)
        small = susy.concurrence(susy.entangled_super_coherent(params, 1e-4, kind))
        assert abs(small - expected) <= 1e-6
        assert abs(susy.concurrence_closed(params, 0.0, kind) - expected) <= 1e-12


def test_maximal_entanglement_without_deformation(undeformed):
    for kind in SuperKind:
        assert susy.concurrence(susy.reference_state(undeformed, kind)) == pytest.approx(1.0, abs=1e-10)


def test_closed_concurrence_against_gram(preset):
    params = preset.resolved
    for kind in SuperKind:
        for alpha in (0.2, 0.6, 1.0):
            gram = susy.concurrence(susy.entangled_super_coherent(params, alpha, kind))
            assert abs(susy.concurrence_closed(params, alpha ** 2, kind) - gram) <= 1e-6


def test_closed_normalization(nonsym):
    for kind in SuperKind:
        psi0, psi1 = susy.entangled_components(nonsym, 0.7, kind, 64)
        numeric = float(numpy.vdot(psi0, psi0).real + numpy.vdot(psi1, psi1).real)
        assert susy.normalization_closed(nonsym, 0.49, kind) == pytest.approx(numeric, rel=1e-10)


@pytest.mark.parametrize(
    "params, kind, expected",
    [
        (DeformationParams(p=1.0, q=1.0), SuperKind.L, 1.0),
        (None, SuperKind.L, 0.5 * (1.0 + 1.0 / (1.0 + ((1.0 + math.sqrt(5.0)) / 2.0) ** 2))),
        (DeformationParams(p=1.0, q=2.0), SuperKind.B, 0.8),
    ],
)
def test_reference_uncertainty(params, kind, expected, fibonacci):
    report = susy.reference_uncertainty(params or fibonacci, kind)
    assert report.product == pytest.approx(expected, abs=1e-12)


def test_concurrence_requires_normalization():
    state = SuperState.from_arrays(numpy.array([1.0, 1.0]), numpy.array([0.0, 1.0]), normalize=False)
    with pytest.raises(NotNormalized):
        susy.concurrence(state)


@seed(7)
@hypothesis_settings(max_examples=50, deadline=None)
@given(
    real=arrays(numpy.float64, (2, 16), elements=st.floats(min_value=-1.0, max_value=1.0)),
    imag=arrays(numpy.float64, (2, 16), elements=st.floats(min_value=-1.0, max_value=1.0)),
)
def test_gram_concurrence_matches_reduced_density(real, imag):
    raw = real + 1j * imag
    if numpy.linalg.norm(raw) < 1e-3:
        return
    state = SuperState.from_arrays(raw[0], raw[1])
    # squares: both square roots amplify rounding near product states
    gram = susy.concurrence(state) ** 2
    reduced = susy.concurrence_from_reduced_density(state) ** 2
    assert abs(gram - reduced) <= 1e-10
