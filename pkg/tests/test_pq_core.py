import math

import pytest
from hypothesis import assume, given, seed
from hypothesis import strategies as st

from core.errors import ConfigInvalid, DivisionByZeroPqNumber, NonFiniteResult, ZeroBaseNegativePower
from models.schemas import CheckStatus, DeformationParams, FamilyKind
from services import pq_core
from services.pq_core import GOLDEN_CONJUGATE, GOLDEN_RATIO


@pytest.mark.parametrize(
    "p, q, n, expected",
    [
        (1.0, 1.0, 5, 5.0),
        (GOLDEN_RATIO, GOLDEN_CONJUGATE, 6, 8.0),
        (2.0, 2.0, 3, 12.0),
        (1.0, 2.0, 4, 15.0),
    ],
)
def test_pq_number_examples(p, q, n, expected):
    assert pq_core.pq_number(DeformationParams(p=p, q=q), n) == pytest.approx(expected, rel=1e-14)


def test_pq_number_seeds_and_symmetry():
    params = DeformationParams(p=1.7, q=-0.4)
    assert pq_core.pq_number(params, 0) == 0.0
    assert pq_core.pq_number(params, 1) == 1.0
    for n in range(-5, 20):
        assert pq_core.pq_number(params, n) == pytest.approx(pq_core.pq_number(params.swapped(), n), rel=1e-14)


def test_degenerate_branch_is_continuous():
    near = DeformationParams(p=1.5 + 1e-13, q=1.5)
    assert near.is_degenerate
    assert pq_core.pq_number(near, 4) == pytest.approx(4 * 1.5 ** 3, rel=1e-12)


def test_degenerate_midpoint_matches_the_q_limit():
    params = DeformationParams(p=1.1, q=1.1 + 1e-13)
    assert params.is_degenerate
    for n in range(2, 11):
        limit = n * params.q ** (n - 1)
        assert abs(pq_core.pq_number(params, n) - limit) / limit <= n * params.degenerate_tol


def test_negative_index_needs_nonzero_product():
    with pytest.raises(ZeroBaseNegativePower):
        pq_core.pq_number(DeformationParams(p=0.0, q=2.0), -1)


def test_overflow_reports_index():
    with pytest.raises(NonFiniteResult) as excinfo:
        pq_core.pq_number(DeformationParams(p=10.0, q=1.0), 400)
    assert excinfo.value.n == 400


@pytest.mark.parametrize(
    "p, q, n, expected",
    [
        (GOLDEN_RATIO, GOLDEN_CONJUGATE, 10, 55.0),
        (0.3, 0.9, 0, 0.0),
        (1.0, 3.0, 3, 13.0),
    ],
)
def test_recursive_examples(p, q, n, expected):
    assert pq_core.pq_number_recursive(DeformationParams(p=p, q=q), n) == pytest.approx(expected, rel=1e-13)


@seed(20240517)
@given(
    p=st.floats(min_value=-2.0, max_value=2.0),
    q=st.floats(min_value=-2.0, max_value=2.0),
    n=st.integers(min_value=0, max_value=40),
)
def test_recursion_oracle_matches_direct(p, q, n):
    assume(abs(p - q) > 1e-6)
    params = DeformationParams(p=p, q=q)
    direct = pq_core.pq_number(params, n)
    recursive = pq_core.pq_number_recursive(params, n)
    scale = max(1.0, abs(direct), max(abs(p), abs(q)) ** max(n - 1, 0))
    assert abs(direct - recursive) <= 1e-9 * scale


def test_factorial_examples(fibonacci, undeformed):
    assert pq_core.pq_factorial(DeformationParams(p=0.2, q=3.0), 0) == 1.0
    assert pq_core.pq_factorial(fibonacci, 4) == pytest.approx(6.0, rel=1e-13)
    assert pq_core.pq_factorial(undeformed, 5) == 120.0
    with pytest.raises(ValueError):
        pq_core.pq_factorial(undeformed, -1)


def test_binomial_coefficient_examples(undeformed):
    assert pq_core.pq_binomial_coeff(DeformationParams(p=1.4, q=0.3), 7, 0) == 1.0
    assert pq_core.pq_binomial_coeff(undeformed, 4, 2) == pytest.approx(6.0)
    assert pq_core.pq_binomial_coeff(DeformationParams(p=1.0, q=2.0), 3, 1) == pytest.approx(7.0)
    assert pq_core.pq_binomial_coeff(undeformed, 4, 5) == 0.0


@pytest.mark.parametrize("n, k", [(3, 1), (3, 2), (5, 1), (4, 2), (2, 0)])
def test_binomial_coefficient_rejects_vanishing_factorial_factors(n, k):
    # [2] = 0 at p = 1, q = -1, so every [n]! with n >= 2 is zero
    params = DeformationParams(p=1.0, q=-1.0)
    with pytest.raises(DivisionByZeroPqNumber) as excinfo:
        pq_core.pq_binomial_coeff(params, n, k)
    assert excinfo.value.m == 2
    assert pq_core.pq_binomial_coeff(params, 1, 0) == 1.0


def test_fibonacci_and_lucas_references():
    assert [pq_core.fibonacci(n) for n in range(11)] == [0, 1, 1, 2, 3, 5, 8, 13, 21, 34, 55]
    assert [pq_core.lucas(k) for k in range(1, 5)] == [1, 3, 4, 7]


def test_fibonacci_preset_reproduces_the_sequence(fibonacci):
    for n in range(31):
        assert abs(pq_core.pq_number(fibonacci, n) - pq_core.fibonacci(n)) <= 1e-6


@pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
def test_fibonacci_divisor_identity(k):
    params = pq_core.resolve_family(FamilyKind.FIBONACCI_DIVISOR, k=k).resolved
    for n in range(11):
        exact = pq_core.fibonacci(n * k)
        assert pq_core.pq_number(params, n) * pq_core.fibonacci(k) == pytest.approx(exact, rel=1e-9, abs=1e-9)


def test_family_resolution():
    assert pq_core.resolve_family(FamilyKind.FIBONACCI).resolved.q == pytest.approx(-1.0 / GOLDEN_RATIO)
    sym = pq_core.resolve_family(FamilyKind.SYMMETRIC_Q, q=1.2).resolved
    assert sym.p == pytest.approx(1.0 / 1.2)
    fermionic = pq_core.resolve_family(FamilyKind.FERMIONIC_Q, q=1.5).resolved
    assert fermionic.p == pytest.approx(-1.0 / 1.5)
    tamm = pq_core.resolve_family(FamilyKind.TAMM_DANKOV, q=2.0).resolved
    assert tamm.is_degenerate
    assert pq_core.pq_number(tamm, 3) == 12.0
    fibdiv = pq_core.resolve_family(FamilyKind.FIBONACCI_DIVISOR, k=3)
    assert fibdiv.resolved.p == pytest.approx(GOLDEN_RATIO ** 3)
    assert fibdiv.label == "fibdiv(k=3)"


@pytest.mark.parametrize(
    "kind, q, k, field",
    [
        (FamilyKind.NON_SYMMETRIC_Q, None, 2, "k"),
        (FamilyKind.FIBONACCI, 1.5, None, "q"),
        (FamilyKind.SYMMETRIC_Q, 0.0, None, "q"),
        (FamilyKind.FIBONACCI_DIVISOR, None, 0, "k"),
    ],
)
def test_conflicting_family_flags(kind, q, k, field):
    with pytest.raises(ConfigInvalid) as excinfo:
        pq_core.resolve_family(kind, q=q, k=k)
    assert excinfo.value.field == field


def test_default_presets_cover_every_family():
    assert [preset.kind for preset in pq_core.default_presets()] == list(FamilyKind)


def test_identities_vanish_for_classical_numbers(undeformed):
    report = pq_core.identity_suite(undeformed, 3, 2)
    assert [item.name for item in report.residuals] == list(pq_core.IDENTITY_NAMES)
    assert all(item.status == CheckStatus.OK for item in report.residuals)
    assert report.worst <= 1e-15


def test_fibonacci_addition_law(fibonacci):
    assert pq_core.identity_suite(fibonacci, 4, 3).get("addition").residual <= 1e-12


def test_product_index_law():
    report = pq_core.identity_suite(DeformationParams(p=1.5, q=0.5), 6, 2)
    assert report.get("product_index_n").residual <= 1e-12
    assert report.get("product_index_m").residual <= 1e-12


def test_identities_hold_on_every_preset(preset):
    for n in range(-3, 13):
        for m in range(0, 13, 3):
            report = pq_core.identity_suite(preset.resolved, n, m)
            assert report.worst <= 1e-10, (preset.label, n, m)


def test_fractional_powers_are_inapplicable_for_negative_bases():
    params = pq_core.resolve_family(FamilyKind.FERMIONIC_Q, q=1.5).resolved
    report = pq_core.identity_suite(params, 4, 2)
    assert report.get("rational_index_scaled").status == CheckStatus.INAPPLICABLE
    assert report.get("rational_index_root").status == CheckStatus.INAPPLICABLE
    assert report.get("addition").status == CheckStatus.OK


def test_zero_product_marks_inversion_inapplicable():
    report = pq_core.identity_suite(DeformationParams(p=0.0, q=1.5), 3, 2)
    assert report.get("negative_index").status == CheckStatus.INAPPLICABLE
    assert report.get("base_inversion").status == CheckStatus.INAPPLICABLE
    assert report.get("successor_q_form").residual <= 1e-14


def test_identity_index_limit(undeformed):
    with pytest.raises(ValueError):
        pq_core.identity_suite(undeformed, 13, 0)


def test_real_index_pq_number():
    params = DeformationParams(p=2.0, q=0.5)
    assert pq_core.pq_number_real(params, 3.0) == pytest.approx(pq_core.pq_number(params, 3))
    assert pq_core.pq_number_real(params, 0.5) == pytest.approx((math.sqrt(2.0) - math.sqrt(0.5)) / 1.5)
    with pytest.raises(ValueError):
        pq_core.pq_number_real(DeformationParams(p=-1.0, q=0.5), 0.5)


def test_base_inversion_up_to_twenty(preset):
    for n in range(21):
        report = pq_core.identity_suite(preset.resolved, n, 1, max_index=20)
        assert report.get("base_inversion").residual <= 1e-10, (preset.label, n)
        assert report.get("factorial_base_inversion").residual <= 1e-10, (preset.label, n)
