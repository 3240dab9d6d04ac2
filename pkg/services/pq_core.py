import logging
import math
from typing import Callable, Dict, List, Optional, Tuple

from core.config import settings
from core.errors import (
    ConfigInvalid,
    DivisionByZeroPqNumber,
    NonFiniteResult,
    PqOscError,
    ZeroBaseNegativePower,
)
from models.schemas import (
    CheckStatus,
    DeformationParams,
    FamilyKind,
    FamilyPreset,
    IdentityReport,
    IdentityResidual,
)

logger = logging.getLogger(__name__)

GOLDEN_RATIO = (1.0 + math.sqrt(5.0)) / 2.0
GOLDEN_CONJUGATE = -1.0 / GOLDEN_RATIO


def int_power(base: float, n: int) -> float:
    """base**n by repeated squaring, so negative bases keep an exact sign."""
    if n < 0:
        if base == 0.0:
            raise ZeroBaseNegativePower(n)
        return 1.0 / int_power(base, -n)
    result = 1.0
    square = float(base)
    while n:
        if n & 1:
            result *= square
        n >>= 1
        if n:
            square *= square
    return result


def pq_number(params: DeformationParams, n: int) -> float:
    """[n]_{p,q} = (p^n - q^n) / (p - q), or n m^(n-1) with m = (p+q)/2 on the degenerate branch."""
    if n == 0:
        return 0.0
    if n == 1:
        return 1.0
    p, q = params.p, params.q
    if n < 0 and p * q == 0.0:
        raise ZeroBaseNegativePower(n)
    if params.is_degenerate:
        value = n * int_power(0.5 * (p + q), n - 1)
    else:
        value = (int_power(p, n) - int_power(q, n)) / (p - q)
    if not math.isfinite(value):
        raise NonFiniteResult(n)
    return value


def pq_number_real(params: DeformationParams, x: float) -> float:
    """pq-number at a real index; defined only for p, q > 0."""
    p, q = params.p, params.q
    if p <= 0.0 or q <= 0.0:
        raise ValueError("real-index pq-numbers need p, q > 0")
    if params.is_degenerate:
        value = x * (0.5 * (p + q)) ** (x - 1.0)
    else:
        value = (p ** x - q ** x) / (p - q)
    if not math.isfinite(value):
        raise NonFiniteResult(int(x))
    return value


def pq_numbers(params: DeformationParams, count: int, start: int = 0) -> List[float]:
    return [pq_number(params, n) for n in range(start, start + count)]


def pq_number_recursive(params: DeformationParams, n: int) -> float:
    """[n] from the three-term recursion [k+1] = (p+q)[k] - pq[k-1], seeds [0]=0, [1]=1."""
    if n < 0:
        raise ValueError("recursion is seeded at n = 0 and runs upward only")
    if n == 0:
        return 0.0
    total, product = params.total, params.product
    prev, cur = 0.0, 1.0
    for k in range(1, n):
        prev, cur = cur, total * cur - product * prev
        if not math.isfinite(cur):
            raise NonFiniteResult(k + 1)
    return cur


def pq_factorial(params: DeformationParams, n: int) -> float:
    if n < 0:
        raise ValueError("pq-factorial needs n >= 0")
    value = 1.0
    for k in range(2, n + 1):
        value *= pq_number(params, k)
        if not math.isfinite(value):
            raise NonFiniteResult(k, what="pq-factorial")
    return value


def pq_binomial_coeff(params: DeformationParams, n: int, k: int) -> float:
    """[n]! / ([k]! [n-k]!) evaluated as a running product of ratios."""
    if n < 0:
        raise ValueError("pq-binomial coefficient needs n >= 0")
    if k < 0 or k > n:
        return 0.0
    # every factor of [k]! and [n-k]! is a denominator
    for m in range(1, max(k, n - k) + 1):
        if pq_number(params, m) == 0.0:
            raise DivisionByZeroPqNumber(m)
    k = min(k, n - k)
    value = 1.0
    for i in range(1, k + 1):
        value *= pq_number(params, n - k + i) / pq_number(params, i)
    if not math.isfinite(value):
        raise NonFiniteResult(n, what="pq-binomial coefficient")
    return value


def fibonacci(n: int) -> int:
    a, b = 0, 1
    for _ in range(n):
        a, b = b, a + b
    return a


def lucas(k: int) -> int:
    a, b = 2, 1
    for _ in range(k):
        a, b = b, a + b
    return a


# Family presets

def resolve_family(kind: FamilyKind, q: Optional[float] = None, k: Optional[int] = None) -> FamilyPreset:
    """Resolve a named parameter family to its (p, q) pair."""
    kind = FamilyKind(kind)
    if k is not None and kind != FamilyKind.FIBONACCI_DIVISOR:
        raise ConfigInvalid("k", f"only the {FamilyKind.FIBONACCI_DIVISOR.value} family takes k")
    if q is not None and kind in (FamilyKind.FIBONACCI, FamilyKind.FIBONACCI_DIVISOR):
        raise ConfigInvalid("q", f"the {kind.value} family fixes q")

    if kind == FamilyKind.FIBONACCI:
        return FamilyPreset(kind=kind, resolved=DeformationParams(p=GOLDEN_RATIO, q=GOLDEN_CONJUGATE))

    if kind == FamilyKind.FIBONACCI_DIVISOR:
        k = settings.default_fibdiv_k if k is None else k
        if k < 1:
            raise ConfigInvalid("k", "must be a positive integer")
        params = DeformationParams(p=int_power(GOLDEN_RATIO, k), q=int_power(GOLDEN_CONJUGATE, k))
        return FamilyPreset(kind=kind, k=k, resolved=params)

    defaults = {
        FamilyKind.NON_SYMMETRIC_Q: settings.default_nonsym_q,
        FamilyKind.SYMMETRIC_Q: settings.default_sym_q,
        FamilyKind.FERMIONIC_Q: settings.default_fermionic_q,
        FamilyKind.TAMM_DANKOV: settings.default_tammdankov_q,
    }
    q = defaults[kind] if q is None else float(q)
    if q == 0.0 and kind in (FamilyKind.SYMMETRIC_Q, FamilyKind.FERMIONIC_Q):
        raise ConfigInvalid("q", f"the {kind.value} family inverts q")

    if kind == FamilyKind.NON_SYMMETRIC_Q:
        params = DeformationParams(p=1.0, q=q)
    elif kind == FamilyKind.SYMMETRIC_Q:
        params = DeformationParams(p=1.0 / q, q=q)
    elif kind == FamilyKind.FERMIONIC_Q:
        params = DeformationParams(p=-1.0 / q, q=q)
    else:
        params = DeformationParams(p=q, q=q, degenerate_tol=0.0)
    return FamilyPreset(kind=kind, q=q, resolved=params)


def default_presets() -> List[FamilyPreset]:
    """One preset per family at the configured defaults."""
    return [resolve_family(kind) for kind in FamilyKind]


# Algebraic identities

class _Inapplicable(Exception):
    pass


def _require_nonzero_product(params: DeformationParams) -> None:
    if params.product == 0.0:
        raise _Inapplicable("needs p*q != 0")


def _gap(lhs: float, rhs: float, *terms: float) -> float:
    scale = max([1.0, abs(lhs), abs(rhs)] + [abs(t) for t in terms])
    return abs(lhs - rhs) / scale


def _identities(params: DeformationParams, n: int, m: int) -> Dict[str, Callable[[], float]]:
    p, q = params.p, params.q
    num = lambda k: pq_number(params, k)

    def successor_q_form():
        a, b = q * num(n), int_power(p, n)
        return _gap(num(n + 1), a + b, a, b)

    def successor_p_form():
        a, b = p * num(n), int_power(q, n)
        return _gap(num(n + 1), a + b, a, b)

    def addition():
        a, b = int_power(p, n) * num(m), int_power(q, m) * num(n)
        return _gap(num(n + m), a + b, a, b)

    def subtraction_via_negative():
        _require_nonzero_product(params)
        a, b = int_power(p, n) * num(-m), int_power(q, -m) * num(n)
        return _gap(num(n - m), a + b, a, b)

    def negative_index():
        _require_nonzero_product(params)
        return _gap(num(-n), -num(n) / int_power(params.product, n))

    def subtraction_direct():
        _require_nonzero_product(params)
        a, b = num(n), int_power(p, n - m) * num(m)
        scale = int_power(q, -m)
        return _gap(num(n - m), scale * (a - b), scale * a, scale * b)

    def product_index_n():
        scaled = params.with_bases(int_power(p, n), int_power(q, n))
        return _gap(num(n * m), num(n) * pq_number(scaled, m))

    def product_index_m():
        scaled = params.with_bases(int_power(p, m), int_power(q, m))
        return _gap(num(n * m), num(m) * pq_number(scaled, n))

    def _rational_bases():
        if p <= 0.0 or q <= 0.0:
            raise _Inapplicable("fractional powers need p, q > 0")
        if m == 0:
            raise _Inapplicable("m = 0")

    def rational_index_scaled():
        _rational_bases()
        ratio = n / m
        denominator = pq_number(params.with_bases(p ** ratio, q ** ratio), m)
        if denominator == 0.0:
            raise _Inapplicable("vanishing denominator")
        return _gap(pq_number_real(params, ratio), num(n) / denominator)

    def rational_index_root():
        _rational_bases()
        root = params.with_bases(p ** (1.0 / m), q ** (1.0 / m))
        denominator = pq_number(root, m)
        if denominator == 0.0:
            raise _Inapplicable("vanishing denominator")
        return _gap(pq_number_real(params, n / m), pq_number(root, n) / denominator)

    def base_inversion():
        _require_nonzero_product(params)
        inverted = params.with_bases(1.0 / p, 1.0 / q)
        return _gap(num(n), pq_number(inverted, n) * int_power(params.product, n - 1))

    def factorial_base_inversion():
        _require_nonzero_product(params)
        if n < 0:
            raise _Inapplicable("factorial of a negative index")
        inverted = params.with_bases(1.0 / p, 1.0 / q)
        rhs = pq_factorial(inverted, n) * int_power(params.product, n * (n - 1) // 2)
        return _gap(pq_factorial(params, n), rhs)

    def three_term_recursion():
        a, b = params.total * num(n), params.product * num(n - 1)
        return _gap(num(n + 1), a - b, a, b)

    return {
        "successor_q_form": successor_q_form,
        "successor_p_form": successor_p_form,
        "addition": addition,
        "subtraction_via_negative": subtraction_via_negative,
        "negative_index": negative_index,
        "subtraction_direct": subtraction_direct,
        "product_index_n": product_index_n,
        "product_index_m": product_index_m,
        "rational_index_scaled": rational_index_scaled,
        "rational_index_root": rational_index_root,
        "base_inversion": base_inversion,
        "factorial_base_inversion": factorial_base_inversion,
        "three_term_recursion": three_term_recursion,
    }


IDENTITY_NAMES: Tuple[str, ...] = tuple(_identities(DeformationParams(p=2.0, q=1.0), 1, 1))


def identity_suite(params: DeformationParams, n: int, m: int, max_index: Optional[int] = None) -> IdentityReport:
    """Scaled residual of every algebraic identity at (n, m).

    Each residual is |lhs - rhs| divided by the largest magnitude among the
    terms of that identity (at least 1). Identities needing p*q != 0 or
    positive bases are marked inapplicable instead of failing the suite.
    """
    max_index = settings.identity_max_index if max_index is None else max_index
    if abs(n) > max_index or abs(m) > max_index:
        raise ValueError(f"|n|, |m| must not exceed {max_index}")

    results = []
    for name, check in _identities(params, n, m).items():
        try:
            results.append(IdentityResidual(name=name, residual=check()))
        except (_Inapplicable, ZeroBaseNegativePower) as e:
            results.append(IdentityResidual(name=name, status=CheckStatus.INAPPLICABLE, detail=str(e)))
        except PqOscError as e:
            logger.warning(f"Identity {name} at (n={n}, m={m}) failed: {e.message}")
            results.append(IdentityResidual(name=name, status=CheckStatus.ERROR, detail=e.message))
    return IdentityReport(p=params.p, q=params.q, n=n, m=m, residuals=results)
