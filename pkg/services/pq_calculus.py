"""pq-derivative, pq-binomials and the two pq-exponential series."""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy
from numpy.polynomial import polynomial as P

from core.config import settings
from core.errors import DenominatorUnderflow, DivisionByZeroPqNumber, NonFiniteResult, SeriesDiverged
from models.schemas import DeformationParams, SeriesClassification
from services.pq_core import int_power, pq_binomial_coeff, pq_number

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PolyCoeffs:
    """Monomial coefficients, index = degree."""

    coeffs: numpy.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", numpy.atleast_1d(numpy.asarray(self.coeffs, dtype=complex)))

    @property
    def degree(self) -> int:
        nonzero = numpy.flatnonzero(self.coeffs)
        return int(nonzero[-1]) if nonzero.size else -1

    def __call__(self, z: complex) -> complex:
        return complex(P.polyval(z, self.coeffs))


@dataclass(frozen=True)
class SeriesValue:
    value: complex
    last_term_magnitude: float
    terms_used: int
    classification: SeriesClassification


def coefficient_gap(a: PolyCoeffs, b: PolyCoeffs) -> float:
    """Max coefficient difference, scaled by the largest coefficient magnitude (at least 1)."""
    size = max(a.coeffs.size, b.coeffs.size)
    x = numpy.zeros(size, dtype=complex)
    y = numpy.zeros(size, dtype=complex)
    x[: a.coeffs.size] = a.coeffs
    y[: b.coeffs.size] = b.coeffs
    scale = max(1.0, float(numpy.max(numpy.abs(x))), float(numpy.max(numpy.abs(y))))
    return float(numpy.max(numpy.abs(x - y))) / scale


def pq_derivative(f: PolyCoeffs, params: DeformationParams) -> PolyCoeffs:
    """D_{p,q} z^n = [n] z^(n-1), applied coefficient-wise."""
    c = f.coeffs
    if c.size <= 1:
        return PolyCoeffs(numpy.zeros(1))
    factors = numpy.array([pq_number(params, n) for n in range(1, c.size)])
    return PolyCoeffs(factors * c[1:])


def pq_derivative_at(f: Callable[[complex], complex], params: DeformationParams, z: complex) -> complex:
    """(f(pz) - f(qz)) / ((p - q) z) for any callable; needs z != 0 and p != q."""
    if params.is_degenerate:
        raise ValueError("the difference quotient needs p != q")
    if z == 0:
        raise ValueError("the difference quotient needs z != 0")
    return (f(params.p * z) - f(params.q * z)) / ((params.p - params.q) * z)


def pq_binomial_poly(params: DeformationParams, a: complex, n: int) -> PolyCoeffs:
    """(z - a)^n_{p,q} = prod_{j<n} (z - p^(n-1-j) q^j a) in monomial coefficients."""
    if n < 0:
        raise ValueError("pq-binomial power needs n >= 0")
    coeffs = numpy.ones(1, dtype=complex)
    for j in range(n):
        root = int_power(params.p, n - 1 - j) * int_power(params.q, j) * a
        coeffs = P.polymul(coeffs, numpy.array([-root, 1.0], dtype=complex))
    return PolyCoeffs(coeffs)


def pq_derivative_binomial_check(params: DeformationParams, a: complex, n: int) -> float:
    if n < 1:
        raise ValueError("derivative of a pq-binomial needs n >= 1")
    lhs = pq_derivative(pq_binomial_poly(params, a, n), params)
    rhs = PolyCoeffs(pq_number(params, n) * pq_binomial_poly(params, a, n - 1).coeffs)
    return coefficient_gap(lhs, rhs)


def gauss_binomial_check(params: DeformationParams, a: complex, n: int) -> float:
    """(z + a)^n_{p,q} against sum_k [n k] (pq)^(k(k-1)/2) z^(n-k) a^k."""
    if n < 0:
        raise ValueError("pq-binomial power needs n >= 0")
    product_form = pq_binomial_poly(params, -a, n)
    summed = numpy.zeros(n + 1, dtype=complex)
    for k in range(n + 1):
        weight = pq_binomial_coeff(params, n, k) * int_power(params.product, k * (k - 1) // 2)
        summed[n - k] += weight * a ** k
    return coefficient_gap(product_form, PolyCoeffs(summed))


def binomial_splitting_check(params: DeformationParams, a: complex, n: int, m: int) -> float:
    """Worst gap of (z-a)^(n+m) against both split forms."""
    p, q = params.p, params.q
    whole = pq_binomial_poly(params, a, n + m)
    first = P.polymul(
        pq_binomial_poly(params, int_power(p, m) * a, n).coeffs,
        pq_binomial_poly(params, int_power(q, n) * a, m).coeffs,
    )
    second = P.polymul(
        pq_binomial_poly(params, int_power(q, m) * a, n).coeffs,
        pq_binomial_poly(params, int_power(p, n) * a, m).coeffs,
    )
    return max(coefficient_gap(whole, PolyCoeffs(first)), coefficient_gap(whole, PolyCoeffs(second)))


def negative_binomial_check(params: DeformationParams, a: complex, n: int, k: int, z: complex) -> float:
    """Splitting law with a negative exponent, the negative power taken as a reciprocal.

    (z-a)^(n-k) = (z - p^-k a)^n * (z - q^n a)^-k, where
    (z - q^k b)^-k = 1 / (z - p^-k b)^k with b = q^(n-k) a.
    """
    if not 0 <= k <= n:
        raise ValueError("needs 0 <= k <= n")
    p, q = params.p, params.q
    lhs = pq_binomial_poly(params, a, n - k)(z)
    numerator = pq_binomial_poly(params, int_power(p, -k) * a, n)(z)
    denominator = pq_binomial_poly(params, int_power(p, -k) * int_power(q, n - k) * a, k)(z)
    rhs = numerator / denominator
    return abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs))


# pq-exponentials

def _sum_series(params: DeformationParams, z: complex, tol: Optional[float], big: bool) -> SeriesValue:
    tol = settings.series_tol if tol is None else tol
    if tol <= 0:
        raise ValueError("tol must be positive")
    cap = settings.series_term_cap
    window = settings.divergence_window
    product = params.product

    total = complex(1.0)
    carry = complex(0.0)
    term = complex(1.0)
    magnitudes = [1.0]
    for n in range(1, cap):
        divisor = pq_number(params, n)
        if divisor == 0.0:
            raise DivisionByZeroPqNumber(n)
        factor = z / divisor
        if big:
            factor *= int_power(product, n - 1)
        term = term * factor
        magnitude = abs(term)
        if not math.isfinite(magnitude):
            if len(magnitudes) > 1 and magnitudes[-1] > magnitudes[-2]:
                logger.warning(f"Series at z={z} overflowed while growing after {n} terms")
                raise SeriesDiverged(n + 1, magnitude)
            raise NonFiniteResult(n, what="exponential series term")

        # compensated summation
        value = term + carry
        previous = total
        total = total + value
        carry = (previous - total) + value

        magnitudes.append(magnitude)
        shrinking = magnitude <= magnitudes[-2]
        if magnitude <= tol * max(1.0, abs(total)) and shrinking:
            return SeriesValue(total, magnitude, n + 1, SeriesClassification.CONVERGED)

        if len(magnitudes) > window:
            trailing = magnitudes[-window - 1:]
            growing = all(b > a for a, b in zip(trailing, trailing[1:]))
            ratios = [b / a for a, b in zip(trailing, trailing[1:]) if a > 0]
            if growing and len(ratios) == window and all(r2 >= r1 for r1, r2 in zip(ratios, ratios[1:])):
                logger.warning(f"Series at z={z} diverging after {n + 1} terms (p={params.p}, q={params.q})")
                raise SeriesDiverged(n + 1, magnitude)

    last = magnitudes[-1]
    if last > magnitudes[-2]:
        logger.warning(f"Series at z={z} still growing at the term cap {cap}")
        raise SeriesDiverged(cap, last)
    logger.info(f"Series at z={z} truncated at cap {cap}, |last term|={last:.3e}")
    return SeriesValue(total, last, cap, SeriesClassification.TRUNCATED_AT_CAP)


def pq_exp_small(params: DeformationParams, z: complex, tol: Optional[float] = None) -> SeriesValue:
    """e^z_{p,q} = sum z^n / [n]!"""
    return _sum_series(params, complex(z), tol, big=False)


def pq_exp_big(params: DeformationParams, z: complex, tol: Optional[float] = None) -> SeriesValue:
    """E^z_{p,q} = sum (pq)^(n(n-1)/2) z^n / [n]!"""
    return _sum_series(params, complex(z), tol, big=True)


def exp_small(params: DeformationParams, z: complex, tol: Optional[float] = None) -> complex:
    return pq_exp_small(params, z, tol).value


def exp_small_real(params: DeformationParams, x: float, tol: Optional[float] = None) -> float:
    return pq_exp_small(params, x, tol).value.real


def exp_truncation(params: DeformationParams, degree: int, big: bool = False, scale: complex = 1.0) -> PolyCoeffs:
    """Degree-`degree` truncation of e^(scale z) (or E^(scale z)) as polynomial coefficients."""
    coeffs = numpy.zeros(degree + 1, dtype=complex)
    coeffs[0] = 1.0
    for n in range(1, degree + 1):
        factor = scale / pq_number(params, n)
        if big:
            factor *= int_power(params.product, n - 1)
        coeffs[n] = coeffs[n - 1] * factor
    return PolyCoeffs(coeffs)


def exp_relation_residual(params: DeformationParams, z: complex, tol: Optional[float] = None) -> float:
    """|e^(pz) - e^(qz) - (p-q) z e^z| / max(1, |e^z|)"""
    e_z = exp_small(params, z, tol)
    lhs = exp_small(params, params.p * z, tol) - exp_small(params, params.q * z, tol)
    return abs(lhs - (params.p - params.q) * z * e_z) / max(1.0, abs(e_z))


def f_function(params: DeformationParams, lam: complex, z: complex, tol: Optional[float] = None) -> complex:
    """f(lambda, z) = e^(lambda z) / e^z - lambda z"""
    denominator = exp_small(params, z, tol)
    floor = settings.denominator_floor
    if abs(denominator) < floor:
        raise DenominatorUnderflow(abs(denominator), floor)
    return exp_small(params, lam * z, tol) / denominator - lam * z
