"""Deformed coherent states, their averages and the coordinate-momentum uncertainty.

Closed forms are evaluated from the pq-exponential series; every closed form
has a matrix counterpart built on truncated Fock vectors.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy

from core.config import settings
from core.errors import DivisionByZeroPqNumber, SelfCheckFailed, TailTooLarge
from models.schemas import DeformationParams, ResidualReport, SeriesClassification, UncertaintyReport, UncertaintySource
from services.fock import (
    FockVector,
    build_annihilation,
    build_creation,
    build_pq_number_op,
    build_shifted_number_op,
    ladder_elements,
    position_momentum_ops,
)
from services.pq_calculus import exp_small, exp_small_real, f_function, pq_exp_small
from services.pq_core import pq_number

logger = logging.getLogger(__name__)

AVERAGES_SELF_CHECK_TOL = 1e-10
SWAP_SELF_CHECK_TOL = 1e-8
EXTRA_TAIL_TERMS = 64


@dataclass(frozen=True)
class CoherentSpec:
    alpha: complex
    normalized: bool = True
    dim: Optional[int] = None  # None selects the dimension from the tail bound
    tail_tol: Optional[float] = None


@dataclass(frozen=True)
class CoherentAverages:
    """<a>, <a^dagger>, <a^2>, <a^dagger^2>, <[N]>, <[N+I]> and the norm they carry."""

    a: complex
    a_dagger: complex
    a_squared: complex
    a_dagger_squared: complex
    number: float
    number_next: float
    norm: float


def _weight_ratio(params: DeformationParams, x: float, n: int) -> float:
    divisor = pq_number(params, n)
    if divisor == 0.0:
        raise DivisionByZeroPqNumber(n)
    return x / abs(divisor)


def tail_mass(params: DeformationParams, alpha: complex, start: int) -> float:
    """Sum over n >= start of |alpha|^(2n) / [n]!, unnormalized.

    Sums EXTRA_TAIL_TERMS weights explicitly and bounds the rest by the
    geometric series of the last weight ratio; inf when that ratio is >= 1.
    """
    x = abs(alpha) ** 2
    if x == 0.0:
        return 0.0 if start > 0 else 1.0
    weight = 1.0
    for n in range(1, start + 1):
        weight *= _weight_ratio(params, x, n)
    if weight == 0.0:
        return 0.0
    total = weight
    ratio = 1.0
    for n in range(start + 1, start + 1 + EXTRA_TAIL_TERMS):
        ratio = _weight_ratio(params, x, n)
        weight *= ratio
        total += weight
        if weight == 0.0:
            return total
    if ratio >= 1.0:
        return math.inf
    return total + weight * ratio / (1.0 - ratio)


def _norm_series(params: DeformationParams, alpha: complex) -> float:
    """e^{|alpha|^2}, rejected unless the series converges."""
    x = abs(alpha) ** 2
    series = pq_exp_small(params, x)
    if series.classification != SeriesClassification.CONVERGED:
        logger.warning(f"Norm series for |alpha|^2={x} not converged ({series.classification.value})")
        raise TailTooLarge(series.last_term_magnitude, series.terms_used, settings.series_tol)
    return series.value.real


def normalized_tail(params: DeformationParams, alpha: complex, start: int) -> float:
    return tail_mass(params, alpha, start) / _norm_series(params, alpha)


def suggest_dim(params: DeformationParams, *alphas: complex) -> int:
    """Smallest power of two whose boundary-inclusive tail is below auto_dim_tail_tol for every alpha."""
    tol = settings.auto_dim_tail_tol
    dim = settings.auto_dim_start
    worst = math.inf
    while dim <= settings.max_auto_dim:
        worst = max((normalized_tail(params, a, dim - 1) for a in alphas), default=0.0)
        if worst <= tol:
            logger.debug(f"Auto dim {dim} for p={params.p}, q={params.q} (tail {worst:.3e})")
            return dim
        dim *= 2
    logger.warning(f"No dim up to {settings.max_auto_dim} reaches tail {tol:.1e} (p={params.p}, q={params.q})")
    raise TailTooLarge(worst, settings.max_auto_dim, tol)


def coherent_coeffs(params: DeformationParams, alpha: complex, dim: int) -> numpy.ndarray:
    """alpha^n / sqrt([n]!) for n < dim."""
    roots = ladder_elements(params, dim)
    coeffs = numpy.zeros(dim, dtype=complex)
    coeffs[0] = 1.0
    for n in range(1, dim):
        if roots[n - 1] == 0.0:
            raise DivisionByZeroPqNumber(n)
        coeffs[n] = coeffs[n - 1] * alpha / roots[n - 1]
    return coeffs


def primed_coeffs(params: DeformationParams, alpha: complex, dim: int, lam: complex = 1.0) -> numpy.ndarray:
    """[n] alpha^(n-1) / (lam^n sqrt([n]!)), written as sqrt([n]) c_{n-1}(alpha/lam) / lam."""
    if lam == 0:
        raise ValueError("lam must be nonzero")
    roots = ladder_elements(params, dim)
    shifted = coherent_coeffs(params, alpha / lam, dim)
    coeffs = numpy.zeros(dim, dtype=complex)
    coeffs[1:] = roots * shifted[:-1] / lam
    return coeffs


def coherent_vector(params: DeformationParams, spec: CoherentSpec) -> FockVector:
    tol = settings.tail_tol if spec.tail_tol is None else spec.tail_tol
    dim = suggest_dim(params, spec.alpha) if spec.dim is None else spec.dim
    norm = _norm_series(params, spec.alpha)
    tail = tail_mass(params, spec.alpha, dim)
    if tail / norm > tol:
        logger.warning(f"Coherent state alpha={spec.alpha} truncated at dim={dim} leaves tail {tail / norm:.3e}")
        raise TailTooLarge(tail / norm, dim, tol)

    coeffs = coherent_coeffs(params, spec.alpha, dim)
    if spec.normalized:
        return FockVector(coeffs / math.sqrt(norm), tail / norm, normalized=True)
    return FockVector(coeffs, tail)


def coherent_inner(
    params: DeformationParams,
    alpha: complex,
    beta: complex,
    normalized: bool = False,
    tol: Optional[float] = None,
) -> complex:
    """<beta|alpha> = e^{conj(beta) alpha}, antilinear in the first slot."""
    value = exp_small(params, beta.conjugate() * alpha, tol)
    if normalized:
        value /= math.sqrt(exp_small_real(params, abs(alpha) ** 2, tol) * exp_small_real(params, abs(beta) ** 2, tol))
    return value


def scaled_state_relations(params: DeformationParams, alpha: complex, lam: complex, dim: int) -> ResidualReport:
    """Vector-norm residuals of the lambda-scaled and primed state relations at a fixed dim."""
    if lam == 0:
        raise ValueError("lam must be nonzero")
    p, q = params.p, params.q
    a = build_annihilation(params, dim).entries
    ad = build_creation(params, dim).entries
    norm = numpy.linalg.norm

    scaled = coherent_coeffs(params, alpha / lam, dim)
    plain = coherent_coeffs(params, alpha, dim)
    primed = primed_coeffs(params, alpha, dim)
    primed_scaled = primed_coeffs(params, alpha, dim, lam)
    powers = numpy.array([lam ** n for n in range(dim)])

    residuals = {
        "scaled_eigen": float(norm(a @ scaled - (alpha / lam) * scaled)),
        "lambda_power": float(norm(powers * plain - coherent_coeffs(params, lam * alpha, dim))),
        "creation_primed": float(norm(ad @ plain - primed)),
        "primed_three_term": float(norm(
            a @ primed_scaled
            - (q * alpha / lam) * primed_scaled
            - coherent_coeffs(params, p * alpha / lam, dim) / lam
        )),
    }
    if params.is_degenerate or alpha == 0:
        residuals["derivative_primed"] = None
    else:
        quotient = (coherent_coeffs(params, p * alpha / lam, dim) - coherent_coeffs(params, q * alpha / lam, dim)) / (
            (p - q) * alpha
        )
        residuals["derivative_primed"] = float(norm(quotient - primed_scaled))
    return ResidualReport(label=f"scaled states(alpha={alpha}, lambda={lam}, dim={dim})", residuals=residuals)


# Averages

def coherent_averages(params: DeformationParams, alpha: complex, tol: Optional[float] = None) -> CoherentAverages:
    """Closed-form averages in the unnormalized state, each carrying e^{|alpha|^2}."""
    x = abs(alpha) ** 2
    e = exp_small_real(params, x, tol)
    p_form = params.p * x * e + exp_small_real(params, params.q * x, tol)
    q_form = params.q * x * e + exp_small_real(params, params.p * x, tol)
    gap = abs(p_form - q_form) / max(1.0, abs(p_form))
    if gap > AVERAGES_SELF_CHECK_TOL:
        logger.error(f"<[N+I]> forms disagree by {gap:.3e} at |alpha|^2={x}")
        raise SelfCheckFailed("<[N+I]> p/q forms", gap, AVERAGES_SELF_CHECK_TOL)
    conj = alpha.conjugate()
    return CoherentAverages(alpha * e, conj * e, alpha ** 2 * e, conj ** 2 * e, x * e, q_form, e)


def coherent_averages_numeric(params: DeformationParams, alpha: complex, dim: Optional[int] = None) -> CoherentAverages:
    """Same averages as <v|M|v> on the truncated unnormalized vector."""
    v = coherent_vector(params, CoherentSpec(alpha=alpha, normalized=False, dim=dim)).coeffs
    dim = v.shape[0]
    a = build_annihilation(params, dim).entries
    ad = build_creation(params, dim).entries
    number = build_pq_number_op(params, dim).entries
    number_next = build_shifted_number_op(params, dim, 1).entries

    def expect(m: numpy.ndarray) -> complex:
        return complex(numpy.vdot(v, m @ v))

    return CoherentAverages(
        expect(a), expect(ad), expect(a @ a), expect(ad @ ad),
        expect(number).real, expect(number_next).real, float(numpy.vdot(v, v).real),
    )


# Uncertainty

def uncertainty_bracket(params: DeformationParams, x: float, tol: Optional[float] = None) -> float:
    """(q-1) x + e^{px}/e^{x} at real x = |alpha|^2."""
    return (params.q - 1.0) * x + (f_function(params, params.p, x, tol).real + params.p * x)


def _report(bracket: float, alpha: complex, source: UncertaintySource, hbar: float, mass: float, omega: float) -> UncertaintyReport:
    return UncertaintyReport(
        dx2=hbar / (2.0 * mass * omega) * bracket,
        dp2=mass * hbar * omega / 2.0 * bracket,
        product=hbar / 2.0 * bracket,
        source=source,
        mean_x=math.sqrt(2.0 * hbar / (mass * omega)) * alpha.real,
        mean_p=math.sqrt(2.0 * mass * hbar * omega) * alpha.imag,
    )


def _units(hbar, mass, omega):
    return (
        settings.hbar if hbar is None else hbar,
        settings.mass if mass is None else mass,
        settings.omega if omega is None else omega,
    )


def uncertainty_closed(
    params: DeformationParams,
    alpha: complex,
    hbar: Optional[float] = None,
    mass: Optional[float] = None,
    omega: Optional[float] = None,
) -> UncertaintyReport:
    hbar, mass, omega = _units(hbar, mass, omega)
    alpha = complex(alpha)
    x = abs(alpha) ** 2
    bracket = uncertainty_bracket(params, x)
    mirrored = uncertainty_bracket(params.swapped(), x)
    gap = abs(bracket - mirrored) / max(1.0, abs(bracket))
    if gap > SWAP_SELF_CHECK_TOL:
        logger.error(f"Uncertainty bracket changes under p<->q by {gap:.3e} at |alpha|^2={x}")
        raise SelfCheckFailed("uncertainty p<->q swap", gap, SWAP_SELF_CHECK_TOL)
    return _report(bracket, alpha, UncertaintySource.CLOSED_FORM, hbar, mass, omega)


def uncertainty_symmetric_form(
    params: DeformationParams,
    alpha: complex,
    hbar: Optional[float] = None,
    mass: Optional[float] = None,
    omega: Optional[float] = None,
) -> UncertaintyReport:
    """Bracket as (f(p,x) + f(q,x) + 2(p+q-1)x) / 2."""
    hbar, mass, omega = _units(hbar, mass, omega)
    alpha = complex(alpha)
    x = abs(alpha) ** 2
    f_p = f_function(params, params.p, x).real
    f_q = f_function(params, params.q, x).real
    bracket = 0.5 * (f_p + f_q + 2.0 * (params.total - 1.0) * x)
    return _report(bracket, alpha, UncertaintySource.SYMMETRIC_FORM, hbar, mass, omega)


def uncertainty_numeric(
    params: DeformationParams,
    alpha: complex,
    dim: Optional[int] = None,
    hbar: Optional[float] = None,
    mass: Optional[float] = None,
    omega: Optional[float] = None,
) -> UncertaintyReport:
    """Dispersions of X and P from matrix moments on the truncated, renormalized coherent vector."""
    hbar, mass, omega = _units(hbar, mass, omega)
    alpha = complex(alpha)
    v = coherent_vector(params, CoherentSpec(alpha=alpha, dim=dim)).coeffs
    v = v / numpy.linalg.norm(v)
    x_op, p_op = position_momentum_ops(params, v.shape[0], hbar, mass, omega)
    x, p = x_op.entries, p_op.entries

    mean_x = numpy.vdot(v, x @ v).real
    mean_p = numpy.vdot(v, p @ v).real
    dx2 = numpy.vdot(v, x @ (x @ v)).real - mean_x ** 2
    dp2 = numpy.vdot(v, p @ (p @ v)).real - mean_p ** 2
    return UncertaintyReport(
        dx2=float(dx2),
        dp2=float(dp2),
        product=math.sqrt(dx2 * dp2) if dx2 > 0 and dp2 > 0 else float("nan"),
        source=UncertaintySource.MATRIX_NUMERIC,
        mean_x=float(mean_x),
        mean_p=float(mean_p),
    )


def small_alpha_slope(params: DeformationParams, h: float = 1e-3, hbar: Optional[float] = None) -> float:
    """Central difference of the uncertainty product in |alpha|^2 at 0."""
    hbar = settings.hbar if hbar is None else hbar
    upper = uncertainty_bracket(params, h)
    lower = uncertainty_bracket(params, -h)
    return hbar / 2.0 * (upper - lower) / (2.0 * h)


def phase_spread(params: DeformationParams, modulus: float, phases: int = 8) -> float:
    """Largest deviation of the closed-form product over alpha = modulus * e^{i theta}."""
    values = [
        uncertainty_closed(params, modulus * complex(math.cos(t), math.sin(t))).product
        for t in numpy.linspace(0.0, 2.0 * math.pi, phases, endpoint=False)
    ]
    return max(values) - min(values)
