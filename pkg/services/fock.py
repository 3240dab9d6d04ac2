"""Truncated Fock-space matrices for the deformed oscillator.

All algebra checks compare the top-left (dim-1) x (dim-1) block: the last
row and column of a truncated a a-dagger product are wrong by construction.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy

from core.config import settings
from core.errors import DivisionByZeroPqNumber, IndexOutOfRange, NegativePqNumber, NonFiniteResult, NotNormalized
from models.schemas import DeformationParams, ResidualReport
from services.pq_core import int_power, pq_factorial, pq_number, pq_numbers

logger = logging.getLogger(__name__)

NORMALIZATION_TOL = 1e-12


@dataclass(frozen=True)
class OperatorMatrix:
    entries: numpy.ndarray
    label: str = ""

    def __post_init__(self):
        entries = numpy.asarray(self.entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1] or entries.shape[0] < 2:
            raise ValueError(f"operator {self.label!r} must be a square matrix with dim >= 2")
        if not numpy.all(numpy.isfinite(entries)):
            row = int(numpy.argwhere(~numpy.isfinite(entries))[0][0])
            logger.error(f"Operator {self.label!r} overflowed in row {row}")
            raise NonFiniteResult(row, what=f"operator {self.label!r}")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def interior(self) -> numpy.ndarray:
        return self.entries[:-1, :-1]

    def apply(self, vector: "FockVector") -> numpy.ndarray:
        return self.entries @ vector.coeffs

    def dagger(self, label: Optional[str] = None) -> "OperatorMatrix":
        return OperatorMatrix(self.entries.conj().T, label or f"{self.label}^dagger")


@dataclass(frozen=True)
class FockVector:
    """Coefficients on |0>, ..., |dim-1> plus the probability mass left beyond the truncation."""

    coeffs: numpy.ndarray
    tail_mass: float = 0.0
    normalized: bool = False

    def __post_init__(self):
        coeffs = numpy.asarray(self.coeffs, dtype=complex)
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        if self.tail_mass < 0:
            raise ValueError("tail_mass must be non-negative")
        if not math.isfinite(self.norm_sq):
            bad = numpy.flatnonzero(~numpy.isfinite(coeffs))
            raise NonFiniteResult(int(bad[0]) if bad.size else self.dim - 1, what="Fock vector")
        if self.normalized and abs(self.norm_sq - 1.0) > NORMALIZATION_TOL:
            raise NotNormalized(self.norm_sq)

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]

    @property
    def norm_sq(self) -> float:
        return float(numpy.vdot(self.coeffs, self.coeffs).real)


def matrix_gap(lhs: numpy.ndarray, rhs: numpy.ndarray, *terms: numpy.ndarray) -> float:
    """Max-entry difference scaled by the largest entry of any operand (at least 1)."""
    scale = max([1.0] + [float(numpy.max(numpy.abs(m))) for m in (lhs, rhs) + terms])
    return float(numpy.max(numpy.abs(lhs - rhs))) / scale


def interior_gap(lhs: numpy.ndarray, rhs: numpy.ndarray, *terms: numpy.ndarray) -> float:
    """matrix_gap over the top-left (dim-1) block."""
    return matrix_gap(lhs[:-1, :-1], rhs[:-1, :-1], *(t[:-1, :-1] for t in terms))


def _check_dim(dim: int) -> None:
    if dim < 2:
        raise ValueError("dim must be at least 2")


def ladder_elements(params: DeformationParams, dim: int) -> numpy.ndarray:
    """sqrt([n]) for n = 1..dim-1, after the positivity gate."""
    _check_dim(dim)
    values = numpy.array(pq_numbers(params, dim - 1, start=1))
    negative = numpy.flatnonzero(values < 0)
    if negative.size:
        n = int(negative[0]) + 1
        logger.warning(f"Positivity gate failed at n={n} for p={params.p}, q={params.q}, dim={dim}")
        raise NegativePqNumber(n, float(values[n - 1]))
    return numpy.sqrt(values)


def build_annihilation(params: DeformationParams, dim: int) -> OperatorMatrix:
    return OperatorMatrix(numpy.diagflat(ladder_elements(params, dim), 1), "a")


def build_creation(params: DeformationParams, dim: int) -> OperatorMatrix:
    return build_annihilation(params, dim).dagger("a^dagger")


def build_shifted_number_op(params: DeformationParams, dim: int, shift: int = 0) -> OperatorMatrix:
    """diag([n + shift]) for n = 0..dim-1; shift -1 needs p*q != 0."""
    _check_dim(dim)
    label = "[N]" if shift == 0 else f"[N{shift:+d}I]"
    return OperatorMatrix(numpy.diag(pq_numbers(params, dim, start=shift)), label)


def build_pq_number_op(params: DeformationParams, dim: int) -> OperatorMatrix:
    return build_shifted_number_op(params, dim, 0)


def _power_diag(base: float, dim: int) -> numpy.ndarray:
    return numpy.diag([int_power(base, n) for n in range(dim)])


def algebra_residuals(params: DeformationParams, dim: int) -> ResidualReport:
    """Interior-block residuals of the deformed commutation relations.

    The same relations evaluated on the full matrix are reported under
    ``notes``; they fail at the corner entry and are informational only.
    """
    a = build_annihilation(params, dim).entries
    ad = build_creation(params, dim).entries
    number = build_pq_number_op(params, dim).entries
    number_next = build_shifted_number_op(params, dim, 1).entries
    a_ad, ad_a = a @ ad, ad @ a
    p_pow, q_pow = _power_diag(params.p, dim), _power_diag(params.q, dim)

    residuals = {
        "q_commutation": interior_gap(a_ad - params.p * ad_a, q_pow, a_ad, params.p * ad_a),
        "p_commutation": interior_gap(a_ad - params.q * ad_a, p_pow, a_ad, params.q * ad_a),
        "commutator": interior_gap(a_ad - ad_a, number_next - number, a_ad, ad_a),
        "factorization": matrix_gap(ad_a, number),
    }
    for name, f in (("identity", lambda m: m), ("square", lambda m: m @ m)):
        residuals[f"annihilation_intertwining_{name}"] = interior_gap(a @ f(number), f(number_next) @ a)
        residuals[f"creation_intertwining_{name}"] = interior_gap(ad @ f(number_next), f(number) @ ad)

    notes = {
        "full_matrix_q_commutation": matrix_gap(a_ad - params.p * ad_a, q_pow, a_ad, params.p * ad_a),
        "full_matrix_commutator": matrix_gap(a_ad - ad_a, number_next - number, a_ad, ad_a),
    }
    return ResidualReport(label=f"algebra(p={params.p}, q={params.q}, dim={dim})", residuals=residuals, notes=notes)


def number_relation_residuals(params: DeformationParams, dim: int) -> ResidualReport:
    """Diagonal identities between [N-I], [N], [N+I] and the powers p^N, q^N.

    Relations involving [N-I] need [-1] = -1/(pq) and are None when p*q = 0.
    """
    p, q = params.p, params.q
    number = build_pq_number_op(params, dim).entries
    number_next = build_shifted_number_op(params, dim, 1).entries
    p_pow, q_pow = _power_diag(p, dim), _power_diag(q, dim)
    pq, total = params.product, params.total

    residuals = {
        "successor_p_form": matrix_gap(number_next, p * number + q_pow, p * number, q_pow),
        "successor_q_form": matrix_gap(number_next, q * number + p_pow, q * number, p_pow),
    }
    if pq == 0.0:
        residuals.update(three_term=None, p_power=None, q_power=None, number_creation_commutator=None)
        return ResidualReport(label="number relations", residuals=residuals)

    number_prev = build_shifted_number_op(params, dim, -1).entries
    ad = build_creation(params, dim).entries
    residuals["three_term"] = matrix_gap(number_next, total * number - pq * number_prev, total * number, pq * number_prev)
    residuals["p_power"] = matrix_gap(p_pow, p * number - pq * number_prev, p * number, pq * number_prev)
    residuals["q_power"] = matrix_gap(q_pow, q * number - pq * number_prev, q * number, pq * number_prev)
    commutator = number @ ad - ad @ number
    residuals["number_creation_commutator"] = max(
        interior_gap(commutator, (number - number_prev) @ ad, number @ ad, ad @ number),
        interior_gap(commutator, ad @ (number_next - number), number @ ad, ad @ number),
    )
    return ResidualReport(label="number relations", residuals=residuals)


def hamiltonian(params: DeformationParams, dim: int, hbar_omega: float = 1.0) -> OperatorMatrix:
    """(hbar omega / 2)([N] + [N+I]), built from the diagonal directly."""
    _check_dim(dim)
    levels = numpy.array(pq_numbers(params, dim + 1))
    return OperatorMatrix(numpy.diag(0.5 * hbar_omega * (levels[:-1] + levels[1:])), "H")


def hamiltonian_product_residual(params: DeformationParams, dim: int, hbar_omega: float = 1.0) -> float:
    a = build_annihilation(params, dim).entries
    ad = build_creation(params, dim).entries
    product_form = 0.5 * hbar_omega * (a @ ad + ad @ a)
    return interior_gap(product_form, hamiltonian(params, dim, hbar_omega).entries)


def spectrum(params: DeformationParams, count: int, hbar_omega: float = 1.0) -> List[float]:
    """E_n = (hbar omega / 2)([n] + [n+1]) for n = 0..count-1."""
    levels = pq_numbers(params, count + 1)
    return [0.5 * hbar_omega * (levels[n] + levels[n + 1]) for n in range(count)]


def position_momentum_ops(
    params: DeformationParams,
    dim: int,
    hbar: Optional[float] = None,
    mass: Optional[float] = None,
    omega: Optional[float] = None,
) -> Tuple[OperatorMatrix, OperatorMatrix]:
    hbar = settings.hbar if hbar is None else hbar
    mass = settings.mass if mass is None else mass
    omega = settings.omega if omega is None else omega
    a = build_annihilation(params, dim).entries
    ad = a.conj().T
    x = math.sqrt(hbar / (2.0 * mass * omega)) * (ad + a)
    p = 1j * math.sqrt(mass * hbar * omega / 2.0) * (ad - a)
    return OperatorMatrix(x, "X"), OperatorMatrix(p, "P")


def oscillator_form_residual(params: DeformationParams, dim: int) -> float:
    """P^2/2m + m omega^2 X^2/2 against H on the interior block (default units)."""
    hbar, mass, omega = settings.hbar, settings.mass, settings.omega
    x, p = position_momentum_ops(params, dim)
    x2, p2 = x.entries @ x.entries, p.entries @ p.entries
    kinetic_potential = p2 / (2.0 * mass) + 0.5 * mass * omega ** 2 * x2
    return interior_gap(kinetic_potential, hamiltonian(params, dim, hbar * omega).entries)


def nonlinear_map_check(params: DeformationParams, dim: int) -> float:
    """Compare a_{p,q} with a sqrt([N]/N) and sqrt([N+I]/(N+I)) a built from the undeformed ladder."""
    deformed = build_annihilation(params, dim).entries
    bosonic = numpy.diagflat(numpy.sqrt(numpy.arange(1, dim, dtype=float)), 1)

    ratios = numpy.ones(dim)
    ratios[1:] = numpy.array(pq_numbers(params, dim - 1, start=1)) / numpy.arange(1, dim)
    ratios_next = numpy.array(pq_numbers(params, dim, start=1)) / numpy.arange(1, dim + 1)

    right = bosonic @ numpy.diag(numpy.sqrt(ratios))
    left = numpy.diag(numpy.sqrt(ratios_next)) @ bosonic
    return max(interior_gap(deformed, right), interior_gap(deformed, left))


def fock_basis_vector(params: DeformationParams, n: int, dim: int) -> FockVector:
    """|n> = (a^dagger)^n |0> / sqrt([n]!)"""
    if not 0 <= n < dim:
        raise IndexOutOfRange(n, dim)
    ad = build_creation(params, dim).entries
    vector = numpy.zeros(dim, dtype=complex)
    vector[0] = 1.0
    for _ in range(n):
        vector = ad @ vector
    factorial = pq_factorial(params, n)
    if factorial == 0.0:
        zero_at = next(k for k in range(1, n + 1) if pq_number(params, k) == 0.0)
        raise DivisionByZeroPqNumber(zero_at)
    return FockVector(vector / math.sqrt(factorial))
