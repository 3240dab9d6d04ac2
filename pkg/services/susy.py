"""Supersymmetric extension: block operators on fermion (x) boson space and concurrence.

States are stored as the pair (psi0, psi1) of bosonic components with
fermion number 0 and 1; block operators act on the stacked vector.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy

from core.config import settings
from core.errors import (
    IndexOutOfRange,
    NegativePqNumber,
    NotNormalized,
    SelfCheckFailed,
    TailTooLarge,
    ZeroDeformationParameter,
)
from models.schemas import DeformationParams, UncertaintyReport, UncertaintySource
from services.coherent import (
    CoherentSpec,
    coherent_coeffs,
    coherent_vector,
    normalized_tail,
    primed_coeffs,
    suggest_dim,
    uncertainty_closed,
)
from services.fock import (
    NORMALIZATION_TOL,
    FockVector,
    OperatorMatrix,
    build_annihilation,
    build_creation,
    build_pq_number_op,
    build_shifted_number_op,
    hamiltonian,
    matrix_gap,
    position_momentum_ops,
)
from services.pq_calculus import exp_small_real
from services.pq_core import pq_number

logger = logging.getLogger(__name__)

CONCURRENCE_CLAMP_TOL = 1e-12
REFERENCE_UNCERTAINTY_TOL = 1e-10


class SuperKind(str, Enum):
    L = "L"
    B = "B"


class SuperVariant(str, Enum):
    PRINTED = "printed"
    ORTHOGONAL = "orthogonal"


@dataclass(frozen=True)
class SuperState:
    psi0: FockVector
    psi1: FockVector
    normalized: bool = False

    def __post_init__(self):
        if self.psi0.dim != self.psi1.dim:
            raise ValueError("both bosonic components must share one dimension")
        if self.normalized and abs(self.norm_sq - 1.0) > NORMALIZATION_TOL:
            raise NotNormalized(self.norm_sq)

    @classmethod
    def from_arrays(cls, psi0: numpy.ndarray, psi1: numpy.ndarray, normalize: bool = True) -> "SuperState":
        psi0 = numpy.asarray(psi0, dtype=complex)
        psi1 = numpy.asarray(psi1, dtype=complex)
        if normalize:
            scale = math.sqrt(float(numpy.vdot(psi0, psi0).real + numpy.vdot(psi1, psi1).real))
            psi0, psi1 = psi0 / scale, psi1 / scale
        return cls(FockVector(psi0), FockVector(psi1), normalized=normalize)

    @property
    def dim_boson(self) -> int:
        return self.psi0.dim

    @property
    def vector(self) -> numpy.ndarray:
        return numpy.concatenate([self.psi0.coeffs, self.psi1.coeffs])

    @property
    def norm_sq(self) -> float:
        return self.psi0.norm_sq + self.psi1.norm_sq

    def gram(self) -> numpy.ndarray:
        """G[i, j] = <psi_i|psi_j>"""
        parts = (self.psi0.coeffs, self.psi1.coeffs)
        return numpy.array([[numpy.vdot(u, v) for v in parts] for u in parts])


@dataclass(frozen=True)
class SuperOperator:
    blocks: Tuple[Tuple[OperatorMatrix, OperatorMatrix], Tuple[OperatorMatrix, OperatorMatrix]]
    label: str = ""

    def __post_init__(self):
        dims = {block.dim for row in self.blocks for block in row}
        if len(dims) != 1:
            raise ValueError(f"blocks of {self.label!r} have mismatched dimensions {sorted(dims)}")

    @property
    def dim_boson(self) -> int:
        return self.blocks[0][0].dim

    @property
    def matrix(self) -> numpy.ndarray:
        return numpy.block([[block.entries for block in row] for row in self.blocks])

    def apply(self, state: SuperState) -> numpy.ndarray:
        return self.matrix @ state.vector


def _zero(dim: int) -> OperatorMatrix:
    return OperatorMatrix(numpy.zeros((dim, dim)), "0")


def _identity(dim: int, sign: float = 1.0) -> OperatorMatrix:
    return OperatorMatrix(sign * numpy.eye(dim), "I" if sign > 0 else "-I")


def _require_nonzero(params: DeformationParams) -> None:
    if params.p == 0.0:
        raise ZeroDeformationParameter("p")
    if params.q == 0.0:
        raise ZeroDeformationParameter("q")


def _block_interior_gap(lhs: numpy.ndarray, rhs: numpy.ndarray, dim: int) -> float:
    """Max-entry gap restricted to boson levels below dim-1 in every block."""
    keep = numpy.concatenate([numpy.arange(dim - 1), dim + numpy.arange(dim - 1)])
    return matrix_gap(lhs[numpy.ix_(keep, keep)], rhs[numpy.ix_(keep, keep)])


# Operators

def build_super_ops(params: DeformationParams, dim: int, hbar_omega: float = 1.0) -> Dict[str, SuperOperator]:
    a = build_annihilation(params, dim)
    ad = build_creation(params, dim)
    zero = _zero(dim)
    number = build_pq_number_op(params, dim)
    number_next = build_shifted_number_op(params, dim, 1)
    half = 0.5 * hbar_omega

    return {
        "Q": SuperOperator(((zero, zero), (a, zero)), "Q"),
        "Q_dagger": SuperOperator(((zero, ad), (zero, zero)), "Q^dagger"),
        "super_number": SuperOperator(((number, zero), (zero, number_next)), "[N_super]"),
        "H_S": SuperOperator(
            (
                (OperatorMatrix(half * number.entries, "H0"), zero),
                (zero, OperatorMatrix(half * number_next.entries, "H1")),
            ),
            "H_S",
        ),
    }


def supercharge_residual(params: DeformationParams, dim: int, hbar_omega: float = 1.0) -> float:
    """(hbar omega / 2)(Q Q^dagger + Q^dagger Q) against H_S on the interior blocks."""
    ops = build_super_ops(params, dim, hbar_omega)
    q, qd = ops["Q"].matrix, ops["Q_dagger"].matrix
    anticommutator = 0.5 * hbar_omega * (q @ qd + qd @ q)
    return _block_interior_gap(anticommutator, ops["H_S"].matrix, dim)


def partial_trace_fermion(op: SuperOperator) -> numpy.ndarray:
    return op.blocks[0][0].entries + op.blocks[1][1].entries


def partial_trace_residual(params: DeformationParams, dim: int, hbar_omega: float = 1.0) -> float:
    traced = partial_trace_fermion(build_super_ops(params, dim, hbar_omega)["H_S"])
    return matrix_gap(traced, hamiltonian(params, dim, hbar_omega).entries)


def super_spectrum_degeneracy(
    params: DeformationParams, dim: int, hbar_omega: float = 1.0, tol: float = 1e-9
) -> List[Tuple[int, float, int]]:
    """(n, (hbar omega / 2)[n], multiplicity) for n = 0..dim-2 from the interior of H_S.

    Multiplicity counts interior eigenvalues equal to the level within tol, so
    coinciding pq-numbers (for example [1] = [2] for Fibonacci) merge.
    """
    matrix = build_super_ops(params, dim, hbar_omega)["H_S"].matrix
    keep = numpy.concatenate([numpy.arange(dim - 1), dim + numpy.arange(dim - 1)])
    eigenvalues = numpy.linalg.eigvalsh(matrix[numpy.ix_(keep, keep)].real)
    levels = []
    for n in range(dim - 1):
        energy = 0.5 * hbar_omega * pq_number(params, n)
        multiplicity = int(numpy.sum(numpy.abs(eigenvalues - energy) <= tol * max(1.0, abs(energy))))
        levels.append((n, energy, multiplicity))
    return levels


def super_annihilation(params: DeformationParams, dim: int, transposed: bool = False) -> SuperOperator:
    """A = (p a, -I; 0, q a); the transposed form moves -I below the diagonal."""
    a = build_annihilation(params, dim).entries
    pa = OperatorMatrix(params.p * a, "p a")
    qa = OperatorMatrix(params.q * a, "q a")
    zero, minus = _zero(dim), _identity(dim, -1.0)
    if transposed:
        return SuperOperator(((pa, zero), (minus, qa)), "A^T")
    return SuperOperator(((pa, minus), (zero, qa)), "A")


def eigen_residual(op: SuperOperator, state: SuperState, eigenvalue: complex) -> float:
    return float(numpy.linalg.norm(op.apply(state) - eigenvalue * state.vector))


# States

def _unit(n: int, dim: int) -> numpy.ndarray:
    vector = numpy.zeros(dim, dtype=complex)
    vector[n] = 1.0
    return vector


def super_number_state(params: DeformationParams, n: int, theta: float, phi: float, dim: int) -> SuperState:
    """cos(theta/2) (|n>, 0) + sin(theta/2) e^{i phi} (0, |n-1>); eigenvalue [n] of the super-number operator."""
    if not 1 <= n < dim:
        raise IndexOutOfRange(n, dim)
    psi0 = math.cos(theta / 2.0) * _unit(n, dim)
    psi1 = math.sin(theta / 2.0) * complex(math.cos(phi), math.sin(phi)) * _unit(n - 1, dim)
    return SuperState(FockVector(psi0), FockVector(psi1), normalized=True)


def super_number_residual(params: DeformationParams, state: SuperState, n: int) -> float:
    ops = build_super_ops(params, state.dim_boson)
    return eigen_residual(ops["super_number"], state, pq_number(params, n))


def separable_super_coherent(params: DeformationParams, alpha: complex, up: bool = True, dim: Optional[int] = None) -> SuperState:
    if up and params.p == 0.0:
        raise ZeroDeformationParameter("p")
    if not up and params.q == 0.0:
        raise ZeroDeformationParameter("q")
    shifted = alpha / params.p if up else alpha / params.q
    component = coherent_vector(params, CoherentSpec(alpha=shifted, dim=dim))
    empty = FockVector(numpy.zeros(component.dim, dtype=complex))
    if up:
        return SuperState(component, empty, normalized=True)
    return SuperState(empty, component, normalized=True)


def _check_tails(params: DeformationParams, dim: int, *alphas: complex) -> None:
    tol = settings.tail_tol
    for value in alphas:
        tail = normalized_tail(params, value, dim)
        if tail > tol:
            logger.warning(f"Super-coherent component alpha={value} leaves tail {tail:.3e} at dim={dim}")
            raise TailTooLarge(tail, dim, tol)


def entangled_components(
    params: DeformationParams, alpha: complex, kind: SuperKind = SuperKind.L, dim: Optional[int] = None
) -> Tuple[numpy.ndarray, numpy.ndarray]:
    """Unnormalized (psi0, psi1) of the printed entangled state."""
    _require_nonzero(params)
    p, q = params.p, params.q
    lam = p * q
    constituents = (alpha / p, alpha / q, alpha / lam)
    if dim is None:
        dim = suggest_dim(params, *constituents)
    else:
        _check_tails(params, dim, *constituents)

    primed = primed_coeffs(params, alpha, dim, lam)
    if SuperKind(kind) == SuperKind.L:
        return q * primed, coherent_coeffs(params, alpha / q, dim)
    return coherent_coeffs(params, alpha / p, dim), p * primed


def entangled_super_coherent(
    params: DeformationParams,
    alpha: complex,
    kind: SuperKind = SuperKind.L,
    dim: Optional[int] = None,
    variant: SuperVariant = SuperVariant.PRINTED,
) -> SuperState:
    """Entangled eigenstate of A (kind L) or A^T (kind B), normalized from its coefficient vectors.

    L = (q |alpha'/(pq)>, |alpha/q>), B = (|alpha/p>, p |alpha'/(pq)>).
    The orthogonal variant is the companion eigenvector orthogonal to the
    printed one, built from the homogeneous solution (|alpha/p>, 0) for L
    and (0, |alpha/q>) for B.
    """
    kind, variant = SuperKind(kind), SuperVariant(variant)
    psi0, psi1 = entangled_components(params, alpha, kind, dim)
    printed = SuperState.from_arrays(psi0, psi1)
    if variant == SuperVariant.PRINTED:
        return printed

    p, q = params.p, params.q
    dim = printed.dim_boson
    zeros = numpy.zeros(dim, dtype=complex)
    if kind == SuperKind.L:
        homogeneous = SuperState.from_arrays(coherent_coeffs(params, alpha / p, dim), zeros)
    else:
        homogeneous = SuperState.from_arrays(zeros, coherent_coeffs(params, alpha / q, dim))
    overlap = numpy.vdot(printed.vector, homogeneous.vector)
    companion = homogeneous.vector - overlap * printed.vector
    return SuperState.from_arrays(companion[:dim], companion[dim:])


def reference_state(params: DeformationParams, kind: SuperKind = SuperKind.L, dim: int = 4) -> SuperState:
    """alpha -> 0 limit: L = (|1>, p|0>)/sqrt(1+p^2), B = (q|0>, |1>)/sqrt(1+q^2)."""
    if dim < 2:
        raise IndexOutOfRange(1, dim)
    if SuperKind(kind) == SuperKind.L:
        scale = math.sqrt(1.0 + params.p ** 2)
        return SuperState(FockVector(_unit(1, dim) / scale), FockVector(params.p * _unit(0, dim) / scale), True)
    scale = math.sqrt(1.0 + params.q ** 2)
    return SuperState(FockVector(params.q * _unit(0, dim) / scale), FockVector(_unit(1, dim) / scale), True)


# Concurrence

def concurrence(state: SuperState) -> float:
    """2 sqrt(det G) of the component Gram matrix.

    det G below -CONCURRENCE_CLAMP_TOL, or a value above 1 + CONCURRENCE_CLAMP_TOL,
    is a failed self-check; smaller excursions are rounding and are clamped.
    """
    norm_sq = state.norm_sq
    if abs(norm_sq - 1.0) > NORMALIZATION_TOL:
        raise NotNormalized(norm_sq)
    gram = state.gram()
    det = float((gram[0, 0] * gram[1, 1]).real - abs(gram[0, 1]) ** 2)
    if det < -CONCURRENCE_CLAMP_TOL:
        logger.error(f"Gram determinant {det:.6g} is negative")
        raise SelfCheckFailed("Gram determinant sign", -det, CONCURRENCE_CLAMP_TOL)
    value = 2.0 * math.sqrt(max(det, 0.0))
    if value > 1.0 + CONCURRENCE_CLAMP_TOL:
        logger.error(f"Concurrence {value:.16g} exceeds 1")
        raise SelfCheckFailed("concurrence range", value - 1.0, CONCURRENCE_CLAMP_TOL)
    return min(1.0, value)


def concurrence_from_reduced_density(state: SuperState) -> float:
    """sqrt(2 (1 - Tr rho_f^2)) with rho_f the reduced fermionic density matrix."""
    components = numpy.vstack([state.psi0.coeffs, state.psi1.coeffs])
    rho = components @ components.conj().T
    rho = rho / numpy.trace(rho).real
    purity = float(numpy.trace(rho @ rho).real)
    return math.sqrt(max(0.0, 2.0 * (1.0 - purity)))


def normalization_closed(params: DeformationParams, alpha_sq: float, kind: SuperKind = SuperKind.L) -> float:
    """Closed-form squared norm of the unnormalized entangled state."""
    _require_nonzero(params)
    p, q, x = params.p, params.q, alpha_sq
    e = lambda arg: exp_small_real(params, arg)
    if SuperKind(kind) == SuperKind.L:
        return x / (p ** 4 * q) * e(x / (p * p * q * q)) + e(x / (p * q * q)) / p ** 2 + e(x / q ** 2)
    return x / (p * p * q ** 3) * e(x / (p * p * q * q)) + e(x / (p * q * q)) / q ** 2 + e(x / p ** 2)


def concurrence_closed(params: DeformationParams, alpha_sq: float, kind: SuperKind = SuperKind.L) -> float:
    _require_nonzero(params)
    kind = SuperKind(kind)
    p, q, x = params.p, params.q, alpha_sq
    e = lambda arg: exp_small_real(params, arg)
    if kind == SuperKind.L:
        radicand = (
            e(x / q ** 2) * e(x / (p * q * q)) / p ** 2
            + x / (p ** 4 * q) * e(x / q ** 2) * e(x / (p * p * q * q))
            - x / (p * p * q * q) * e(x / (p * q * q)) ** 2
        )
    else:
        radicand = (
            e(x / p ** 2) * e(x / (p * q * q)) / q ** 2
            + x / (p * p * q ** 3) * e(x / p ** 2) * e(x / (p * p * q * q))
            - x / (p * p * q * q) * e(x / (p * p * q)) ** 2
        )
    return 2.0 * math.sqrt(max(0.0, radicand)) / normalization_closed(params, x, kind)


# Uncertainty (hbar = m = omega = 1)

def super_uncertainty_numeric(params: DeformationParams, state: SuperState) -> UncertaintyReport:
    """Dispersions of X = I_f (x) (a^dagger + a)/sqrt(2) and P = I_f (x) i(a^dagger - a)/sqrt(2)."""
    x_op, p_op = position_momentum_ops(params, state.dim_boson, 1.0, 1.0, 1.0)
    components = (state.psi0.coeffs, state.psi1.coeffs)
    norm = state.norm_sq

    def moment(m: numpy.ndarray) -> float:
        return sum(numpy.vdot(v, m @ v).real for v in components) / norm

    x, p = x_op.entries, p_op.entries
    mean_x, mean_p = moment(x), moment(p)
    dx2 = moment(x @ x) - mean_x ** 2
    dp2 = moment(p @ p) - mean_p ** 2
    return UncertaintyReport(
        dx2=dx2,
        dp2=dp2,
        product=math.sqrt(dx2 * dp2) if dx2 > 0 and dp2 > 0 else float("nan"),
        source=UncertaintySource.MATRIX_NUMERIC,
        mean_x=mean_x,
        mean_p=mean_p,
    )


def reference_uncertainty(params: DeformationParams, kind: SuperKind = SuperKind.L) -> UncertaintyReport:
    """(1/2)(1 + (p+q)/(1+p^2)) for L, with 1+q^2 for B; cross-checked on the reference state at dim 4."""
    kind = SuperKind(kind)
    weight = params.p if kind == SuperKind.L else params.q
    value = 0.5 * (1.0 + params.total / (1.0 + weight ** 2))
    try:
        numeric = super_uncertainty_numeric(params, reference_state(params, kind, dim=4))
    except NegativePqNumber as e:
        logger.warning(f"Reference uncertainty cross-check skipped: {e.message}")
    else:
        gap = max(abs(numeric.dx2 - value), abs(numeric.dp2 - value))
        if gap > REFERENCE_UNCERTAINTY_TOL:
            logger.error(f"Reference uncertainty ({kind.value}) differs from its matrix value by {gap:.3e}")
            raise SelfCheckFailed(f"reference uncertainty {kind.value}", gap, REFERENCE_UNCERTAINTY_TOL)
    return UncertaintyReport(dx2=value, dp2=value, product=value, source=UncertaintySource.CLOSED_FORM, mean_x=0.0, mean_p=0.0)


def separable_uncertainty(params: DeformationParams, alpha: complex, up: bool = True) -> UncertaintyReport:
    """Pure-state bracket at alpha/p (up) or, with p and q exchanged, at alpha/q (down)."""
    if up:
        if params.p == 0.0:
            raise ZeroDeformationParameter("p")
        return uncertainty_closed(params, complex(alpha) / params.p, 1.0, 1.0, 1.0)
    if params.q == 0.0:
        raise ZeroDeformationParameter("q")
    return uncertainty_closed(params.swapped(), complex(alpha) / params.q, 1.0, 1.0, 1.0)
