import asyncio
import cmath
import logging
import math
from typing import Callable, Dict, List, Optional, Tuple

import numpy

from core.config import settings
from core.errors import ConfigInvalid, NegativePqNumber, PqOscError, SeriesDiverged
from models.schemas import DeformationParams, FamilyKind, FamilyPreset, SuiteResult, SuiteStatus
from services import coherent, fock, pq_calculus, pq_core, susy
from services.susy import SuperKind

logger = logging.getLogger(__name__)

ALL_SUITES = "all"
DIVERGENCE_TOL = 1e-6


class _Tally:
    """Collects (residual, tolerance) pairs for one suite."""

    def __init__(self, suite: str):
        self.suite = suite
        self.checks: List[Tuple[float, float, str]] = []

    def add(self, residual: float, tol: float, where: str = "") -> None:
        self.checks.append((float(residual), tol, where))

    def _ratio(self, item: Tuple[float, float, str]) -> float:
        residual, tol, _ = item
        return math.inf if math.isnan(residual) else residual / tol

    @property
    def failed(self) -> bool:
        return any(self._ratio(c) > 1.0 for c in self.checks)

    def result(self, status: Optional[SuiteStatus] = None, detail: str = "") -> SuiteResult:
        worst = max(self.checks, key=self._ratio, default=(0.0, 0.0, ""))
        if status is None:
            status = SuiteStatus.FAIL if self.failed else SuiteStatus.PASS
        if not detail and status == SuiteStatus.FAIL:
            detail = f"worst at {worst[2]}"
        return SuiteResult(
            suite=self.suite,
            status=status,
            worst_residual=worst[0],
            tolerance=worst[1],
            checks=len(self.checks),
            detail=detail,
        )


def _presets() -> List[FamilyPreset]:
    return pq_core.default_presets()


def _coherent_presets() -> List[FamilyPreset]:
    return [
        pq_core.resolve_family(FamilyKind.NON_SYMMETRIC_Q, q=1.3),
        pq_core.resolve_family(FamilyKind.SYMMETRIC_Q, q=1.2),
        pq_core.resolve_family(FamilyKind.FIBONACCI),
    ]


def _alpha_grid(moduli=(0.0, 0.25, 0.5, 0.75, 1.0), phases: int = 4) -> List[complex]:
    points = []
    for r in moduli:
        if r == 0.0:
            points.append(0j)
            continue
        points.extend(r * cmath.exp(2j * math.pi * k / phases) for k in range(phases))
    return points


def _gated(preset: FamilyPreset, dim: int) -> bool:
    try:
        fock.ladder_elements(preset.resolved, dim)
        return True
    except NegativePqNumber:
        return False


class VerificationService:
    """
    Invariant suites over the default family and alpha grids.
    Suites are independent and run concurrently; results keep the suite order.
    """

    def __init__(self):
        self._suites: Dict[str, Callable[[], SuiteResult]] = {
            "pq-numbers": self._pq_numbers,
            "identities": self._identities,
            "calculus": self._calculus,
            "exp-relation": self._exp_relation,
            "algebra": self._algebra,
            "coherent": self._coherent,
            "uncertainty": self._uncertainty,
            "slope": self._slope,
            "super-number": self._super_number,
            "concurrence-oracle": self._concurrence_oracle,
            "entangled-eigen": self._entangled_eigen,
            "reference-limits": self._reference_limits,
            "reference-uncertainty": self._reference_uncertainty,
            "concurrence-closed": self._concurrence_closed,
            "partial-trace": self._partial_trace,
        }

    @property
    def suite_names(self) -> List[str]:
        return list(self._suites)

    def resolve(self, selector: str) -> List[str]:
        if selector == ALL_SUITES:
            return self.suite_names
        if selector not in self._suites:
            raise ConfigInvalid("suite", f"unknown suite '{selector}', expected one of {', '.join(self.suite_names)} or all")
        return [selector]

    async def run(self, selector: str = ALL_SUITES) -> List[SuiteResult]:
        names = self.resolve(selector)
        limit = settings.pq_osc_threads
        semaphore = asyncio.Semaphore(limit) if limit > 0 else None

        async def run_one(name: str) -> SuiteResult:
            if semaphore is None:
                return await asyncio.to_thread(self.run_suite, name)
            async with semaphore:
                return await asyncio.to_thread(self.run_suite, name)

        results = await asyncio.gather(*(run_one(name) for name in names))
        failed = [r.suite for r in results if r.status in (SuiteStatus.FAIL, SuiteStatus.ERROR)]
        logger.info(f"Ran {len(results)} suites, {len(failed)} failing{': ' + ', '.join(failed) if failed else ''}")
        return list(results)

    def run_sync(self, selector: str = ALL_SUITES) -> List[SuiteResult]:
        return asyncio.run(self.run(selector))

    def run_suite(self, name: str) -> SuiteResult:
        check = self._suites[name]
        try:
            result = check()
        except PqOscError as e:
            logger.error(f"Suite {name} raised {e.kind}: {e.message}")
            return SuiteResult(suite=name, status=SuiteStatus.ERROR, worst_residual=math.nan, tolerance=0.0, checks=0, detail=f"{e.kind}: {e.message}")
        if result.status == SuiteStatus.FAIL:
            logger.warning(f"Suite {name} failed: worst {result.worst_residual:.3e} > {result.tolerance:.1e} ({result.detail})")
        elif result.status == SuiteStatus.PAPER_DIVERGENCE:
            logger.warning(f"Suite {name}: closed form diverges from numerics ({result.detail})")
        return result

    # pq_core

    def _pq_numbers(self) -> SuiteResult:
        tally = _Tally("pq-numbers")
        fib = pq_core.resolve_family(FamilyKind.FIBONACCI).resolved
        for n in range(31):
            tally.add(abs(pq_core.pq_number(fib, n) - pq_core.fibonacci(n)), 1e-6, f"fibonacci n={n}")

        for k in range(1, 6):
            params = pq_core.resolve_family(FamilyKind.FIBONACCI_DIVISOR, k=k).resolved
            for n in range(11):
                exact = pq_core.fibonacci(n * k)
                value = pq_core.pq_number(params, n) * pq_core.fibonacci(k)
                tally.add(abs(value - exact) / max(1.0, exact), 1e-9, f"fibdiv k={k} n={n}")

        rng = numpy.random.default_rng(20240517)
        drawn = 0
        while drawn < 100:
            p, q = rng.uniform(-2.0, 2.0, size=2)
            if abs(p - q) <= 1e-6:
                continue
            drawn += 1
            params = DeformationParams(p=float(p), q=float(q))
            for n in range(41):
                direct = pq_core.pq_number(params, n)
                recursive = pq_core.pq_number_recursive(params, n)
                tally.add(abs(direct - recursive) / max(1.0, abs(direct)), 1e-9, f"recursion p={p:.6g} q={q:.6g} n={n}")
        return tally.result()

    def _identities(self) -> SuiteResult:
        tally = _Tally("identities")
        top = settings.identity_max_index
        indices = list(range(-3, 0)) + list(range(top + 1))
        for preset in _presets():
            for n in indices:
                for m in indices:
                    report = pq_core.identity_suite(preset.resolved, n, m)
                    for item in report.residuals:
                        if item.residual is not None:
                            tally.add(item.residual, 1e-10, f"{preset.label} {item.name} n={n} m={m}")
        return tally.result()

    # pq_calculus

    def _calculus(self) -> SuiteResult:
        tally = _Tally("calculus")
        for preset in _presets():
            params, label = preset.resolved, preset.label
            for a in (0.5, 1.0, -2.0, 1.5j):
                for n in range(1, 11):
                    tally.add(pq_calculus.pq_derivative_binomial_check(params, a, n), 1e-12, f"{label} derivative a={a} n={n}")
                for n in range(9):
                    tally.add(pq_calculus.gauss_binomial_check(params, a, n), 1e-12, f"{label} gauss a={a} n={n}")
                for n in range(9):
                    for m in range(9 - n):
                        tally.add(pq_calculus.binomial_splitting_check(params, a, n, m), 1e-12, f"{label} split n={n} m={m}")
                if params.p != 0.0:
                    for n in range(5):
                        for k in range(n + 1):
                            residual = pq_calculus.negative_binomial_check(params, a, n, k, 0.7 + 0.3j)
                            tally.add(residual, 1e-10, f"{label} negative n={n} k={k}")

            for big in (False, True):
                truncation = pq_calculus.exp_truncation(params, 20, big=big)
                derived = pq_calculus.pq_derivative(truncation, params)
                expected = pq_calculus.exp_truncation(params, 19, big=big, scale=params.product if big else 1.0)
                tally.add(pq_calculus.coefficient_gap(derived, expected), 1e-12, f"{label} exp derivative big={big}")

            if params.product != 0.0:
                inverted = params.with_bases(1.0 / params.p, 1.0 / params.q)
                for z in (0.3, -0.5, 0.4 + 0.2j):
                    small = pq_calculus.exp_small(params, z)
                    big = pq_calculus.pq_exp_big(inverted, z).value
                    tally.add(abs(small - big) / max(1.0, abs(small)), 1e-10, f"{label} inverted bases z={z}")
        return tally.result()

    def _exp_relation(self) -> SuiteResult:
        tally = _Tally("exp-relation")
        skipped = 0
        grid = [r * cmath.exp(2j * math.pi * k / 5) for r in (0.25, 0.5, 0.75, 1.0) for k in range(5)]
        for preset in _presets():
            params = preset.resolved
            for z in grid:
                try:
                    tally.add(pq_calculus.exp_relation_residual(params, z), 1e-10, f"{preset.label} z={z:.3g}")
                except SeriesDiverged:
                    skipped += 1
            for x in (0.1, 0.4, 0.8):
                f_p = pq_calculus.f_function(params, params.p, x)
                f_q = pq_calculus.f_function(params, params.q, x)
                tally.add(abs(f_p - f_q), 1e-10, f"{preset.label} f(p)=f(q) z={x}")
                tally.add(abs(pq_calculus.f_function(params, 1.0, x) - (1.0 - x)), 1e-10, f"{preset.label} f(1) z={x}")
        return tally.result(detail=f"{skipped} points outside the convergence region" if skipped else "")

    # fock

    def _algebra(self) -> SuiteResult:
        tally = _Tally("algebra")
        dim = 16
        for preset in _presets():
            if not _gated(preset, dim):
                continue
            params, label = preset.resolved, preset.label
            for report in (fock.algebra_residuals(params, dim), fock.number_relation_residuals(params, dim)):
                for name, residual in report.residuals.items():
                    if residual is not None:
                        tally.add(residual, 1e-12, f"{label} {name}")
            tally.add(fock.hamiltonian_product_residual(params, dim), 1e-12, f"{label} hamiltonian")
            tally.add(fock.oscillator_form_residual(params, dim), 1e-12, f"{label} X/P form")
            tally.add(fock.nonlinear_map_check(params, dim), 1e-12, f"{label} nonlinear map")
            for n in range(dim):
                basis = fock.fock_basis_vector(params, n, dim)
                expected = numpy.zeros(dim)
                expected[n] = 1.0
                tally.add(float(numpy.max(numpy.abs(basis.coeffs - expected))), 1e-12, f"{label} basis n={n}")
        return tally.result()

    # coherent

    def _coherent(self) -> SuiteResult:
        tally = _Tally("coherent")
        for preset in _coherent_presets():
            params, label = preset.resolved, preset.label
            a = None
            for alpha in _alpha_grid():
                vector = coherent.coherent_vector(params, coherent.CoherentSpec(alpha=alpha))
                if a is None or a.dim != vector.dim:
                    a = fock.build_annihilation(params, vector.dim)
                residual = float(numpy.linalg.norm(a.apply(vector) - alpha * vector.coeffs))
                tally.add(residual, 1e-8, f"{label} eigen alpha={alpha:.3g}")

                raw = coherent.coherent_vector(params, coherent.CoherentSpec(alpha=alpha, normalized=False, dim=vector.dim))
                beta = 0.5 * alpha.conjugate() + 0.1
                other = coherent.coherent_vector(params, coherent.CoherentSpec(alpha=beta, normalized=False, dim=vector.dim))
                closed = coherent.coherent_inner(params, alpha, beta)
                overlap = numpy.vdot(other.coeffs, raw.coeffs)
                tally.add(abs(closed - overlap) / max(1.0, abs(closed)), 1e-10, f"{label} inner alpha={alpha:.3g}")

                closed_avg = coherent.coherent_averages(params, alpha)
                numeric_avg = coherent.coherent_averages_numeric(params, alpha, dim=vector.dim)
                for field in ("a", "a_dagger", "a_squared", "a_dagger_squared", "number", "number_next"):
                    x, y = getattr(closed_avg, field), getattr(numeric_avg, field)
                    tally.add(abs(x - y) / max(1.0, abs(x)), 1e-8, f"{label} <{field}> alpha={alpha:.3g}")

            relations = coherent.scaled_state_relations(params, 0.4, 1.5, 32)
            for name, residual in relations.residuals.items():
                if residual is not None:
                    tally.add(residual, 1e-9, f"{label} {name}")
        return tally.result()

    def _uncertainty(self) -> SuiteResult:
        tally = _Tally("uncertainty")
        hbar = settings.hbar
        for preset in _presets():
            params, label = preset.resolved, preset.label
            for alpha in _alpha_grid():
                closed = coherent.uncertainty_closed(params, alpha).product
                symmetric = coherent.uncertainty_symmetric_form(params, alpha).product
                numeric = coherent.uncertainty_numeric(params, alpha)
                scale = max(1.0, abs(closed))
                tally.add(abs(closed - symmetric) / scale, 1e-8, f"{label} symmetric alpha={alpha:.3g}")
                tally.add(abs(closed - numeric.product) / scale, 1e-8, f"{label} numeric alpha={alpha:.3g}")
                tally.add(abs(numeric.mean_x - math.sqrt(2.0 * hbar) * alpha.real), 1e-8, f"{label} <X> alpha={alpha:.3g}")
                tally.add(abs(numeric.mean_p - math.sqrt(2.0 * hbar) * alpha.imag), 1e-8, f"{label} <P> alpha={alpha:.3g}")
                tally.add(0.0 if closed > 0.0 else 1.0, 0.5, f"{label} positivity alpha={alpha:.3g}")
                if alpha == 0:
                    tally.add(abs(closed - hbar / 2.0), 1e-12, f"{label} vacuum")
                    tally.add(abs(symmetric - hbar / 2.0), 1e-12, f"{label} vacuum symmetric")
                    tally.add(abs(numeric.product - hbar / 2.0), 1e-12, f"{label} vacuum numeric")
            for modulus in (0.3, 0.8):
                tally.add(coherent.phase_spread(params, modulus), 1e-12, f"{label} phase |alpha|={modulus}")
        return tally.result()

    def _slope(self) -> SuiteResult:
        tally = _Tally("slope")
        half = settings.hbar / 2.0
        for preset in _presets():
            params = preset.resolved
            expected = half * (params.total - 2.0)
            tally.add(abs(coherent.small_alpha_slope(params) - expected), 1e-3, f"{preset.label}")
        for k in range(1, 5):
            params = pq_core.resolve_family(FamilyKind.FIBONACCI_DIVISOR, k=k).resolved
            expected = half * (pq_core.lucas(k) - 2)
            tally.add(abs(coherent.small_alpha_slope(params) - expected), 1e-3, f"fibdiv k={k} lucas")
        return tally.result()

    # susy

    def _super_number(self) -> SuiteResult:
        tally = _Tally("super-number")
        dim = 8
        for preset in _presets():
            if not _gated(preset, dim):
                continue
            params = preset.resolved
            for theta in numpy.linspace(0.0, math.pi, 13):
                for phi in numpy.linspace(0.0, 2.0 * math.pi, 8, endpoint=False):
                    state = susy.super_number_state(params, 3, theta, phi, dim)
                    tally.add(abs(susy.concurrence(state) - math.sin(theta)), 1e-12, f"{preset.label} C theta={theta:.3g}")
                    tally.add(susy.super_number_residual(params, state, 3), 1e-12, f"{preset.label} eigen theta={theta:.3g}")
        return tally.result()

    def _concurrence_oracle(self) -> SuiteResult:
        tally = _Tally("concurrence-oracle")
        rng = numpy.random.default_rng(7)
        dim = 16
        for i in range(50):
            raw = rng.normal(size=(2, dim)) + 1j * rng.normal(size=(2, dim))
            state = susy.SuperState.from_arrays(raw[0], raw[1])
            gap = abs(susy.concurrence(state) - susy.concurrence_from_reduced_density(state))
            tally.add(gap, 1e-10, f"random state {i}")
        return tally.result()

    def _entangled_eigen(self) -> SuiteResult:
        tally = _Tally("entangled-eigen")
        for preset in _presets():
            params, label = preset.resolved, preset.label
            for alpha in _alpha_grid():
                for kind, transposed in ((SuperKind.L, False), (SuperKind.B, True)):
                    state = susy.entangled_super_coherent(params, alpha, kind)
                    op = susy.super_annihilation(params, state.dim_boson, transposed=transposed)
                    tally.add(susy.eigen_residual(op, state, alpha), 1e-8, f"{label} {kind.value} alpha={alpha:.3g}")
                for up, transposed in ((True, False), (False, True)):
                    state = susy.separable_super_coherent(params, alpha, up=up)
                    op = susy.super_annihilation(params, state.dim_boson, transposed=transposed)
                    tally.add(susy.eigen_residual(op, state, alpha), 1e-8, f"{label} separable up={up} alpha={alpha:.3g}")
                    tally.add(susy.concurrence(state), 1e-12, f"{label} separable C up={up}")
        return tally.result()

    def _reference_limits(self) -> SuiteResult:
        tally = _Tally("reference-limits")
        small = 1e-4
        for preset in _presets():
            params, label = preset.resolved, preset.label
            for kind, weight in ((SuperKind.L, params.p), (SuperKind.B, params.q)):
                expected = 2.0 * abs(weight) / (1.0 + weight ** 2)
                value = susy.concurrence(susy.entangled_super_coherent(params, small, kind))
                tally.add(abs(value - expected), 1e-6, f"{label} {kind.value} |alpha|={small}")
                tally.add(abs(susy.concurrence(susy.reference_state(params, kind)) - expected), 1e-12, f"{label} {kind.value} reference")
        undeformed = DeformationParams(p=1.0, q=1.0)
        for kind in SuperKind:
            tally.add(abs(susy.concurrence(susy.reference_state(undeformed, kind)) - 1.0), 1e-10, f"p=q=1 {kind.value}")
            tally.add(abs(susy.concurrence_closed(undeformed, 0.0, kind) - 1.0), 1e-10, f"p=q=1 closed {kind.value}")
        return tally.result()

    def _reference_uncertainty(self) -> SuiteResult:
        tally = _Tally("reference-uncertainty")
        for preset in _presets():
            params = preset.resolved
            for kind in SuperKind:
                closed = susy.reference_uncertainty(params, kind)
                try:
                    numeric = susy.super_uncertainty_numeric(params, susy.reference_state(params, kind))
                except NegativePqNumber:
                    continue
                tally.add(abs(closed.product - numeric.product), 1e-10, f"{preset.label} {kind.value}")
        return tally.result()

    def _concurrence_closed(self) -> SuiteResult:
        """Closed-form C_L, C_B and norms against the Gram values; Gram is ground truth."""
        tally = _Tally("concurrence-closed")
        worst_gap, worst_where = 0.0, ""
        for preset in _presets():
            params, label = preset.resolved, preset.label
            for alpha in (0.0, 0.2, 0.5, 0.8, 1.0):
                for kind in SuperKind:
                    state = susy.entangled_super_coherent(params, alpha, kind)
                    gram = susy.concurrence(state)
                    tally.add(abs(gram - susy.concurrence_from_reduced_density(state)), 1e-10, f"{label} {kind.value} oracle")

                    psi0, psi1 = susy.entangled_components(params, alpha, kind, state.dim_boson)
                    numeric_norm = float(numpy.vdot(psi0, psi0).real + numpy.vdot(psi1, psi1).real)
                    closed_norm = susy.normalization_closed(params, alpha ** 2, kind)
                    gaps = (
                        abs(susy.concurrence_closed(params, alpha ** 2, kind) - gram),
                        abs(closed_norm - numeric_norm) / max(1.0, numeric_norm),
                    )
                    if max(gaps) > worst_gap:
                        worst_gap, worst_where = max(gaps), f"{label} {kind.value} |alpha|^2={alpha ** 2:.3g}"
        if tally.failed:
            return tally.result()
        if worst_gap > DIVERGENCE_TOL:
            detail = f"closed form off by {worst_gap:.3e} at {worst_where}; Gram value taken as ground truth"
            return tally.result(status=SuiteStatus.PAPER_DIVERGENCE, detail=detail)
        return tally.result(detail=f"closed forms agree within {worst_gap:.1e}")

    def _partial_trace(self) -> SuiteResult:
        tally = _Tally("partial-trace")
        dim = 16
        for preset in _presets():
            if not _gated(preset, dim):
                continue
            params, label = preset.resolved, preset.label
            tally.add(susy.partial_trace_residual(params, dim), 1e-13, f"{label} partial trace")
            tally.add(susy.supercharge_residual(params, dim), 1e-12, f"{label} supercharges")
            # H_S interior carries [0..dim-2] in the boson block and [1..dim-1] in the fermion block
            levels = pq_core.pq_numbers(params, dim)
            for n, energy, multiplicity in susy.super_spectrum_degeneracy(params, dim):
                def same(m: int) -> bool:
                    return abs(0.5 * levels[m] - energy) <= 1e-9 * max(1.0, abs(energy))

                expected = sum(1 for m in range(dim - 1) if same(m)) + sum(1 for m in range(1, dim) if same(m))
                tally.add(abs(multiplicity - expected), 0.5, f"{label} degeneracy n={n}")
        return tally.result()


verification_service = VerificationService()
