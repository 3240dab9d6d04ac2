import asyncio
import csv
import io
import json
import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional

from core.config import settings
from core.errors import ConfigInvalid, NegativePqNumber, PqOscError
from models.schemas import (
    DeformationParams,
    OutputFormat,
    ParamsSelection,
    SuiteResult,
    SweepConfig,
    SweepQuantity,
    SweepTable,
)
from services import coherent, fock, pq_calculus, pq_core, susy
from services.susy import SuperKind

logger = logging.getLogger(__name__)

DIVERGENCE_TOL = 1e-6
DEFAULT_MATRIX_DIM = 16

Row = Dict[str, Any]


@dataclass(frozen=True)
class _Job:
    """One grid point; compute() yields one or more rows carrying `inputs`."""

    inputs: Row
    compute: Callable[[], List[Row]]


def resolve_params(selection: ParamsSelection) -> DeformationParams:
    """Explicit (p, q), a family preset, or p = q = 1 when nothing is given."""
    if selection.family is not None:
        if selection.p is not None:
            raise ConfigInvalid("p", "--p conflicts with --family")
        return pq_core.resolve_family(selection.family, q=selection.q, k=selection.k).resolved
    if selection.k is not None:
        raise ConfigInvalid("k", "--k needs --family fibdiv")
    if selection.p is None and selection.q is None:
        return DeformationParams(p=1.0, q=1.0)
    if selection.p is None or selection.q is None:
        missing = "p" if selection.p is None else "q"
        raise ConfigInvalid(missing, "explicit parameters need both --p and --q")
    return DeformationParams(p=selection.p, q=selection.q)


def _relative(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a))


def _columns(quantity: SweepQuantity) -> List[str]:
    inputs = {
        SweepQuantity.PQ_NUMBER: ["n"],
        SweepQuantity.EXPONENTIAL: ["z_re", "z_im", "series"],
        SweepQuantity.SPECTRUM: ["n"],
        SweepQuantity.UNCERTAINTY: ["alpha_re", "alpha_im"],
        SweepQuantity.CONCURRENCE_L: ["alpha_re", "alpha_im"],
        SweepQuantity.CONCURRENCE_B: ["alpha_re", "alpha_im"],
        SweepQuantity.REFERENCE_VALUES: ["kind", "measure"],
        SweepQuantity.IDENTITY_SUITE: ["n", "m", "identity"],
        SweepQuantity.ALGEBRA_RESIDUALS: ["dim", "relation"],
    }[quantity]
    value = ["value", "value_im"] if quantity == SweepQuantity.EXPONENTIAL else ["value"]
    return inputs + value + ["source", "residual", "status"]


def _format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.16e}"
    return str(value)


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


class SweepService:
    """
    Evaluates one quantity over its grid and renders the rows as CSV or JSON.
    Points run concurrently; rows keep grid order.
    """

    def __init__(self):
        self._builders: Dict[SweepQuantity, Callable[[SweepConfig, DeformationParams], List[_Job]]] = {
            SweepQuantity.PQ_NUMBER: self._pq_number_jobs,
            SweepQuantity.EXPONENTIAL: self._exponential_jobs,
            SweepQuantity.SPECTRUM: self._spectrum_jobs,
            SweepQuantity.UNCERTAINTY: self._uncertainty_jobs,
            SweepQuantity.CONCURRENCE_L: self._concurrence_jobs,
            SweepQuantity.CONCURRENCE_B: self._concurrence_jobs,
            SweepQuantity.REFERENCE_VALUES: self._reference_jobs,
            SweepQuantity.IDENTITY_SUITE: self._identity_jobs,
            SweepQuantity.ALGEBRA_RESIDUALS: self._algebra_jobs,
        }

    async def run(self, config: SweepConfig) -> SweepTable:
        params = resolve_params(config)
        jobs = self._builders[config.quantity](config, params)
        logger.info(f"Sweep {config.quantity.value} at p={params.p}, q={params.q}: {len(jobs)} points")

        limit = settings.pq_osc_threads
        semaphore = asyncio.Semaphore(limit) if limit > 0 else None

        async def run_one(job: _Job) -> List[Row]:
            if semaphore is None:
                return await asyncio.to_thread(self._evaluate, job)
            async with semaphore:
                return await asyncio.to_thread(self._evaluate, job)

        batches = await asyncio.gather(*(run_one(job) for job in jobs))
        rows = [row for batch in batches for row in batch]
        failed = any(str(row.get("status", "")).startswith("error:") for row in rows)
        logger.info(f"Sweep {config.quantity.value} finished: {len(rows)} rows{' with errors' if failed else ''}")
        return SweepTable(metadata=self.metadata(config, params), rows=rows, failed=failed)

    def run_sync(self, config: SweepConfig) -> SweepTable:
        return asyncio.run(self.run(config))

    def metadata(self, config: SweepConfig, params: DeformationParams) -> Row:
        return {
            "tool": settings.app_name,
            "version": settings.version,
            "config": config.model_dump(mode="json"),
            "resolved": {"p": params.p, "q": params.q},
            "columns": _columns(config.quantity),
        }

    @staticmethod
    def _evaluate(job: _Job) -> List[Row]:
        try:
            return [{**job.inputs, **row} for row in job.compute()]
        except PqOscError as e:
            logger.warning(f"Row {job.inputs} failed with {e.kind}: {e.message}")
            return [{**job.inputs, "value": None, "source": None, "residual": None, "status": f"error:{e.kind}"}]

    # Emitters

    def document(self, table: SweepTable) -> Row:
        """Flat JSON-safe records in column order plus the metadata header."""
        columns = table.metadata["columns"]
        records = [{c: _json_safe(row.get(c)) for c in columns} for row in table.rows]
        return {"metadata": table.metadata, "failed": table.failed, "rows": records}

    def render(self, table: SweepTable, output: OutputFormat) -> str:
        columns = table.metadata["columns"]
        if OutputFormat(output) == OutputFormat.JSON:
            return json.dumps(self.document(table), indent=2, allow_nan=False) + "\n"
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in table.rows:
            writer.writerow({c: _format_cell(row.get(c)) for c in columns})
        return buffer.getvalue()

    def render_suites(self, results: List[SuiteResult], output: OutputFormat) -> str:
        columns = ["suite", "status", "worst_residual", "tolerance", "checks", "detail"]
        rows = [r.model_dump(mode="json") for r in results]
        if OutputFormat(output) == OutputFormat.JSON:
            document = {
                "metadata": {"tool": settings.app_name, "version": settings.version, "columns": columns},
                "rows": [{c: _json_safe(row[c]) for c in columns} for row in rows],
            }
            return json.dumps(document, indent=2, allow_nan=False) + "\n"
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({c: _format_cell(row[c]) for c in columns})
        return buffer.getvalue()

    # Row builders

    @staticmethod
    def _dim(config: SweepConfig) -> Optional[int]:
        return None if config.dim == "auto" else config.dim

    def _pq_number_jobs(self, config: SweepConfig, params: DeformationParams) -> List[_Job]:
        def compute(n: int) -> List[Row]:
            value = pq_core.pq_number(params, n)
            recursive = pq_core.pq_number_recursive(params, n)
            return [{"value": value, "source": "closed_form", "residual": _relative(value, recursive), "status": "ok"}]

        return [_Job({"n": n}, lambda n=n: compute(n)) for n in range(config.n_max + 1)]

    def _exponential_jobs(self, config: SweepConfig, params: DeformationParams) -> List[_Job]:
        def small(z: complex) -> List[Row]:
            series = pq_calculus.pq_exp_small(params, z, config.tol)
            residual = pq_calculus.exp_relation_residual(params, z, config.tol)
            return [_complex_row(series, residual)]

        def big(z: complex) -> List[Row]:
            series = pq_calculus.pq_exp_big(params, z, config.tol)
            residual = None
            if params.product != 0.0:
                inverted = params.with_bases(1.0 / params.p, 1.0 / params.q)
                other = pq_calculus.exp_small(inverted, z, config.tol)
                residual = abs(series.value - other) / max(1.0, abs(series.value))
            return [_complex_row(series, residual)]

        jobs = []
        for z in config.alpha.points():
            inputs = {"z_re": z.real, "z_im": z.imag}
            jobs.append(_Job({**inputs, "series": "small"}, lambda z=z: small(z)))
            jobs.append(_Job({**inputs, "series": "big"}, lambda z=z: big(z)))
        return jobs

    def _spectrum_jobs(self, config: SweepConfig, params: DeformationParams) -> List[_Job]:
        hbar_omega = config.hbar_omega
        count = config.n_max + 1
        try:
            a = fock.build_annihilation(params, count + 1).entries
            ad = a.conj().T
            diagonal = (a @ ad + ad @ a).diagonal().real
        except NegativePqNumber:
            diagonal = None

        def compute(n: int, energy: float) -> List[Row]:
            if diagonal is None:
                return [{"value": energy, "source": "closed_form", "residual": None, "status": "inapplicable"}]
            residual = _relative(energy, 0.5 * hbar_omega * diagonal[n])
            return [{"value": energy, "source": "closed_form", "residual": residual, "status": "ok"}]

        energies = fock.spectrum(params, count, hbar_omega)
        return [_Job({"n": n}, lambda n=n, e=e: compute(n, e)) for n, e in enumerate(energies)]

    def _uncertainty_jobs(self, config: SweepConfig, params: DeformationParams) -> List[_Job]:
        dim = self._dim(config)

        def compute(alpha: complex) -> List[Row]:
            closed = coherent.uncertainty_closed(params, alpha).product
            symmetric = coherent.uncertainty_symmetric_form(params, alpha).product
            residual = _relative(closed, symmetric)
            try:
                numeric = coherent.uncertainty_numeric(params, alpha, dim=dim).product
            except NegativePqNumber as e:
                # residual covers the symmetric form only
                logger.warning(f"Uncertainty at alpha={alpha}: matrix path inapplicable ({e.message})")
                return [{"value": closed, "source": "closed_form", "residual": residual, "status": "inapplicable"}]
            residual = max(residual, _relative(closed, numeric))
            return [{"value": closed, "source": "closed_form", "residual": residual, "status": "ok"}]

        return [_Job({"alpha_re": a.real, "alpha_im": a.imag}, lambda a=a: compute(a)) for a in config.alpha.points()]

    def _concurrence_jobs(self, config: SweepConfig, params: DeformationParams) -> List[_Job]:
        kind = SuperKind.L if config.quantity == SweepQuantity.CONCURRENCE_L else SuperKind.B
        dim = self._dim(config)

        def compute(alpha: complex) -> List[Row]:
            gram = susy.concurrence(susy.entangled_super_coherent(params, alpha, kind, dim))
            closed = susy.concurrence_closed(params, abs(alpha) ** 2, kind)
            residual = abs(closed - gram)
            status = "paper-divergence" if residual > DIVERGENCE_TOL else "ok"
            return [{"value": gram, "source": "numeric", "residual": residual, "status": status}]

        return [_Job({"alpha_re": a.real, "alpha_im": a.imag}, lambda a=a: compute(a)) for a in config.alpha.points()]

    def _reference_jobs(self, config: SweepConfig, params: DeformationParams) -> List[_Job]:
        def concurrence_row(kind: SuperKind) -> List[Row]:
            weight = params.p if kind == SuperKind.L else params.q
            closed = 2.0 * abs(weight) / (1.0 + weight ** 2)
            gram = susy.concurrence(susy.reference_state(params, kind))
            return [{"value": closed, "source": "closed_form", "residual": abs(closed - gram), "status": "ok"}]

        def uncertainty_row(kind: SuperKind) -> List[Row]:
            closed = susy.reference_uncertainty(params, kind).product
            try:
                numeric = susy.super_uncertainty_numeric(params, susy.reference_state(params, kind)).product
            except NegativePqNumber:
                return [{"value": closed, "source": "closed_form", "residual": None, "status": "inapplicable"}]
            return [{"value": closed, "source": "closed_form", "residual": abs(closed - numeric), "status": "ok"}]

        jobs = []
        for kind in SuperKind:
            jobs.append(_Job({"kind": kind.value, "measure": "concurrence"}, lambda k=kind: concurrence_row(k)))
            jobs.append(_Job({"kind": kind.value, "measure": "uncertainty"}, lambda k=kind: uncertainty_row(k)))
        return jobs

    def _identity_jobs(self, config: SweepConfig, params: DeformationParams) -> List[_Job]:
        def compute(n: int, m: int) -> List[Row]:
            report = pq_core.identity_suite(params, n, m)
            return [
                {
                    "identity": item.name,
                    "value": item.residual,
                    "source": "identity",
                    "residual": item.residual,
                    "status": item.status.value,
                }
                for item in report.residuals
            ]

        top = config.n_max
        if top > settings.identity_max_index:
            raise ConfigInvalid("n_max", f"identity sweeps stop at {settings.identity_max_index}")
        return [_Job({"n": n, "m": m}, lambda n=n, m=m: compute(n, m)) for n in range(top + 1) for m in range(top + 1)]

    def _algebra_jobs(self, config: SweepConfig, params: DeformationParams) -> List[_Job]:
        dim = self._dim(config) or DEFAULT_MATRIX_DIM

        def compute() -> List[Row]:
            rows = []
            for report in (fock.algebra_residuals(params, dim), fock.number_relation_residuals(params, dim)):
                for name, residual in report.residuals.items():
                    status = "inapplicable" if residual is None else "ok"
                    rows.append({"relation": name, "value": residual, "source": "matrix_numeric", "residual": residual, "status": status})
            return rows

        return [_Job({"dim": dim}, compute)]


def _complex_row(series: pq_calculus.SeriesValue, residual: Optional[float]) -> Row:
    return {
        "value": series.value.real,
        "value_im": series.value.imag,
        "source": series.classification.value,
        "residual": residual,
        "status": "ok",
    }


sweep_service = SweepService()
