import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, TextIO, Tuple, Union

from tqdm import tqdm

from .config import Cell, SweepConfig
from .errors import FitError
from .gamma_profile import parse_gamma_spec
from .model import LZFamily
from .propagate import IntegratorConfig
from .transition import CSV_FIELDS, OrderFit, TransitionRecord, measured_p, order_fit

logger = logging.getLogger(__name__)

MIN_FIT_POINTS = 3


@dataclass(frozen=True)
class CellFailure:
    """A grid cell whose evaluation raised."""

    index: Tuple[int, int, int]
    g: float
    epsilon: float
    gamma_spec: str
    reason: str


@dataclass(frozen=True)
class GroupFit:
    """Order fit of one ``(g, gamma_spec)`` group."""

    g: float
    gamma_spec: str
    fit: Optional[OrderFit]
    reason: Optional[str] = None


@dataclass
class SweepReport:
    """Outcome of a sweep.

    ``records`` and ``failures`` together cover the grid exactly once; both are
    ordered lexicographically by grid index.
    """

    records: List[TransitionRecord] = field(default_factory=list)
    order_fits: List[GroupFit] = field(default_factory=list)
    failures: List[CellFailure] = field(default_factory=list)
    grid_size: int = 0

    @property
    def complete(self) -> bool:
        return not self.failures

    @property
    def all_failed(self) -> bool:
        return self.grid_size > 0 and len(self.failures) == self.grid_size


def _run_cell(cell: Cell, T: float, cfg: IntegratorConfig, qtol: float) -> Tuple[Tuple[int, int, int], Union[TransitionRecord, str]]:
    # ProcessPoolExecutorから呼ばれるのでモジュールレベルに置く
    index, g, eps, spec = cell
    try:
        record = measured_p(LZFamily(g), parse_gamma_spec(spec), eps, T, cfg, qtol)
    except Exception as exc:
        # numpy 由来の例外も含めてセル単位で隔離する
        return index, f"{type(exc).__name__}: {exc}"
    return index, record


def _fit_groups(records: List[TransitionRecord]) -> List[GroupFit]:
    groups: Dict[Tuple[float, str], List[TransitionRecord]] = {}
    for record in records:
        groups.setdefault((record.g, record.gamma_spec), []).append(record)
    fits = []
    for (g, spec), members in groups.items():
        if len({r.epsilon for r in members}) < MIN_FIT_POINTS:
            continue
        try:
            fits.append(GroupFit(g, spec, order_fit(members)))
        except FitError as exc:
            logger.info("no order fit for g=%g gamma=%s: %s", g, spec, exc)
            fits.append(GroupFit(g, spec, None, str(exc)))
    return fits


def run_sweep(cfg: SweepConfig, progress: bool = True) -> SweepReport:
    """Evaluate every ``(g, eps, gamma)`` cell of a validated configuration.

    Cells run in a process pool when more than one worker is configured. Per-cell
    exceptions are recorded as failures and do not stop the sweep.

    Args:
        cfg: Sweep configuration
        progress: Show a progress bar

    Returns:
        Records, failures and one order fit per ``(g, gamma_spec)`` group with
        at least three epsilon values
    """
    cfg.validate()
    cells = cfg.cells()
    T = cfg.horizon()
    integrator = cfg.integrator_config()
    workers = min(cfg.worker_count(), len(cells))
    outcomes: Dict[Tuple[int, int, int], Union[TransitionRecord, str]] = {}

    with tqdm(total=len(cells), desc="Sweeping", unit="cells", disable=not progress) as pbar:
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as executor:
                futures = [executor.submit(_run_cell, cell, T, integrator, cfg.qtol) for cell in cells]
                for future in as_completed(futures):
                    index, outcome = future.result()
                    outcomes[index] = outcome
                    pbar.update(1)
        else:
            for cell in cells:
                index, outcome = _run_cell(cell, T, integrator, cfg.qtol)
                outcomes[index] = outcome
                pbar.update(1)

    report = SweepReport(grid_size=len(cells))
    for index, g, eps, spec in cells:
        outcome = outcomes[index]
        if isinstance(outcome, TransitionRecord):
            report.records.append(outcome)
        else:
            logger.warning("cell %s (g=%g, eps=%g, gamma=%s) failed: %s", index, g, eps, spec, outcome)
            report.failures.append(CellFailure(index, g, eps, spec, outcome))
    report.order_fits = _fit_groups(report.records)
    return report


def _format(value: object) -> str:
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


def write_csv(records: List[TransitionRecord], stream: TextIO) -> None:
    """CSV with the fixed header; floats carry 17 significant digits."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for record in records:
        row = record.as_row()
        writer.writerow([_format(row[key]) for key in CSV_FIELDS])


def _fit_summary(group: GroupFit) -> Dict[str, object]:
    summary: Dict[str, object] = {"g": group.g, "gamma_spec": group.gamma_spec}
    if group.fit is None:
        summary["error"] = group.reason
    else:
        summary.update(asdict(group.fit))
        summary["constant"] = group.fit.constant
    return summary


def write_json(report: SweepReport, stream: TextIO) -> None:
    """``{"records": [...], "fits": [...], "failures": [...]}`` with the CSV field names."""
    payload = {
        "records": [record.as_row() for record in report.records],
        "fits": [_fit_summary(group) for group in report.order_fits],
        "failures": [asdict(failure) for failure in report.failures],
    }
    json.dump(payload, stream, indent=2)
    stream.write("\n")


def write_report(report: SweepReport, cfg: SweepConfig, stream: TextIO) -> None:
    if cfg.format == "json":
        write_json(report, stream)
    else:
        write_csv(report.records, stream)


def format_fits(report: SweepReport) -> str:
    """One summary line per order fit."""
    lines = []
    for group in report.order_fits:
        if group.fit is None:
            lines.append(f"g={group.g:g} gamma={group.gamma_spec}: no fit ({group.reason})")
            continue
        fit = group.fit
        lines.append(f"g={group.g:g} gamma={group.gamma_spec}: slope={fit.slope:.3f} "
                     f"C={fit.constant:.4g} r2={fit.r_squared:.4f} "
                     f"points={len(fit.epsilons)} excluded={len(fit.excluded)}")
    return "\n".join(lines)
