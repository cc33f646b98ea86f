import csv
import io
import json

import numpy as np
import pytest

from lzkit import sweep
from lzkit.config import SweepConfig
from lzkit.errors import IntegratorError
from lzkit.gamma_profile import ConstantGamma
from lzkit.model import LZFamily
from lzkit.transition import CSV_FIELDS, TransitionRecord, measured_p


def _fake_measured_p(fam, gamma, eps, T, cfg, qtol):
    if eps == 0.05:
        raise IntegratorError("step size underflow", 0.0, 1e-12, 1e-9)
    return TransitionRecord(
        g=fam.g, epsilon=eps, gamma_spec=gamma.describe(), T=T,
        p_measured=0.1 + 2 * eps ** 2, p_coherent=0.05, incoherent_integral=0.25,
        p_predicted=0.1, residual=2 * eps ** 2, tail_bound=1e-7, cptp_trace_defect=1e-13,
        steps_accepted=100, wall_time_s=0.0, rtol=cfg.rtol, qtol=qtol,
    )


@pytest.fixture
def fake_cells(monkeypatch):
    monkeypatch.setattr(sweep, "measured_p", _fake_measured_p)


def test_single_cell_matches_direct_call():
    cfg = SweepConfig().set_grid(g_values=[1.0], epsilon_values=[1.0], gamma_specs=["const:0.5"]).set_horizon(6)
    report = sweep.run_sweep(cfg, progress=False)
    direct = measured_p(LZFamily(1.0), ConstantGamma(0.5), 1.0, 6.0, cfg.integrator_config(), cfg.qtol)
    assert report.complete
    assert len(report.records) == 1
    assert report.records[0].p_measured == direct.p_measured
    assert report.records[0].steps_accepted == direct.steps_accepted
    assert report.order_fits == []


def test_five_epsilons_give_one_fit(fake_cells):
    cfg = SweepConfig().set_grid(epsilon_values=[0.4, 0.3, 0.2, 0.15, 0.1], gamma_specs=["const:0.5"])
    report = sweep.run_sweep(cfg, progress=False)
    assert len(report.order_fits) == 1
    group = report.order_fits[0]
    assert (group.g, group.gamma_spec) == (1.0, "const:0.5")
    assert group.fit.slope == pytest.approx(2.0)


def test_fits_are_grouped_by_g_and_gamma(fake_cells):
    cfg = SweepConfig().set_grid(g_values=[1.0, 2.0], epsilon_values=[0.4, 0.2, 0.1],
                                 gamma_specs=["const:0.5", "const:1"])
    report = sweep.run_sweep(cfg, progress=False)
    assert len(report.order_fits) == 4
    assert [r.epsilon for r in report.records[:3]] == [0.4, 0.4, 0.2]


def test_failures_are_isolated(fake_cells):
    cfg = SweepConfig().set_grid(epsilon_values=[0.4, 0.05, 0.2], gamma_specs=["const:0.5"])
    report = sweep.run_sweep(cfg, progress=False)
    assert len(report.records) + len(report.failures) == report.grid_size == 3
    assert not report.complete
    assert not report.all_failed
    failure = report.failures[0]
    assert failure.index == (0, 1, 0)
    assert failure.reason.startswith("IntegratorError")
    assert [r.epsilon for r in report.records] == [0.4, 0.2]


def test_numpy_errors_are_isolated(monkeypatch):
    def broken(fam, gamma, eps, T, cfg, qtol):
        if eps == 0.3:
            raise np.linalg.LinAlgError("Eigenvalues did not converge")
        return _fake_measured_p(fam, gamma, eps, T, cfg, qtol)

    monkeypatch.setattr(sweep, "measured_p", broken)
    cfg = SweepConfig().set_grid(epsilon_values=[0.4, 0.3, 0.2], gamma_specs=["const:0.5"])
    report = sweep.run_sweep(cfg, progress=False)
    assert [r.epsilon for r in report.records] == [0.4, 0.2]
    assert len(report.failures) == 1
    assert report.failures[0].reason == "LinAlgError: Eigenvalues did not converge"


def test_all_failed(fake_cells):
    cfg = SweepConfig().set_grid(epsilon_values=[0.05])
    assert sweep.run_sweep(cfg, progress=False).all_failed


def test_csv_output(fake_cells):
    cfg = SweepConfig().set_grid(epsilon_values=[0.4, 0.2])
    report = sweep.run_sweep(cfg, progress=False)
    stream = io.StringIO()
    sweep.write_csv(report.records, stream)
    lines = stream.getvalue().splitlines()
    assert lines[0] == ",".join(CSV_FIELDS)
    rows = list(csv.DictReader(io.StringIO(stream.getvalue())))
    assert rows[0]["epsilon"] == "0.40000000000000002"
    assert rows[1]["p_measured"] == "%.17g" % (0.1 + 2 * 0.2 ** 2)
    assert rows[0]["steps_accepted"] == "100"
    assert float(rows[1]["residual"]) == 2 * 0.2 ** 2


def test_json_output(fake_cells):
    cfg = SweepConfig().set_grid(epsilon_values=[0.4, 0.05, 0.2, 0.1]).set_output("out.json")
    report = sweep.run_sweep(cfg, progress=False)
    stream = io.StringIO()
    sweep.write_report(report, cfg, stream)
    payload = json.loads(stream.getvalue())
    assert [row["epsilon"] for row in payload["records"]] == [0.4, 0.2, 0.1]
    assert list(payload["records"][0]) == list(CSV_FIELDS)
    assert payload["fits"][0]["slope"] == pytest.approx(2.0)
    assert payload["failures"][0]["epsilon"] == 0.05


def test_format_fits(fake_cells):
    cfg = SweepConfig().set_grid(epsilon_values=[0.4, 0.2, 0.1])
    text = sweep.format_fits(sweep.run_sweep(cfg, progress=False))
    assert text.startswith("g=1 gamma=const:0.5: slope=2.000")


def _csv_without_wall_time(report):
    stream = io.StringIO()
    sweep.write_csv(report.records, stream)
    rows = list(csv.reader(io.StringIO(stream.getvalue())))
    column = rows[0].index("wall_time_s")
    return [row[:column] + row[column + 1:] for row in rows]


@pytest.mark.slow
def test_worker_count_does_not_change_output():
    def config(workers):
        return (SweepConfig()
                .set_grid(epsilon_values=[1.0, 0.8], gamma_specs=["const:0.5", "gauss:1.0:4.0"])
                .set_horizon(6)
                .set_workers(workers))

    serial = sweep.run_sweep(config(1), progress=False)
    parallel = sweep.run_sweep(config(4), progress=False)
    assert _csv_without_wall_time(serial) == _csv_without_wall_time(parallel)
