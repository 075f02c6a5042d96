import json
from pathlib import Path

import numpy as np
import pytest

from soap_bridge.catenoid import Catenoid
from soap_bridge.diagnostics import TIMESERIES_HEADER, CriticalData
from soap_bridge.exceptions import InvalidArgument
from soap_bridge.run_config import RunConfig
from soap_bridge.runner import (
    SWEEP_HEADER,
    Template,
    critical_data,
    resolve_lambda,
    run_single,
    run_sweep,
    simulate,
)
from soap_bridge.utils import RunLayout

SIGMA_COSH1 = float(np.cosh(1.0))


def tiny_config(**overrides) -> RunConfig:
    data = {
        "sigma": SIGMA_COSH1,
        "lambda": 0.0,
        "n_z": 9,
        "n_r": 5,
        "dt_init": 1e-3,
        "dt_max": 1e-3,
        "T_end": 0.01,
        "sample_interval": 0.005,
    }
    data.update(overrides)
    return RunConfig.model_validate(data)


@pytest.fixture
def crit() -> CriticalData:
    return CriticalData(SIGMA_COSH1, Catenoid(1.0, SIGMA_COSH1), 10.0, 0.5624, 9, 5)


def test_resolve_lambda(crit):
    assert resolve_lambda("2.5", crit) == 2.5
    assert resolve_lambda("2*crit", crit) == pytest.approx(2 * crit.lambda_crit)
    assert resolve_lambda(" 0.5 * crit ", crit) == pytest.approx(0.5 * crit.lambda_crit)
    with pytest.raises(InvalidArgument):
        resolve_lambda("lots", crit)
    with pytest.raises(InvalidArgument):
        resolve_lambda("1*crit", None)


def test_critical_data_needs_catenoid():
    assert critical_data(tiny_config(sigma=1.2)) is None
    data = critical_data(tiny_config(ic="catenoid(large)", **{"lambda": 1.0}))
    assert data is not None
    assert data.catenoid.branch == "large"
    assert data.lam == 1.0


def test_simulate_tracks_drift():
    sim = simulate(tiny_config())
    result = sim.result
    assert result.outcome.tag == "Completed"
    assert result.outcome.t == pytest.approx(0.01)
    assert sim.max_drift == pytest.approx(float(np.max(np.abs(result.final.u.u))))
    assert [d.t for d in result.samples] == pytest.approx([0.0, 0.005, 0.01])


def test_run_single_artifacts(tmp_path: Path):
    layout = RunLayout(tmp_path / "run")
    cfg = tiny_config(output={"snapshots": True})
    summary = run_single(cfg, layout)
    assert summary.outcome == "Completed"
    assert summary.critical is None
    assert summary.config["lambda"] == 0.0

    lines = layout.timeseries_path.read_text().splitlines()
    assert lines[0] == ",".join(TIMESERIES_HEADER)
    assert len(lines) == 4

    saved = json.loads(layout.summary_path.read_text())
    assert saved["outcome"] == "Completed"
    assert saved["steps"] == summary.steps

    report = layout.report_path.read_text()
    assert "**Completed**" in report
    assert "Critical voltage" not in report

    assert layout.profile_snapshot_path("initial").exists()
    assert layout.profile_snapshot_path("final").exists()
    assert layout.potential_snapshot_path("final").exists()


def test_run_single_with_catenoid_reports_critical(tmp_path: Path):
    layout = RunLayout(tmp_path / "cat")
    summary = run_single(tiny_config(ic="catenoid(small)", output={"report": False}), layout)
    assert summary.critical is not None
    assert summary.critical["lambda_crit"] > 0
    assert summary.critical["T_max_bound"] is None
    assert summary.within_t_max_bound is None
    assert not layout.report_path.exists()


def test_report_template_renders_critical_table():
    summary = {
        "config": {"sigma": 1.5, "lambda": 2.0, "n_z": 9, "n_r": 5, "ic": "zero"},
        "outcome": "PinchOff",
        "outcome_time": 0.25,
        "outcome_detail": "film pinched off at z=0",
        "steps": 12,
        "max_dE_dt": -0.5,
        "max_drift": 0.9,
        "final": {"t": 0.25, "E": 1.5, "flux_lhs": None},
        "critical": {"branch": "small", "lambda_crit": 11.0, "T_max_bound": 0.1},
        "within_t_max_bound": False,
        "version": "0.1.0",
        "git": None,
    }
    text = Template.create("run-report.j2", {"summary": summary, "duration": "1.0s"}).render()
    assert "**PinchOff** at t = 0.25" in text
    assert "| lambda_crit | 11 |" in text
    assert "branch" not in text
    assert "flux_lhs" not in text
    assert "beyond the T_max bound" in text


def test_sweep_rows(tmp_path: Path):
    layout = RunLayout(tmp_path / "sweep")
    rows = run_sweep(tiny_config(), [SIGMA_COSH1], ["0", "0.5"], layout)
    assert [row[2] for row in rows] == ["Completed", "Completed"]
    assert [row[1] for row in rows] == [0.0, 0.5]
    lines = layout.sweep_path.read_text().splitlines()
    assert lines[0] == ",".join(SWEEP_HEADER)
    assert len(lines) == 3


def test_sweep_errors_become_rows(tmp_path: Path):
    layout = RunLayout(tmp_path / "sweep")
    base = tiny_config(ic="catenoid(small)")
    rows = run_sweep(base, [1.0], ["0", "1*crit"], layout)
    assert rows[0][2] == "Error:NO_CATENOID"
    assert rows[1][1] == "1*crit"
    assert rows[1][2] == "Error:INVALID_ARGUMENT"
    assert rows[1][4] is None


def test_sweep_is_deterministic_across_workers(tmp_path: Path):
    base = tiny_config()
    serial = run_sweep(base, [SIGMA_COSH1, 2.0], ["0", "0.5"], RunLayout(tmp_path / "a"))
    parallel = run_sweep(base, [SIGMA_COSH1, 2.0], ["0", "0.5"], RunLayout(tmp_path / "b"), 2)
    assert serial == parallel
    assert (tmp_path / "a" / "sweep.csv").read_text() == (tmp_path / "b" / "sweep.csv").read_text()


def test_sweep_rejects_zero_workers(tmp_path: Path):
    with pytest.raises(InvalidArgument):
        run_sweep(tiny_config(), [1.0], ["0"], RunLayout(tmp_path), jobs=0)
