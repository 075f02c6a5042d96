import re
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib.metadata import PackageNotFoundError
from importlib.metadata import version as pkg_ver
from logging import INFO, WARNING
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
from jinja2 import Environment, PackageLoader
from pydantic import BaseModel

from soap_bridge.catenoid import sigma_min
from soap_bridge.diagnostics import TIMESERIES_HEADER, CriticalData, lambda_crit
from soap_bridge.elliptic import solve_potential
from soap_bridge.exceptions import InvalidArgument, SoapBridgeError
from soap_bridge.mesh import FilmProfile
from soap_bridge.run_config import RunConfig
from soap_bridge.stepper import RunResult, SimState, run
from soap_bridge.utils import RunLayout, format_duration, log, write_csv

SWEEP_HEADER = ["sigma", "lambda", "outcome", "t", "lambda_crit", "steps", "detail"]
CRIT_TOKEN = re.compile(r"^\s*(?P<k>[0-9.eE+-]+)\s*\*\s*crit\s*$")


@dataclass(frozen=True)
class Template:
    name: str
    context: dict
    env: Environment

    @staticmethod
    def create(name: str, context: dict) -> "Template":
        env = Environment(loader=PackageLoader("soap_bridge", "sb_resources"))
        return Template(name, context, env)

    def render(self) -> str:
        return self.env.get_template(self.name).render(**self.context)


class RunSummary(BaseModel):
    version: str
    git: Optional[str] = None
    outcome: str
    outcome_time: float
    outcome_detail: str
    steps: int
    final: dict[str, Any]
    max_dE_dt: float
    max_drift: float
    critical: Optional[dict[str, Any]] = None
    within_t_max_bound: Optional[bool] = None
    config: dict[str, Any]
    wall_time: float


def package_version() -> str:
    try:
        return pkg_ver("soap-bridge")
    except PackageNotFoundError:
        return "unknown"


def git_describe(cwd: Optional[Path] = None) -> Optional[str]:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=cwd,
            capture_output=True,
            text=True,
            timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return None
    if out.returncode != 0:
        return None
    return out.stdout.strip() or None


def critical_data(cfg: RunConfig) -> Optional[CriticalData]:
    """CriticalData at the run's resolution, or None when no catenoid spans the rings."""
    if cfg.sigma <= sigma_min()[0]:
        return None
    ic = cfg.initial_condition
    branch = ic.branch if ic.kind == "catenoid" else "small"
    crit = lambda_crit(cfg.sigma, cfg.n_z, cfg.n_r, branch, cfg.solver_config())
    return crit.with_lambda(cfg.lam)


@dataclass(frozen=True)
class Simulation:
    result: RunResult
    u0: FilmProfile
    max_drift: float


def simulate(cfg: RunConfig) -> Simulation:
    u0 = cfg.initial_profile()
    drift = [0.0]

    def track(s: SimState) -> None:
        drift[0] = max(drift[0], float(np.max(np.abs(s.u.u - u0.u))))

    result = run(cfg.params(), u0, cfg.stepper_config(), cfg.T_end, cfg.sample_interval, track)
    track(result.final)
    return Simulation(result, u0, drift[0])


def _write_snapshots(layout: RunLayout, cfg: RunConfig, sim: Simulation) -> None:
    for tag, profile in (("initial", sim.u0), ("final", sim.result.final.u)):
        rows = zip(profile.grid.z, profile.u)
        write_csv(layout.profile_snapshot_path(tag), ["z", "u"], rows)
    final = sim.result.final.u
    if final.is_admissible and min(1.0 - final.u.max(), final.u.min() + 1.0) > 1e-3:
        params = cfg.params()
        phi = solve_potential(final, cfg.sigma, params.mesh, params.solver)
        phi.write_csv(layout.potential_snapshot_path("final"))
        phi.write_physical_csv(layout.potential_snapshot_path("final-physical"), final)


def run_single(cfg: RunConfig, layout: RunLayout) -> RunSummary:
    started = time.perf_counter()
    layout.ensure()
    crit = critical_data(cfg) if cfg.initial_condition.uses_catenoid else None
    if crit is not None:
        log(INFO, f"lambda_crit({cfg.sigma:.6g}) = {crit.lambda_crit:.6g} (C15 = {crit.c15:.6g})")
    sim = simulate(cfg)
    result = sim.result
    write_csv(layout.timeseries_path, TIMESERIES_HEADER, (d.to_row() for d in result.samples))
    if cfg.output.snapshots:
        _write_snapshots(layout, cfg, sim)
    bound = crit.t_max_bound(cfg.lam) if crit is not None else None
    within = None
    if bound is not None and result.outcome.tag != "Completed":
        within = bool(result.outcome.t <= bound)
        if not within:
            log(WARNING, f"termination at t={result.outcome.t:.6g} exceeds T_max bound {bound:.6g}")
    summary = RunSummary(
        version=package_version(),
        git=git_describe(layout.root_path),
        outcome=result.outcome.tag,
        outcome_time=result.outcome.t,
        outcome_detail=result.outcome.detail,
        steps=result.steps,
        final=result.samples[-1].to_dict(),
        max_dE_dt=result.max_dE_dt,
        max_drift=sim.max_drift,
        critical=crit.to_dict() if crit is not None else None,
        within_t_max_bound=within,
        config=cfg.echo(),
        wall_time=time.perf_counter() - started,
    )
    layout.summary_path.write_text(summary.model_dump_json(indent=2))
    if cfg.output.report:
        context = {"summary": summary, "duration": format_duration(summary.wall_time)}
        layout.report_path.write_text(Template.create("run-report.j2", context).render())
    log(INFO, f"{summary.outcome}: {summary.outcome_detail} ({format_duration(summary.wall_time)})")
    log(INFO, f"Wrote results to {layout.root_path}")
    return summary


def resolve_lambda(token: str, crit: Optional[CriticalData]) -> float:
    m = CRIT_TOKEN.match(token)
    if m is None:
        try:
            return float(token)
        except ValueError:
            raise InvalidArgument(f"lambda must be a number or '<k>*crit', got '{token}'")
    if crit is None:
        raise InvalidArgument(f"'{token}' needs a catenoid, but sigma is below sigma_min")
    return float(m.group("k")) * crit.lambda_crit


def _sweep_point(task: tuple[RunConfig, float, str]) -> list[Any]:
    base, sigma, token = task
    point = base.at_point(sigma, 0.0)
    crit: Optional[CriticalData] = None
    lam: Any = token
    try:
        crit = critical_data(point)
        lam = resolve_lambda(token, crit)
        sim = simulate(point.at_point(sigma, lam))
        outcome = sim.result.outcome
        row_tail = [outcome.tag, outcome.t, None, sim.result.steps, outcome.detail]
    except SoapBridgeError as e:
        row_tail = [f"Error:{e.error_type}", None, None, None, e.message]
    row_tail[2] = crit.lambda_crit if crit is not None else None
    return [sigma, lam, *row_tail]


def run_sweep(
    base: RunConfig,
    sigmas: Sequence[float],
    lambdas: Sequence[str],
    layout: RunLayout,
    jobs: int = 1,
) -> list[list[Any]]:
    if jobs < 1:
        raise InvalidArgument("parallelism must be at least 1")
    tasks = [(base, float(s), str(t)) for s in sigmas for t in lambdas]
    log(INFO, f"Sweeping {len(tasks)} points with {jobs} worker(s)")
    if jobs == 1:
        rows = list(map(_sweep_point, tasks))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            rows = list(executor.map(_sweep_point, tasks))
    write_csv(layout.ensure().sweep_path, SWEEP_HEADER, rows)
    log(INFO, f"Wrote {len(rows)} rows to {layout.sweep_path}")
    return rows
