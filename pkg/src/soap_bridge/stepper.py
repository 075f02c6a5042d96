"""Semi-implicit evolution of the film.

Each step freezes the quasilinear diffusion B(u) at the current iterate and treats the
nonlocal force explicitly:

    (I + dt B(u^n)) u^{n+1} = u^n + dt G(u^n),   u^{n+1}(+-1) = 0,

so a step costs one elliptic solve and one tridiagonal solve. Steps whose largest nodal
change exceeds ``max_change_per_step``, or that leave the film outside (-1, 1), are
retried with half the step size.
"""

from dataclasses import dataclass, field
from logging import DEBUG, INFO, WARNING
from typing import Callable, Optional, Union

import numpy as np
from scipy.linalg import solve_banded

from soap_bridge.diagnostics import Diagnostics, compute_diagnostics, norm_proxy
from soap_bridge.elliptic import SolverConfig
from soap_bridge.exceptions import DegenerateCoefficients, InvalidArgument, SolverFailure
from soap_bridge.force import ForceProfile, evaluate_rhs
from soap_bridge.mesh import FilmProfile, RectMesh
from soap_bridge.utils import log

TIME_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class Params:
    sigma: float
    lam: float
    mesh: RectMesh
    solver: SolverConfig = field(default_factory=SolverConfig)

    @staticmethod
    def create(
        sigma: float, lam: float, n_z: int, n_r: int, solver: Optional[SolverConfig] = None
    ) -> "Params":
        if not sigma > 0:
            raise InvalidArgument(f"sigma must be positive, got {sigma}")
        if lam < 0:
            raise InvalidArgument(f"lambda must be non-negative, got {lam}")
        return Params(float(sigma), float(lam), RectMesh.create(n_z, n_r), solver or SolverConfig())


@dataclass(frozen=True)
class StepperConfig:
    dt_init: float = 1e-4
    dt_min: float = 1e-10
    dt_max: float = 1e-2
    pinch_eps: float = 0.02
    touch_eps: float = 0.02
    kappa: float = 0.01
    q: float = 4.0
    adapt_factor: float = 1.5
    max_change_per_step: float = 0.01

    @staticmethod
    def create(**kwargs) -> "StepperConfig":
        cfg = StepperConfig(**kwargs)
        if not 0 < cfg.dt_min <= cfg.dt_init <= cfg.dt_max:
            raise InvalidArgument("step bounds must satisfy 0 < dt_min <= dt_init <= dt_max")
        for name in ("pinch_eps", "touch_eps"):
            if not 0 < getattr(cfg, name) < 0.5:
                raise InvalidArgument(f"{name} must lie in (0, 0.5)")
        if not cfg.kappa > 0:
            raise InvalidArgument("kappa must be positive")
        if cfg.q < 1:
            raise InvalidArgument("norm exponent q must be >= 1")
        if cfg.adapt_factor < 1:
            raise InvalidArgument("adapt_factor must be >= 1")
        if not 0 < cfg.max_change_per_step < min(cfg.pinch_eps, cfg.touch_eps):
            raise InvalidArgument("max_change_per_step must lie in (0, min(pinch_eps, touch_eps))")
        return cfg

    @property
    def norm_cap(self) -> float:
        return 1.0 / self.kappa


@dataclass(frozen=True, eq=False)
class SimState:
    t: float
    u: FilmProfile
    dt: float
    last_dt: float = 0.0
    step_count: int = 0
    diagnostics: Optional[Diagnostics] = None
    last_rate: Optional[np.ndarray] = field(default=None, repr=False)

    @staticmethod
    def initial(u0: FilmProfile, dt: float) -> "SimState":
        return SimState(0.0, u0, dt)

    def with_diagnostics(self, diagnostics: Diagnostics) -> "SimState":
        return SimState(
            self.t, self.u, self.dt, self.last_dt, self.step_count, diagnostics, self.last_rate
        )


@dataclass(frozen=True)
class Completed:
    t: float
    tag = "Completed"

    @property
    def detail(self) -> str:
        return f"reached T_end={self.t:.6g}"


@dataclass(frozen=True)
class PinchOff:
    t: float
    z_loc: float
    tag = "PinchOff"

    @property
    def detail(self) -> str:
        return f"film pinched off at z={self.z_loc:.6g}"


@dataclass(frozen=True)
class TouchedCylinder:
    t: float
    z_loc: float
    tag = "TouchedCylinder"

    @property
    def detail(self) -> str:
        return f"film touched the cylinder at z={self.z_loc:.6g}"


@dataclass(frozen=True)
class NormBlowup:
    t: float
    norm_value: float
    tag = "NormBlowup"

    @property
    def detail(self) -> str:
        return f"norm proxy reached {self.norm_value:.6g}"


@dataclass(frozen=True)
class SolverBreakdown:
    t: float
    message: str
    tag = "SolverFailure"

    @property
    def detail(self) -> str:
        return self.message


RunOutcome = Union[Completed, PinchOff, TouchedCylinder, NormBlowup, SolverBreakdown]


@dataclass(frozen=True, eq=False)
class TridiagonalOperator:
    """B(v) as three diagonals; boundary rows are the identity."""

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    def matvec(self, w: np.ndarray) -> np.ndarray:
        out = self.diag * w
        out[1:] += self.lower[1:] * w[:-1]
        out[:-1] += self.upper[:-1] * w[1:]
        return out

    def shifted_banded(self, dt: float) -> np.ndarray:
        """Banded storage of I + dt B with the identity kept on the Dirichlet rows."""
        ab = np.zeros((3, self.diag.size))
        ab[0, 1:] = dt * self.upper[:-1]
        ab[1] = 1.0 + dt * self.diag
        ab[2, :-1] = dt * self.lower[1:]
        ab[1, 0] = ab[1, -1] = 1.0
        return ab


def diffusion_coefficient(v: FilmProfile, sigma: float) -> np.ndarray:
    return sigma**2 / (1.0 + sigma**2 * v.u_z**2)


def assemble_B(v: FilmProfile, sigma: float) -> TridiagonalOperator:
    h2 = v.grid.h_z**2
    coef = diffusion_coefficient(v, sigma)
    lower = -coef / h2
    diag = 2.0 * coef / h2
    upper = -coef / h2
    lower[0] = upper[0] = lower[-1] = upper[-1] = 0.0
    diag[0] = diag[-1] = 1.0
    return TridiagonalOperator(lower, diag, upper)


def pde_rate(v: FilmProfile, force: ForceProfile, sigma: float) -> np.ndarray:
    """du/dt = G(v) - B(v) v, zero at the clamped ends."""
    coef = diffusion_coefficient(v, sigma)
    u = v.u
    rate = np.zeros_like(u)
    second = ((u[2:] + u[:-2]) - 2.0 * u[1:-1]) / v.grid.h_z**2
    rate[1:-1] = force.rhs[1:-1] + coef[1:-1] * second
    return rate


def step(
    s: SimState,
    p: Params,
    cfg: StepperConfig,
    force: Optional[ForceProfile] = None,
    max_dt: float = np.inf,
) -> SimState:
    if force is None:
        force, _ = evaluate_rhs(s.u, p.sigma, p.lam, p.mesh, p.solver)
    u = s.u.u
    B = assemble_B(s.u, p.sigma)
    dt = min(s.dt, max_dt)
    while True:
        rhs = u + dt * force.rhs
        rhs[0] = rhs[-1] = 0.0
        u_new = solve_banded((1, 1), B.shifted_banded(dt), rhs)
        change = float(np.max(np.abs(u_new - u)))
        inside = bool(np.all(np.abs(u_new) < 1.0))
        if inside and change <= cfg.max_change_per_step:
            break
        dt *= 0.5
        reason = f"change {change:.3e} too large" if inside else "update leaves (-1, 1)"
        log(DEBUG, f"t={s.t:.6g}: {reason}, halving dt to {dt:.3e}")
        if dt < cfg.dt_min:
            log(WARNING, f"t={s.t:.6g}: time step fell below dt_min={cfg.dt_min:.1e}")
            raise SolverFailure(
                f"time step underflow at t={s.t:.6g} (dt < {cfg.dt_min:.1e}, last change "
                f"{change:.3e})",
                s.step_count,
                change,
            )
    next_dt = min(dt * cfg.adapt_factor, cfg.dt_max)
    u_next = s.u.with_values(u_new)
    return SimState(
        s.t + dt, u_next, next_dt, dt, s.step_count + 1, None, (u_next.u - u) / dt
    )


def classify(s: SimState, cfg: StepperConfig) -> Optional[RunOutcome]:
    u = s.u.u
    z = s.u.grid.z
    if float((u + 1.0).min()) < cfg.pinch_eps:
        return PinchOff(s.t, float(z[int(np.argmin(u))]))
    if float(u.max()) > 1.0 - cfg.touch_eps:
        return TouchedCylinder(s.t, float(z[int(np.argmax(u))]))
    norm = norm_proxy(s.u, cfg.q)
    if norm > cfg.norm_cap:
        return NormBlowup(s.t, norm)
    return None


def _degenerate_outcome(s: SimState, err: DegenerateCoefficients) -> RunOutcome:
    z_loc = float(s.u.grid.z[err.node])
    if err.side == "pinch":
        return PinchOff(s.t, z_loc)
    return TouchedCylinder(s.t, z_loc)


@dataclass(frozen=True)
class RunResult:
    samples: list[Diagnostics]
    outcome: RunOutcome
    final: SimState
    max_dE_dt: float

    @property
    def steps(self) -> int:
        return self.final.step_count


def run(
    p: Params,
    u0: FilmProfile,
    cfg: StepperConfig,
    T_end: float,
    sample_interval: Optional[float] = None,
    observer: Optional[Callable[[SimState], None]] = None,
) -> RunResult:
    """Steps from u0 until T_end or a terminal outcome.

    Diagnostics are recorded at t = 0, at the first state past each sample time and at
    the terminal state. ``observer`` sees every accepted state before it is stepped.
    """
    if not T_end > 0:
        raise InvalidArgument(f"T_end must be positive, got {T_end}")
    interval = sample_interval if sample_interval and sample_interval > 0 else T_end
    s = SimState.initial(u0, cfg.dt_init)
    samples: list[Diagnostics] = []
    next_sample = 0.0
    max_rate = -np.inf
    log(INFO, f"run: sigma={p.sigma:.6g} lambda={p.lam:.6g} mesh {p.mesh.n_z}x{p.mesh.n_r}")
    while True:
        outcome = classify(s, cfg)
        force: Optional[ForceProfile] = None
        if outcome is None:
            try:
                force, _ = evaluate_rhs(s.u, p.sigma, p.lam, p.mesh, p.solver)
            except DegenerateCoefficients as e:
                log(WARNING, e.message)
                outcome = _degenerate_outcome(s, e)
            except SolverFailure as e:
                log(WARNING, e.message)
                outcome = SolverBreakdown(s.t, e.message)
        rate = pde_rate(s.u, force, p.sigma) if force is not None else s.last_rate
        s = s.with_diagnostics(compute_diagnostics(s.t, s.u, rate, cfg.q))
        assert s.diagnostics is not None
        if rate is not None:
            max_rate = max(max_rate, s.diagnostics.dE_dt)
        if outcome is None and s.t >= T_end - TIME_EPS * max(1.0, T_end):
            outcome = Completed(s.t)
        sampled = outcome is not None or s.t >= next_sample - TIME_EPS
        if sampled:
            samples.append(s.diagnostics)
            while next_sample <= s.t + TIME_EPS:
                next_sample += interval
        if outcome is not None:
            break
        if observer is not None:
            observer(s)
        try:
            s = step(s, p, cfg, force, T_end - s.t)
        except SolverFailure as e:
            outcome = SolverBreakdown(s.t, e.message)
            if not sampled:
                samples.append(s.diagnostics)
            break
    log(INFO, f"run finished: {outcome.tag} at t={outcome.t:.6g} after {s.step_count} steps")
    return RunResult(samples, outcome, s, float(max_rate))
