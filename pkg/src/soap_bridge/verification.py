"""Manufactured solutions and convergence studies.

Sources are built from exact symbolic derivatives of the manufactured field, combined with
the assembled coefficients, so the measured error is the discretization error of the solver
alone.
"""

from dataclasses import dataclass, field
from logging import INFO
from typing import Callable, Optional, Sequence

import numpy as np
import sympy
from scipy.integrate import quad

from soap_bridge.catenoid import eval_catenoid, stationary_residual
from soap_bridge.diagnostics import energy
from soap_bridge.elliptic import (
    CoefficientField,
    PotentialField,
    SolverConfig,
    assemble_coefficients,
    reference_boundary_data,
    solve_potential,
    solve_with_source,
    trace_dr_at_film,
)
from soap_bridge.exceptions import InvalidArgument
from soap_bridge.mesh import FilmProfile, Grid1D, RectMesh, build_grid1d
from soap_bridge.utils import log, write_csv

Z, R = sympy.symbols("z r", real=True)
CONVERGENCE_HEADER = ["case", "h", "error", "order"]


@dataclass(frozen=True, eq=False)
class MMSCase:
    name: str
    phi_expr: sympy.Expr
    v_expr: sympy.Expr
    sigma: float
    drift: bool = True
    _fns: dict[str, Callable] = field(default_factory=dict, repr=False)

    @staticmethod
    def create(
        name: str, phi_expr: sympy.Expr, v_expr: sympy.Expr, sigma: float, drift: bool = True
    ) -> "MMSCase":
        derivatives = {
            "phi": phi_expr,
            "phi_z": sympy.diff(phi_expr, Z),
            "phi_r": sympy.diff(phi_expr, R),
            "phi_zz": sympy.diff(phi_expr, Z, 2),
            "phi_zr": sympy.diff(phi_expr, Z, R),
            "phi_rr": sympy.diff(phi_expr, R, 2),
        }
        fns = {k: sympy.lambdify((Z, R), expr, "numpy") for k, expr in derivatives.items()}
        fns["v"] = sympy.lambdify(Z, v_expr, "numpy")
        return MMSCase(name, phi_expr, v_expr, float(sigma), drift, fns)

    def _eval(self, key: str, mesh: RectMesh) -> np.ndarray:
        Zg, Rg = mesh.coordinates()
        return np.broadcast_to(self._fns[key](Zg, Rg), mesh.shape).astype(float)

    def exact(self, mesh: RectMesh) -> np.ndarray:
        return self._eval("phi", mesh)

    def profile(self, grid: Grid1D) -> FilmProfile:
        values = np.broadcast_to(self._fns["v"](grid.z), grid.z.shape).astype(float)
        return FilmProfile.create(grid, values)

    def coefficients(self, mesh: RectMesh) -> CoefficientField:
        c = assemble_coefficients(self.profile(mesh.grid), self.sigma, mesh)
        return c if self.drift else c.without_drift()


def mms_source(case: MMSCase, mesh: RectMesh) -> np.ndarray:
    """F = -(L_v phi*) from the assembled coefficients and exact derivatives of phi*."""
    c = case.coefficients(mesh)
    L = (
        c.c_zz * case._eval("phi_zz", mesh)
        + c.c_zr * case._eval("phi_zr", mesh)
        + c.c_rr * case._eval("phi_rr", mesh)
        + c.c_r * case._eval("phi_r", mesh)
    )
    return -L


def mms_error(
    case: MMSCase, n: int, solver_cfg: Optional[SolverConfig] = None
) -> tuple[float, float]:
    mesh = RectMesh.create(n, n)
    field_h = solve_with_source(case.coefficients(mesh), mms_source(case, mesh), mesh, solver_cfg)
    return mesh.h_r, float(np.max(np.abs(field_h.phi - case.exact(mesh))))


def bubble_case(v_expr: sympy.Expr = sympy.Integer(0), sigma: float = 1.0) -> MMSCase:
    # every stencil is exact on this field, so it checks sources rather than convergence
    return MMSCase.create("bubble", (1 - Z**2) * (R - 1) * (2 - R), v_expr, sigma)


def standard_cases() -> list[MMSCase]:
    waves = sympy.sin(sympy.pi * (Z + 1) / 2) * sympy.sin(sympy.pi * (R - 1))
    bump = (1 - Z**2) * sympy.exp(Z / 2) * sympy.sin(sympy.pi * (R - 1))
    cosine = sympy.Rational(1, 5) * sympy.cos(sympy.pi * Z / 2)
    bulge = sympy.Rational(3, 10) * (1 - Z**2)
    return [
        MMSCase.create("waves-laplace", waves, sympy.Integer(0), 1.0, drift=False),
        MMSCase.create("waves-drift", waves, sympy.Integer(0), 2.0),
        MMSCase.create("bump-cosine", bump, cosine, 1.0),
        MMSCase.create("waves-bulge", waves, bulge, 1.5),
    ]


@dataclass(frozen=True)
class ConvergenceRecord:
    case: str
    h: float
    error: float
    order: Optional[float]

    def to_row(self) -> list:
        return [self.case, self.h, self.error, self.order]


@dataclass(frozen=True)
class ConvergenceStudy:
    records: list[ConvergenceRecord]
    observed_orders: dict[str, float]

    def write_csv(self, path) -> None:
        write_csv(path, CONVERGENCE_HEADER, (r.to_row() for r in self.records))

    def failures(self, min_order: float) -> dict[str, float]:
        return {k: v for k, v in self.observed_orders.items() if not v >= min_order}


def observed_order(hs: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(h)."""
    slope, _ = np.polyfit(np.log(hs), np.log(errors), 1)
    return float(slope)


def _check_nested(resolutions: Sequence[int]) -> None:
    if len(resolutions) < 3:
        raise InvalidArgument("a convergence study needs at least three resolutions")
    for coarse, fine in zip(resolutions, resolutions[1:]):
        if fine - 1 != 2 * (coarse - 1):
            raise InvalidArgument(f"resolutions {coarse} and {fine} are not nested")


def convergence_study(
    solve_op: Callable[[object, int], tuple[float, float]],
    cases: Sequence,
    resolutions: Sequence[int],
    names: Optional[Sequence[str]] = None,
) -> ConvergenceStudy:
    """Runs ``solve_op(case, n) -> (h, error)`` for every case and resolution."""
    _check_nested(resolutions)
    records: list[ConvergenceRecord] = []
    orders: dict[str, float] = {}
    for k, case in enumerate(cases):
        name = names[k] if names else getattr(case, "name", str(k))
        hs, errors = [], []
        for n in resolutions:
            h, err = solve_op(case, n)
            order = (
                float(np.log(errors[-1] / err) / np.log(hs[-1] / h))
                if errors and err > 0 and errors[-1] > 0
                else None
            )
            hs.append(h)
            errors.append(err)
            records.append(ConvergenceRecord(name, h, err, order))
        positive = [(h, e) for h, e in zip(hs, errors) if e > 0]
        orders[name] = observed_order(*zip(*positive)) if len(positive) >= 2 else float("inf")
        log(INFO, f"{name}: observed order {orders[name]:.3f}")
    return ConvergenceStudy(records, orders)


def energy_oracle(c: float) -> float:
    value, _ = quad(lambda z: -np.log(np.cosh(c * z) / np.cosh(c)), -1.0, 1.0, epsabs=1e-14)
    return float(value)


def _energy_error(c: float, n: int) -> tuple[float, float]:
    grid = build_grid1d(n)
    return grid.h_z, abs(energy(eval_catenoid(c, grid)) - energy_oracle(c))


def _stationarity_error(c: float, n: int) -> tuple[float, float]:
    grid = build_grid1d(n)
    sigma = float(np.cosh(c) / c)
    return grid.h_z, float(np.max(np.abs(stationary_residual(eval_catenoid(c, grid), sigma))))


def _potential_error(
    sigma: float, n: int, solver_cfg: Optional[SolverConfig] = None
) -> tuple[float, float]:
    mesh = RectMesh.create(n, n)
    phi = solve_potential(FilmProfile.zero(mesh.grid), sigma, mesh, solver_cfg)
    return mesh.h_r, float(np.max(np.abs(phi.phi - reference_boundary_data(mesh))))


def _quadratic_trace_error(_: object, n: int) -> tuple[float, float]:
    mesh = RectMesh.create(n, n)
    _, Rg = mesh.coordinates()
    trace = trace_dr_at_film(PotentialField(mesh, Rg**2))
    return mesh.h_r, float(np.max(np.abs(trace - 2.0)))


@dataclass(frozen=True)
class SuiteResult:
    study: ConvergenceStudy
    contracts: dict[str, float]
    exact: dict[str, float]

    @property
    def failures(self) -> list[str]:
        fails = [
            f"{name}: order {self.study.observed_orders[name]:.3f} < {need}"
            for name, need in self.contracts.items()
            if not self.study.observed_orders[name] >= need
        ]
        fails.extend(
            f"{name}: error {err:.3e} is not exact"
            for name, err in self.exact.items()
            if err > 1e-12
        )
        return fails


def run_suite(
    resolutions: Sequence[int] = (33, 65, 129), solver_cfg: Optional[SolverConfig] = None
) -> SuiteResult:
    cases = standard_cases()
    mms = convergence_study(lambda case, n: mms_error(case, n, solver_cfg), cases, resolutions)
    extra = convergence_study(
        lambda c, n: _energy_error(c, n), [1.0], resolutions, names=["energy-catenoid"]
    )
    stationary = convergence_study(
        lambda c, n: _stationarity_error(c, n), [1.0], resolutions, names=["catenoid-stationary"]
    )
    potential = convergence_study(
        lambda s, n: _potential_error(s, n, solver_cfg), [1.0], resolutions, names=["log-potential"]
    )
    trace = [_quadratic_trace_error(None, n)[1] for n in resolutions]
    parts = [mms, extra, stationary, potential]
    study = ConvergenceStudy(
        [record for part in parts for record in part.records],
        {name: order for part in parts for name, order in part.observed_orders.items()},
    )
    contracts = {case.name: 1.9 for case in cases}
    contracts.update({"energy-catenoid": 1.9, "catenoid-stationary": 1.8, "log-potential": 1.8})
    return SuiteResult(study, contracts, {"trace-quadratic": max(trace)})
