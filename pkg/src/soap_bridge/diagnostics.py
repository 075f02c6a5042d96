"""Energy, flux balance and the constants behind the critical voltage.

E(u) = -int ln(u+1) dz is bounded below by -2 ln 2 and decreases at a rate of at least
C17 once lambda exceeds lambda_crit, which bounds the lifetime of a supercritical run.
All quadratures are composite trapezoid rules on the film grid.
"""

from dataclasses import asdict, dataclass, field
from typing import Any, Optional

import numpy as np
from scipy.integrate import trapezoid

from soap_bridge.catenoid import Catenoid, catenoid_for
from soap_bridge.elliptic import PotentialField, SolverConfig, solve_potential, trace_dr_at_film
from soap_bridge.exceptions import EnergyDomainError
from soap_bridge.mesh import FilmProfile, RectMesh

ENERGY_FLOOR = -2.0 * float(np.log(2.0))


@dataclass(frozen=True)
class Diagnostics:
    t: float
    E: float
    dE_dt: float
    min_u: float
    max_u: float
    norm_proxy: float
    symmetry_defect: float
    kappa: float
    flux_lhs: Optional[float] = None
    flux_rhs: Optional[float] = None

    def to_row(self) -> list[float]:
        return [
            self.t,
            self.E,
            self.dE_dt,
            self.min_u,
            self.max_u,
            self.norm_proxy,
            self.symmetry_defect,
        ]

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


TIMESERIES_HEADER = ["t", "E", "dE_dt", "min_u", "max_u", "norm_proxy", "symmetry_defect"]


@dataclass(frozen=True)
class FluxBalance:
    lhs: float
    rhs: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)


def _integrate(values: np.ndarray, u: FilmProfile) -> float:
    return float(trapezoid(values, u.grid.z))


def energy(u: FilmProfile) -> float:
    if np.any(u.u <= -1.0):
        raise EnergyDomainError("energy is undefined once the film reaches the axis (u <= -1)")
    return -_integrate(np.log1p(u.u), u)


def energy_rate(u: FilmProfile, du_dt: np.ndarray) -> float:
    if np.any(u.u <= -1.0):
        raise EnergyDomainError("energy rate is undefined once the film reaches the axis")
    return -_integrate(np.asarray(du_dt) / (u.u + 1.0), u)


def symmetry_defect(u: FilmProfile) -> float:
    return float(np.max(np.abs(u.u - u.grid.mirror(u.u))))


def norm_proxy(u: FilmProfile, q: float = 4.0) -> float:
    """max|u| + max|u_z| + (sum |u_zz|^q h)^(1/q), a discrete stand-in for the W^2_q norm."""
    curvature = (np.sum(np.abs(u.u_zz) ** q) * u.grid.h_z) ** (1.0 / q)
    return float(np.max(np.abs(u.u)) + np.max(np.abs(u.u_z)) + curvature)


def admissibility_kappa(u: FilmProfile, q: float = 4.0) -> float:
    norm = norm_proxy(u, q)
    inv_norm = 1.0 / norm if norm > 0 else np.inf
    return float(min(1.0 + u.u.min(), 1.0 - u.u.max(), inv_norm))


def barrier_gap(u: FilmProfile, u_cat: FilmProfile) -> float:
    return float(np.min(u.u - u_cat.u))


def compute_diagnostics(
    t: float, u: FilmProfile, du_dt: Optional[np.ndarray], q: float = 4.0
) -> Diagnostics:
    """Energy terms are NaN for a terminal state that has already reached the axis."""
    reached_axis = bool(np.any(u.u <= -1.0))
    E = float("nan") if reached_axis else energy(u)
    rate = float("nan") if reached_axis or du_dt is None else energy_rate(u, du_dt)
    return Diagnostics(
        t=float(t),
        E=E,
        dE_dt=rate,
        min_u=float(u.u.min()),
        max_u=float(u.u.max()),
        norm_proxy=norm_proxy(u, q),
        symmetry_defect=symmetry_defect(u),
        kappa=admissibility_kappa(u, q),
    )


def _side_flux(phi: np.ndarray, mesh: RectMesh, v_z: float, side: int) -> float:
    # v = 0 at z = +-1, so physical and reference radii agree on the sides
    hz = mesh.h_z
    if side < 0:
        phi_z = (-3.0 * phi[0] + 4.0 * phi[1] - phi[2]) / (2.0 * hz)
        row = phi[0]
    else:
        phi_z = (3.0 * phi[-1] - 4.0 * phi[-2] + phi[-3]) / (2.0 * hz)
        row = phi[-1]
    phi_r = np.gradient(row, mesh.r, edge_order=2)
    psi_z = phi_z + phi_r * v_z * (mesh.r - 2.0)
    return float(side * trapezoid(mesh.r * psi_z, mesh.r))


def flux_identity(u: FilmProfile, phi: PotentialField, sigma: float) -> FluxBalance:
    """Gauss balance for the physical potential: flux through the film equals the flux
    leaving through the two ring sides and the outer cylinder."""
    mesh = phi.mesh
    trace = trace_dr_at_film(phi)
    slope = 1.0 + (sigma * u.u_z) ** 2
    lhs = _integrate((u.u + 1.0) * slope * trace / (1.0 - u.u), u)
    values = phi.phi
    hr = mesh.h_r
    top_dr = (3.0 * values[:, -1] - 4.0 * values[:, -2] + values[:, -3]) / (2.0 * hr)
    top = _integrate(2.0 * top_dr / (1.0 - u.u), u)
    sides = sigma**2 * (
        _side_flux(values, mesh, float(u.u_z[0]), -1)
        + _side_flux(values, mesh, float(u.u_z[-1]), 1)
    )
    return FluxBalance(lhs, top + sides)


def arctan_lower_bound_check(u: FilmProfile, sigma: float) -> tuple[float, float]:
    slope = sigma * u.u_z
    lhs = _integrate(np.arctan(slope) * slope, u)
    rhs = 0.25 * np.pi * _integrate(np.sqrt(1.0 + slope**2), u) - np.pi
    return lhs, float(rhs)


def force_lower_bound_check(
    u: FilmProfile, phi: PotentialField, sigma: float, c15: float, eps: float
) -> tuple[float, float]:
    """int (1+(sigma u_z)^2)^(3/2) |d_r psi|^2 dz against
    eps C15 - eps^2 int sqrt(1+(sigma u_z)^2) dz."""
    slope = 1.0 + (sigma * u.u_z) ** 2
    dr_psi = trace_dr_at_film(phi) / (1.0 - u.u)
    lhs = _integrate(slope**1.5 * dr_psi**2, u)
    rhs = eps * c15 - eps**2 * _integrate(np.sqrt(slope), u)
    return lhs, float(rhs)


def c15(
    sigma: float,
    n_z: int = 129,
    n_r: int = 129,
    branch: str = "small",
    solver_cfg: Optional[SolverConfig] = None,
) -> float:
    cat = catenoid_for(sigma, branch)
    mesh = RectMesh.create(n_z, n_r)
    u_cat = cat.profile(mesh.grid)
    return flux_identity(u_cat, solve_potential(u_cat, sigma, mesh, solver_cfg), sigma).lhs


@dataclass(frozen=True)
class CriticalData:
    sigma: float
    catenoid: Catenoid
    c15: float
    energy_cat: float
    n_z: int
    n_r: int
    lam: Optional[float] = field(default=None)

    @property
    def c(self) -> float:
        return self.catenoid.c

    @property
    def c16(self) -> float:
        return float(np.cosh(self.catenoid.c))

    @property
    def k_constant(self) -> float:
        return np.pi / 4.0 + self.sigma * np.pi + 2.0 * self.c16**2

    @property
    def lambda_crit(self) -> float:
        return 32.0 * self.k_constant**2 / (np.pi * self.c15**2)

    def c17(self, lam: float) -> float:
        return -self.k_constant + np.sqrt(lam * np.pi) * self.c15 / (4.0 * np.sqrt(2.0))

    def t_max_bound(self, lam: float) -> Optional[float]:
        """Lifetime bound for a run started at or above the catenoid; None below lambda_crit."""
        rate = self.c17(lam)
        if rate <= 0:
            return None
        return (self.energy_cat - ENERGY_FLOOR) / rate

    def energy_envelope(self, t: float, lam: float) -> float:
        return self.energy_cat - t * self.c17(lam)

    def with_lambda(self, lam: float) -> "CriticalData":
        return CriticalData(
            self.sigma, self.catenoid, self.c15, self.energy_cat, self.n_z, self.n_r, lam
        )

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "sigma": self.sigma,
            "branch": self.catenoid.branch,
            "c": self.c,
            "C15": self.c15,
            "C16": self.c16,
            "lambda_crit": self.lambda_crit,
            "energy_cat": self.energy_cat,
            "resolution": [self.n_z, self.n_r],
        }
        if self.lam is not None:
            data["lambda"] = self.lam
            data["C17"] = self.c17(self.lam)
            data["T_max_bound"] = self.t_max_bound(self.lam)
        return data


def lambda_crit(
    sigma: float,
    n_z: int = 129,
    n_r: int = 129,
    branch: str = "small",
    solver_cfg: Optional[SolverConfig] = None,
) -> CriticalData:
    cat = catenoid_for(sigma, branch)
    u_cat = cat.profile(RectMesh.create(n_z, n_r).grid)
    return CriticalData(
        float(sigma), cat, c15(sigma, n_z, n_r, branch, solver_cfg), energy(u_cat), n_z, n_r
    )
