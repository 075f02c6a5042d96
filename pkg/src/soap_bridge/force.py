from dataclasses import dataclass
from typing import Optional

import numpy as np

from soap_bridge.elliptic import (
    DEGENERACY_EPS,
    PotentialField,
    SolverConfig,
    check_nondegenerate,
    solve_potential,
    trace_dr_at_film,
)
from soap_bridge.exceptions import DegenerateCoefficients, InvalidArgument
from soap_bridge.mesh import FilmProfile, Grid1D, RectMesh


@dataclass(frozen=True, eq=False)
class ForceProfile:
    grid: Grid1D
    g: np.ndarray
    rhs: Optional[np.ndarray] = None
    lam: float = 0.0

    def with_rhs(self, rhs: np.ndarray, lam: float) -> "ForceProfile":
        return ForceProfile(self.grid, self.g, rhs, lam)


def electrostatic_force(v: FilmProfile, phi: PotentialField, sigma: float) -> ForceProfile:
    """g = (1 + sigma^2 v_z^2)^(3/2) |d_r phi(., 1)|^2 / (1 - v)^2."""
    check_nondegenerate(v)
    trace = trace_dr_at_film(phi)
    slope = 1.0 + sigma**2 * v.u_z**2
    g = slope**1.5 * trace**2 / (1.0 - v.u) ** 2
    return ForceProfile(v.grid, g)


def full_rhs(v: FilmProfile, force: ForceProfile, lam: float) -> ForceProfile:
    if lam < 0:
        raise InvalidArgument(f"lambda must be non-negative, got {lam}")
    film = v.u + 1.0
    pinch = np.flatnonzero(film < DEGENERACY_EPS)
    if pinch.size:
        node = int(pinch[np.argmin(film[pinch])])
        raise DegenerateCoefficients(
            f"film pinches off at node {node} (u={v.u[node]:.6g})", node, float(v.u[node]), "pinch"
        )
    return force.with_rhs(-1.0 / film + lam * force.g, lam)


def evaluate_rhs(
    v: FilmProfile,
    sigma: float,
    lam: float,
    mesh: RectMesh,
    solver_cfg: Optional[SolverConfig] = None,
) -> tuple[ForceProfile, Optional[PotentialField]]:
    """G(v) together with the potential it was computed from; lambda = 0 skips the solve."""
    if lam == 0.0:
        return full_rhs(v, ForceProfile(v.grid, np.zeros(v.grid.n_z)), 0.0), None
    phi = solve_potential(v, sigma, mesh, solver_cfg)
    return full_rhs(v, electrostatic_force(v, phi, sigma), lam), phi
