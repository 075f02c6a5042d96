"""Transformed potential problem on the reference rectangle.

The potential between film and cylinder is pulled back by T_v to the fixed rectangle
(-1,1) x (1,2), where it solves L_v phi = 0 with phi = ln(r)/ln(2) on the boundary.
L_v is discretized in non-divergence form with second-order central differences
(four-point cross stencil for the mixed derivative) on the tensor mesh.
"""

from dataclasses import dataclass
from logging import DEBUG
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, bicgstab, spilu, splu

from soap_bridge.exceptions import DegenerateCoefficients, InvalidArgument, SolverFailure
from soap_bridge.mesh import FilmProfile, RectMesh, physical_radii
from soap_bridge.utils import log, write_csv

DEGENERACY_EPS = 1e-3
MAX_PRINCIPLE_TOL = 1e-8
LN2 = float(np.log(2.0))

Solution = tuple[np.ndarray, float, int]


@dataclass(frozen=True)
class SolverConfig:
    method: str = "direct"
    tol: float = 1e-10
    maxiter: int = 2000
    ilu_drop_tol: float = 1e-6
    ilu_fill_factor: float = 20.0

    @staticmethod
    def create(method: str = "direct", tol: float = 1e-10, maxiter: int = 2000) -> "SolverConfig":
        if method not in ("direct", "bicgstab"):
            raise InvalidArgument(f"unknown linear solver '{method}'")
        if not tol > 0:
            raise InvalidArgument("solver tolerance must be positive")
        return SolverConfig(method, tol, maxiter)


def check_nondegenerate(v: FilmProfile) -> None:
    """Raises when the film comes within DEGENERACY_EPS of the axis or the cylinder."""
    touch = np.flatnonzero(1.0 - v.u < DEGENERACY_EPS)
    if touch.size:
        node = int(touch[np.argmax(v.u[touch])])
        raise DegenerateCoefficients(
            f"film touches the cylinder at node {node} (z={v.grid.z[node]:.6g}, "
            f"u={v.u[node]:.6g})",
            node,
            float(v.u[node]),
            "touch",
        )
    pinch = np.flatnonzero(v.u + 1.0 < DEGENERACY_EPS)
    if pinch.size:
        node = int(pinch[np.argmin(v.u[pinch])])
        raise DegenerateCoefficients(
            f"film pinches off at node {node} (z={v.grid.z[node]:.6g}, u={v.u[node]:.6g})",
            node,
            float(v.u[node]),
            "pinch",
        )


@dataclass(frozen=True, eq=False)
class CoefficientField:
    mesh: RectMesh
    sigma: float
    c_zz: np.ndarray
    c_zr: np.ndarray
    c_rr: np.ndarray
    c_r: np.ndarray
    a11: np.ndarray
    a12: np.ndarray
    a22: np.ndarray
    d2: np.ndarray

    @staticmethod
    def create(
        mesh: RectMesh, sigma: float, v: np.ndarray, v_z: np.ndarray, v_zz: np.ndarray
    ) -> "CoefficientField":
        s2 = sigma**2
        V = np.asarray(v, dtype=float)[:, None]
        Vz = np.asarray(v_z, dtype=float)[:, None]
        Vzz = np.asarray(v_zz, dtype=float)[:, None]
        R = mesh.r[None, :]
        w = 2.0 - R
        one_minus = 1.0 - V
        a11 = np.broadcast_to(s2 * one_minus, mesh.shape).copy()
        a12 = -s2 * Vz * w
        a22 = (1.0 + s2 * Vz**2 * w**2) / one_minus
        d2 = np.broadcast_to(1.0 / (R + V * w), mesh.shape).copy()
        c_r = -s2 * w * (Vzz + 2.0 * Vz**2 / one_minus) + d2
        return CoefficientField(mesh, sigma, a11, 2.0 * a12, a22, c_r, a11, a12, a22, d2)

    def without_drift(self) -> "CoefficientField":
        return CoefficientField(
            self.mesh,
            self.sigma,
            self.c_zz,
            self.c_zr,
            self.c_rr,
            self.c_r - self.d2,
            self.a11,
            self.a12,
            self.a22,
            np.zeros_like(self.d2),
        )

    @property
    def det(self) -> np.ndarray:
        return self.a11 * self.a22 - self.a12**2


@dataclass(frozen=True)
class EllipticityReport:
    alpha_min: float
    alpha_max: float
    det_residual: float
    argmin: tuple[int, int]

    @property
    def is_elliptic(self) -> bool:
        return self.alpha_min > 0.0


@dataclass(frozen=True, eq=False)
class PotentialField:
    mesh: RectMesh
    phi: np.ndarray
    residual: float = 0.0
    iterations: int = 0

    def within_bounds(self, tol: float = MAX_PRINCIPLE_TOL) -> bool:
        return bool(self.phi.min() >= -tol and self.phi.max() <= 1.0 + tol)

    def write_csv(self, path: Path) -> Path:
        Z, R = self.mesh.coordinates()
        rows = zip(Z.ravel(), R.ravel(), self.phi.ravel())
        return write_csv(path, ["z", "r", "phi"], rows)

    def write_physical_csv(self, path: Path, v: FilmProfile) -> Path:
        Z, _ = self.mesh.coordinates()
        rows = zip(Z.ravel(), physical_radii(v, self.mesh).ravel(), self.phi.ravel())
        return write_csv(path, ["z", "r_phys", "psi"], rows)


def assemble_coefficients(v: FilmProfile, sigma: float, mesh: RectMesh) -> CoefficientField:
    if not sigma > 0:
        raise InvalidArgument(f"sigma must be positive, got {sigma}")
    if v.grid.n_z != mesh.n_z:
        raise InvalidArgument("profile grid and mesh disagree on n_z")
    check_nondegenerate(v)
    return CoefficientField.create(mesh, sigma, v.u, v.u_z, v.u_zz)


def check_ellipticity(c: CoefficientField) -> EllipticityReport:
    half_trace = 0.5 * (c.a11 + c.a22)
    det = c.det
    spread = np.sqrt((0.5 * (c.a11 - c.a22)) ** 2 + c.a12**2)
    lam_max = half_trace + spread
    # det / lam_max avoids cancellation in half_trace - spread
    lam_min = np.where(lam_max > 0, det / np.where(lam_max > 0, lam_max, 1.0), half_trace - spread)
    flat = int(np.argmin(lam_min))
    argmin = tuple(int(k) for k in np.unravel_index(flat, lam_min.shape))
    return EllipticityReport(
        float(lam_min.min()),
        float(lam_max.max()),
        float(np.max(np.abs(det - c.sigma**2))),
        (argmin[0], argmin[1]),
    )


def operator_matrix(c: CoefficientField) -> sp.csr_matrix:
    """Discrete L_v at interior nodes, identity rows on the boundary."""
    mesh = c.mesh
    n_z, n_r = mesh.shape
    hz, hr = mesh.h_z, mesh.h_r
    I, J = np.meshgrid(np.arange(1, n_z - 1), np.arange(1, n_r - 1), indexing="ij")
    I, J = I.ravel(), J.ravel()
    czz = c.c_zz[I, J]
    czr = c.c_zr[I, J]
    crr = c.c_rr[I, J]
    cr = c.c_r[I, J]
    cross = czr / (4.0 * hz * hr)
    stencil = [
        (0, 0, -2.0 * czz / hz**2 - 2.0 * crr / hr**2),
        (1, 0, czz / hz**2),
        (-1, 0, czz / hz**2),
        (0, 1, crr / hr**2 + cr / (2.0 * hr)),
        (0, -1, crr / hr**2 - cr / (2.0 * hr)),
        (1, 1, cross),
        (-1, -1, cross),
        (1, -1, -cross),
        (-1, 1, -cross),
    ]
    row = mesh.index(I, J)
    rows = [row for _ in stencil]
    cols = [mesh.index(I + di, J + dj) for di, dj, _ in stencil]
    vals = [val for _, _, val in stencil]
    boundary = np.flatnonzero(mesh.boundary_mask().ravel())
    rows.append(boundary)
    cols.append(boundary)
    vals.append(np.ones(boundary.size))
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(mesh.size, mesh.size),
    ).tocsr()


def apply_operator(c: CoefficientField, phi: np.ndarray) -> np.ndarray:
    """(L_v phi) at interior nodes; boundary entries are zero."""
    out = (operator_matrix(c) @ np.asarray(phi, dtype=float).ravel()).reshape(c.mesh.shape)
    out[c.mesh.boundary_mask()] = 0.0
    return out


def _row_scaling(A: sp.csr_matrix) -> sp.dia_matrix:
    return sp.diags(1.0 / np.abs(A.diagonal()))


def _relative_residual(A: sp.spmatrix, x: np.ndarray, b: np.ndarray) -> float:
    b_norm = float(np.linalg.norm(b))
    r_norm = float(np.linalg.norm(A @ x - b))
    return r_norm / b_norm if b_norm > 0 else r_norm


class _IterationCounter:
    def __init__(self):
        self.niter = 0

    def __call__(self, xk=None):
        self.niter += 1


def _solve_direct(A: sp.csr_matrix, b: np.ndarray, cfg: SolverConfig) -> Solution:
    lu = splu(A.tocsc())
    x = lu.solve(b)
    residual = _relative_residual(A, x, b)
    refinements = 0
    while residual > cfg.tol and refinements < 3:
        x = x + lu.solve(b - A @ x)
        residual = _relative_residual(A, x, b)
        refinements += 1
    if residual > cfg.tol:
        raise SolverFailure(
            f"direct solve stalled at relative residual {residual:.3e}", refinements, residual
        )
    return x, residual, refinements


def _solve_bicgstab(A: sp.csr_matrix, b: np.ndarray, cfg: SolverConfig) -> Solution:
    ilu = spilu(A.tocsc(), drop_tol=cfg.ilu_drop_tol, fill_factor=cfg.ilu_fill_factor)
    M = LinearOperator(A.shape, ilu.solve)
    counter = _IterationCounter()
    x, info = bicgstab(A, b, rtol=cfg.tol, atol=0.0, maxiter=cfg.maxiter, M=M, callback=counter)
    residual = _relative_residual(A, x, b)
    if info != 0 or residual > cfg.tol:
        raise SolverFailure(
            f"BiCGStab did not converge after {counter.niter} iterations "
            f"(relative residual {residual:.3e})",
            counter.niter,
            residual,
        )
    return x, residual, counter.niter


def solve_dirichlet(
    c: CoefficientField,
    interior_rhs: np.ndarray,
    boundary_values: np.ndarray,
    solver_cfg: Optional[SolverConfig] = None,
) -> PotentialField:
    """Solves L phi = interior_rhs with phi = boundary_values on the boundary.

    The residual contract is measured on the row-equilibrated system.
    """
    cfg = solver_cfg or SolverConfig()
    mesh = c.mesh
    mask = mesh.boundary_mask()
    b = np.where(mask, boundary_values, interior_rhs).ravel().astype(float)
    A = operator_matrix(c)
    D = _row_scaling(A)
    As, bs = (D @ A).tocsr(), D @ b
    if cfg.method == "bicgstab":
        x, residual, iterations = _solve_bicgstab(As, bs, cfg)
    else:
        x, residual, iterations = _solve_direct(As, bs, cfg)
    phi = x.reshape(mesh.shape)
    phi[mask] = boundary_values[mask]
    log(
        DEBUG,
        f"elliptic solve {mesh.n_z}x{mesh.n_r} ({cfg.method}): residual {residual:.2e}, "
        f"{iterations} iterations",
    )
    return PotentialField(mesh, phi, residual, iterations)


def reference_boundary_data(mesh: RectMesh) -> np.ndarray:
    _, R = mesh.coordinates()
    return np.log(R) / LN2


def boundary_data_physical(v_value: np.ndarray, r: np.ndarray) -> np.ndarray:
    """h_u(z, r) = ln(r / (u+1)) / ln(2 / (u+1)), the far-field cylindrical potential."""
    film = np.asarray(v_value) + 1.0
    return np.log(np.asarray(r) / film) / np.log(2.0 / film)


def solve_potential(
    v: FilmProfile, sigma: float, mesh: RectMesh, solver_cfg: Optional[SolverConfig] = None
) -> PotentialField:
    c = assemble_coefficients(v, sigma, mesh)
    return solve_dirichlet(c, np.zeros(mesh.shape), reference_boundary_data(mesh), solver_cfg)


def solve_with_source(
    c: CoefficientField, F: np.ndarray, mesh: RectMesh, solver_cfg: Optional[SolverConfig] = None
) -> PotentialField:
    """Solves -L phi = F with zero Dirichlet data."""
    F = np.asarray(F, dtype=float)
    if F.shape != mesh.shape:
        raise InvalidArgument(f"source needs shape {mesh.shape}, got {F.shape}")
    if not np.all(np.isfinite(F[~mesh.boundary_mask()])):
        raise InvalidArgument("source is not finite at every interior node")
    return solve_dirichlet(c, -F, np.zeros(mesh.shape), solver_cfg)


def trace_dr_at_film(field: PotentialField) -> np.ndarray:
    """One-sided second-order d(phi)/dr at r = 1 for every z-node."""
    phi = field.phi
    return (-3.0 * phi[:, 0] + 4.0 * phi[:, 1] - phi[:, 2]) / (2.0 * field.mesh.h_r)
