"""Catenoids u_cat(z) = cosh(cz)/cosh(c) - 1, the stationary profiles at zero voltage.

A catenoid spanning the rings exists when sigma = cosh(c)/c has a root c > 0. The map
c -> cosh(c)/c has a single minimum at c*, where c* tanh(c*) = 1, so above that value
there are two roots (a shallow and a deep catenoid), at it a double root, and below it none.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.optimize import bisect

from soap_bridge.exceptions import InvalidArgument, NoCatenoid
from soap_bridge.mesh import FilmProfile, Grid1D

ROOT_XTOL = 1e-13
# threshold cited in the literature for a differently normalized problem
SIGMA_CRIT_LITERATURE = 1.2
BRANCHES = ("small", "large")


@dataclass(frozen=True)
class Catenoid:
    c: float
    sigma: float
    branch: str = "small"

    @staticmethod
    def create(c: float, branch: str = "small") -> "Catenoid":
        if not c > 0:
            raise InvalidArgument(f"catenoid parameter must be positive, got {c}")
        return Catenoid(float(c), float(np.cosh(c) / c), branch)

    @property
    def throat(self) -> float:
        return float(1.0 / np.cosh(self.c))

    @property
    def residual(self) -> float:
        return abs(self.sigma * self.c - float(np.cosh(self.c)))

    def profile(self, grid: Grid1D) -> FilmProfile:
        return eval_catenoid(self.c, grid)


@lru_cache(maxsize=1)
def sigma_min() -> tuple[float, float]:
    """(min of cosh(c)/c over c > 0, argmin c*)."""
    c_star = bisect(lambda c: c * np.tanh(c) - 1.0, 0.5, 2.0, xtol=1e-15)
    return float(np.cosh(c_star) / c_star), float(c_star)


def catenoid_roots(sigma: float) -> Optional[tuple[float, float]]:
    if not sigma > 0:
        raise InvalidArgument(f"sigma must be positive, got {sigma}")
    s_min, c_star = sigma_min()
    if abs(sigma - s_min) <= 1e-12 * s_min:
        return c_star, c_star
    if sigma < s_min:
        return None

    def gap(c: float) -> float:
        return sigma * c - float(np.cosh(c))

    c_small = bisect(gap, 0.5 / sigma, c_star, xtol=ROOT_XTOL)
    hi = 2.0 * c_star
    while gap(hi) >= 0.0:
        hi *= 2.0
    c_large = bisect(gap, c_star, hi, xtol=ROOT_XTOL)
    return float(c_small), float(c_large)


def catenoid_for(sigma: float, branch: str = "small") -> Catenoid:
    if branch not in BRANCHES:
        raise InvalidArgument(f"catenoid branch must be one of {BRANCHES}, got '{branch}'")
    roots = catenoid_roots(sigma)
    if roots is None:
        raise NoCatenoid(sigma, sigma_min()[0])
    c = roots[0] if branch == "small" else roots[1]
    return Catenoid(c, float(sigma), branch)


def eval_catenoid(c: float, grid: Grid1D) -> FilmProfile:
    if not c > 0:
        raise InvalidArgument(f"catenoid parameter must be positive, got {c}")
    return FilmProfile.create(grid, np.cosh(c * grid.z) / np.cosh(c) - 1.0)


def stationary_residual(
    u: FilmProfile, sigma: float, lam: float = 0.0, g: Optional[np.ndarray] = None
) -> np.ndarray:
    """sigma d_z arctan(sigma d_z u) - 1/(u+1) + lam g at interior nodes, via half-node fluxes."""
    h = u.grid.h_z
    flux = np.arctan(sigma * np.diff(u.u) / h)
    res = np.zeros(u.grid.n_z)
    res[1:-1] = sigma * np.diff(flux) / h - 1.0 / (u.u[1:-1] + 1.0)
    if g is not None and lam:
        res[1:-1] += lam * np.asarray(g)[1:-1]
    return res
