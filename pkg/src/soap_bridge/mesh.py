"""Grids for the film interval and the reference rectangle, and the map between the
physical gap Omega(u) = {u(z)+1 < r < 2} and the fixed rectangle (-1,1) x (1,2)."""

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from soap_bridge.exceptions import InvalidArgument

MIN_FILM_NODES = 5
MIN_RADIAL_NODES = 4

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True, eq=False)
class Grid1D:
    n_z: int
    z: np.ndarray
    h_z: float

    @staticmethod
    def create(n_z: int) -> "Grid1D":
        return build_grid1d(n_z)

    @property
    def mid(self) -> int:
        return (self.n_z - 1) // 2

    def mirror(self, values: np.ndarray) -> np.ndarray:
        return values[::-1]


def build_grid1d(n_z: int) -> Grid1D:
    if not isinstance(n_z, (int, np.integer)) or n_z < MIN_FILM_NODES or n_z % 2 == 0:
        raise InvalidArgument(f"n_z must be an odd integer >= {MIN_FILM_NODES}, got {n_z}")
    m = (n_z - 1) // 2
    h_z = 1.0 / m
    # (i - m) * h keeps the nodes exactly antisymmetric about z = 0
    z = (np.arange(n_z) - m) * h_z
    z[0], z[-1] = -1.0, 1.0
    return Grid1D(int(n_z), z, h_z)


@dataclass(frozen=True, eq=False)
class RectMesh:
    grid: Grid1D
    n_r: int
    r: np.ndarray
    h_r: float

    @staticmethod
    def create(n_z: int, n_r: int) -> "RectMesh":
        return build_rect_mesh(build_grid1d(n_z), n_r)

    @property
    def n_z(self) -> int:
        return self.grid.n_z

    @property
    def z(self) -> np.ndarray:
        return self.grid.z

    @property
    def h_z(self) -> float:
        return self.grid.h_z

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_z, self.n_r)

    @property
    def size(self) -> int:
        return self.n_z * self.n_r

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.z, self.r, indexing="ij")

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[0, :] = mask[-1, :] = True
        mask[:, 0] = mask[:, -1] = True
        return mask

    def index(self, i: np.ndarray, j: np.ndarray) -> np.ndarray:
        return i * self.n_r + j


def build_rect_mesh(grid: Grid1D, n_r: int) -> RectMesh:
    if n_r < MIN_RADIAL_NODES:
        raise InvalidArgument(f"n_r must be >= {MIN_RADIAL_NODES}, got {n_r}")
    h_r = 1.0 / (n_r - 1)
    r = 1.0 + np.arange(n_r) * h_r
    r[-1] = 2.0
    return RectMesh(grid, int(n_r), r, h_r)


def _first_difference(u: np.ndarray, h: float) -> np.ndarray:
    d = np.empty_like(u)
    d[1:-1] = (u[2:] - u[:-2]) / (2.0 * h)
    d[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)
    d[-1] = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * h)
    return d


def _second_difference(u: np.ndarray, h: float) -> np.ndarray:
    d = np.empty_like(u)
    # neighbours summed first so mirrored nodes see identical rounding
    d[1:-1] = ((u[2:] + u[:-2]) - 2.0 * u[1:-1]) / h**2
    d[0] = (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / h**2
    d[-1] = (2.0 * u[-1] - 5.0 * u[-2] + 4.0 * u[-3] - u[-4]) / h**2
    return d


@dataclass(frozen=True, eq=False)
class FilmProfile:
    grid: Grid1D
    u: np.ndarray
    u_z: np.ndarray = field(repr=False)
    u_zz: np.ndarray = field(repr=False)

    @staticmethod
    def create(grid: Grid1D, values: np.ndarray) -> "FilmProfile":
        u = np.array(values, dtype=float)
        if u.shape != (grid.n_z,):
            raise InvalidArgument(f"profile needs {grid.n_z} values, got shape {u.shape}")
        if not np.all(np.isfinite(u)):
            raise InvalidArgument("profile contains non-finite values")
        u[0] = u[-1] = 0.0
        u.setflags(write=False)
        return FilmProfile(grid, u, _first_difference(u, grid.h_z), _second_difference(u, grid.h_z))

    @staticmethod
    def zero(grid: Grid1D) -> "FilmProfile":
        return FilmProfile.create(grid, np.zeros(grid.n_z))

    @staticmethod
    def from_function(grid: Grid1D, func) -> "FilmProfile":
        return FilmProfile.create(grid, func(grid.z))

    @property
    def is_admissible(self) -> bool:
        return bool(np.all(self.u > -1.0) and np.all(self.u < 1.0))

    def value_at(self, z: ArrayLike) -> ArrayLike:
        return np.interp(z, self.grid.z, self.u)

    def with_values(self, values: np.ndarray) -> "FilmProfile":
        return FilmProfile.create(self.grid, values)


def _check_reference(r_ref: ArrayLike) -> None:
    r_arr = np.asarray(r_ref)
    if np.any(r_arr < 1.0) or np.any(r_arr > 2.0):
        raise InvalidArgument("reference radial coordinate must lie in [1, 2]")


def map_to_physical(v: FilmProfile, z: ArrayLike, r_ref: ArrayLike) -> ArrayLike:
    """Inverse of T_v: r = 2 v(z) + r_ref (1 - v(z))."""
    _check_reference(r_ref)
    vz = v.value_at(z)
    # same map as 2v + r_ref(1 - v), arranged so r_ref = 1, 2 land exactly on 1 + v, 2
    return r_ref + vz * (2.0 - np.asarray(r_ref))


def map_to_reference(v: FilmProfile, z: ArrayLike, r: ArrayLike) -> ArrayLike:
    """T_v: r_ref = (r - 2 v(z)) / (1 - v(z))."""
    vz = v.value_at(z)
    r_arr = np.asarray(r, dtype=float)
    film = vz + 1.0
    if np.any(r_arr < film - 1e-14) or np.any(r_arr > 2.0 + 1e-14):
        raise InvalidArgument("physical radius must lie between the film and the cylinder")
    r_ref = (r_arr - 2.0 * vz) / (1.0 - vz)
    r_ref = np.where(r_arr == film, 1.0, np.where(r_arr == 2.0, 2.0, r_ref))
    return r_ref if r_ref.ndim else float(r_ref)


def physical_radii(v: FilmProfile, mesh: RectMesh) -> np.ndarray:
    return mesh.r[None, :] + v.u[:, None] * (2.0 - mesh.r[None, :])
