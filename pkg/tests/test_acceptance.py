"""End-to-end checks at the resolutions the solver is expected to handle on a laptop.

Run with ``pytest -m slow``.
"""

from pathlib import Path

import numpy as np
import pytest

from soap_bridge.catenoid import catenoid_for
from soap_bridge.diagnostics import ENERGY_FLOOR, flux_identity, lambda_crit
from soap_bridge.elliptic import reference_boundary_data, solve_potential
from soap_bridge.force import electrostatic_force
from soap_bridge.mesh import FilmProfile, RectMesh
from soap_bridge.run_config import RunConfig
from soap_bridge.runner import run_sweep
from soap_bridge.stepper import Completed, Params, StepperConfig, run
from soap_bridge.utils import RunLayout
from soap_bridge.verification import run_suite

pytestmark = pytest.mark.slow

SIGMA_COSH1 = float(np.cosh(1.0))
FLAT_FORCE = 1.0 / np.log(2.0) ** 2
SYMMETRY_TOL = 1e-12


def assert_energy_bounded(samples):
    assert all(d.E >= ENERGY_FLOOR for d in samples)


@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
def test_flat_film_has_logarithmic_potential(sigma):
    mesh = RectMesh.create(129, 129)
    u = FilmProfile.zero(mesh.grid)
    phi = solve_potential(u, sigma, mesh)
    assert np.max(np.abs(phi.phi - reference_boundary_data(mesh))) <= 5e-4
    g = electrostatic_force(u, phi, sigma).g
    np.testing.assert_allclose(g, FLAT_FORCE, rtol=1e-3)


def test_catenoid_stays_put_and_drift_converges():
    cat = catenoid_for(SIGMA_COSH1)
    drifts = []
    for n_z in (33, 65, 129):
        p = Params.create(SIGMA_COSH1, 0.0, n_z, 9)
        u_cat = cat.profile(p.mesh.grid)
        cfg = StepperConfig.create(dt_init=1e-4, dt_max=1e-4)
        worst = [0.0]

        def track(s, u_cat=u_cat, worst=worst):
            worst[0] = max(worst[0], float(np.max(np.abs(s.u.u - u_cat.u))))

        result = run(p, u_cat, cfg, 1.0, 0.1, track)
        track(result.final)
        assert isinstance(result.outcome, Completed)
        assert all(d.symmetry_defect <= SYMMETRY_TOL for d in result.samples)
        assert_energy_bounded(result.samples)
        drifts.append(worst[0])
    assert drifts[-1] <= 5e-3
    orders = np.log2(np.array(drifts[:-1]) / np.array(drifts[1:]))
    assert np.all(orders >= 1.8)


def test_flat_film_is_a_discrete_equilibrium():
    p = Params.create(1.0, np.log(2.0) ** 2, 129, 129)
    result = run(p, FilmProfile.zero(p.mesh.grid), StepperConfig.create(), 0.5, 0.05)
    assert isinstance(result.outcome, Completed)
    assert all(max(abs(d.min_u), abs(d.max_u)) <= 1e-2 for d in result.samples)
    assert all(d.symmetry_defect <= SYMMETRY_TOL for d in result.samples)
    assert_energy_bounded(result.samples)


@pytest.mark.parametrize("lam", [0.0, 1.0])
def test_solutions_stay_above_the_catenoid(lam):
    rng = np.random.default_rng(2024)
    p = Params.create(SIGMA_COSH1, lam, 33, 17)
    z = p.mesh.z
    u_cat = catenoid_for(SIGMA_COSH1).profile(p.mesh.grid)
    floor = u_cat.u - 10 * p.mesh.h_z**2
    for _ in range(10):
        bump = sum(rng.uniform(0, 0.15) * np.sin(k * np.pi * (z + 1) / 2) ** 2 for k in (1, 2, 3))
        u0 = u_cat.with_values(u_cat.u + bump)
        seen = []
        result = run(p, u0, StepperConfig.create(), 0.1, observer=seen.append)
        for s in [*seen, result.final]:
            assert np.all(s.u.u >= floor)


def test_flux_identity():
    mesh = RectMesh.create(65, 65)
    u = FilmProfile.zero(mesh.grid)
    flux = flux_identity(u, solve_potential(u, 1.0, mesh), 1.0)
    assert flux.lhs == pytest.approx(2.885390, rel=1e-2)
    assert flux.rhs == pytest.approx(2.885390, rel=1e-2)

    cat = catenoid_for(SIGMA_COSH1)
    residuals = []
    for n in (33, 65, 129):
        mesh = RectMesh.create(n, n)
        u_cat = cat.profile(mesh.grid)
        phi = solve_potential(u_cat, SIGMA_COSH1, mesh)
        residuals.append(flux_identity(u_cat, phi, SIGMA_COSH1).residual)
    orders = np.log2(np.array(residuals[:-1]) / np.array(residuals[1:]))
    assert np.all(orders >= 1.0)


def test_supercritical_run_terminates_within_bound():
    crit = lambda_crit(SIGMA_COSH1, 257, 257)
    lam = 2.0 * crit.lambda_crit
    bound = crit.t_max_bound(lam)
    assert bound is not None and bound > 0

    p = Params.create(SIGMA_COSH1, lam, 65, 65)
    u0 = crit.catenoid.profile(p.mesh.grid)
    rates = []
    result = run(
        p, u0, StepperConfig.create(), 2.0 * bound, observer=lambda s: rates.append(s.diagnostics)
    )
    assert result.outcome.tag in ("TouchedCylinder", "NormBlowup")
    assert result.outcome.t <= bound
    assert all(d.dE_dt < 0 for d in rates)
    assert result.max_dE_dt < 0
    assert all(d.symmetry_defect <= SYMMETRY_TOL for d in result.samples)
    assert_energy_bounded(result.samples)


def test_self_convergence_in_space_and_time():
    finals = []
    for n_z in (17, 33, 65):
        p = Params.create(1.2, 0.0, n_z, 9)
        h = p.mesh.h_z
        u0 = FilmProfile.from_function(p.mesh.grid, lambda z: -0.2 * np.cos(np.pi * z / 2))
        cfg = StepperConfig.create(dt_init=h**2 / 4, dt_max=h**2 / 4)
        finals.append(run(p, u0, cfg, 0.25).final.u.u)
    coarse = np.max(np.abs(finals[1][::2] - finals[0]))
    fine = np.max(np.abs(finals[2][::2] - finals[1]))
    assert np.log2(coarse / fine) >= 1.8


def test_sweep_is_byte_identical_across_workers(tmp_path: Path):
    base = RunConfig.model_validate(
        {"sigma": 1.6, "n_z": 33, "n_r": 17, "T_end": 0.05, "sample_interval": 0.01}
    )
    sigmas, lambdas = [1.6, 2.0], ["0", "0.5*crit", "2*crit"]
    run_sweep(base, sigmas, lambdas, RunLayout(tmp_path / "serial"), jobs=1)
    run_sweep(base, sigmas, lambdas, RunLayout(tmp_path / "parallel"), jobs=8)
    serial = (tmp_path / "serial" / "sweep.csv").read_bytes()
    assert serial == (tmp_path / "parallel" / "sweep.csv").read_bytes()
    assert len(serial.splitlines()) == 7


def test_verification_suite_passes():
    result = run_suite()
    assert result.failures == []
    assert len(result.study.observed_orders) >= 7
