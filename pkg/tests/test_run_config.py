import unittest
from importlib.resources import files

import numpy as np
import pytest

from soap_bridge import sb_resources
from soap_bridge.exceptions import ConfigError
from soap_bridge.run_config import InitialCondition, RunConfig, parse_config, parse_config_text


class TestInitialCondition(unittest.TestCase):
    def test_plain(self):
        self.assertEqual(InitialCondition.parse("zero"), InitialCondition("zero"))
        self.assertEqual(InitialCondition.parse(" samples "), InitialCondition("samples"))

    def test_catenoid_branches(self):
        self.assertEqual(InitialCondition.parse("catenoid(large)").branch, "large")
        ic = InitialCondition.parse("catenoid( small )")
        self.assertEqual(ic.branch, "small")
        self.assertTrue(ic.uses_catenoid)

    def test_scaled(self):
        ic = InitialCondition.parse("scaled_catenoid(0.5)")
        self.assertEqual(ic.factor, 0.5)
        self.assertEqual(ic.branch, "small")

    def test_rejected(self):
        for text in ("blob", "zero(1)", "catenoid", "catenoid(medium)", "scaled_catenoid(x)"):
            with self.assertRaises(ValueError):
                InitialCondition.parse(text)


class TestParse(unittest.TestCase):
    def test_defaults(self):
        cfg = parse_config_text("sigma = 1.0\n")
        self.assertEqual(cfg.lam, 0.0)
        self.assertEqual((cfg.n_z, cfg.n_r), (129, 129))
        self.assertEqual(cfg.ic, "zero")
        self.assertEqual(cfg.solver.method, "direct")
        self.assertFalse(cfg.output.snapshots)

    def test_negative_lambda(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config_text("sigma = 1.0\nlambda = -1\n")
        self.assertEqual(ctx.exception.key, "lambda")
        self.assertEqual(ctx.exception.line, 2)
        self.assertEqual(ctx.exception.error_type, "CONFIG")

    def test_catenoid_needs_wide_rings(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config_text('sigma = 1.0\nn_z = 33\nic = "catenoid(small)"\n')
        self.assertEqual(ctx.exception.key, "ic")
        self.assertEqual(ctx.exception.line, 3)

    def test_unknown_key(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config_text("sigma = 1.0\nvoltage = 3\n")
        self.assertEqual(ctx.exception.key, "voltage")

    def test_nested_key(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config_text('sigma = 1.0\n\n[solver]\nmethod = "cg"\n')
        self.assertEqual(ctx.exception.key, "solver.method")
        self.assertEqual(ctx.exception.line, 4)

    def test_step_budget_below_detector_margins(self):
        text = "sigma = 1.0\n\n[stepper]\npinch_eps = 0.05\nmax_change_per_step = 0.3\n"
        with self.assertRaises(ConfigError) as ctx:
            parse_config_text(text)
        self.assertEqual(ctx.exception.key, "stepper.max_change_per_step")
        self.assertEqual(ctx.exception.line, 5)
        with self.assertRaises(ConfigError) as ctx:
            parse_config_text("sigma = 1.0\n\n[stepper]\ntouch_eps = 0.005\n")
        self.assertEqual(ctx.exception.key, "stepper.max_change_per_step")
        cfg = parse_config_text("sigma = 1.0\n\n[stepper]\nmax_change_per_step = 0.015\n")
        self.assertEqual(cfg.stepper_config().max_change_per_step, 0.015)

    def test_malformed(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config_text("sigma = 1.0\nn_z = = 3\n")
        self.assertIsNone(ctx.exception.key)
        self.assertEqual(ctx.exception.line, 2)

    def test_newer_version(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config_text('config_version = "2.0"\nsigma = 1.0\n')
        self.assertEqual(ctx.exception.key, "config_version")

    def test_even_film_nodes(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config_text("sigma = 1.0\nn_z = 128\n")
        self.assertEqual(ctx.exception.key, "n_z")

    def test_step_bounds(self):
        with self.assertRaises(ConfigError):
            parse_config_text("sigma = 1.0\ndt_init = 1.0\ndt_max = 0.1\n")

    def test_samples(self):
        cfg = parse_config_text(
            'sigma = 1.0\nn_z = 9\nic = "samples"\nic_samples = [0.0, -0.2, 0.0]\n'
        )
        u = cfg.initial_profile()
        self.assertAlmostEqual(u.u[u.grid.mid], -0.2)
        self.assertEqual(u.u[0], 0.0)
        with self.assertRaises(ConfigError):
            parse_config_text('sigma = 1.0\nic = "samples"\n')

    def test_inadmissible_samples(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config_text('sigma = 1.0\nn_z = 9\nic = "samples"\nic_samples = [0, 1.5, 0]\n')
        self.assertEqual(ctx.exception.key, "ic")


def test_packaged_config_parses():
    cfg = parse_config_text((files(sb_resources) / "sb-config.toml").read_text())
    assert cfg.sigma == pytest.approx(np.cosh(1.0), rel=1e-15)
    assert cfg.initial_condition.uses_catenoid
    assert cfg.initial_profile().u.min() == pytest.approx(1.0 / np.cosh(1.0) - 1.0, abs=1e-12)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "absent.toml")


def test_derived_objects():
    cfg = RunConfig.model_validate(
        {"sigma": 1.2, "lambda": 0.5, "n_z": 17, "n_r": 9, "stepper": {"kappa": 0.05}}
    )
    p = cfg.params()
    assert (p.sigma, p.lam, p.mesh.shape) == (1.2, 0.5, (17, 9))
    stepper = cfg.stepper_config()
    assert stepper.kappa == 0.05
    assert stepper.norm_cap == pytest.approx(20.0)
    assert cfg.solver_config().method == "direct"
    moved = cfg.at_point(2.0, 3.0)
    assert (moved.sigma, moved.lam, moved.n_z) == (2.0, 3.0, 17)
    assert cfg.echo()["lambda"] == 0.5
    assert "ic_samples" not in cfg.echo()
