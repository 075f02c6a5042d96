import argparse
import json
import sys
from logging import INFO
from pathlib import Path
from typing import Optional, Sequence

from soap_bridge.cmd_pipeline import ExecutionResult, create_command
from soap_bridge.diagnostics import lambda_crit
from soap_bridge.elliptic import SolverConfig
from soap_bridge.exceptions import VerificationFailure
from soap_bridge.exec_env import ExecutionEnvironment
from soap_bridge.project_setup import ProjectSetup
from soap_bridge.run_config import parse_config
from soap_bridge.runner import package_version, run_single, run_sweep
from soap_bridge.utils import format_float, log
from soap_bridge.verification import run_suite


@create_command
def run_command(args: argparse.Namespace, *, env: ExecutionEnvironment) -> ExecutionResult:
    cfg = parse_config(Path(args.config))
    layout = env.layout(args.output or cfg.output.dir)
    summary = run_single(cfg, layout)
    return ExecutionResult(None, env, 0 if summary.outcome != "SolverFailure" else 2)


@create_command
def sweep_command(args: argparse.Namespace, *, env: ExecutionEnvironment) -> ExecutionResult:
    cfg = parse_config(Path(args.config))
    layout = env.layout(args.output or cfg.output.dir)
    run_sweep(cfg, args.sigma, args.lam, layout, args.jobs)
    return ExecutionResult(None, env)


@create_command
def critical_command(args: argparse.Namespace, *, env: ExecutionEnvironment) -> ExecutionResult:
    crit = lambda_crit(args.sigma, args.n, args.n, args.branch, SolverConfig.create(args.solver))
    if args.lam is not None:
        crit = crit.with_lambda(args.lam)
    log(INFO, f"C15 computed on a {args.n}x{args.n} mesh")
    return ExecutionResult(json.dumps(crit.to_dict(), indent=2), env)


@create_command
def verify_command(args: argparse.Namespace, *, env: ExecutionEnvironment) -> ExecutionResult:
    result = run_suite(args.resolutions, SolverConfig.create(args.solver))
    layout = env.layout(args.output).ensure()
    result.study.write_csv(layout.convergence_path)
    for name, order in result.study.observed_orders.items():
        need = result.contracts.get(name)
        status = "ok" if need is None or order >= need else "FAIL"
        log(INFO, f"{name:24s} order {order:7.3f}  (needs {need}) {status}")
    for name, err in result.exact.items():
        log(INFO, f"{name:24s} error {format_float(err)}")
    log(INFO, f"Wrote convergence table to {layout.convergence_path}")
    if result.failures:
        raise VerificationFailure("; ".join(result.failures))
    return ExecutionResult(None, env)


@create_command
def init_command(args: argparse.Namespace, *, env: ExecutionEnvironment) -> ExecutionResult:
    root = Path(args.directory)
    ProjectSetup.create(root if root.is_absolute() else env.working_dir / root).initialize()
    return ExecutionResult(None, env)


@create_command
def version_command(args: argparse.Namespace, *, env: ExecutionEnvironment) -> ExecutionResult:
    log(INFO, f"soap-bridge version {package_version()}")
    return ExecutionResult(None, env)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="soap-bridge",
        description="Simulate an electrostatically actuated soap film between two rings",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Log step-level details")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="Run a single simulation from a config file")
    run_p.add_argument("config", help="Path to the TOML run configuration")
    run_p.add_argument("-o", "--output", help="Output directory (overrides [output].dir)")
    run_p.set_defaults(handler=run_command)

    sweep_p = sub.add_parser("sweep", help="Run a (sigma, lambda) grid of simulations")
    sweep_p.add_argument("config", help="Base TOML run configuration")
    sweep_p.add_argument("--sigma", type=float, nargs="+", required=True)
    sweep_p.add_argument(
        "--lambda",
        dest="lam",
        nargs="+",
        required=True,
        help="Voltage values; '<k>*crit' means k times lambda_crit(sigma)",
    )
    sweep_p.add_argument("-j", "--jobs", type=int, default=1, help="Worker processes")
    sweep_p.add_argument("-o", "--output", help="Output directory (overrides [output].dir)")
    sweep_p.set_defaults(handler=sweep_command)

    crit_p = sub.add_parser("critical", help="Print the critical-voltage data for sigma as JSON")
    crit_p.add_argument("sigma", type=float)
    crit_p.add_argument("-n", type=int, default=257, help="Mesh nodes per direction")
    crit_p.add_argument("--branch", choices=["small", "large"], default="small")
    crit_p.add_argument("--lambda", dest="lam", type=float, help="Also report C17 and T_max")
    crit_p.add_argument("--solver", choices=["direct", "bicgstab"], default="direct")
    crit_p.set_defaults(handler=critical_command)

    verify_p = sub.add_parser("verify", help="Run the manufactured-solution convergence suite")
    verify_p.add_argument("--resolutions", type=int, nargs="+", default=[33, 65, 129])
    verify_p.add_argument("--solver", choices=["direct", "bicgstab"], default="direct")
    verify_p.add_argument("-o", "--output", default="sb-output")
    verify_p.set_defaults(handler=verify_command)

    init_p = sub.add_parser("init", help="Write a default run configuration")
    init_p.add_argument("directory", nargs="?", default=".")
    init_p.set_defaults(handler=init_command)

    version_p = sub.add_parser("version", help="Show the installed version")
    version_p.set_defaults(handler=version_command)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> None:
    args = build_parser().parse_args(argv)
    sys.exit(args.handler(args, verbose=args.verbose))


if __name__ == "__main__":
    main()
