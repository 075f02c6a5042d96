import csv
from dataclasses import dataclass
from logging import CRITICAL, DEBUG, ERROR, INFO, WARNING, getLogger
from pathlib import Path
from typing import Any, Iterable, Sequence

import tomlkit


@dataclass(frozen=True)
class Toml:
    @staticmethod
    def loads(text: str) -> dict[str, Any]:
        return tomlkit.parse(text).unwrap()


@dataclass(frozen=True)
class RunLayout:
    root_path: Path

    @property
    def timeseries_path(self) -> Path:
        return self.root_path / "timeseries.csv"

    @property
    def summary_path(self) -> Path:
        return self.root_path / "summary.json"

    @property
    def report_path(self) -> Path:
        return self.root_path / "report.md"

    @property
    def snapshots_path(self) -> Path:
        return self.root_path / "snapshots"

    @property
    def sweep_path(self) -> Path:
        return self.root_path / "sweep.csv"

    @property
    def convergence_path(self) -> Path:
        return self.root_path / "convergence.csv"

    def profile_snapshot_path(self, tag: str) -> Path:
        return self.snapshots_path / f"profile-{tag}.csv"

    def potential_snapshot_path(self, tag: str) -> Path:
        return self.snapshots_path / f"potential-{tag}.csv"

    def ensure(self) -> "RunLayout":
        self.root_path.mkdir(parents=True, exist_ok=True)
        return self


def format_float(value: float) -> str:
    return f"{value:.16e}"


def format_duration(seconds: float) -> str:
    if seconds < 60:
        return f"{seconds:.1f}s"
    if seconds < 3600:
        return f"{int(seconds / 60)}m {int(seconds % 60)}s"
    return f"{int(seconds / 3600)}h {int(seconds % 3600 / 60)}m"


def format_cell(value: Any) -> str:
    if isinstance(value, bool) or value is None:
        return "" if value is None else str(value).lower()
    if isinstance(value, (int,)):
        return str(value)
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(v) for v in row])
    return path


def log(level: int, msg: str) -> None:
    from soap_bridge.exec_env import ExecutionEnvironment

    logger = (
        ExecutionEnvironment.current().logger
        if ExecutionEnvironment.has_current()
        else getLogger("soap-bridge-fallback")
    )
    if level == ERROR:
        logger.error(msg)
    elif level == WARNING:
        logger.warning(msg)
    elif level == INFO:
        logger.info(msg)
    elif level == DEBUG:
        logger.debug(msg)
    elif level == CRITICAL:
        logger.critical(msg)
