from dataclasses import dataclass
from importlib import resources
from logging import INFO
from pathlib import Path

from soap_bridge import sb_resources
from soap_bridge.utils import log

CONFIG_TEMPLATE = "sb-config.toml"


@dataclass(frozen=True)
class ProjectSetup:
    root_path: Path

    @staticmethod
    def create(root_path: Path) -> "ProjectSetup":
        root_path.mkdir(parents=True, exist_ok=True)
        return ProjectSetup(root_path)

    @property
    def config_path(self) -> Path:
        return self.root_path / CONFIG_TEMPLATE

    def initialize(self):
        if self.config_path.exists():
            log(INFO, f"Keeping existing config {self.config_path}")
            return
        self._copy_template(CONFIG_TEMPLATE, self.config_path)
        log(INFO, f"Start a run with: soap-bridge run {self.config_path}")

    def _copy_template(self, template_name: str, dest_path: Path):
        template_content = resources.files(sb_resources).joinpath(template_name).read_text()
        dest_path.write_text(template_content, encoding="utf-8")
        log(INFO, f"Wrote {template_name} to {dest_path}")
