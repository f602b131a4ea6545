from pathlib import Path

from pydantic import BaseModel

from chsim.config import get_settings
from chsim.constants import SCENARIO_GLOB
from chsim.report import BatchReport, Report
from chsim.scenarios import Scenario, parse_scenario


class ScenarioFileError(Exception):
    pass


class ScenarioRepository(BaseModel):
    fixtures: Path
    report_dir: Path

    @classmethod
    def create(cls) -> "ScenarioRepository":
        """
        Use this method to create a ScenarioRepository from the current settings.
        """
        settings = get_settings()
        return ScenarioRepository(fixtures=settings.fixtures, report_dir=settings.report_dir)

    def load(self, scenario_path: Path) -> Scenario:
        if not scenario_path.exists() or not scenario_path.is_file():
            raise ScenarioFileError(f"No file found for {scenario_path}")
        try:
            text = scenario_path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise ScenarioFileError(f"Cannot read {scenario_path}: {exc}") from exc
        return parse_scenario(text)

    def fixture_paths(self) -> list[Path]:
        if not self.fixtures.is_dir():
            raise ScenarioFileError(f"Fixture directory {self.fixtures} does not exist")
        return sorted(self.fixtures.glob(SCENARIO_GLOB))

    def report_path(self, name: str) -> Path:
        return self.report_dir / (Path(name).stem + ".report.json")

    def save_report(self, report: Report | BatchReport, name: str | None = None) -> Path:
        if name is None:
            name = report.scenario_id if isinstance(report, Report) else "batch"
        self.report_dir.mkdir(parents=True, exist_ok=True)
        path = self.report_path(name)
        path.write_text(report.to_json() + "\n", encoding="utf-8")
        return path


def get_scenario_repo() -> ScenarioRepository:
    return ScenarioRepository.create()
