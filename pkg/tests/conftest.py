import json
from pathlib import Path

import pytest
from pytest_mock import MockerFixture

from chsim.constants import DEFAULT_FIXTURES_DIR
from chsim.runners import RunOptions
from chsim.settings import Settings

FIXTURES = DEFAULT_FIXTURES_DIR


@pytest.fixture
def settings(tmp_path: Path) -> Settings:
    return Settings(fixtures=FIXTURES, report_dir=tmp_path / "reports")


@pytest.fixture
def mock_settings(mocker: MockerFixture, settings: Settings):
    mocked_settings = mocker.MagicMock(spec=Settings)
    for key, value in settings.model_dump().items():
        mocked_settings.__setattr__(key, value)
    mocker.patch("chsim.cli.get_settings", return_value=mocked_settings)
    mocker.patch(
        "chsim.repositories.scenario_repository.get_settings",
        return_value=mocked_settings,
    )
    return mocked_settings


@pytest.fixture
def options() -> RunOptions:
    return RunOptions()


@pytest.fixture
def write_scenario(tmp_path: Path):
    def write(name: str, data: dict) -> Path:
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    return write
