from pathlib import Path
from typing import Annotated, Literal

from platformdirs import PlatformDirs
from pydantic import AfterValidator, Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from chsim.constants import DEFAULT_FIXTURES_DIR

dirs = PlatformDirs("chsim", "chsim")


def _create_dirs(path: Path) -> Path:
    if not path.exists():
        path.mkdir(parents=True)
    elif not path.is_dir():
        raise ValueError(f"Path {path} already exists but is no directory")
    return path


class Settings(BaseSettings):
    fixtures: Path = DEFAULT_FIXTURES_DIR
    report_dir: Annotated[Path, AfterValidator(_create_dirs)] = (
        dirs.user_cache_path / "reports"
    )
    tolerance: float = Field(default=1e-9, gt=0.0)
    max_dim: int = Field(default=4096, ge=1)
    max_histories: int = Field(default=4096, ge=1)
    max_identifiers: int = Field(default=64, ge=1)
    parallelism: int = Field(default=1, ge=1)
    seed: int | None = Field(default=None, ge=0)
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "WARNING"

    model_config = SettingsConfigDict(
        env_prefix="chsim_", env_file=("/etc/.env", ".env"), env_file_encoding="utf-8"
    )
