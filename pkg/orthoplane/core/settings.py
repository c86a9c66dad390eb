"""
Environment-driven settings
"""
import os
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

DEFAULTS_RELATIVE = Path("config") / "defaults" / "run_defaults.yaml"
SOURCE_DEFAULTS = Path(__file__).resolve().parents[2] / DEFAULTS_RELATIVE


@dataclass(frozen=True)
class Settings:
    log_level: str
    threads: int
    defaults_file: Path


def _defaults_file() -> Path:
    """ORTHOPLANE_DEFAULTS, else config/defaults under the working directory, else the source checkout"""
    explicit = os.getenv("ORTHOPLANE_DEFAULTS")
    if explicit:
        return Path(explicit)
    local = Path.cwd() / DEFAULTS_RELATIVE
    return local if local.exists() else SOURCE_DEFAULTS


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Read ORTHOPLANE_* environment variables (after .env is loaded)"""
    return Settings(
        log_level=os.getenv("ORTHOPLANE_LOG_LEVEL", "INFO"),
        threads=max(1, int(os.getenv("ORTHOPLANE_THREADS", "1"))),
        defaults_file=_defaults_file(),
    )
