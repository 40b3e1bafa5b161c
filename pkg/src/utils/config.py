"""
Configuration management for the time-slot allocation toolkit.
"""

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv


@dataclass
class Config:
    """Application configuration."""

    # Project paths
    PROJECT_ROOT: Path
    DATA_DIR: Path
    OUTPUT_DIR: Path

    # Processing options
    MAX_WORKERS: int = 1
    GAME_BUDGET: int = 4096

    # Equilibrium solver defaults
    NASH_TOLERANCE: float = 1e-6
    MAX_SUPPORT: int = 3
    MAX_ITERS: int = 20000

    LOG_LEVEL: str = "WARNING"

    @classmethod
    def from_env(cls) -> 'Config':
        """Create config from environment variables (a ``.env`` file is honoured)."""
        load_dotenv()
        project_root = Path(__file__).parent.parent.parent

        return cls(
            PROJECT_ROOT=project_root,
            DATA_DIR=Path(os.getenv('TSA_DATA_DIR', str(project_root / 'data'))).expanduser(),
            OUTPUT_DIR=Path(os.getenv('TSA_OUTPUT_DIR', 'out')).expanduser(),
            MAX_WORKERS=int(os.getenv('TSA_MAX_WORKERS', '1')),
            GAME_BUDGET=int(os.getenv('TSA_GAME_BUDGET', '4096')),
            NASH_TOLERANCE=float(os.getenv('TSA_NASH_TOLERANCE', '1e-6')),
            MAX_SUPPORT=int(os.getenv('TSA_MAX_SUPPORT', '3')),
            MAX_ITERS=int(os.getenv('TSA_MAX_ITERS', '20000')),
            LOG_LEVEL=os.getenv('TSA_LOG_LEVEL', 'WARNING').upper(),
        )

    @property
    def SCENARIO_DIR(self) -> Path:
        return self.DATA_DIR / 'scenarios'

    @property
    def BIDS_DIR(self) -> Path:
        return self.DATA_DIR / 'bids'

    @property
    def STRATEGIES_DIR(self) -> Path:
        return self.DATA_DIR / 'strategies'

    @property
    def PUBLISHED_DIR(self) -> Path:
        return self.DATA_DIR / 'published'


# Global config instance
_config: Optional[Config] = None


def get_config() -> Config:
    """Get or create the global configuration instance."""
    global _config
    if _config is None:
        _config = Config.from_env()
    return _config


def set_config(config: Optional[Config]):
    """Set the global configuration instance (``None`` forces a reload)."""
    global _config
    _config = config
