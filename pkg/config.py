"""
Application configuration settings for the PDTC simulator.
"""

from pathlib import Path
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-wide numerical and storage settings."""

    model_config = SettingsConfigDict(
        env_prefix="PDTC_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # Krylov propagation
    KRYLOV_TOL: float = Field(1e-10)
    KRYLOV_MAX_DIM: int = Field(64)
    NORM_DRIFT_TOL: float = Field(1e-10)

    # Random graph generation
    GRAPH_PROPOSAL_BUDGET: int = Field(1_000_000)
    GRAPH_BOX_FACTOR: float = Field(2.0)

    # Operator algebra
    TERM_MERGE_TOL: float = Field(1e-15)
    SINGULAR_SIN_TOL: float = Field(1e-9)

    # Dense oracle limits
    MAX_DENSE_SITES: int = Field(10)
    MAX_TOGGLING_SITES: int = Field(8)

    # Analysis
    PHASE_UNDEFINED_TOL: float = Field(1e-12)
    RIGIDITY_THRESHOLD: float = Field(0.2)

    # Execution
    DEFAULT_WORKERS: int = Field(1)
    LOG_LEVEL: str = Field("INFO")
    OUTPUT_DIR: str = Field("runs")
    VERIFY_SEED: int = Field(20240601)
    FLOAT_FORMAT: str = Field("%.17g")

    APP_NAME: str = Field("pdtc-sim")
    APP_VERSION: str = Field("0.3.0")

    @property
    def base_dir(self) -> Path:
        return Path(__file__).parent

    @property
    def output_dir(self) -> Path:
        return Path(self.OUTPUT_DIR)

    @property
    def configs_dir(self) -> Path:
        return self.base_dir / "configs"

    def create_directories(self, root: Path) -> None:
        """Create the output directory tree for a run if it doesn't exist."""
        for directory in [root, root / "series"]:
            directory.mkdir(parents=True, exist_ok=True)


# Global settings instance
settings = Settings()
