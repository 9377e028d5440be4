"""
Configuration settings for cfshift.

Values come from CFSHIFT_* environment variables or a .env file.
"""

from typing import List, Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    # =================================================================
    # Reproducibility
    # =================================================================
    seed: int = Field(0, description="Global seed fallback (CFSHIFT_SEED)")

    # =================================================================
    # Frequency Bank
    # =================================================================
    bank_k: int = Field(64, description="Number of frequency vectors")
    bank_scale: float = Field(1.0, description="Standard deviation / sweep radius of the bank")
    bank_seed: int = Field(0)
    bank_scheme: str = Field("gaussian")

    # =================================================================
    # Training
    # =================================================================
    lr: float = Field(0.001)
    cfl_lambda: float = Field(0.1)
    epochs: int = Field(20)
    batch_per_domain: int = Field(32)
    hidden_dims: List[int] = Field(default_factory=lambda: [64])
    embedding_dim: int = Field(32)
    resample_bank_each_step: bool = Field(False)

    # =================================================================
    # Plotting
    # =================================================================
    plot_directions: int = Field(3)
    plot_steps: int = Field(40)
    plot_sweep_scale: float = Field(3.0)
    plot_seed: Optional[int] = Field(None, description="Plot direction seed; falls back to seed when unset")

    # =================================================================
    # PCA Baseline
    # =================================================================
    pca_tolerance: float = Field(1e-10)
    pca_max_iterations: int = Field(10000)

    # =================================================================
    # Logging Configuration
    # =================================================================
    log_level: str = Field("INFO")
    log_format: str = Field("text")
    log_console: bool = Field(True)
    log_file_path: Optional[str] = Field(None)

    model_config = SettingsConfigDict(
        env_prefix="CFSHIFT_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )


# Singleton settings instance
settings = Settings()
