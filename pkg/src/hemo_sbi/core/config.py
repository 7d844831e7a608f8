"""Runtime settings loaded from environment variables."""

from __future__ import annotations

from typing import Any

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-wide configuration via ``HEMO_*`` environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="HEMO_",
        env_file=".env",
        env_file_encoding="utf-8",
        # extra="ignore" lets .env carry keys for other tools
        extra="ignore",
    )

    # Worker-pool width for batch simulation and dataset finalization
    threads: int = Field(default=1, ge=1)

    # 1 forces serial reductions and deterministic torch kernels
    deterministic: bool = False

    # Logging
    log_level: str = "INFO"

    # Records per dataset chunk file
    chunk_size: int = Field(default=256, ge=1)

    @field_validator("deterministic", mode="before")
    @classmethod
    def parse_deterministic(cls, v: Any) -> Any:
        """Accept ``0``/``1`` as well as the usual boolean spellings."""
        if isinstance(v, str) and v.strip() in {"0", "1"}:
            return v.strip() == "1"
        return v

    @property
    def effective_threads(self) -> int:
        """Worker count, collapsed to one in deterministic mode."""
        return 1 if self.deterministic else self.threads


settings = Settings()
