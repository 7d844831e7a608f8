"""Run manifest stamped into every output directory."""

from __future__ import annotations

from typing import Any

from pydantic import BaseModel, Field

MANIFEST_FILE = "manifest.json"


class RunManifest(BaseModel):
    """Provenance of one command run.

    ``inputs`` and ``outputs`` map paths to SHA-256 digests. Output paths
    are relative to the directory holding the manifest; an input directory
    is represented by its own manifest file, so manifests chain.
    """

    command: str
    tool_version: str
    config: dict[str, Any] = Field(default_factory=dict)
    seeds: dict[str, int] = Field(default_factory=dict)
    inputs: dict[str, str] = Field(default_factory=dict)
    outputs: dict[str, str] = Field(default_factory=dict)
    wall_time: float = Field(default=0.0, ge=0)
