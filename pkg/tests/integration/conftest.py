"""Fixtures for integration tests: real simulations and short training runs.

Usage:
    pytest tests/integration -v -m integration

These tests run the finite-volume solver on real networks and take a few
minutes on one core.
"""

from __future__ import annotations

import pytest

from hemo_sbi.schemas.network import ArterialNetwork
from hemo_sbi.services.network_io import load_reference_network


@pytest.fixture(scope="session")
def reference_network() -> ArterialNetwork:
    return load_reference_network()
