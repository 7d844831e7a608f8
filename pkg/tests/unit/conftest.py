"""Fixtures for unit tests (no full simulations, no long training)."""

from __future__ import annotations

import pytest

from hemo_sbi.services import dataset_store
from tests.conftest import FakePopulation


@pytest.fixture()
def fake_population(monkeypatch: pytest.MonkeyPatch) -> FakePopulation:
    """Replace simulation inside dataset generation with synthetic records."""
    fake = FakePopulation()
    monkeypatch.setattr(dataset_store, "generate_population", fake)
    return fake
