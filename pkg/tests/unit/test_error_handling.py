"""Tests for the exception hierarchy and the CLI error handlers."""

from __future__ import annotations

import io

import pytest
from pydantic import BaseModel, Field

from hemo_sbi.core.exceptions import (
    ConfigError,
    CouplingError,
    DigestMismatchError,
    DomainError,
    HemoError,
    ModelFormatError,
    StabilityError,
    StepSizeError,
    TrainingError,
)
from hemo_sbi.core.handlers import (
    EXIT_DOMAIN_ERROR,
    EXIT_OK,
    error_line,
    run_with_handlers,
)


class TestExceptionHierarchy:
    """Every toolkit error carries a module, a code and an exit code."""

    def test_base_defaults(self) -> None:
        exc = HemoError()
        assert exc.module == "cli"
        assert exc.code == "error"
        assert exc.exit_code == 1
        assert exc.message == "An unexpected error occurred"

    @pytest.mark.parametrize(
        ("exc", "module", "code"),
        [
            (DomainError(), "vascular_model", "domain"),
            (StepSizeError(1e-3, 5e-4), "solver", "cfl"),
            (StabilityError("aorta", 3), "solver", "stability"),
            (CouplingError("junction", [1e-3], 100), "solver", "coupling"),
            (TrainingError(4, [1, 2]), "npe", "non_finite"),
            (ModelFormatError(), "npe", "model_format"),
            (DigestMismatchError("a/b.bin", "changed"), "cli", "digest"),
            (ConfigError(), "cli", "config"),
        ],
    )
    def test_module_and_code(self, exc: HemoError, module: str, code: str) -> None:
        assert isinstance(exc, HemoError)
        assert (exc.module, exc.code) == (module, code)

    def test_step_size_message_names_both_steps(self) -> None:
        exc = StepSizeError(2e-3, 1e-3)
        assert exc.dt == 2e-3
        assert "2.000e-03" in exc.message and "1.000e-03" in exc.message

    def test_stability_error_keeps_snapshot(self) -> None:
        exc = StabilityError("radial", 7, snapshot={"time": 0.5})
        assert exc.segment_id == "radial"
        assert exc.cell_index == 7
        assert exc.snapshot == {"time": 0.5}

    def test_training_error_truncates_batch_ids(self) -> None:
        exc = TrainingError(2, list(range(25)))
        assert exc.epoch == 2
        assert "..." in exc.message
        assert len(exc.batch_ids) == 25


class TestErrorLine:
    """The envelope is a single ERROR:<module>:<code> line."""

    def test_format(self) -> None:
        assert error_line(module="solver", code="cfl", message="too big") == "ERROR:solver:cfl too big"

    def test_newlines_are_flattened(self) -> None:
        line = error_line(module="cli", code="config", message="a\n  b\tc")
        assert "\n" not in line
        assert line.endswith("a b c")


class _Model(BaseModel):
    value: int = Field(gt=0)


class TestRunWithHandlers:
    """Exceptions become exit codes plus one stderr line."""

    def test_success_passes_code_through(self) -> None:
        assert run_with_handlers(lambda: EXIT_OK, stream=io.StringIO()) == EXIT_OK

    def test_hemo_error(self) -> None:
        out = io.StringIO()

        def body() -> int:
            raise DomainError("negative area")

        assert run_with_handlers(body, stream=out) == EXIT_DOMAIN_ERROR
        assert out.getvalue().strip() == "ERROR:vascular_model:domain negative area"

    def test_validation_error_becomes_config_error(self) -> None:
        out = io.StringIO()

        def body() -> int:
            _Model(value=-1)
            return 0

        assert run_with_handlers(body, stream=out) == 1
        assert out.getvalue().startswith("ERROR:cli:config value:")

    def test_unexpected_exception(self) -> None:
        out = io.StringIO()

        def body() -> int:
            raise RuntimeError("boom")

        assert run_with_handlers(body, stream=out) == EXIT_DOMAIN_ERROR
        assert "ERROR:cli:internal RuntimeError: boom" in out.getvalue()
