"""Custom exception hierarchy for hemo-sbi."""

from __future__ import annotations

from typing import Any


class HemoError(Exception):
    """Base exception for all toolkit errors.

    Subclasses set ``module`` and ``code`` so the CLI handler can print a
    consistent ``ERROR:<module>:<code>`` line.
    """

    module: str = "cli"
    code: str = "error"
    exit_code: int = 1

    def __init__(self, message: str = "An unexpected error occurred") -> None:
        self.message = message
        super().__init__(message)


class DomainError(HemoError):
    """Raised when a physical quantity is outside its valid domain."""

    module = "vascular_model"
    code = "domain"

    def __init__(self, message: str = "Value outside its valid domain") -> None:
        super().__init__(message)


class NetworkConfigError(HemoError):
    """Raised when a network file cannot be parsed or converted to SI."""

    module = "vascular_model"
    code = "network_config"

    def __init__(self, message: str = "Invalid network configuration") -> None:
        super().__init__(message)


class StepSizeError(HemoError):
    """Raised when a time step violates the CFL condition."""

    module = "solver"
    code = "cfl"

    def __init__(self, dt: float, dt_max: float) -> None:
        self.dt = dt
        self.dt_max = dt_max
        super().__init__(f"Time step {dt:.3e} s exceeds CFL limit {dt_max:.3e} s")


class StabilityError(HemoError):
    """Raised when an update produces a non-positive cross-sectional area."""

    module = "solver"
    code = "stability"

    def __init__(
        self,
        segment_id: str,
        cell_index: int,
        snapshot: dict[str, Any] | None = None,
    ) -> None:
        self.segment_id = segment_id
        self.cell_index = cell_index
        self.snapshot = snapshot or {}
        super().__init__(
            f"Non-positive area in segment '{segment_id}' at cell {cell_index}"
        )


class CouplingError(HemoError):
    """Raised when a boundary or junction Newton solve does not converge."""

    module = "solver"
    code = "coupling"

    def __init__(self, where: str, residual: list[float], iterations: int) -> None:
        self.where = where
        self.residual = residual
        self.iterations = iterations
        worst = max((abs(r) for r in residual), default=float("nan"))
        super().__init__(
            f"Coupling at {where} did not converge after {iterations} iterations "
            f"(max residual {worst:.3e})"
        )


class PriorInconsistencyError(HemoError):
    """Raised when a prior keeps producing invalid heart functions."""

    module = "population"
    code = "prior"

    def __init__(self, message: str = "Prior produces no valid subjects") -> None:
        super().__init__(message)


class DegenerateSignalError(HemoError):
    """Raised when a signal has no variation to normalize."""

    module = "signal_pipeline"
    code = "degenerate"

    def __init__(self, message: str = "Signal is constant") -> None:
        super().__init__(message)


class TrainingError(HemoError):
    """Raised when training produces a non-finite loss."""

    module = "npe"
    code = "non_finite"

    def __init__(self, epoch: int, batch_ids: list[int]) -> None:
        self.epoch = epoch
        self.batch_ids = batch_ids
        preview = ",".join(str(i) for i in batch_ids[:10])
        more = "..." if len(batch_ids) > 10 else ""
        super().__init__(
            f"Non-finite loss at epoch {epoch} on batch ids [{preview}{more}]"
        )


class ModelFormatError(HemoError):
    """Raised when a model file is malformed or from an unknown version."""

    module = "npe"
    code = "model_format"

    def __init__(self, message: str = "Invalid model file") -> None:
        super().__init__(message)


class DatasetFormatError(HemoError):
    """Raised when a dataset directory or chunk cannot be read."""

    module = "cli"
    code = "dataset_format"

    def __init__(self, message: str = "Invalid dataset") -> None:
        super().__init__(message)


class DigestMismatchError(HemoError):
    """Raised when a file listed in a manifest is missing or changed."""

    module = "cli"
    code = "digest"

    def __init__(self, path: str, reason: str = "missing") -> None:
        self.path = path
        super().__init__(f"Digest mismatch for {path}: {reason}")


class ConfigError(HemoError):
    """Raised when a configuration file fails validation."""

    module = "cli"
    code = "config"

    def __init__(self, message: str = "Invalid configuration") -> None:
        super().__init__(message)
