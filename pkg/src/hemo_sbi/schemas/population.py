"""Prior, virtual-subject and acceptance-filter schemas."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, model_validator

from hemo_sbi.schemas.network import HeartFunction

# Inferred biomarkers, in the order used by every array and report
BIOMARKERS: tuple[str, ...] = ("heart_rate", "cardiac_output", "svr", "lvet")
BIOMARKER_UNITS: dict[str, str] = {
    "heart_rate": "beats/min",
    "cardiac_output": "L/min",
    "svr": "Pa*s/m^3",
    "lvet": "ms",
}


class UniformRange(BaseModel):
    """Closed interval ``[low, high]`` of a uniform prior."""

    model_config = ConfigDict(frozen=True)

    low: float
    high: float

    @model_validator(mode="after")
    def _ordered(self) -> UniformRange:
        if not self.low < self.high:
            raise ValueError(f"low ({self.low}) must be smaller than high ({self.high})")
        return self

    def contains(self, value: float) -> bool:
        return self.low <= value <= self.high


class StiffnessSpec(BaseModel):
    """Constants of ``Eh = R_d (k1 exp(k2 R_d) + k3(age))`` in SI units.

    ``k3`` grows linearly with age:
    ``k3(age) = k3_reference * (1 + k3_age_slope * (age - reference_age))``.
    """

    model_config = ConfigDict(frozen=True)

    k1: float = Field(default=3.0e5, ge=0, description="Pa")
    k2: float = Field(default=-900.0, description="1/m")
    k3_reference: float = Field(default=3.37e4, gt=0, description="Pa at reference_age")
    k3_age_slope: float = Field(default=0.03, ge=0, description="relative change per year")
    reference_age: float = 25.0


class PriorSpec(BaseModel):
    """Uniform priors of the population sampler."""

    model_config = ConfigDict(frozen=True)

    heart_rate: UniformRange = UniformRange(low=40.0, high=120.0)
    stroke_volume_ml: UniformRange = UniformRange(low=40.0, high=120.0)
    peak_flow_time: UniformRange = UniformRange(low=0.08, high=0.20)
    reverse_flow_fraction: UniformRange = UniformRange(low=0.0, high=0.1)
    height_cm: UniformRange = UniformRange(low=150.0, high=190.0)
    age: UniformRange = UniformRange(low=25.0, high=75.0)
    lvet_offset_ms: UniformRange = UniformRange(low=-40.0, high=40.0)
    lvet_hr_noise: UniformRange = UniformRange(low=-0.05, high=0.05)
    lvet_sv_noise: UniformRange = UniformRange(low=-0.05, high=0.05)
    bed_resistance_scale: UniformRange = UniformRange(low=0.8, high=1.2)
    probe_position: UniformRange = UniformRange(low=0.0, high=1.0)
    height_noise_sd_cm: float = Field(default=5.0, ge=0)
    measurement_sites: tuple[str, ...] = Field(
        default=("left_radial", "right_radial"), min_length=1
    )
    stiffness: StiffnessSpec = StiffnessSpec()

    @model_validator(mode="after")
    def _lvet_noise_ranges(self) -> PriorSpec:
        expected = {
            "lvet_offset_ms": (-40.0, 40.0),
            "lvet_hr_noise": (-0.05, 0.05),
            "lvet_sv_noise": (-0.05, 0.05),
        }
        for name, (low, high) in expected.items():
            rng: UniformRange = getattr(self, name)
            if (rng.low, rng.high) != (low, high):
                raise ValueError(f"{name} must be [{low}, {high}], got [{rng.low}, {rng.high}]")
        if self.probe_position.low < 0 or self.probe_position.high > 1:
            raise ValueError("probe_position must lie within [0, 1]")
        return self


class AcceptanceFilter(BaseModel):
    """Blood-pressure bounds for rejecting implausible subjects (mmHg)."""

    model_config = ConfigDict(frozen=True)

    dbp_max: float = 120.0
    sbp_min: float = 60.0
    sbp_max: float = 200.0

    @model_validator(mode="after")
    def _ordered(self) -> AcceptanceFilter:
        if not self.sbp_min < self.sbp_max:
            raise ValueError("sbp_min must be smaller than sbp_max")
        return self


class AcceptanceDecision(BaseModel):
    """Outcome of the blood-pressure filter for one beat."""

    accepted: bool
    sbp: float
    dbp: float


class VirtualSubject(BaseModel):
    """Sampled parameters of one simulated subject.

    ``svr`` is filled in after simulation since it is derived from the
    simulated mean aortic pressure.
    """

    model_config = ConfigDict(frozen=True)

    subject_id: int = Field(ge=0)
    heart_rate: float
    stroke_volume_ml: float
    lvet_ms: float
    peak_flow_time: float
    reverse_flow_fraction: float
    height_cm: float
    height_noise_cm: float
    age: float
    lvet_offset_ms: float
    lvet_hr_noise: float
    lvet_sv_noise: float
    bed_resistance_scale: float
    measurement_site: str
    probe_position: float
    rng_seed: tuple[int, ...]
    svr: float | None = None

    @property
    def cardiac_output(self) -> float:
        """Cardiac output in L/min."""
        return self.heart_rate * self.stroke_volume_ml / 1000.0

    @property
    def cardiac_output_si(self) -> float:
        """Cardiac output in m^3/s."""
        return self.heart_rate / 60.0 * self.stroke_volume_ml * 1e-6

    def heart_function(self) -> HeartFunction:
        """Heart function in SI units."""
        return HeartFunction(
            heart_rate=self.heart_rate,
            stroke_volume=self.stroke_volume_ml * 1e-6,
            lvet=self.lvet_ms * 1e-3,
            peak_flow_time=self.peak_flow_time,
            reverse_flow_fraction=self.reverse_flow_fraction,
        )

    def biomarkers(self) -> tuple[float, float, float, float]:
        """``(HR, CO, SVR, LVET)`` in the units of :data:`BIOMARKER_UNITS`."""
        if self.svr is None:
            raise ValueError(f"Subject {self.subject_id} has no SVR yet")
        return (self.heart_rate, self.cardiac_output, self.svr, self.lvet_ms)
