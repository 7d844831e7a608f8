"""Domain types for the arterial network: blood, segments, beds, heart."""

from __future__ import annotations

import math

from pydantic import BaseModel, ConfigDict, Field


class BloodProperties(BaseModel):
    """Rheological constants of blood (SI units)."""

    model_config = ConfigDict(frozen=True)

    density: float = Field(default=1060.0, gt=0)
    dynamic_viscosity: float = Field(default=0.004, ge=0)
    coriolis_coefficient: float = Field(default=1.0, ge=1)
    velocity_profile_shape: float = Field(default=9.0, ge=2)

    @property
    def friction_coefficient(self) -> float:
        """Friction factor ``K_R = 2 (mu/rho) (gamma + 2)`` in m^2/s."""
        return (
            2.0
            * self.dynamic_viscosity
            / self.density
            * (self.velocity_profile_shape + 2.0)
        )


class ArterySegment(BaseModel):
    """A tapered visco-elastic tube.

    Structural rules that involve other segments (children exist, tree
    shape, leaves carry a bed) and the taper rule ``r_d <= r_p`` are
    checked by :func:`hemo_sbi.services.vascular_model.validate_network`
    so that a malformed network can still be loaded and reported on.
    """

    model_config = ConfigDict(frozen=True)

    id: str = Field(min_length=1)
    name: str = ""
    length: float = Field(gt=0)
    proximal_radius: float = Field(gt=0)
    distal_radius: float = Field(gt=0)
    wall_thickness: float = Field(gt=0)
    elastic_modulus: float = Field(gt=0)
    wall_viscosity: float = Field(default=0.0, ge=0)
    external_pressure: float = 0.0
    children: tuple[str, ...] = ()
    terminal_bed: str | None = None

    def radius_at(self, z: float) -> float:
        """Lumen radius at axial position *z* (m), linear taper."""
        return self.proximal_radius + (self.distal_radius - self.proximal_radius) * (
            z / self.length
        )

    def reference_area_at(self, z: float) -> float:
        """Unloaded cross-sectional area ``A0(z)``."""
        r = self.radius_at(z)
        return math.pi * r * r


class WindkesselBed(BaseModel):
    """Three-element RCR model of a peripheral vascular bed."""

    model_config = ConfigDict(frozen=True)

    id: str = Field(min_length=1)
    proximal_resistance: float = Field(gt=0)
    distal_resistance: float = Field(gt=0)
    compliance: float = Field(gt=0)
    outflow_pressure: float = 0.0

    @property
    def time_constant(self) -> float:
        """Discharge time constant ``R2 * C`` (s)."""
        return self.distal_resistance * self.compliance


class HeartFunction(BaseModel):
    """Five-parameter description of the aortic inflow.

    Only sign constraints are enforced here; the ordering rules
    (``PFT < LVET`` and the reverse lobe fitting in the period) are reported
    by :func:`hemo_sbi.services.vascular_model.check_heart_function` so the
    population sampler can resample instead of failing.
    """

    model_config = ConfigDict(frozen=True)

    heart_rate: float = Field(gt=0, description="beats per minute")
    stroke_volume: float = Field(gt=0, description="m^3")
    lvet: float = Field(gt=0, description="left ventricular ejection time, s")
    peak_flow_time: float = Field(gt=0, description="s")
    reverse_flow_fraction: float = Field(default=0.0, ge=0, lt=1)

    @property
    def period(self) -> float:
        """Cardiac period ``60 / HR`` (s)."""
        return 60.0 / self.heart_rate

    @property
    def mean_flow(self) -> float:
        """Time-averaged inflow over one beat (m^3/s)."""
        return self.stroke_volume / self.period


class ArterialNetwork(BaseModel):
    """Rooted tree of artery segments terminated by Windkessel beds."""

    model_config = ConfigDict(frozen=True)

    segments: dict[str, ArterySegment]
    root: str
    beds: dict[str, WindkesselBed] = Field(default_factory=dict)
    blood: BloodProperties = Field(default_factory=BloodProperties)

    def leaves(self) -> list[str]:
        """Segment ids without children, in insertion order."""
        return [sid for sid, seg in self.segments.items() if not seg.children]

    def parent_of(self, segment_id: str) -> str | None:
        """Return the parent id of *segment_id* (``None`` for the root)."""
        for sid, seg in self.segments.items():
            if segment_id in seg.children:
                return sid
        return None

    def path_to(self, segment_id: str) -> list[str]:
        """Segment ids from the root down to *segment_id*."""
        path = [segment_id]
        parent = self.parent_of(segment_id)
        while parent is not None:
            path.append(parent)
            parent = self.parent_of(parent)
        return path[::-1]

    def total_reference_volume(self) -> float:
        """Unloaded blood volume of all segments (m^3), exact for linear taper."""
        total = 0.0
        for seg in self.segments.values():
            rp, rd = seg.proximal_radius, seg.distal_radius
            total += math.pi * seg.length * (rp * rp + rp * rd + rd * rd) / 3.0
        return total
