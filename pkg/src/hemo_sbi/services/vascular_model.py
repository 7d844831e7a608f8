"""Closed-form physics of the arterial network.

Tube law, wave speed, aortic inflow waveform, height scaling and topology
validation. Every function here is pure.
"""

from __future__ import annotations

import math

import numpy as np
import numpy.typing as npt

from hemo_sbi.core.exceptions import DomainError
from hemo_sbi.schemas.network import ArterialNetwork, ArterySegment, HeartFunction

FloatArray = npt.NDArray[np.float64]

_SQRT_PI = math.sqrt(math.pi)

# Reverse-flow lobe width as a fraction of the cardiac period
REVERSE_LOBE_FRACTION = 0.05

# Height at which the reference network lengths are specified (cm)
REFERENCE_HEIGHT_CM = 170.0


# ---------------------------------------------------------------------------
# Tube law
# ---------------------------------------------------------------------------


def elastic_beta(elastic_modulus: float, wall_thickness: float, reference_area: float) -> float:
    """Return ``beta = (4/3) sqrt(pi) E h0 / A0`` (Pa/m)."""
    return (4.0 / 3.0) * _SQRT_PI * elastic_modulus * wall_thickness / reference_area


def viscous_gamma(wall_viscosity: float, wall_thickness: float, reference_area: float) -> float:
    """Return ``Gamma = (2/3) sqrt(pi) phi h0 / A0`` (Pa*s/m)."""
    return (2.0 / 3.0) * _SQRT_PI * wall_viscosity * wall_thickness / reference_area


def tube_law_pressure(
    area: float | FloatArray,
    reference_area: float | FloatArray,
    dA_dt: float | FloatArray,
    seg: ArterySegment,
) -> float | FloatArray:
    """Voigt-type visco-elastic transmural pressure.

    ``P = Pext + beta (sqrt(A) - sqrt(A0)) + Gamma / sqrt(A) * dA/dt`` where
    ``beta`` and ``Gamma`` are evaluated at the given reference area.

    Raises
    ------
    DomainError
        If any area or reference area is not strictly positive.
    """
    a = np.asarray(area, dtype=float)
    a0 = np.asarray(reference_area, dtype=float)
    if np.any(a <= 0) or np.any(a0 <= 0):
        raise DomainError("Cross-sectional area must be positive")
    beta = (4.0 / 3.0) * _SQRT_PI * seg.elastic_modulus * seg.wall_thickness / a0
    gamma = (2.0 / 3.0) * _SQRT_PI * seg.wall_viscosity * seg.wall_thickness / a0
    sqrt_a = np.sqrt(a)
    p = seg.external_pressure + beta * (sqrt_a - np.sqrt(a0)) + gamma / sqrt_a * dA_dt
    if np.ndim(p) == 0:
        return float(p)
    return np.asarray(p, dtype=float)


def wave_speed_from_beta(
    area: float | FloatArray, beta: float | FloatArray, density: float
) -> float | FloatArray:
    """Pulse wave speed ``c = sqrt(beta sqrt(A) / (2 rho))``."""
    a = np.asarray(area, dtype=float)
    if np.any(a <= 0):
        raise DomainError("Cross-sectional area must be positive")
    c = np.sqrt(np.asarray(beta) * np.sqrt(a) / (2.0 * density))
    if np.ndim(c) == 0:
        return float(c)
    return np.asarray(c, dtype=float)


def wave_speed(
    area: float | FloatArray,
    seg: ArterySegment,
    density: float,
    *,
    position: float = 0.0,
) -> float | FloatArray:
    """Wave speed in *seg* at cross-section *area*.

    ``beta`` is taken at axial position *position* (m from the proximal end),
    which matters only for tapered segments.
    """
    beta = elastic_beta(seg.elastic_modulus, seg.wall_thickness, seg.reference_area_at(position))
    return wave_speed_from_beta(area, beta, density)


def area_at_pressure(
    pressure: float | FloatArray,
    reference_area: float | FloatArray,
    beta: float | FloatArray,
    external_pressure: float = 0.0,
) -> float | FloatArray:
    """Invert the elastic tube law: area at which ``P`` is reached."""
    root = np.sqrt(reference_area) + (np.asarray(pressure) - external_pressure) / beta
    if np.any(root <= 0):
        raise DomainError("Pressure too low for the vessel to stay open")
    a = root * root
    if np.ndim(a) == 0:
        return float(a)
    return np.asarray(a, dtype=float)


# ---------------------------------------------------------------------------
# Inflow waveform
# ---------------------------------------------------------------------------


def check_heart_function(hf: HeartFunction) -> list[str]:
    """Return violated ordering rules of *hf* (empty when valid)."""
    problems: list[str] = []
    period = hf.period
    if not 0.0 < hf.peak_flow_time < hf.lvet:
        problems.append(
            f"peak flow time {hf.peak_flow_time:.4f} s must lie in (0, LVET={hf.lvet:.4f} s)"
        )
    if hf.lvet >= period:
        problems.append(f"LVET {hf.lvet:.4f} s must be shorter than the period {period:.4f} s")
    reverse_width = REVERSE_LOBE_FRACTION * period
    if hf.lvet + reverse_width > period:
        problems.append(
            f"reverse-flow lobe ends at {hf.lvet + reverse_width:.4f} s, after the period"
        )
    if not 0.0 <= hf.reverse_flow_fraction < 1.0:
        problems.append("reverse flow fraction must lie in [0, 1)")
    return problems


def inflow_waveform(hf: HeartFunction, t: float | FloatArray) -> float | FloatArray:
    """Aortic root flow ``Q(t)`` over one cardiac period (m^3/s).

    The forward lobe is a time-warped half sine on ``[0, LVET]`` peaking at
    ``PFT``; a half-sine reverse lobe of width ``0.05 T`` follows and carries
    ``RFV * SV``. The forward amplitude is raised by the same volume so that
    the beat integrates to exactly ``SV``. Diastole has zero flow.

    Parameters
    ----------
    hf:
        Heart function in SI units.
    t:
        Time(s) within the period, ``0 <= t < 60/HR``.

    Raises
    ------
    DomainError
        If *hf* violates its ordering rules or *t* is outside the period.
    """
    problems = check_heart_function(hf)
    if problems:
        raise DomainError("; ".join(problems))
    tt = np.asarray(t, dtype=float)
    period = hf.period
    if np.any(tt < 0) or np.any(tt >= period):
        raise DomainError("inflow_waveform expects 0 <= t < 60/HR")

    lvet, pft = hf.lvet, hf.peak_flow_time
    width = REVERSE_LOBE_FRACTION * period
    forward_volume = hf.stroke_volume * (1.0 + hf.reverse_flow_fraction)
    q_max = forward_volume * math.pi / (2.0 * lvet)
    q_rev = hf.reverse_flow_fraction * hf.stroke_volume * math.pi / (2.0 * width)

    # g maps [0, PFT] -> [0, 1/2] and [PFT, LVET] -> [1/2, 1]
    g = np.where(tt <= pft, 0.5 * tt / pft, 0.5 + 0.5 * (tt - pft) / (lvet - pft))
    forward = np.where(tt <= lvet, q_max * np.sin(math.pi * np.clip(g, 0.0, 1.0)), 0.0)
    in_reverse = (tt > lvet) & (tt < lvet + width)
    reverse = np.where(in_reverse, -q_rev * np.sin(math.pi * (tt - lvet) / width), 0.0)
    q = forward + reverse
    if np.ndim(q) == 0:
        return float(q)
    return np.asarray(q, dtype=float)


def periodic_inflow(hf: HeartFunction, t: float) -> float:
    """Inflow at absolute time *t*, extended periodically."""
    return float(inflow_waveform(hf, math.fmod(t, hf.period)))


# ---------------------------------------------------------------------------
# Network transforms and validation
# ---------------------------------------------------------------------------


def scale_network_to_height(
    net: ArterialNetwork, height_cm: float, epsilon_cm: float = 0.0
) -> ArterialNetwork:
    """Scale every segment length by ``(height + epsilon) / 170``.

    Raises
    ------
    DomainError
        If ``height + epsilon`` is not positive.
    """
    total = height_cm + epsilon_cm
    if total <= 0:
        raise DomainError(f"Height plus noise must be positive, got {total:.3f} cm")
    factor = total / REFERENCE_HEIGHT_CM
    segments = {
        sid: seg.model_copy(update={"length": seg.length * factor})
        for sid, seg in net.segments.items()
    }
    return net.model_copy(update={"segments": segments})


def validate_network(net: ArterialNetwork) -> list[str]:
    """Return every structural violation of *net* (empty list when valid)."""
    violations: list[str] = []
    if net.root not in net.segments:
        violations.append(f"root segment '{net.root}' does not exist")

    for sid, seg in net.segments.items():
        if seg.id != sid:
            violations.append(f"segment key '{sid}' does not match its id '{seg.id}'")
        if seg.distal_radius > seg.proximal_radius:
            violations.append(f"segment '{sid}' widens distally (r_d > r_p)")
        for child in seg.children:
            if child not in net.segments:
                violations.append(f"segment '{sid}' references unknown child '{child}'")
        if seg.children and seg.terminal_bed is not None:
            violations.append(f"segment '{sid}' has both children and a terminal bed")
        if not seg.children:
            if seg.terminal_bed is None:
                violations.append(f"segment '{sid}': missing terminal bed")
            elif seg.terminal_bed not in net.beds:
                violations.append(
                    f"segment '{sid}' references unknown bed '{seg.terminal_bed}'"
                )

    for bid, bed in net.beds.items():
        if bed.id != bid:
            violations.append(f"bed key '{bid}' does not match its id '{bed.id}'")

    if net.root in net.segments:
        seen: set[str] = set()
        stack = [net.root]
        cyclic = False
        while stack:
            sid = stack.pop()
            if sid in seen:
                cyclic = True
                continue
            seen.add(sid)
            stack.extend(c for c in net.segments[sid].children if c in net.segments)
        if cyclic:
            violations.append("not a tree: a segment is reachable along two paths")
        unreachable = sorted(set(net.segments) - seen)
        if unreachable:
            violations.append(f"segments unreachable from root: {', '.join(unreachable)}")
    return violations
