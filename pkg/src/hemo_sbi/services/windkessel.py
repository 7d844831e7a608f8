"""Three-element Windkessel beds: backward-Euler updates and outlet coupling."""

from __future__ import annotations

from dataclasses import dataclass

from hemo_sbi.core.exceptions import CouplingError, DomainError
from hemo_sbi.schemas.network import WindkesselBed
from hemo_sbi.services.junctions import (
    NEWTON_MAX_ITERATIONS,
    NEWTON_TOLERANCE,
    FaceState,
    VesselEnd,
)


@dataclass(frozen=True, slots=True)
class OutletSolution:
    """Face state at a Windkessel outlet and the updated capacitor pressure."""

    face: FaceState
    capacitor_pressure: float
    outflow: float  # through R2 to the venous side, m^3/s


def _check_dt(dt: float) -> None:
    if dt <= 0:
        raise DomainError(f"Time step must be positive, got {dt}")


def windkessel_outflow(
    bed: WindkesselBed, volume: float, terminal_pressure: float, dt: float
) -> tuple[float, float]:
    """Advance an RCR bed by *dt* under a prescribed terminal pressure.

    ``C dPc/dt = Q_in - (Pc - P_out)/R2`` with ``Q_in = (P_terminal - Pc)/R1``,
    integrated by backward Euler. The stored volume is ``V = C * Pc``.

    Returns
    -------
    tuple[float, float]
        ``(Q_in, V_new)``: flow leaving the network into the bed over the
        step, and the updated stored volume.
    """
    _check_dt(dt)
    c, r1, r2 = bed.compliance, bed.proximal_resistance, bed.distal_resistance
    pc = volume / c
    pc_new = (c * pc / dt + terminal_pressure / r1 + bed.outflow_pressure / r2) / (
        c / dt + 1.0 / r1 + 1.0 / r2
    )
    q_in = (terminal_pressure - pc_new) / r1
    return q_in, c * pc_new


def windkessel_inflow_step(
    bed: WindkesselBed, volume: float, flow: float, dt: float
) -> tuple[float, float]:
    """Advance an RCR bed by *dt* under a prescribed inflow *flow*.

    Returns ``(P_terminal, V_new)`` with ``P_terminal = Pc_new + R1 * flow``.
    """
    _check_dt(dt)
    c, r1, r2 = bed.compliance, bed.proximal_resistance, bed.distal_resistance
    pc = volume / c
    pc_new = (c * pc / dt + flow + bed.outflow_pressure / r2) / (c / dt + 1.0 / r2)
    return pc_new + r1 * flow, c * pc_new


def windkessel_couple(
    end: VesselEnd,
    bed: WindkesselBed,
    capacitor_pressure: float,
    dt: float,
    density: float,
) -> OutletSolution:
    """Solve the distal face of a terminal segment jointly with its bed.

    The face area ``A*`` satisfies ``Q* = A* (W1 - 4 c(A*))`` and
    ``P(A*) - Pc' = R1 Q*`` where ``Pc'`` is the backward-Euler capacitor
    pressure driven by ``Q*``. The residual is monotone in ``A*`` for
    subcritical flow so plain Newton converges.
    """
    _check_dt(dt)
    c_bed, r1, r2 = bed.compliance, bed.proximal_resistance, bed.distal_resistance
    w1 = end.forward_invariant(density)
    denom = c_bed / dt + 1.0 / r2
    pressure_scale = density * end.wave_speed(density) ** 2

    a = end.area
    g = 0.0
    for iteration in range(1, NEWTON_MAX_ITERATIONS + 1):
        c = end.wave_speed(density, a)
        u = w1 - 4.0 * c
        q = a * u
        pc_new = (c_bed * capacitor_pressure / dt + q + bed.outflow_pressure / r2) / denom
        g = end.pressure(a) - pc_new - r1 * q
        if abs(g) / pressure_scale < NEWTON_TOLERANCE:
            return OutletSolution(
                face=FaceState(area=a, flow=q),
                capacitor_pressure=pc_new,
                outflow=(pc_new - bed.outflow_pressure) / r2,
            )
        dq = u - c
        dg = end.beta / (2.0 * a**0.5) - dq * (1.0 / denom + r1)
        step = g / dg
        a_new = a - step
        while a_new <= 0:
            step *= 0.5
            a_new = a - step
        a = a_new
    raise CouplingError("windkessel outlet", [g / pressure_scale], NEWTON_MAX_ITERATIONS)
