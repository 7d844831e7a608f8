"""Characteristic-based coupling at vessel ends.

Each coupling receives the outgoing-characteristic state of the vessel
ends it touches (the Hancock-evolved edge states) and returns the face
states ``(A*, Q*)`` from which boundary fluxes are built.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from hemo_sbi.core.exceptions import CouplingError

logger = logging.getLogger(__name__)

NEWTON_TOLERANCE = 1e-10
NEWTON_MAX_ITERATIONS = 100


@dataclass(frozen=True, slots=True)
class VesselEnd:
    """Interior state and wall properties at one end of a vessel."""

    area: float
    flow: float
    reference_area: float
    beta: float
    external_pressure: float = 0.0

    @property
    def velocity(self) -> float:
        return self.flow / self.area

    def wave_speed(self, density: float, area: float | None = None) -> float:
        a = self.area if area is None else area
        return math.sqrt(self.beta * math.sqrt(a) / (2.0 * density))

    def pressure(self, area: float) -> float:
        """Elastic tube-law pressure at *area*."""
        return self.external_pressure + self.beta * (math.sqrt(area) - math.sqrt(self.reference_area))

    def forward_invariant(self, density: float) -> float:
        """``W1 = u + 4c``, carried towards increasing z."""
        return self.velocity + 4.0 * self.wave_speed(density)

    def backward_invariant(self, density: float) -> float:
        """``W2 = u - 4c``, carried towards decreasing z."""
        return self.velocity - 4.0 * self.wave_speed(density)


@dataclass(frozen=True, slots=True)
class FaceState:
    """Solved boundary face state."""

    area: float
    flow: float


@dataclass(frozen=True)
class JunctionSolution:
    """Face states at a junction and the Newton diagnostics."""

    parent: FaceState
    children: tuple[FaceState, ...]
    iterations: int
    residual: tuple[float, ...]


def _area_from_speed(c: float, beta: float, density: float) -> float:
    """Invert ``c = sqrt(beta sqrt(A) / (2 rho))``."""
    root = 2.0 * density * c * c / beta
    return root * root


def inlet_couple(end: VesselEnd, flow: float, density: float) -> FaceState:
    """Proximal face state for a prescribed inflow *flow*.

    Solves ``flow / A - 4 c(A) = W2`` for ``A`` with the backward invariant
    taken from *end*.
    """
    w2 = end.backward_invariant(density)
    if flow == 0.0:
        return FaceState(area=_area_from_speed(-0.25 * w2, end.beta, density), flow=0.0)
    a = end.area
    for iteration in range(1, NEWTON_MAX_ITERATIONS + 1):
        c = end.wave_speed(density, a)
        f = flow / a - 4.0 * c - w2
        df = -flow / (a * a) - c / a
        step = f / df
        a_new = a - step
        while a_new <= 0:
            step *= 0.5
            a_new = a - step
        a = a_new
        scale = end.wave_speed(density, a)
        if abs(f) / scale < NEWTON_TOLERANCE:
            return FaceState(area=a, flow=flow)
    raise CouplingError("inlet", [f / end.wave_speed(density, a)], iteration)


def closed_end(end: VesselEnd, density: float, *, distal: bool) -> FaceState:
    """Reflecting wall: zero flow, area from the outgoing invariant."""
    if distal:
        c = 0.25 * end.forward_invariant(density)
    else:
        c = -0.25 * end.backward_invariant(density)
    if c <= 0:
        raise CouplingError("closed end", [c], 0)
    return FaceState(area=_area_from_speed(c, end.beta, density), flow=0.0)


def junction_couple(
    parent: VesselEnd, children: list[VesselEnd], density: float
) -> JunctionSolution:
    """Solve the coupling at a branching point.

    Unknowns are the face areas of the parent and each child. Velocities
    follow from the characteristic relations ``u_p = W1_p - 4 c_p`` and
    ``u_k = W2_k + 4 c_k``; the equations are mass conservation and
    continuity of total pressure ``P + rho u^2 / 2`` between the parent and
    every child. Damped Newton with an analytic Jacobian.

    Raises
    ------
    CouplingError
        If the normalized residual is not below ``1e-10`` after 100 iterations.
    """
    if not children:
        raise CouplingError("junction", [], 0)
    m = len(children)
    w1 = parent.forward_invariant(density)
    w2 = np.array([ch.backward_invariant(density) for ch in children])
    betas = np.array([parent.beta] + [ch.beta for ch in children])
    sqrt_a0 = np.sqrt([parent.reference_area] + [ch.reference_area for ch in children])
    pext = np.array([parent.external_pressure] + [ch.external_pressure for ch in children])

    # Fixed residual scales keep the Jacobian consistent across iterations
    c_ref = parent.wave_speed(density)
    mass_scale = parent.area * c_ref
    pressure_scale = density * c_ref * c_ref

    def evaluate(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        c = np.sqrt(betas * np.sqrt(a) / (2.0 * density))
        u = np.empty(m + 1)
        u[0] = w1 - 4.0 * c[0]
        u[1:] = w2 + 4.0 * c[1:]
        total_p = pext + betas * (np.sqrt(a) - sqrt_a0) + 0.5 * density * u * u
        res = np.empty(m + 1)
        res[0] = (a[0] * u[0] - np.dot(a[1:], u[1:])) / mass_scale
        res[1:] = (total_p[0] - total_p[1:]) / pressure_scale
        return res, c, u

    a = np.array([parent.area] + [ch.area for ch in children], dtype=float)
    res, c, u = evaluate(a)
    norm = float(np.max(np.abs(res)))
    iteration = 0
    while norm >= NEWTON_TOLERANCE:
        iteration += 1
        if iteration > NEWTON_MAX_ITERATIONS:
            raise CouplingError("junction", res.tolist(), NEWTON_MAX_ITERATIONS)
        jac = np.zeros((m + 1, m + 1))
        # d(A u)/dA: parent u - c, child u + c (dc/dA = c / 4A)
        jac[0, 0] = (u[0] - c[0]) / mass_scale
        jac[0, 1:] = -(u[1:] + c[1:]) / mass_scale
        dp_dA = betas / (2.0 * np.sqrt(a))
        d_parent = dp_dA[0] - density * u[0] * c[0] / a[0]
        d_child = dp_dA[1:] + density * u[1:] * c[1:] / a[1:]
        jac[1:, 0] = d_parent / pressure_scale
        jac[1:, 1:] = -np.diag(d_child) / pressure_scale
        delta = np.linalg.solve(jac, -res)

        # Damping: keep areas positive and require a residual decrease
        lam = 1.0
        while True:
            trial = a + lam * delta
            if np.all(trial > 0):
                trial_res, trial_c, trial_u = evaluate(trial)
                trial_norm = float(np.max(np.abs(trial_res)))
                if trial_norm < norm or lam < 1e-4:
                    break
            lam *= 0.5
            if lam < 1e-8:
                raise CouplingError("junction", res.tolist(), iteration)
        a, res, c, u, norm = trial, trial_res, trial_c, trial_u, trial_norm

    flows = a * u
    return JunctionSolution(
        parent=FaceState(area=float(a[0]), flow=float(flows[0])),
        children=tuple(FaceState(area=float(a[k]), flow=float(flows[k])) for k in range(1, m + 1)),
        iterations=iteration,
        residual=tuple(float(r) for r in res),
    )
