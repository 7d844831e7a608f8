"""MUSCL-Hancock finite-volume solver for 1D blood flow on a network.

All segments are discretized into one concatenated cell array. Interior
faces use an approximate Riemann solver (HLL or local Lax-Friedrichs);
segment ends are closed by the characteristic couplings in
:mod:`hemo_sbi.services.junctions` and :mod:`hemo_sbi.services.windkessel`.
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable
from dataclasses import dataclass, replace

import numpy as np
import numpy.typing as npt

from hemo_sbi.core.exceptions import (
    DomainError,
    NetworkConfigError,
    StabilityError,
    StepSizeError,
)
from hemo_sbi.schemas.network import ArterialNetwork, HeartFunction, WindkesselBed
from hemo_sbi.schemas.solver import (
    FluxScheme,
    ProbeQuantity,
    ProbeRequest,
    SimulationDiagnostics,
    SimulationResult,
    SolverConfig,
)
from hemo_sbi.services.junctions import (
    FaceState,
    VesselEnd,
    closed_end,
    inlet_couple,
    junction_couple,
)
from hemo_sbi.services.vascular_model import (
    check_heart_function,
    elastic_beta,
    periodic_inflow,
    validate_network,
)
from hemo_sbi.services.windkessel import windkessel_couple

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]
InflowFn = Callable[[float], float]

# Points per beat used to compare consecutive root-pressure traces
_TRACE_POINTS = 100


# ---------------------------------------------------------------------------
# Discretization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SegmentGrid:
    """Cell range and end properties of one segment."""

    segment_id: str
    index: int
    first_cell: int
    n_cells: int
    dx: float
    length: float
    area0_in: float
    beta_in: float
    area0_out: float
    beta_out: float
    external_pressure: float

    @property
    def cells(self) -> slice:
        return slice(self.first_cell, self.first_cell + self.n_cells)

    @property
    def last_cell(self) -> int:
        return self.first_cell + self.n_cells - 1

    @property
    def first_face(self) -> int:
        return self.first_cell + self.index

    @property
    def last_face(self) -> int:
        return self.first_face + self.n_cells


@dataclass(frozen=True, eq=False)
class DiscreteNetwork:
    """Flattened finite-volume representation of an :class:`ArterialNetwork`."""

    network: ArterialNetwork
    config: SolverConfig
    grids: tuple[SegmentGrid, ...]
    index: dict[str, int]
    # Per-cell geometry
    dx: FloatArray
    z: FloatArray
    area0: FloatArray
    sqrt_area0: FloatArray
    beta: FloatArray
    gamma: FloatArray
    dbeta_dz: FloatArray
    dsqrt_area0_dz: FloatArray
    external_pressure: FloatArray
    segment_of_cell: npt.NDArray[np.int64]
    is_end_cell: npt.NDArray[np.bool_]
    # Faces strictly inside a segment
    interior_left: npt.NDArray[np.int64]
    interior_right: npt.NDArray[np.int64]
    interior_face: npt.NDArray[np.int64]
    # Topology
    junctions: tuple[tuple[int, tuple[int, ...]], ...]
    bed_ids: tuple[str, ...]
    bed_of_segment: dict[int, int]
    closed_outlets: tuple[int, ...]
    has_wall_viscosity: bool

    @property
    def n_cells(self) -> int:
        return int(self.dx.size)

    @property
    def n_faces(self) -> int:
        return self.n_cells + len(self.grids)

    @property
    def root(self) -> SegmentGrid:
        return self.grids[0]

    def bed(self, b: int) -> WindkesselBed:
        return self.network.beds[self.bed_ids[b]]


def _preorder(net: ArterialNetwork) -> list[str]:
    order: list[str] = []
    seen: set[str] = set()
    stack = [net.root]
    while stack:
        sid = stack.pop()
        if sid in seen or sid not in net.segments:
            continue
        seen.add(sid)
        order.append(sid)
        stack.extend(reversed(net.segments[sid].children))
    return order


def build_discrete_network(net: ArterialNetwork, cfg: SolverConfig) -> DiscreteNetwork:
    """Discretize *net* into cells of about ``cfg.cell_length``.

    Leaves without a terminal bed are treated as closed (reflecting) ends.
    """
    if net.root not in net.segments:
        raise NetworkConfigError(f"Root segment '{net.root}' does not exist")
    order = _preorder(net)
    index = {sid: k for k, sid in enumerate(order)}

    grids: list[SegmentGrid] = []
    cols: dict[str, list[FloatArray]] = {
        k: []
        for k in ("dx", "z", "area0", "beta", "gamma", "dbeta", "dsqrt", "pext")
    }
    seg_of_cell: list[npt.NDArray[np.int64]] = []
    end_cell: list[npt.NDArray[np.bool_]] = []
    first = 0
    for k, sid in enumerate(order):
        seg = net.segments[sid]
        n = max(cfg.cells_per_segment_min, math.ceil(seg.length / cfg.cell_length - 1e-9))
        dx = seg.length / n
        z = (np.arange(n) + 0.5) * dx
        drdz = (seg.distal_radius - seg.proximal_radius) / seg.length
        r = seg.proximal_radius + drdz * z
        a0 = math.pi * r * r
        eh = seg.elastic_modulus * seg.wall_thickness
        beta = (4.0 / 3.0) * math.sqrt(math.pi) * eh / a0
        gamma = (2.0 / 3.0) * math.sqrt(math.pi) * seg.wall_viscosity * seg.wall_thickness / a0
        cols["dx"].append(np.full(n, dx))
        cols["z"].append(z)
        cols["area0"].append(a0)
        cols["beta"].append(beta)
        cols["gamma"].append(gamma)
        # beta ~ 1/r^2 and sqrt(A0) = sqrt(pi) r
        cols["dbeta"].append(-2.0 * beta / r * drdz)
        cols["dsqrt"].append(np.full(n, math.sqrt(math.pi) * drdz))
        cols["pext"].append(np.full(n, seg.external_pressure))
        seg_of_cell.append(np.full(n, k, dtype=np.int64))
        ends = np.zeros(n, dtype=bool)
        ends[[0, -1]] = True
        end_cell.append(ends)

        a_in, a_out = seg.reference_area_at(0.0), seg.reference_area_at(seg.length)
        grids.append(
            SegmentGrid(
                segment_id=sid,
                index=k,
                first_cell=first,
                n_cells=n,
                dx=dx,
                length=seg.length,
                area0_in=a_in,
                beta_in=elastic_beta(seg.elastic_modulus, seg.wall_thickness, a_in),
                area0_out=a_out,
                beta_out=elastic_beta(seg.elastic_modulus, seg.wall_thickness, a_out),
                external_pressure=seg.external_pressure,
            )
        )
        first += n

    left: list[int] = []
    right: list[int] = []
    faces: list[int] = []
    for g in grids:
        for j in range(1, g.n_cells):
            left.append(g.first_cell + j - 1)
            right.append(g.first_cell + j)
            faces.append(g.first_face + j)

    junctions: list[tuple[int, tuple[int, ...]]] = []
    bed_ids: list[str] = []
    bed_of_segment: dict[int, int] = {}
    closed: list[int] = []
    for sid in order:
        seg = net.segments[sid]
        kids = tuple(index[c] for c in seg.children if c in index)
        if kids:
            junctions.append((index[sid], kids))
        elif seg.terminal_bed is not None and seg.terminal_bed in net.beds:
            bed_of_segment[index[sid]] = len(bed_ids)
            bed_ids.append(seg.terminal_bed)
        else:
            closed.append(index[sid])

    gamma_all = np.concatenate(cols["gamma"])
    model = DiscreteNetwork(
        network=net,
        config=cfg,
        grids=tuple(grids),
        index=index,
        dx=np.concatenate(cols["dx"]),
        z=np.concatenate(cols["z"]),
        area0=np.concatenate(cols["area0"]),
        sqrt_area0=np.sqrt(np.concatenate(cols["area0"])),
        beta=np.concatenate(cols["beta"]),
        gamma=gamma_all,
        dbeta_dz=np.concatenate(cols["dbeta"]),
        dsqrt_area0_dz=np.concatenate(cols["dsqrt"]),
        external_pressure=np.concatenate(cols["pext"]),
        segment_of_cell=np.concatenate(seg_of_cell),
        is_end_cell=np.concatenate(end_cell),
        interior_left=np.asarray(left, dtype=np.int64),
        interior_right=np.asarray(right, dtype=np.int64),
        interior_face=np.asarray(faces, dtype=np.int64),
        junctions=tuple(junctions),
        bed_ids=tuple(bed_ids),
        bed_of_segment=bed_of_segment,
        closed_outlets=tuple(closed),
        has_wall_viscosity=bool(np.any(gamma_all > 0)),
    )
    logger.debug(
        "Discretized %d segments into %d cells (%d beds, %d junctions)",
        len(grids),
        model.n_cells,
        len(bed_ids),
        len(junctions),
    )
    return model


# ---------------------------------------------------------------------------
# State
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NetworkState:
    """Cell averages, bed pressures and conservation counters at one time."""

    area: FloatArray
    flow: FloatArray
    dA_dt: FloatArray
    capacitor_pressure: FloatArray
    time: float = 0.0
    inflow_volume: float = 0.0
    outflow_volume: float = 0.0
    steps: int = 0

    def bed_volumes(self, model: DiscreteNetwork) -> FloatArray:
        """Stored volume ``C * Pc`` of every bed (m^3)."""
        c = np.array([model.bed(b).compliance for b in range(len(model.bed_ids))])
        return c * self.capacitor_pressure


def total_volume(model: DiscreteNetwork, state: NetworkState) -> float:
    """Blood in all cells plus all bed capacitors (m^3)."""
    return float(np.sum(state.area * model.dx) + np.sum(state.bed_volumes(model)))


def initial_state(model: DiscreteNetwork, mean_flow: float = 0.0) -> NetworkState:
    """Steady state carrying *mean_flow* through the beds.

    The network starts at the uniform pressure that drives *mean_flow*
    through the parallel bed resistances; each capacitor sits at the
    pressure of its distal resistor and segment flows are the sums of the
    bed flows downstream of them.
    """
    beds = [model.bed(b) for b in range(len(model.bed_ids))]
    if beds:
        conductance = sum(1.0 / (b.proximal_resistance + b.distal_resistance) for b in beds)
        driven = sum(
            b.outflow_pressure / (b.proximal_resistance + b.distal_resistance) for b in beds
        )
        p_init = (mean_flow + driven) / conductance
    else:
        p_init = 0.0

    bed_flow = np.array(
        [(p_init - b.outflow_pressure) / (b.proximal_resistance + b.distal_resistance) for b in beds]
    )
    pc = np.array(
        [b.outflow_pressure + b.distal_resistance * q for b, q in zip(beds, bed_flow)]
    )

    seg_flow = np.zeros(len(model.grids))
    for k in reversed(range(len(model.grids))):
        if k in model.bed_of_segment:
            seg_flow[k] = bed_flow[model.bed_of_segment[k]]
    for parent, kids in reversed(model.junctions):
        seg_flow[parent] = sum(seg_flow[c] for c in kids)

    root = np.sqrt(model.area0) + (p_init - model.external_pressure) / model.beta
    if np.any(root <= 0):
        raise DomainError("Initial pressure collapses a vessel")
    area = root * root
    flow = seg_flow[model.segment_of_cell]
    return NetworkState(
        area=area,
        flow=flow.astype(float),
        dA_dt=np.zeros_like(area),
        capacitor_pressure=pc.astype(float),
    )


def cell_pressure(model: DiscreteNetwork, state: NetworkState) -> FloatArray:
    """Visco-elastic tube-law pressure in every cell (Pa)."""
    sqrt_a = np.sqrt(state.area)
    return (
        model.external_pressure
        + model.beta * (sqrt_a - model.sqrt_area0)
        + model.gamma / sqrt_a * state.dA_dt
    )


# ---------------------------------------------------------------------------
# Fluxes and sources
# ---------------------------------------------------------------------------


def physical_flux(
    area: FloatArray, flow: FloatArray, beta: FloatArray | float, density: float, alpha: float
) -> tuple[FloatArray, FloatArray]:
    """Return ``(Q, alpha Q^2/A + beta A^{3/2} / (3 rho))``."""
    return flow, alpha * flow * flow / area + beta * area**1.5 / (3.0 * density)


def _numerical_flux(
    scheme: FluxScheme,
    a_l: FloatArray,
    q_l: FloatArray,
    a_r: FloatArray,
    q_r: FloatArray,
    beta: FloatArray,
    density: float,
    alpha: float,
) -> tuple[FloatArray, FloatArray]:
    f1_l, f2_l = physical_flux(a_l, q_l, beta, density, alpha)
    f1_r, f2_r = physical_flux(a_r, q_r, beta, density, alpha)
    u_l, u_r = q_l / a_l, q_r / a_r
    c_l = np.sqrt(beta * np.sqrt(a_l) / (2.0 * density))
    c_r = np.sqrt(beta * np.sqrt(a_r) / (2.0 * density))

    if scheme is FluxScheme.LOCAL_LAX_FRIEDRICHS:
        s = np.maximum(np.abs(u_l) + c_l, np.abs(u_r) + c_r)
        return (
            0.5 * (f1_l + f1_r) - 0.5 * s * (a_r - a_l),
            0.5 * (f2_l + f2_r) - 0.5 * s * (q_r - q_l),
        )

    s_l = np.minimum(u_l - c_l, u_r - c_r)
    s_r = np.maximum(u_l + c_l, u_r + c_r)
    width = s_r - s_l
    hll1 = (s_r * f1_l - s_l * f1_r + s_l * s_r * (a_r - a_l)) / width
    hll2 = (s_r * f2_l - s_l * f2_r + s_l * s_r * (q_r - q_l)) / width
    f1 = np.where(s_l >= 0, f1_l, np.where(s_r <= 0, f1_r, hll1))
    f2 = np.where(s_l >= 0, f2_l, np.where(s_r <= 0, f2_r, hll2))
    return f1, f2


def _momentum_source(
    model: DiscreteNetwork, area: FloatArray, flow: FloatArray, dA_dt: FloatArray
) -> FloatArray:
    """Friction, taper and (operator-split) wall-viscosity terms."""
    blood = model.network.blood
    rho = blood.density
    s = -blood.friction_coefficient * flow / area
    s -= (area / rho) * ((2.0 / 3.0) * np.sqrt(area) - model.sqrt_area0) * model.dbeta_dz
    s += (area * model.beta / rho) * model.dsqrt_area0_dz
    if model.has_wall_viscosity:
        g = model.gamma / np.sqrt(area) * dA_dt
        dg = np.empty_like(g)
        for grid in model.grids:
            dg[grid.cells] = np.gradient(g[grid.cells], grid.dx)
        s -= (area / rho) * dg
    return s


def _minmod(a: FloatArray, b: FloatArray) -> FloatArray:
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _limited_slopes(model: DiscreteNetwork, u: FloatArray) -> FloatArray:
    diff = np.diff(u)
    back = np.zeros_like(u)
    fwd = np.zeros_like(u)
    back[1:] = diff
    fwd[:-1] = diff
    slope = _minmod(back, fwd)
    slope[model.is_end_cell] = 0.0
    return slope


def stable_time_step(model: DiscreteNetwork, state: NetworkState) -> float:
    """Largest admissible step: CFL times the wave and wall-diffusion limits."""
    rho = model.network.blood.density
    a = state.area
    c = np.sqrt(model.beta * np.sqrt(a) / (2.0 * rho))
    dt = float(np.min(model.dx / (np.abs(state.flow / a) + c)))
    if model.has_wall_viscosity:
        diffusivity = model.gamma * np.sqrt(a) / rho
        mask = diffusivity > 0
        if np.any(mask):
            dt = min(dt, float(np.min(model.dx[mask] ** 2 / (2.0 * diffusivity[mask]))))
    return model.config.cfl_number * dt


# ---------------------------------------------------------------------------
# Time step
# ---------------------------------------------------------------------------


def step(
    model: DiscreteNetwork,
    state: NetworkState,
    dt: float,
    inflow: InflowFn | None = None,
) -> NetworkState:
    """Advance *state* by *dt* with one MUSCL-Hancock step.

    Parameters
    ----------
    model:
        Discretized network.
    state:
        Current state; not modified.
    dt:
        Step size (s). Must not exceed :func:`stable_time_step`.
    inflow:
        Root inflow ``Q(t)``; ``None`` closes the proximal end of the root.

    Raises
    ------
    StepSizeError
        If *dt* violates the CFL condition.
    StabilityError
        If any updated area is not positive.
    """
    dt_max = stable_time_step(model, state)
    if dt <= 0 or dt > dt_max * (1.0 + 1e-9):
        raise StepSizeError(dt, dt_max)

    blood = model.network.blood
    rho, alpha = blood.density, blood.coriolis_coefficient
    a, q = state.area, state.flow
    dx = model.dx

    # Reconstruction, first order where an edge would lose positivity
    sa = _limited_slopes(model, a)
    sq = _limited_slopes(model, q)
    flat = (a - 0.5 * sa <= 0) | (a + 0.5 * sa <= 0)
    sa[flat] = 0.0
    sq[flat] = 0.0
    a_l, a_r = a - 0.5 * sa, a + 0.5 * sa
    q_l, q_r = q - 0.5 * sq, q + 0.5 * sq

    # Hancock half-step predictor
    f1_l, f2_l = physical_flux(a_l, q_l, model.beta, rho, alpha)
    f1_r, f2_r = physical_flux(a_r, q_r, model.beta, rho, alpha)
    src = _momentum_source(model, a, q, state.dA_dt)
    da = 0.5 * dt / dx * (f1_l - f1_r)
    dq = 0.5 * dt / dx * (f2_l - f2_r) + 0.5 * dt * src
    a_l, a_r, q_l, q_r = a_l + da, a_r + da, q_l + dq, q_r + dq
    bad = (a_l <= 0) | (a_r <= 0)
    if np.any(bad):
        a_l[bad], a_r[bad] = a[bad], a[bad]
        q_l[bad], q_r[bad] = q[bad], q[bad]

    f1 = np.zeros(model.n_faces)
    f2 = np.zeros(model.n_faces)
    il, ir = model.interior_left, model.interior_right
    face_beta = 0.5 * (model.beta[il] + model.beta[ir])
    f1[model.interior_face], f2[model.interior_face] = _numerical_flux(
        model.config.flux, a_r[il], q_r[il], a_l[ir], q_l[ir], face_beta, rho, alpha
    )

    def set_face(face: int, fs: FaceState, beta: float, mass: float | None = None) -> None:
        f1[face] = fs.flow if mass is None else mass
        f2[face] = alpha * fs.flow * fs.flow / fs.area + beta * fs.area**1.5 / (3.0 * rho)

    def proximal_end(g: SegmentGrid) -> VesselEnd:
        c = g.first_cell
        return VesselEnd(a_l[c], q_l[c], g.area0_in, g.beta_in, g.external_pressure)

    def distal_end(g: SegmentGrid) -> VesselEnd:
        c = g.last_cell
        return VesselEnd(a_r[c], q_r[c], g.area0_out, g.beta_out, g.external_pressure)

    t_half = state.time + 0.5 * dt
    root = model.root
    q_in = inflow(t_half) if inflow is not None else 0.0
    if inflow is None:
        face = closed_end(proximal_end(root), rho, distal=False)
    else:
        face = inlet_couple(proximal_end(root), q_in, rho)
    set_face(root.first_face, face, root.beta_in)

    for parent, kids in model.junctions:
        pg = model.grids[parent]
        sol = junction_couple(distal_end(pg), [proximal_end(model.grids[k]) for k in kids], rho)
        # Parent mass flux equals the children's total so mass is conserved exactly
        set_face(pg.last_face, sol.parent, pg.beta_out, mass=sum(c.flow for c in sol.children))
        for k, fs in zip(kids, sol.children):
            cg = model.grids[k]
            set_face(cg.first_face, fs, cg.beta_in)

    pc_new = state.capacitor_pressure.copy()
    outflow = 0.0
    for k, b in model.bed_of_segment.items():
        g = model.grids[k]
        sol_out = windkessel_couple(
            distal_end(g), model.bed(b), float(state.capacitor_pressure[b]), dt, rho
        )
        set_face(g.last_face, sol_out.face, g.beta_out)
        pc_new[b] = sol_out.capacitor_pressure
        outflow += sol_out.outflow

    for k in model.closed_outlets:
        g = model.grids[k]
        set_face(g.last_face, closed_end(distal_end(g), rho, distal=True), g.beta_out)

    # Conservative update with the source at the half-step state
    left_face = np.arange(model.n_cells) + model.segment_of_cell
    a_half, q_half = 0.5 * (a_l + a_r), 0.5 * (q_l + q_r)
    src_half = _momentum_source(model, a_half, q_half, state.dA_dt)
    a_new = a - dt / dx * (f1[left_face + 1] - f1[left_face])
    q_new = q - dt / dx * (f2[left_face + 1] - f2[left_face]) + dt * src_half

    nonpositive = np.flatnonzero(a_new <= 0)
    if nonpositive.size:
        cell = int(nonpositive[0])
        g = model.grids[int(model.segment_of_cell[cell])]
        raise StabilityError(
            g.segment_id,
            cell - g.first_cell,
            snapshot={
                "time": state.time,
                "dt": dt,
                "area": a_new[g.cells].tolist(),
                "flow": q_new[g.cells].tolist(),
            },
        )

    return replace(
        state,
        area=a_new,
        flow=q_new,
        dA_dt=(a_new - a) / dt,
        capacitor_pressure=pc_new,
        time=state.time + dt,
        inflow_volume=state.inflow_volume + q_in * dt,
        outflow_volume=state.outflow_volume + outflow * dt,
        steps=state.steps + 1,
    )


# ---------------------------------------------------------------------------
# Probes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _ProbePlan:
    quantity: ProbeQuantity
    i0: int
    i1: int
    weight: float
    bed: int | None


def _plan_probe(model: DiscreteNetwork, probe: ProbeRequest) -> _ProbePlan:
    if probe.segment_id not in model.index:
        raise NetworkConfigError(f"Probe references unknown segment '{probe.segment_id}'")
    g = model.grids[model.index[probe.segment_id]]
    bed = model.bed_of_segment.get(g.index)
    if probe.quantity is ProbeQuantity.BED_VOLUME and bed is None:
        raise NetworkConfigError(f"Segment '{probe.segment_id}' has no terminal bed to probe")
    # Linear interpolation between cell centres, clamped at the ends
    s = probe.position * g.n_cells - 0.5
    s = min(max(s, 0.0), g.n_cells - 1.0)
    j0 = min(int(math.floor(s)), g.n_cells - 1)
    j1 = min(j0 + 1, g.n_cells - 1)
    return _ProbePlan(probe.quantity, g.first_cell + j0, g.first_cell + j1, s - j0, bed)


def _sample_probes(
    model: DiscreteNetwork, state: NetworkState, plans: list[_ProbePlan]
) -> list[float]:
    pressure: FloatArray | None = None
    volumes: FloatArray | None = None
    out: list[float] = []
    for plan in plans:
        if plan.quantity is ProbeQuantity.BED_VOLUME:
            if volumes is None:
                volumes = state.bed_volumes(model)
            assert plan.bed is not None
            out.append(float(volumes[plan.bed]))
            continue
        if plan.quantity is ProbeQuantity.PRESSURE:
            if pressure is None:
                pressure = cell_pressure(model, state)
            values = pressure
        elif plan.quantity is ProbeQuantity.FLOW:
            values = state.flow
        else:
            values = state.area
        v0, v1 = values[plan.i0], values[plan.i1]
        out.append(float(v0 + plan.weight * (v1 - v0)))
    return out


# ---------------------------------------------------------------------------
# Full simulation
# ---------------------------------------------------------------------------


def run_simulation(
    net: ArterialNetwork,
    hf: HeartFunction,
    cfg: SolverConfig,
    probes: list[ProbeRequest],
) -> SimulationResult:
    """Simulate beats until periodic (or ``cfg.duration``) and sample probes.

    Beats are integrated one at a time, landing exactly on beat boundaries.
    After each beat the root pressure trace is compared with the previous
    one; the run stops once the largest change is below
    ``cfg.periodicity_tolerance`` and the transient beats have passed.
    Non-convergence is reported in the diagnostics, not raised.

    Raises
    ------
    NetworkConfigError
        If the network is invalid or a probe cannot be placed.
    DomainError
        If the heart function violates its ordering rules.
    StepSizeError, StabilityError, CouplingError
        On numerical failure.
    """
    violations = validate_network(net)
    if violations:
        raise NetworkConfigError("; ".join(violations))
    problems = check_heart_function(hf)
    if problems:
        raise DomainError("; ".join(problems))

    started = time.perf_counter()
    model = build_discrete_network(net, cfg)
    plans = [_plan_probe(model, p) for p in probes]
    first = model.root.first_cell
    root_plan = _ProbePlan(ProbeQuantity.PRESSURE, first, first, 0.0, None)

    state = initial_state(model, hf.mean_flow)
    volume0 = total_volume(model, state)
    period = hf.period

    def inflow(t: float) -> float:
        return periodic_inflow(hf, t)

    times = [0.0]
    records = [_sample_probes(model, state, plans)]
    root_p = [_sample_probes(model, state, [root_plan])[0]]

    max_beats = max(1, int(math.floor(cfg.duration / period + 1e-9)))
    prev_trace: FloatArray | None = None
    change = math.inf
    changes: list[float] = []
    converged = False
    beats_done = 0
    for beat in range(max_beats):
        beat_start_index = len(times) - 1
        t_end = (beat + 1) * period
        while t_end - state.time > 1e-12 * period:
            remaining = t_end - state.time
            # Equal steps landing exactly on the beat boundary
            dt = remaining / math.ceil(remaining / stable_time_step(model, state))
            state = step(model, state, dt, inflow)
            times.append(state.time)
            records.append(_sample_probes(model, state, plans))
            root_p.append(_sample_probes(model, state, [root_plan])[0])
        beats_done = beat + 1

        bt = np.asarray(times[beat_start_index:])
        bp = np.asarray(root_p[beat_start_index:])
        grid = beat * period + np.arange(_TRACE_POINTS) * (period / _TRACE_POINTS)
        trace = np.interp(grid, bt, bp)
        if prev_trace is not None:
            change = float(np.max(np.abs(trace - prev_trace)))
            changes.append(change)
            logger.debug("Beat %d: max root pressure change %.3f Pa", beats_done, change)
            if beats_done > cfg.transient_beats_to_discard and change < cfg.periodicity_tolerance:
                converged = True
                if cfg.stop_when_periodic:
                    break
        prev_trace = trace

    if not converged:
        logger.warning(
            "No periodic state after %d beats (last change %.3f Pa)", beats_done, change
        )

    first_kept = min(cfg.transient_beats_to_discard, beats_done - 1)
    kept = beats_done - first_kept
    fs = cfg.output_sample_rate
    n_samples = int(round(kept * period * fs))
    t_start = first_kept * period
    t_out = t_start + np.arange(n_samples) / fs
    t_arr = np.asarray(times)
    rec = np.asarray(records, dtype=float).reshape(len(times), len(plans))
    series = np.zeros((len(plans), n_samples))
    for j in range(len(plans)):
        series[j] = np.interp(t_out, t_arr, rec[:, j])
    boundaries = tuple(int(round(k * period * fs)) for k in range(kept + 1))

    balance = total_volume(model, state) - volume0 - (state.inflow_volume - state.outflow_volume)
    diagnostics = SimulationDiagnostics(
        converged=converged,
        beats_simulated=beats_done,
        max_beat_pressure_change=change,
        beat_pressure_changes=tuple(changes),
        mass_drift=abs(balance) / volume0,
        steps=state.steps,
        wall_time=time.perf_counter() - started,
    )
    logger.info(
        "Simulated %d beats in %d steps (converged=%s, mass drift %.2e)",
        beats_done,
        state.steps,
        converged,
        diagnostics.mass_drift,
    )
    return SimulationResult(
        probe_names=tuple(p.name for p in probes),
        series=series,
        sample_rate=fs,
        period=period,
        beat_boundaries=boundaries,
        diagnostics=diagnostics,
        start_time=t_start,
    )
