"""Tests for the MUSCL-Hancock network solver."""

from __future__ import annotations

import math

import numpy as np
import pytest

from hemo_sbi.core.exceptions import DomainError, NetworkConfigError, StepSizeError
from hemo_sbi.schemas.solver import FluxScheme, ProbeQuantity, ProbeRequest
from hemo_sbi.services.solver import (
    build_discrete_network,
    cell_pressure,
    initial_state,
    run_simulation,
    stable_time_step,
    step,
    total_volume,
)
from hemo_sbi.services.vascular_model import periodic_inflow
from tests.conftest import (
    bifurcation_network,
    fast_solver_config,
    make_heart_function,
    reference_wave_speed,
    single_vessel_network,
)


class TestDiscretization:
    """Cells, faces and topology of the flattened network."""

    def test_cell_count_follows_cell_length(self) -> None:
        model = build_discrete_network(single_vessel_network(length=0.4), fast_solver_config())
        assert model.n_cells == 20
        assert model.n_faces == 21
        assert model.dx == pytest.approx(np.full(20, 0.02))

    def test_minimum_cells_per_segment(self) -> None:
        model = build_discrete_network(single_vessel_network(length=0.05), fast_solver_config())
        assert model.n_cells == 8

    def test_bifurcation_topology(self) -> None:
        model = build_discrete_network(bifurcation_network(), fast_solver_config())
        assert model.root.segment_id == "parent"
        assert len(model.junctions) == 1
        parent, kids = model.junctions[0]
        assert parent == model.index["parent"]
        assert sorted(kids) == sorted([model.index["left"], model.index["right"]])
        assert set(model.bed_ids) == {"left_bed", "right_bed"}

    def test_missing_root(self) -> None:
        net = single_vessel_network().model_copy(update={"root": "nowhere"})
        with pytest.raises(NetworkConfigError):
            build_discrete_network(net, fast_solver_config())


class TestState:
    """Initial state and pressure evaluation."""

    def test_zero_flow_state_is_at_reference_area(self) -> None:
        model = build_discrete_network(single_vessel_network(), fast_solver_config())
        state = initial_state(model, 0.0)
        assert state.area == pytest.approx(model.area0)
        assert np.all(state.flow == 0.0)
        assert cell_pressure(model, state) == pytest.approx(np.zeros(model.n_cells), abs=1e-9)

    def test_mean_flow_state_distributes_flow(self) -> None:
        model = build_discrete_network(bifurcation_network(), fast_solver_config())
        q = 5e-5
        state = initial_state(model, q)
        parent = model.grids[model.index["parent"]]
        left = model.grids[model.index["left"]]
        assert state.flow[parent.cells] == pytest.approx(np.full(parent.n_cells, q))
        assert state.flow[left.cells] == pytest.approx(np.full(left.n_cells, q / 2))
        assert np.all(cell_pressure(model, state) > 0)


class TestStep:
    """Single MUSCL-Hancock steps."""

    def test_stable_step_at_rest_is_cfl_times_dx_over_c(self) -> None:
        cfg = fast_solver_config()
        model = build_discrete_network(single_vessel_network(), cfg)
        dt = stable_time_step(model, initial_state(model, 0.0))
        assert dt == pytest.approx(cfg.cfl_number * 0.02 / reference_wave_speed(), rel=1e-9)

    def test_rest_is_preserved(self) -> None:
        model = build_discrete_network(single_vessel_network(), fast_solver_config())
        state = initial_state(model, 0.0)
        dt = stable_time_step(model, state)
        for _ in range(50):
            state = step(model, state, dt)
        assert state.area == pytest.approx(model.area0, rel=1e-12)
        assert np.max(np.abs(state.flow)) < 1e-15

    def test_cfl_violation_raises(self) -> None:
        model = build_discrete_network(single_vessel_network(), fast_solver_config())
        state = initial_state(model, 0.0)
        with pytest.raises(StepSizeError):
            step(model, state, 1.5 * stable_time_step(model, state))

    @pytest.mark.parametrize("flux", [FluxScheme.HLL, FluxScheme.LOCAL_LAX_FRIEDRICHS])
    def test_mass_is_conserved(self, flux: FluxScheme) -> None:
        net = bifurcation_network()
        model = build_discrete_network(net, fast_solver_config(flux=flux))
        hf = make_heart_function()
        state = initial_state(model, hf.mean_flow)
        v0 = total_volume(model, state)
        for _ in range(300):
            dt = stable_time_step(model, state)
            state = step(model, state, dt, lambda t: periodic_inflow(hf, t))
        balance = total_volume(model, state) - v0 - (state.inflow_volume - state.outflow_volume)
        assert abs(balance) / v0 < 1e-10
        assert state.steps == 300

    def test_wall_viscosity_limits_step(self) -> None:
        cfg = fast_solver_config()
        elastic = build_discrete_network(single_vessel_network(), cfg)
        viscous = build_discrete_network(single_vessel_network(wall_viscosity=5e4), cfg)
        s_e, s_v = initial_state(elastic, 0.0), initial_state(viscous, 0.0)
        assert stable_time_step(viscous, s_v) < stable_time_step(elastic, s_e)

    def test_inflow_raises_root_pressure(self) -> None:
        model = build_discrete_network(single_vessel_network(), fast_solver_config())
        state = initial_state(model, 0.0)
        for _ in range(5):
            state = step(model, state, stable_time_step(model, state), lambda t: 5e-5)
        p = cell_pressure(model, state)
        assert p[0] > 0
        assert state.flow[0] > 0


class TestRunSimulation:
    """Whole-run behaviour on a single vessel."""

    def test_result_layout(self) -> None:
        hf = make_heart_function()
        probes = [
            ProbeRequest(segment_id="vessel", position=0.5, label="mid"),
            ProbeRequest(segment_id="vessel", quantity=ProbeQuantity.FLOW, position=0.0),
            ProbeRequest(segment_id="vessel", quantity=ProbeQuantity.BED_VOLUME, label="vol"),
        ]
        cfg = fast_solver_config(duration=4.0, transient_beats_to_discard=2, stop_when_periodic=False)
        result = run_simulation(single_vessel_network(), hf, cfg, probes)
        assert result.probe_names == ("mid", "vessel@0:flow", "vol")
        assert result.diagnostics.beats_simulated == 5
        kept_beats = 3
        assert result.n_samples == int(round(kept_beats * hf.period * cfg.output_sample_rate))
        assert result.beat_boundaries == (0, 100, 200, 300)
        assert result.start_time == pytest.approx(2 * hf.period)
        assert result.diagnostics.mass_drift < 1e-8
        changes = result.diagnostics.beat_pressure_changes
        assert len(changes) == 4
        assert changes[-1] == result.diagnostics.max_beat_pressure_change

    def test_pressure_is_pulsatile_and_physiological(self) -> None:
        hf = make_heart_function()
        cfg = fast_solver_config(duration=6.0, transient_beats_to_discard=3)
        result = run_simulation(
            single_vessel_network(), hf, cfg, [ProbeRequest(segment_id="vessel", position=0.0, label="root")]
        )
        beat = result.last_beat("root", 100) / 133.322387415
        assert beat.max() - beat.min() > 5.0
        assert 10.0 < beat.mean() < 200.0

    def test_last_beat_resampling_length(self) -> None:
        hf = make_heart_function()
        result = run_simulation(
            single_vessel_network(),
            hf,
            fast_solver_config(),
            [ProbeRequest(segment_id="vessel", label="p")],
        )
        assert result.last_beat("p", 37).shape == (37,)

    def test_invalid_heart_function(self) -> None:
        hf = make_heart_function(peak_flow_time=0.4)
        with pytest.raises(DomainError):
            run_simulation(single_vessel_network(), hf, fast_solver_config(), [])

    def test_unknown_probe_segment(self) -> None:
        with pytest.raises(NetworkConfigError, match="unknown segment"):
            run_simulation(
                single_vessel_network(),
                make_heart_function(),
                fast_solver_config(),
                [ProbeRequest(segment_id="ghost")],
            )

    def test_bed_volume_probe_needs_bed(self) -> None:
        with pytest.raises(NetworkConfigError, match="no terminal bed"):
            run_simulation(
                bifurcation_network(),
                make_heart_function(),
                fast_solver_config(),
                [ProbeRequest(segment_id="parent", quantity=ProbeQuantity.BED_VOLUME)],
            )

    def test_invalid_network_is_reported(self) -> None:
        net = single_vessel_network()
        vessel = net.segments["vessel"].model_copy(update={"terminal_bed": "elsewhere"})
        bad = net.model_copy(update={"segments": {"vessel": vessel}})
        with pytest.raises(NetworkConfigError, match="unknown bed"):
            run_simulation(bad, make_heart_function(), fast_solver_config(), [])


def test_step_does_not_mutate_input_state() -> None:
    model = build_discrete_network(single_vessel_network(), fast_solver_config())
    state = initial_state(model, 0.0)
    before = state.area.copy()
    step(model, state, stable_time_step(model, state), lambda t: 1e-5)
    assert np.array_equal(state.area, before)
    assert math.isfinite(total_volume(model, state))


def test_repeated_runs_are_identical() -> None:
    probes = [ProbeRequest(segment_id="vessel", position=0.5, label="mid")]
    runs = [
        run_simulation(single_vessel_network(), make_heart_function(), fast_solver_config(), probes)
        for _ in range(2)
    ]
    assert np.array_equal(runs[0].series, runs[1].series)
    assert runs[0].beat_boundaries == runs[1].beat_boundaries
