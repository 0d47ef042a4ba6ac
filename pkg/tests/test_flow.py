import numpy as np
import pytest

from ricci_lab.flow import (DiagnosticsRecord, FlowConfig, FlowMode, FlowOutcome, FlowState, StabilityError,
                            converged, diagnose, entropy, mean_scalar_curvature, needs_regrid,
                            StepRejectedError, renormalized_curvature, run, scalar_curvature_discrepancy,
                            stable_time_step, step)
from ricci_lab.geometry import ProfileFamily, RadialGrid, WarpedMetric, area, curvature, make_profile


def _record(k_min, k_max, gb_defect=0.0):
    return DiagnosticsRecord(t=0.0, area=4 * np.pi, k_min=k_min, k_max=k_max,
                             ratio=k_max / k_min if k_min > 0 else None, gb_defect=gb_defect, entropy=None, r_bar=2.0)


def test_mean_scalar_curvature(round_metric, perturbed_metric):
    assert mean_scalar_curvature(round_metric) == pytest.approx(2.0, abs=1e-6)
    assert mean_scalar_curvature(round_metric.scaled(3.0)) == pytest.approx(2.0 / 9, abs=1e-6)
    assert mean_scalar_curvature(perturbed_metric) == pytest.approx(8 * np.pi / area(perturbed_metric), abs=1e-5)
    assert abs(scalar_curvature_discrepancy(perturbed_metric)) < 1e-5


def test_entropy(round_metric):
    assert entropy(round_metric) == pytest.approx(8 * np.pi * np.log(2), abs=1e-4)
    assert entropy(round_metric.scaled(np.sqrt(2))) == pytest.approx(0.0, abs=1e-4)


def test_entropy_undefined_for_nonpositive_curvature(perturbed_metric):
    assert curvature(perturbed_metric).k_min < 0
    assert entropy(perturbed_metric) is None


@pytest.mark.parametrize("record, tol, expected", [
    (_record(1.0, 1.0), 1e-9, True),
    (_record(-0.1, 1.0), 1e-2, False),
    (_record(1.0, 1.005, 1e-6), 1e-2, True),
    (_record(1.0, 1.005, 1.0), 1e-2, False),
    (_record(1.0, 1.05), 1e-2, False),
])
def test_converged(record, tol, expected):
    assert converged(record, tol) is expected


def test_config_validation():
    with pytest.raises(ValueError):
        FlowConfig(dt=0.0)
    with pytest.raises(ValueError):
        FlowConfig(t_end=-1.0)
    with pytest.raises(ValueError):
        FlowConfig(regrid_trigger=0.0)


def test_round_is_fixed_point_of_one_step():
    metric = make_profile(ProfileFamily.ROUND, 201)
    dt = 0.5 * stable_time_step(metric)
    after = step(FlowState(metric, 0.0), dt, FlowMode.NORMALIZED).metric
    assert after.allclose(metric, atol=1e-10)


def test_step_rejects_unstable_time_step(round_metric):
    with pytest.raises(StabilityError):
        step(FlowState(round_metric, 0.0), 10 * stable_time_step(round_metric), FlowMode.NORMALIZED)


def test_step_on_singular_pole_is_rejected_with_time():
    grid = RadialGrid(101)
    h = np.sin(np.pi * grid.s) ** 3
    h[0] = h[-1] = 0.0
    with pytest.raises(StepRejectedError) as error:
        step(FlowState(WarpedMetric(grid, np.full(101, np.pi), h), 0.7), 1e-6, FlowMode.NORMALIZED)
    assert error.value.t == 0.7


def test_step_keeps_poles_pinned(perturbed_metric):
    state = step(FlowState(perturbed_metric, 0.0), stable_time_step(perturbed_metric), FlowMode.NORMALIZED)
    assert state.metric.h[0] == 0.0 and state.metric.h[-1] == 0.0
    assert state.t > 0


def test_normalized_step_conserves_area():
    metric = make_profile(ProfileFamily.PERTURBED, 201, 0.2, 1)
    after = step(FlowState(metric, 0.0), stable_time_step(metric), FlowMode.NORMALIZED).metric
    assert abs(area(after) / area(metric) - 1) < 1e-8


def test_needs_regrid(round_metric):
    assert not needs_regrid(round_metric, 0.1)
    stretched = WarpedMetric(round_metric.grid, np.pi * (1 + 0.5 * round_metric.grid.s), round_metric.h)
    assert needs_regrid(stretched, 0.1)


def test_round_converges_at_first_record():
    result = run(make_profile(ProfileFamily.ROUND, 501), FlowConfig(t_end=0.1))
    assert result.outcome is FlowOutcome.CONVERGED
    assert len(result.records) == 1
    assert result.records[-1].ratio - 1 < 1e-8


def test_unnormalized_round_shrinks_homothetically():
    config = FlowConfig(mode=FlowMode.UNNORMALIZED, t_end=0.25, record_every=50)
    result = run(make_profile(ProfileFamily.ROUND, 41), config)
    assert result.outcome is FlowOutcome.REACHED_T_END
    assert result.state.t == pytest.approx(0.25, abs=1e-12)
    assert area(result.state.metric) == pytest.approx(2 * np.pi, abs=1e-4)
    times = [record.t for record in result.records]
    assert times[0] == 0.0 and times[-1] == result.state.t
    assert all(t1 < t2 for t1, t2 in zip(times, times[1:]))


def test_unnormalized_area_slope():
    config = FlowConfig(mode=FlowMode.UNNORMALIZED, t_end=0.1, record_every=10)
    records = run(make_profile(ProfileFamily.PERTURBED, 41, 0.1, 1), config).records
    slope = np.polyfit([record.t for record in records], [record.area for record in records], 1)[0]
    assert slope == pytest.approx(-8 * np.pi, rel=1e-2)


@pytest.mark.slow
def test_unnormalized_round_goes_extinct():
    config = FlowConfig(mode=FlowMode.UNNORMALIZED, t_end=0.6, record_every=1000)
    result = run(make_profile(ProfileFamily.ROUND, 41), config)
    assert result.outcome is FlowOutcome.EXTINCT
    assert result.state.t < 0.5
    assert result.extinction_time == pytest.approx(0.5, abs=1e-3)


@pytest.mark.slow
def test_perturbed_converges_to_round():
    initial = make_profile(ProfileFamily.PERTURBED, 61, 0.3, 1)
    result = run(initial, FlowConfig(t_end=5.0))
    final = result.records[-1]
    assert final.ratio is not None and final.ratio - 1 < 1e-2
    assert np.abs(renormalized_curvature(result.state.metric) - 1).max() < 1e-2
    areas = np.array([record.area for record in result.records])
    assert np.abs(areas / areas[0] - 1).max() < 1e-4
    assert result.regrids >= 1
    for before, after in result.regrid_events:
        assert after.area == pytest.approx(before.area, rel=1e-6)


@pytest.mark.slow
def test_entropy_and_ratio_decrease():
    initial = make_profile(ProfileFamily.PERTURBED, 61, 0.1, 1)
    assert curvature(initial).k_min > 0
    # no regrid, its interpolation error is not part of the monotonicity
    config = FlowConfig(t_end=0.4, record_every=20, convergence_tol=1e-12, regrid_trigger=10.0)
    records = run(initial, config).records
    entropies = [record.entropy for record in records]
    assert all(value is not None for value in entropies)
    for previous, current in zip(entropies, entropies[1:]):
        assert current <= previous + 1e-6 * abs(previous)
    ratios = [record.ratio for record in records]
    for previous, current in zip(ratios, ratios[1:]):
        assert current <= previous + 1e-8


@pytest.mark.slow
def test_round_fixed_point_drift():
    metric = make_profile(ProfileFamily.ROUND, 201)
    state = FlowState(metric, 0.0)
    dt = 0.5 * stable_time_step(metric)
    for _ in range(2000):
        state = step(state, dt, FlowMode.NORMALIZED)
    assert np.abs(state.metric.h - metric.h).max() < 1e-6


def test_on_record_sees_every_record():
    seen = []
    result = run(make_profile(ProfileFamily.PERTURBED, 41, 0.1, 1),
                 FlowConfig(t_end=0.05, record_every=10, convergence_tol=1e-12),
                 on_record=lambda state, record: seen.append((state.t, record)))
    assert [record for _, record in seen] == result.records
    assert all(t == record.t for t, record in seen)
