import numpy as np
import pytest

from ricci_lab.geometry import PoleRegularizationError, arclength
from ricci_lab.soliton import PotentialProfile, potential_from_a, soliton_residuals
from ricci_lab.symmetry import (AngularField, DegenerateFitError, conformal_residual, extract_a, killing_residual,
                                killing_residual_of_potential, pole_window, potential_field)

SIN2_COS_MAX = 2 / (3 * np.sqrt(3))


def _potential(metric, f_r):
    f_r = np.array(f_r, dtype=float)
    f_r[[0, -1]] = 0.0
    return PotentialProfile(f=np.zeros_like(f_r), f_r=f_r)


def test_rotation_is_killing(round_metric, perturbed_metric):
    for metric in (round_metric, perturbed_metric):
        assert killing_residual(metric, AngularField(np.ones(metric.grid.n))) < 1e-10


def test_killing_residual_of_sine(round_metric):
    field = AngularField(np.sin(arclength(round_metric)))
    assert killing_residual(round_metric, field) == pytest.approx(SIN2_COS_MAX, abs=1e-4)


def test_field_on_wrong_grid(round_metric):
    with pytest.raises(ValueError):
        killing_residual(round_metric, AngularField(np.ones(11)))


def test_killing_residual_scales_linearly(round_metric):
    field = AngularField(np.sin(arclength(round_metric)))
    residual = killing_residual(round_metric, field)
    for lam in (0.5, 2.0):
        assert killing_residual(round_metric.scaled(lam), field) == pytest.approx(lam * residual, rel=1e-12)


def test_gradient_along_h_is_killing(perturbed_metric):
    potential = potential_from_a(perturbed_metric, 0.7)
    assert killing_residual_of_potential(perturbed_metric, potential) < 1e-8
    np.testing.assert_allclose(potential_field(perturbed_metric, potential).psi, 0.7, atol=1e-8)
    assert killing_residual_of_potential(perturbed_metric, potential_from_a(perturbed_metric, 0.0)) == 0.0


def test_sin_squared_gradient_is_not_killing(round_metric):
    potential = _potential(round_metric, np.sin(arclength(round_metric)) ** 2)
    assert killing_residual_of_potential(round_metric, potential) == pytest.approx(SIN2_COS_MAX, abs=1e-4)


def test_potential_must_vanish_at_poles(round_metric):
    potential = PotentialProfile(f=np.zeros(round_metric.grid.n), f_r=np.ones(round_metric.grid.n))
    with pytest.raises(PoleRegularizationError):
        killing_residual_of_potential(round_metric, potential)
    with pytest.raises(PoleRegularizationError):
        conformal_residual(round_metric, potential)


@pytest.mark.parametrize("a", [-0.4, 0.0, 1.0])
def test_gradient_along_h_is_conformal(round_metric, perturbed_metric, a):
    for metric in (round_metric, perturbed_metric):
        assert conformal_residual(metric, potential_from_a(metric, a)) < 1e-6


def test_windowed_conformal_residual(round_metric):
    r = arclength(round_metric)
    potential = PotentialProfile(f=r ** 2, f_r=2 * r)
    assert conformal_residual(round_metric, potential, window=(np.pi / 4, 3 * np.pi / 4)) > 0.5
    with pytest.raises(ValueError):
        conformal_residual(round_metric, potential, window=(1.0, 1.0 + 1e-6))


def test_residual_chain(round_metric):
    r = arclength(round_metric)
    potential = _potential(round_metric, 0.3 * round_metric.h + 0.01 * np.sin(r) ** 2)
    res_rr, res_tt = soliton_residuals(round_metric, potential)
    window = pole_window(round_metric)
    gap = np.abs(res_rr - res_tt)[window].max()
    assert gap == pytest.approx(conformal_residual(round_metric, potential), rel=1e-9)


def test_extract_a(round_metric):
    a_fit, residual = extract_a(round_metric, potential_from_a(round_metric, 0.25))
    assert a_fit == pytest.approx(0.25, abs=1e-12)
    assert residual < 1e-10
    assert extract_a(round_metric, potential_from_a(round_metric, 0.0))[0] == 0.0
    r = arclength(round_metric)
    a_fit, residual = extract_a(round_metric, _potential(round_metric, np.sin(r) + 0.01 * np.sin(2 * r)))
    assert a_fit == pytest.approx(1.0, abs=0.02)
    assert residual == pytest.approx(0.01, abs=1e-3)


def test_degenerate_fit(round_metric):
    tiny = round_metric.scaled(1e-8)
    with pytest.raises(DegenerateFitError):
        extract_a(tiny, potential_from_a(tiny, 1.0))
