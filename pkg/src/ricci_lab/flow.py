"""
Ricci flow of rotationally symmetric metrics on the 2-sphere.

In two dimensions dg/dt = (r_bar - R) g (normalized) or dg/dt = -R g (unnormalized) acts on
both warping functions alike: dphi/dt = (r_bar - R) phi / 2, dh/dt = (r_bar - R) h / 2.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional

import numpy as np
from pydantic import Field, dataclasses as pydantic_dataclasses
from scipy.integrate import simpson

from ricci_lab.differences import DEFAULT_STENCIL, Stencil
from ricci_lab.geometry import (NonPositiveRadiusError, PoleRegularizationError, WarpedMetric, _curvature_arrays,
                                area, arclength_spacing, curvature, gauss_bonnet, integrate_over_surface,
                                max_gauge_distortion, regrid)

_logger = logging.getLogger(__name__)

STABILITY_FACTOR = 0.2
DIAGNOSTICS_HEADER = ("t", "area", "k_min", "k_max", "ratio", "gb_defect", "entropy", "r_bar")


class FlowMode(Enum):
    NORMALIZED = "normalized"
    UNNORMALIZED = "unnormalized"


class FlowOutcome(Enum):
    CONVERGED = "converged"
    REACHED_T_END = "reached_t_end"
    EXTINCT = "extinct"


@pydantic_dataclasses.dataclass(frozen=True)
class FlowConfig:
    mode: FlowMode = FlowMode.NORMALIZED
    dt: float = Field(default=1e-3, gt=0)
    t_end: float = Field(default=5.0, gt=0)
    record_every: int = Field(default=100, ge=1)
    regrid_trigger: float = Field(default=0.1, gt=0)
    convergence_tol: float = Field(default=1e-3, gt=0)
    extinction_area_fraction: float = Field(default=0.05, gt=0, lt=1)
    max_steps: int = Field(default=2_000_000, ge=1)


@dataclass(frozen=True)
class FlowState:
    metric: WarpedMetric
    t: float = 0.0


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    area: float
    k_min: float
    k_max: float
    ratio: Optional[float]
    gb_defect: float
    entropy: Optional[float]
    r_bar: float

    def as_row(self):
        return (self.t, self.area, self.k_min, self.k_max, self.ratio, self.gb_defect, self.entropy, self.r_bar)


@dataclass
class FlowResult:
    state: FlowState
    records: List[DiagnosticsRecord]
    outcome: FlowOutcome
    extinction_time: Optional[float] = None
    steps: int = 0
    regrids: int = 0
    regrid_events: List[tuple] = field(default_factory=list)


def _mean_scalar_curvature(phi, h, K, spacing) -> float:
    return float(simpson(2 * K * phi * h, dx=spacing) / simpson(phi * h, dx=spacing))


def mean_scalar_curvature(metric: WarpedMetric, stencil: Stencil = DEFAULT_STENCIL) -> float:
    """ r_bar = int R dA / Area with R = 2K """
    K = curvature(metric, stencil).K
    return _mean_scalar_curvature(metric.phi, metric.h, K, metric.grid.spacing)


def scalar_curvature_discrepancy(metric: WarpedMetric, stencil: Stencil = DEFAULT_STENCIL) -> float:
    """ r_bar - 8 pi / Area, zero by Gauss-Bonnet on the sphere """
    return mean_scalar_curvature(metric, stencil) - 8 * np.pi / area(metric)


def entropy(metric: WarpedMetric, stencil: Stencil = DEFAULT_STENCIL) -> Optional[float]:
    """ int R log R dA, defined only when R > 0 everywhere """
    R = 2 * curvature(metric, stencil).K
    if R.min() <= 0:
        return None
    return integrate_over_surface(metric, R * np.log(R))


def stable_time_step(metric: WarpedMetric, stencil: Stencil = DEFAULT_STENCIL) -> float:
    """ 0.2 (min arclength spacing)^2 / max(max|K|, 1) """
    K = curvature(metric, stencil).K
    return STABILITY_FACTOR * arclength_spacing(metric) ** 2 / max(float(np.abs(K).max()), 1.0)


def needs_regrid(metric: WarpedMetric, trigger: float) -> bool:
    return max_gauge_distortion(metric) > trigger


def _rates(phi, h, spacing, mode: FlowMode, stencil: Stencil):
    K = _curvature_arrays(phi, h, spacing, stencil)
    if mode is FlowMode.NORMALIZED:
        speed = 0.5 * _mean_scalar_curvature(phi, h, K, spacing) - K
    else:
        speed = -K
    dh = speed * h
    dh[0] = dh[-1] = 0.0
    return speed * phi, dh


def step(state: FlowState, dt: float, mode: FlowMode, stencil: Stencil = DEFAULT_STENCIL) -> FlowState:
    """
    One classical Runge-Kutta step of the coupled (phi, h) system, curvature recomputed at every stage.
    """
    metric = state.metric
    spacing = metric.grid.spacing
    phi, h = metric.phi, metric.h
    try:
        limit = stable_time_step(metric, stencil)
        if dt <= 0 or dt > limit * (1 + 1e-9):
            raise StabilityError(f"Time step {dt} outside (0, {limit}] at t={state.t}")
        k1 = _rates(phi, h, spacing, mode, stencil)
        k2 = _rates(phi + 0.5 * dt * k1[0], h + 0.5 * dt * k1[1], spacing, mode, stencil)
        k3 = _rates(phi + 0.5 * dt * k2[0], h + 0.5 * dt * k2[1], spacing, mode, stencil)
        k4 = _rates(phi + dt * k3[0], h + dt * k3[1], spacing, mode, stencil)
    except (NonPositiveRadiusError, PoleRegularizationError) as e:
        raise StepRejectedError(f"Curvature evaluation failed at t={state.t}: {e}", state.t)
    phi_new = phi + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    h_new = h + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    h_new[0] = h_new[-1] = 0.0
    if not (np.all(np.isfinite(phi_new)) and np.all(np.isfinite(h_new))):
        raise StepRejectedError(f"Non-finite metric after step at t={state.t}", state.t)
    if np.any(h_new[1:-1] <= 0) or np.any(phi_new <= 0):
        raise StepRejectedError(f"Metric lost positivity after step at t={state.t}", state.t)
    return FlowState(WarpedMetric(metric.grid, phi_new, h_new), state.t + dt)


def diagnose(state: FlowState, stencil: Stencil = DEFAULT_STENCIL) -> DiagnosticsRecord:
    metric = state.metric
    K = curvature(metric, stencil).K
    k_min, k_max = float(K.min()), float(K.max())
    r_bar = _mean_scalar_curvature(metric.phi, metric.h, K, metric.grid.spacing)
    surface_area = area(metric)
    _logger.debug(f"t={state.t}: r_bar - 8pi/area = {r_bar - 8 * np.pi / surface_area}")
    return DiagnosticsRecord(t=state.t,
                             area=surface_area,
                             k_min=k_min,
                             k_max=k_max,
                             ratio=k_max / k_min if k_min > 0 else None,
                             gb_defect=gauss_bonnet(metric, stencil),
                             entropy=entropy(metric, stencil),
                             r_bar=r_bar)


def converged(record: DiagnosticsRecord, tol: float) -> bool:
    return (record.k_min > 0 and record.ratio is not None and record.ratio - 1 < tol
            and abs(record.gb_defect) < 10 * tol)


def run(metric: WarpedMetric, config: FlowConfig, stencil: Stencil = DEFAULT_STENCIL,
        on_record: Optional[Callable[[FlowState, DiagnosticsRecord], None]] = None) -> FlowResult:
    """
    Step until t_end, convergence (normalized) or extinction (unnormalized). Records are taken at the first
    state, every record_every steps and at the last state.
    :param on_record: called with every recorded state and its record (snapshots)
    """
    state = FlowState(metric, 0.0)
    records = [diagnose(state, stencil)]
    if on_record is not None:
        on_record(state, records[0])
    result = FlowResult(state, records, FlowOutcome.REACHED_T_END)
    # the unnormalized flow shrinks even a round sphere, it only stops at t_end or extinction
    stop_on_convergence = config.mode is FlowMode.NORMALIZED
    if stop_on_convergence and converged(records[0], config.convergence_tol):
        result.outcome = FlowOutcome.CONVERGED
        return result

    area_floor = config.extinction_area_fraction * records[0].area
    steps = 0
    while state.t < config.t_end and steps < config.max_steps:
        try:
            limit = stable_time_step(state.metric, stencil)
        except (NonPositiveRadiusError, PoleRegularizationError) as e:
            raise StepRejectedError(f"Curvature evaluation failed at t={state.t}: {e}", state.t)
        dt = min(config.dt, limit, config.t_end - state.t)
        if dt <= 0:
            break
        state = step(state, dt, config.mode, stencil)
        steps += 1

        if config.mode is FlowMode.UNNORMALIZED:
            surface_area = area(state.metric)
            if surface_area < area_floor:
                result.outcome = FlowOutcome.EXTINCT
                # dA/dt = -8 pi exactly for the unnormalized flow on the sphere
                result.extinction_time = state.t + surface_area / (8 * np.pi)
                _logger.info(f"Area {surface_area} below floor {area_floor} at t={state.t}, "
                             f"extinction expected at t={result.extinction_time}")
                break

        if needs_regrid(state.metric, config.regrid_trigger):
            before = diagnose(state, stencil)
            state = FlowState(regrid(state.metric, stencil=stencil), state.t)
            after = diagnose(state, stencil)
            result.regrids += 1
            result.regrid_events.append((before, after))
            _logger.info(f"Regrid at t={state.t}: area {before.area} -> {after.area}, "
                         f"gb_defect {before.gb_defect} -> {after.gb_defect}")

        if steps % config.record_every == 0:
            records.append(diagnose(state, stencil))
            _logger.debug(f"Record {records[-1]}")
            if on_record is not None:
                on_record(state, records[-1])
            if stop_on_convergence and converged(records[-1], config.convergence_tol):
                result.outcome = FlowOutcome.CONVERGED
                break

    if steps >= config.max_steps and result.outcome is FlowOutcome.REACHED_T_END and state.t < config.t_end:
        raise StepRejectedError(f"Step budget of {config.max_steps} exhausted at t={state.t}", state.t)
    if records[-1].t != state.t:
        records.append(diagnose(state, stencil))
        if on_record is not None:
            on_record(state, records[-1])
        if (stop_on_convergence and result.outcome is FlowOutcome.REACHED_T_END
                and converged(records[-1], config.convergence_tol)):
            result.outcome = FlowOutcome.CONVERGED
    result.state = state
    result.steps = steps
    _logger.info(f"Flow finished at t={state.t} after {steps} steps and {result.regrids} regrids: "
                 f"{result.outcome.value}")
    return result


def renormalized_curvature(metric: WarpedMetric, stencil: Stencil = DEFAULT_STENCIL):
    """ Curvature of the homothetic metric with area 4 pi """
    return curvature(metric, stencil).K * area(metric) / (4 * math.pi)


class StabilityError(ValueError):
    pass


class StepRejectedError(RuntimeError):
    def __init__(self, message: str, t: float):
        super().__init__(message)
        self.t = t
