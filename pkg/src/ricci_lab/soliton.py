"""
Shrinking-soliton reduction on the sphere.

With f' = a h the soliton equation reduces to h'' = -h (1 + a h'), h(0) = 0, h'(0) = 1,
and a closed smooth surface needs the first zero A of h to have h'(A) = -1.
Multiplying by h h' and integrating over [0, A] gives

    -(h')^2/2 |_0^A = h^2/2 |_0^A + a int_0^A h (h')^2 dr

so the closure defect is fixed by the sign of a and vanishes only for a = 0.
"""

from __future__ import annotations

import logging
import math
import multiprocessing
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import bisect, minimize_scalar
from typeguard import typechecked

from ricci_lab.cpu_utils import check_cores
from ricci_lab.differences import DEFAULT_STENCIL, Stencil
from ricci_lab.geometry import PoleRegularizationError, WarpedMetric, curvature, integrate_over_surface
from ricci_lab.type import FloatArray

_logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-4
DEFAULT_R_MAX = 4 * math.pi
ZERO_TOLERANCE = 1e-12
POLE_POTENTIAL_TOLERANCE = 1e-6
SWEEP_HEADER = ("a", "A", "h_prime_at_A", "closure_defect", "I", "identity_residual")


@dataclass(frozen=True, eq=False)
class Trajectory:
    r: FloatArray
    h: FloatArray
    h_prime: FloatArray
    I: FloatArray


@dataclass(frozen=True, eq=False)
class ShootResult:
    a: float
    step: float
    hit_zero: bool
    trajectory: Trajectory
    A: Optional[float] = None
    h_prime_at_A: Optional[float] = None

    @property
    def closure_defect(self) -> Optional[float]:
        if not self.hit_zero:
            return None
        return abs(self.h_prime_at_A + 1.0)


@dataclass(frozen=True)
class IdentityReport:
    a: float
    lhs: float
    rhs_boundary: float
    I: float
    residual: float


@dataclass(frozen=True, eq=False)
class PotentialProfile:
    f: FloatArray
    f_r: FloatArray


class ClosureSolution(NamedTuple):
    a_star: float
    result: ShootResult
    at_bracket_edge: bool


@dataclass(frozen=True)
class SweepRow:
    a: float
    hit_zero: bool
    A: Optional[float] = None
    h_prime_at_A: Optional[float] = None
    closure_defect: Optional[float] = None
    I: Optional[float] = None
    identity_residual: Optional[float] = None

    def as_row(self):
        return self.a, self.A, self.h_prime_at_A, self.closure_defect, self.I, self.identity_residual


def _rates(a: float, h: float, hp: float):
    """ (h', h'', (int h h'^2)') """
    return hp, -h * (1.0 + a * hp), h * hp * hp


def _rk4(a: float, h: float, hp: float, I: float, dr: float):
    """ One classical Runge-Kutta step of (h, h', I) """
    k1 = _rates(a, h, hp)
    k2 = _rates(a, h + 0.5 * dr * k1[0], hp + 0.5 * dr * k1[1])
    k3 = _rates(a, h + 0.5 * dr * k2[0], hp + 0.5 * dr * k2[1])
    k4 = _rates(a, h + dr * k3[0], hp + dr * k3[1])
    return tuple(value + dr / 6.0 * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
                 for value, d1, d2, d3, d4 in zip((h, hp, I), k1, k2, k3, k4))


def _polish_zero(a: float, r0: float, dr: float, state0, state1):
    """
    Zero of the cubic Hermite interpolant of h on [r0, r0 + dr] by bisection and one Newton step,
    then a partial integrator step of all three states onto it.
    """
    (h0, p0, _), (h1, p1, _) = state0, state1
    local = CubicHermiteSpline([r0, r0 + dr], [h0, h1], [p0, p1])
    zero = bisect(lambda x: float(local(x)), r0, r0 + dr, xtol=ZERO_TOLERANCE) if h1 < 0 else r0 + dr
    slope = float(local(zero, 1))
    if slope != 0:
        zero = min(max(zero - float(local(zero)) / slope, r0), r0 + dr)
    if zero <= r0:
        return zero, state0
    return zero, _rk4(a, *state0, zero - r0)


@typechecked
def shoot(a: float, step: float = DEFAULT_STEP, r_max: float = DEFAULT_R_MAX) -> ShootResult:
    """
    Integrate h'' = -h (1 + a h') from h(0) = 0, h'(0) = 1 with fixed-step classical Runge-Kutta
    until the first interior zero of h or r_max. I = int h h'^2 dr is integrated alongside.
    """
    if step <= 0:
        raise ValueError(f"Integration step must be positive, not {step}")
    if r_max <= 0:
        raise ValueError(f"r_max must be positive, not {r_max}")
    a = float(a)
    rs, states = [0.0], [(0.0, 1.0, 0.0)]
    i = 0
    while True:
        r = i * step
        if r >= r_max:
            break
        dr = min(step, r_max - r)
        state = _rk4(a, *states[-1], dr)
        if not all(math.isfinite(value) for value in state):
            raise BlowupError(f"Non-finite state for a={a} after r={r}", r)
        if state[0] <= 0:
            zero, state = _polish_zero(a, r, dr, states[-1], state)
            rs.append(zero)
            states.append(state)
            _logger.debug(f"a={a}: h vanishes at A={zero} with h'(A)={state[1]}")
            return ShootResult(a=a, step=step, hit_zero=True, trajectory=_trajectory(rs, states),
                               A=zero, h_prime_at_A=state[1])
        i += 1
        rs.append(r + dr)
        states.append(state)
    return ShootResult(a=a, step=step, hit_zero=False, trajectory=_trajectory(rs, states))


def _trajectory(rs, states) -> Trajectory:
    h, h_prime, I = np.array(states).T
    return Trajectory(np.array(rs), h, h_prime, I)


def correction_integral(result: ShootResult) -> float:
    """ I = int_0^A h (h')^2 dr, integrated with the trajectory """
    return float(result.trajectory.I[-1])


def identity_report(result: ShootResult) -> IdentityReport:
    if not result.hit_zero:
        raise ClosureNotFoundError(f"Shoot for a={result.a} never reaches a zero of h")
    trajectory = result.trajectory
    h_prime_0, h_0 = trajectory.h_prime[0], trajectory.h[0]
    h_prime_A, h_A = trajectory.h_prime[-1], trajectory.h[-1]
    lhs = -(h_prime_A ** 2 - h_prime_0 ** 2) / 2
    rhs_boundary = (h_A ** 2 - h_0 ** 2) / 2
    I = correction_integral(result)
    return IdentityReport(a=result.a, lhs=float(lhs), rhs_boundary=float(rhs_boundary), I=I,
                          residual=float(lhs - (rhs_boundary + result.a * I)))


def reconstructed_closure_defect(a: float, I: float) -> float:
    """ |h'(A) + 1| implied by the identity with h(0) = h(A) = 0 and h'(0) = 1 """
    if a >= 0:
        return 1.0 - math.sqrt(max(0.0, 1.0 - 2.0 * a * I))
    return math.sqrt(1.0 + 2.0 * abs(a) * I) - 1.0


def identity_order(a: float, step: float, r_max: float = DEFAULT_R_MAX) -> float:
    """ Observed convergence order of the identity residual between step and step/2 """
    coarse = abs(identity_report(shoot(a, step, r_max)).residual)
    fine = abs(identity_report(shoot(a, step / 2, r_max)).residual)
    if fine == 0:
        return math.inf
    return math.log2(coarse / fine)


def solve_closure(a_lo: float, a_hi: float, tol: float = 1e-8, step: float = DEFAULT_STEP,
                  r_max: float = DEFAULT_R_MAX, require_interior: bool = False) -> ClosureSolution:
    """
    Minimize the closure defect |h'(A) + 1| over a in [a_lo, a_hi] (bounded Brent).
    """
    if not a_lo < a_hi:
        raise ValueError(f"Bracket must satisfy a_lo < a_hi, got [{a_lo}, {a_hi}]")
    if tol <= 0:
        raise ValueError(f"Tolerance must be positive, not {tol}")

    def defect(a):
        result = shoot(float(a), step, r_max)
        if not result.hit_zero:
            raise ClosureNotFoundError(f"Shoot for a={a} does not reach a zero of h before r={r_max}")
        return result.closure_defect

    optimum = minimize_scalar(defect, bounds=(a_lo, a_hi), method="bounded", options={"xatol": tol})
    a_star = float(optimum.x)
    at_edge = a_hi - a_lo > 20 * tol and min(a_star - a_lo, a_hi - a_star) <= 10 * tol
    if at_edge:
        edge = a_lo if a_star - a_lo <= a_hi - a_star else a_hi
        _logger.warning(f"Closure defect minimized at the bracket edge a={edge} of [{a_lo}, {a_hi}]")
        if require_interior:
            raise ClosureNotBracketedError(f"Minimum of the closure defect is not inside [{a_lo}, {a_hi}]")
        a_star = edge
    return ClosureSolution(a_star, shoot(a_star, step, r_max), at_edge)


def closed_profile(result: ShootResult, n: int) -> WarpedMetric:
    """ Closing trajectory resampled on an arclength-gauge grid """
    if not result.hit_zero:
        raise ClosureNotFoundError(f"Shoot for a={result.a} never reaches a zero of h")
    trajectory = result.trajectory
    spline = CubicHermiteSpline(trajectory.r, trajectory.h, trajectory.h_prime)
    h = spline(np.linspace(0.0, result.A, n))
    h[0] = h[-1] = 0.0
    return WarpedMetric.from_arclength(h, result.A)


def _derivative_r(metric: WarpedMetric, values: FloatArray, stencil: Stencil) -> FloatArray:
    return stencil.derivative(values, metric.grid.spacing, 1) / metric.phi


def potential_from_a(metric: WarpedMetric, a: float) -> PotentialProfile:
    """ f_r = a h, f by quadrature in arclength with f(0) = 0 """
    f_r = a * metric.h
    f = cumulative_simpson(f_r * metric.phi, dx=metric.grid.spacing, initial=0.0)
    return PotentialProfile(f=f, f_r=f_r)


def soliton_residuals(metric: WarpedMetric, potential: PotentialProfile, c: float = 1.0,
                      stencil: Stencil = DEFAULT_STENCIL):
    """
    The two components of R_ij = c g_ij + nabla_i nabla_j f in this gauge:
    res_rr = K - c - f_rr, res_tt = K - c - h_r f_r / h (limit f_rr at the poles).
    """
    if c <= 0:
        raise ValueError(f"Soliton constant must be positive, not {c}")
    check_pole_potential(potential)
    K = curvature(metric, stencil).K
    f_rr = _derivative_r(metric, potential.f_r, stencil)
    h_r = _derivative_r(metric, metric.h, stencil)
    res_rr = K - c - f_rr
    res_tt = np.empty_like(res_rr)
    res_tt[1:-1] = K[1:-1] - c - h_r[1:-1] * potential.f_r[1:-1] / metric.h[1:-1]
    res_tt[[0, -1]] = res_rr[[0, -1]]
    return res_rr, res_tt


def check_pole_potential(potential: PotentialProfile):
    scale = max(1.0, float(np.abs(potential.f_r).max()))
    for index in (0, -1):
        if abs(potential.f_r[index]) > POLE_POTENTIAL_TOLERANCE * scale:
            raise PoleRegularizationError(f"f_r = {potential.f_r[index]} at a pole, the gradient of the "
                                          f"potential must vanish there")


def einstein_defect(metric: WarpedMetric, stencil: Stencil = DEFAULT_STENCIL) -> float:
    """ sup |K - K_mean| with the area-weighted mean """
    K = curvature(metric, stencil).K
    mean = integrate_over_surface(metric, K) / integrate_over_surface(metric, np.ones_like(K))
    return float(np.abs(K - mean).max())


def _sweep_row(args) -> SweepRow:
    a, step, r_max = args
    try:
        result = shoot(a, step, r_max)
    except BlowupError as e:
        _logger.warning(f"Shoot for a={a} blew up: {e}")
        return SweepRow(a=a, hit_zero=False)
    if not result.hit_zero:
        return SweepRow(a=a, hit_zero=False)
    report = identity_report(result)
    return SweepRow(a=a, hit_zero=True, A=result.A, h_prime_at_A=result.h_prime_at_A,
                    closure_defect=result.closure_defect, I=report.I, identity_residual=report.residual)


def sweep(a_values: Sequence[float], step: float = DEFAULT_STEP, r_max: float = DEFAULT_R_MAX,
          workers: int = 1) -> List[SweepRow]:
    """ Shoot and check the identity for every a, rows ordered by a """
    jobs = [(float(a), step, r_max) for a in sorted(a_values)]
    workers = check_cores(workers) if workers != 1 else 1
    if workers == 1 or len(jobs) < 2:
        return [_sweep_row(job) for job in jobs]
    with multiprocessing.Pool(min(workers, len(jobs))) as pool:
        return pool.map(_sweep_row, jobs)


class BlowupError(RuntimeError):
    def __init__(self, message: str, r: float):
        super().__init__(message)
        self.r = r


class ClosureNotFoundError(RuntimeError):
    pass


class ClosureNotBracketedError(ValueError):
    pass
