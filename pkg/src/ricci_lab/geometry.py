"""
Rotationally symmetric metrics phi(s)^2 ds^2 + h(s)^2 dtheta^2 on the 2-sphere, s in [0, 1],
and their pointwise and integral geometric quantities.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_simpson, simpson
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator
from typeguard import typechecked

from ricci_lab.differences import DEFAULT_STENCIL, Parity, Stencil
from ricci_lab.type import FloatArray

_logger = logging.getLogger(__name__)

MIN_NODES = 9
POLE_SLOPE_TOLERANCE = 1e-3
MIN_INTERIOR_RADIUS = 1e-3
MAX_ADMISSIBLE_SLOPE = 10.0
MAX_PERTURBATION = 0.9


class ProfileFamily(Enum):
    ROUND = "round"
    PERTURBED = "perturbed"


@dataclass(frozen=True)
class RadialGrid:
    """
    Uniform grid on [0, 1] with an odd number of nodes (composite Simpson).
    """
    n: int

    def __post_init__(self):
        if self.n < MIN_NODES:
            raise InvalidProfileError(f"Grid needs at least {MIN_NODES} nodes, not {self.n}")
        if self.n % 2 == 0:
            raise InvalidProfileError(f"Grid node count must be odd, not {self.n}")

    @property
    def s(self) -> FloatArray:
        return np.linspace(0.0, 1.0, self.n)

    @property
    def spacing(self) -> float:
        return 1.0 / (self.n - 1)


@dataclass(frozen=True, eq=False)
class WarpedMetric:
    """
    phi is the radial stretch (length per unit s), h the circumferential radius.
    Pole closure h = 0 at both ends is enforced here, the smooth-closure slopes are not
    (see boundary_defects and is_admissible).
    """
    grid: RadialGrid
    phi: FloatArray
    h: FloatArray

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        h = np.asarray(self.h, dtype=float)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "h", h)
        if phi.shape != (self.grid.n,) or h.shape != (self.grid.n,):
            raise InvalidProfileError(f"phi and h must have {self.grid.n} values, "
                                      f"got {phi.shape} and {h.shape}")
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(h))):
            raise InvalidProfileError("Profile contains non-finite values")
        if np.any(phi <= 0):
            raise InvalidProfileError(f"phi must be positive, minimum is {phi.min()}")
        if h[0] != 0 or h[-1] != 0:
            raise InvalidProfileError(f"h must vanish at both poles, got {h[0]} and {h[-1]}")
        if np.any(h[1:-1] <= 0):
            raise NonPositiveRadiusError(f"h must be positive on the interior, minimum is {h[1:-1].min()}")

    @classmethod
    def from_arclength(cls, h: FloatArray, length: float) -> WarpedMetric:
        """ Arclength gauge: phi is the constant total length """
        h = np.asarray(h, dtype=float)
        return cls(RadialGrid(len(h)), np.full(len(h), float(length)), h)

    def scaled(self, lam: float) -> WarpedMetric:
        """ Homothety g -> lam^2 g """
        if lam <= 0:
            raise ValueError(f"Scale factor must be positive, not {lam}")
        return WarpedMetric(self.grid, lam * self.phi, lam * self.h)

    def allclose(self, other: WarpedMetric, atol: float) -> bool:
        return (self.grid == other.grid and
                np.allclose(self.phi, other.phi, rtol=0, atol=atol) and
                np.allclose(self.h, other.h, rtol=0, atol=atol))


@dataclass(frozen=True, eq=False)
class CurvatureField:
    """
    Gauss curvature per node. pole_regularized marks the nodes computed by the
    L'Hopital limit -h_rrr/h_r instead of -h_rr/h.
    """
    K: FloatArray
    pole_regularized: np.ndarray

    @property
    def k_min(self) -> float:
        return float(self.K.min())

    @property
    def k_max(self) -> float:
        return float(self.K.max())


@dataclass(frozen=True)
class BoundaryDefects:
    h_at_0: float
    h_at_1: float
    slope_defect_0: float
    slope_defect_1: float

    def max_abs(self) -> float:
        return max(abs(self.h_at_0), abs(self.h_at_1), abs(self.slope_defect_0), abs(self.slope_defect_1))


@typechecked
def make_profile(family: ProfileFamily, n: int, eps: float = 0.0, k: int = 1) -> WarpedMetric:
    """
    Initial data in arclength gauge phi = pi.
    round: h = sin(pi s); perturbed: h = sin(pi s) (1 + eps sin^(2k)(pi s)).
    """
    grid = RadialGrid(n)
    index = np.arange(n)
    # mirrored about s = 1/2 node by node, both poles see the same rounding
    pole_distance = np.minimum(index, n - 1 - index) / (n - 1)
    base = np.sin(np.pi * pole_distance)
    if family is ProfileFamily.ROUND:
        h = base
    else:
        if abs(eps) >= MAX_PERTURBATION:
            raise InvalidProfileError(f"Perturbation amplitude must satisfy |eps| < {MAX_PERTURBATION}, not {eps}")
        if k < 1:
            raise InvalidProfileError(f"Perturbation power k must be a positive integer, not {k}")
        h = base * (1.0 + eps * base ** (2 * k))
    metric = WarpedMetric(grid, np.full(n, np.pi), h)
    _check_admissible_initial_data(metric)
    return metric


def _check_admissible_initial_data(metric: WarpedMetric):
    r = arclength(metric)
    # h is O(distance to the nearest pole) there, measure it relative to that distance
    pole_distance = np.minimum(r, r[-1] - r)[1:-1]
    relative_radius = (metric.h[1:-1] / pole_distance).min()
    if relative_radius <= MIN_INTERIOR_RADIUS:
        raise InvalidProfileError(f"Interior radius drops to {relative_radius} times the pole distance, "
                                  f"below the floor {MIN_INTERIOR_RADIUS}")
    slopes = _radial_derivative(metric, metric.h, DEFAULT_STENCIL)
    if np.abs(slopes).max() > MAX_ADMISSIBLE_SLOPE:
        raise InvalidProfileError(f"Profile slope |dh/dr| reaches {np.abs(slopes).max()}, "
                                  f"above {MAX_ADMISSIBLE_SLOPE}")


def _radial_derivative(metric: WarpedMetric, values: FloatArray, stencil: Stencil) -> FloatArray:
    """ d/dr = (1/phi) d/ds """
    return stencil.derivative(values, metric.grid.spacing, 1) / metric.phi


def arclength(metric: WarpedMetric) -> FloatArray:
    """ r(s) = int_0^s phi ds by cumulative Simpson (4th order) """
    return cumulative_simpson(metric.phi, dx=metric.grid.spacing, initial=0.0)


def total_length(metric: WarpedMetric) -> float:
    return float(simpson(metric.phi, dx=metric.grid.spacing))


def arclength_spacing(metric: WarpedMetric) -> float:
    return float(np.diff(arclength(metric)).min())


def _curvature_arrays(phi: FloatArray, h: FloatArray, spacing: float, stencil: Stencil):
    if np.any(h[1:-1] <= 0):
        raise NonPositiveRadiusError(f"h must be positive on the interior, minimum is {h[1:-1].min()}")
    # h is odd and phi even about a smooth pole, mirrored ghost nodes keep every stencil central
    h_s = stencil.derivative(h, spacing, 1, Parity.ODD)
    h_ss = stencil.derivative(h, spacing, 2, Parity.ODD)
    phi_s = stencil.derivative(phi, spacing, 1, Parity.EVEN)
    h_rr = h_ss / phi ** 2 - h_s * phi_s / phi ** 3

    K = np.empty_like(h)
    K[1:-1] = -h_rr[1:-1] / h[1:-1]

    poles = [0, -1]
    h_sss = stencil.derivative(h, spacing, 3, Parity.ODD)[poles]
    phi_ss = stencil.derivative(phi, spacing, 2, Parity.EVEN)[poles]
    p, p_s = phi[poles], phi_s[poles]
    h_r = h_s[poles] / p
    if np.any(np.abs(h_r) < POLE_SLOPE_TOLERANCE):
        raise PoleRegularizationError(f"|dh/dr| at a pole is {np.abs(h_r).min()}, "
                                      f"below {POLE_SLOPE_TOLERANCE}")
    h_rrr = (h_sss / p ** 3 - 3 * h_ss[poles] * p_s / p ** 4
             - h_s[poles] * phi_ss / p ** 4 + 3 * h_s[poles] * p_s ** 2 / p ** 5)
    K[poles] = -h_rrr / h_r
    return K


def curvature(metric: WarpedMetric, stencil: Stencil = DEFAULT_STENCIL) -> CurvatureField:
    """
    K = -h_rr/h in the interior, written in the fixed gauge as -(h_ss phi - h_s phi_s)/(phi^3 h);
    at the poles the regularized limit K = -h_rrr/h_r.
    """
    K = _curvature_arrays(metric.phi, metric.h, metric.grid.spacing, stencil)
    pole_regularized = np.zeros(metric.grid.n, dtype=bool)
    pole_regularized[[0, -1]] = True
    return CurvatureField(K, pole_regularized)


def area(metric: WarpedMetric) -> float:
    """ 2 pi int phi h ds """
    return float(2 * np.pi * simpson(metric.phi * metric.h, dx=metric.grid.spacing))


def integrate_over_surface(metric: WarpedMetric, density: FloatArray) -> float:
    """ int density dA for a rotationally symmetric density """
    return float(2 * np.pi * simpson(density * metric.phi * metric.h, dx=metric.grid.spacing))


def total_curvature(metric: WarpedMetric, stencil: Stencil = DEFAULT_STENCIL) -> float:
    """
    int K dA = 2 pi int -h_rr phi ds with phi h_rr = d/ds (h_s / phi), nothing divided by h
    """
    density = -stencil.flux_derivative(metric.h, metric.grid.spacing, 1.0 / metric.phi, Parity.ODD)
    return float(2 * np.pi * simpson(density, dx=metric.grid.spacing))


def gauss_bonnet(metric: WarpedMetric, stencil: Stencil = DEFAULT_STENCIL) -> float:
    """ int K dA - 4 pi """
    return total_curvature(metric, stencil) - 4 * np.pi


def boundary_defects(metric: WarpedMetric, stencil: Stencil = DEFAULT_STENCIL) -> BoundaryDefects:
    slopes = _radial_derivative(metric, metric.h, stencil)
    return BoundaryDefects(h_at_0=float(metric.h[0]),
                           h_at_1=float(metric.h[-1]),
                           slope_defect_0=float(slopes[0] - 1.0),
                           slope_defect_1=float(slopes[-1] + 1.0))


def is_admissible(metric: WarpedMetric, tol: float = 1e-6) -> bool:
    return boundary_defects(metric).max_abs() < tol


def regrid(metric: WarpedMetric, n_new: Optional[int] = None, stencil: Stencil = DEFAULT_STENCIL) -> WarpedMetric:
    """
    Restore the arclength gauge: phi = A on a uniform grid, h resampled against arclength.
    """
    n_new = metric.grid.n if n_new is None else n_new
    r = arclength(metric)
    if np.any(np.diff(r) <= 0):
        raise NonMonotoneArclengthError("Arclength is not strictly increasing")
    length = float(r[-1])
    grid = RadialGrid(n_new)
    r_new = length * grid.s
    slopes = _radial_derivative(metric, metric.h, stencil)
    h_new = CubicHermiteSpline(r, metric.h, slopes)(r_new)
    h_new[0] = h_new[-1] = 0.0
    if np.any(h_new[1:-1] <= 0):
        _logger.debug("Hermite resampling lost positivity, falling back to monotone interpolation")
        h_new = PchipInterpolator(r, metric.h)(r_new)
        h_new[0] = h_new[-1] = 0.0
    return WarpedMetric(grid, np.full(n_new, length), h_new)


def max_gauge_distortion(metric: WarpedMetric) -> float:
    """ max_i |log(phi_i / A)|, zero exactly in arclength gauge """
    return float(np.abs(np.log(metric.phi / total_length(metric))).max())


class InvalidProfileError(ValueError):
    pass


class NonPositiveRadiusError(ValueError):
    pass


class PoleRegularizationError(ValueError):
    pass


class NonMonotoneArclengthError(ValueError):
    pass
