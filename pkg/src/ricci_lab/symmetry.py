"""
Killing and conformal vector field residuals in the rotationally symmetric gauge.

For X = psi(r) d_theta on dr^2 + h^2 dtheta^2 the only nonzero component of L_X g is
(L_X g)_{r theta} = h^2 psi_r. J grad f = (f_r / h) d_theta with J d_r = +(1/h) d_theta.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ricci_lab.differences import DEFAULT_STENCIL, Stencil
from ricci_lab.geometry import WarpedMetric, arclength
from ricci_lab.soliton import PotentialProfile, check_pole_potential
from ricci_lab.type import FloatArray

POLE_WINDOW_FRACTION = 1e-3
FIT_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class AngularField:
    """ Coefficient psi of X = psi d_theta, sampled on the metric's grid """
    psi: FloatArray


def pole_window(metric: WarpedMetric) -> np.ndarray:
    """ Nodes far enough from the poles for 1/h not to amplify roundoff """
    return metric.h > POLE_WINDOW_FRACTION * metric.h.max()


def _derivative_r(metric: WarpedMetric, values: FloatArray, stencil: Stencil) -> FloatArray:
    return stencil.derivative(values, metric.grid.spacing, 1) / metric.phi


def killing_residual(metric: WarpedMetric, field: AngularField, stencil: Stencil = DEFAULT_STENCIL) -> float:
    """ sup |h^2 psi_r| over the pole window """
    if len(field.psi) != metric.grid.n:
        raise ValueError(f"Field has {len(field.psi)} values, metric grid has {metric.grid.n}")
    psi_r = _derivative_r(metric, field.psi, stencil)
    return float(np.abs(metric.h ** 2 * psi_r)[pole_window(metric)].max())


def potential_field(metric: WarpedMetric, potential: PotentialProfile,
                    stencil: Stencil = DEFAULT_STENCIL) -> AngularField:
    """ psi = f_r / h, f_rr / h_r at the poles """
    check_pole_potential(potential)
    h_r = _derivative_r(metric, metric.h, stencil)
    f_rr = _derivative_r(metric, potential.f_r, stencil)
    psi = np.empty(metric.grid.n)
    psi[1:-1] = potential.f_r[1:-1] / metric.h[1:-1]
    psi[[0, -1]] = f_rr[[0, -1]] / h_r[[0, -1]]
    return AngularField(psi)


def killing_residual_of_potential(metric: WarpedMetric, potential: PotentialProfile,
                                  stencil: Stencil = DEFAULT_STENCIL) -> float:
    """ Vanishes iff f_r = a h for a constant a """
    return killing_residual(metric, potential_field(metric, potential, stencil), stencil)


def conformal_residual(metric: WarpedMetric, potential: PotentialProfile,
                       window: Optional[Tuple[float, float]] = None,
                       stencil: Stencil = DEFAULT_STENCIL) -> float:
    """
    sup |f_rr - h_r f_r / h|. Without a window the sup runs over the pole window, the poles
    themselves contribute zero (the limit of h_r f_r / h is f_rr) once f_r vanishes there.
    With an arclength window (r_lo, r_hi) only nodes inside it count and the poles are not checked.
    """
    f_rr = _derivative_r(metric, potential.f_r, stencil)
    h_r = _derivative_r(metric, metric.h, stencil)
    if window is None:
        check_pole_potential(potential)
        mask = pole_window(metric)
    else:
        r = arclength(metric)
        mask = (r >= window[0]) & (r <= window[1])
        mask[[0, -1]] = False
        if not mask.any():
            raise ValueError(f"Window {window} contains no interior node")
    residual = np.abs(f_rr[mask] - h_r[mask] * potential.f_r[mask] / metric.h[mask])
    return float(residual.max())


def extract_a(metric: WarpedMetric, potential: PotentialProfile) -> Tuple[float, float]:
    """
    Least-squares a with f_r ~ a h over the interior nodes.
    :return: (a_fit, sup |f_r - a_fit h|)
    """
    h = metric.h[1:-1]
    f_r = potential.f_r[1:-1]
    norm = float(np.dot(h, h))
    if norm < FIT_FLOOR:
        raise DegenerateFitError(f"Sum of h^2 is {norm}, below {FIT_FLOOR}")
    a_fit = float(np.dot(f_r, h) / norm)
    return a_fit, float(np.abs(f_r - a_fit * h).max())


class DegenerateFitError(ValueError):
    pass
