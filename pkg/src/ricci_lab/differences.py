"""
Finite-difference stencils on a uniform grid
"""

import functools
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sps

from ricci_lab.type import FloatArray

MAX_DERIVATIVE_ORDER = 3


def finite_difference_weights(offsets: Sequence[int], order: int) -> FloatArray:
    """
    Weights w_j with sum_j w_j f(x + o_j dx) = dx^order f^(order)(x) + O(dx^len(offsets)).
    Solves the moment system sum_j w_j o_j^k = k! delta_{k, order}, k = 0 .. len(offsets) - 1.
    """
    offsets = np.asarray(offsets, dtype=float)
    if order >= len(offsets):
        raise ValueError(f"Derivative of order {order} needs more than {len(offsets)} points")
    vandermonde = np.vander(offsets, increasing=True).T
    moments = np.zeros(len(offsets))
    moments[order] = math.factorial(order)
    return np.linalg.solve(vandermonde, moments)


@functools.lru_cache(maxsize=128)
def derivative_matrix(n: int, order: int, accuracy: int = 4) -> sps.csr_matrix:
    """
    Sparse differentiation matrix for unit spacing.
    Interior rows use central stencils, rows closer than the half-width to an end use
    one-sided stencils with order + accuracy points. The result is cached, do not modify it.
    """
    if not 1 <= order <= MAX_DERIVATIVE_ORDER:
        raise ValueError(f"Derivative order must be in 1..{MAX_DERIVATIVE_ORDER}, not {order}")
    if accuracy < 2 or accuracy % 2:
        raise ValueError(f"Stencil accuracy must be a positive even integer, not {accuracy}")
    half_width = _half_width(order, accuracy)
    one_sided_points = order + accuracy
    if n < max(2 * half_width + 1, one_sided_points):
        raise ValueError(f"Grid of {n} nodes is too small for order {order} with accuracy {accuracy}")

    central = finite_difference_weights(range(-half_width, half_width + 1), order)
    rows, cols, values = [], [], []
    for i in range(n):
        if half_width <= i <= n - 1 - half_width:
            start, weights = i - half_width, central
        else:
            start = 0 if i < half_width else n - one_sided_points
            offsets = [start + j - i for j in range(one_sided_points)]
            weights = finite_difference_weights(offsets, order)
        rows.extend([i] * len(weights))
        cols.extend(range(start, start + len(weights)))
        values.extend(weights)
    return sps.csr_matrix((values, (rows, cols)), shape=(n, n))


class Parity(Enum):
    """ Symmetry of a sampled function about both ends of the grid (a pole) """
    ODD = -1.0
    EVEN = 1.0

    @property
    def flipped(self) -> "Parity":
        return Parity.EVEN if self is Parity.ODD else Parity.ODD


def _half_width(order: int, accuracy: int) -> int:
    return (order + 1) // 2 + accuracy // 2 - 1


def mirror_pad(values: FloatArray, width: int, parity: Parity) -> FloatArray:
    """ Ghost nodes values[-j] = +-values[j] and values[n-1+j] = +-values[n-1-j] """
    if width >= len(values):
        raise ValueError(f"Cannot mirror {width} ghost nodes from {len(values)} values")
    sign = parity.value
    head = sign * values[width:0:-1]
    tail = sign * values[-2:-width - 2:-1]
    return np.concatenate([head, values, tail])


@dataclass(frozen=True)
class Stencil:
    """
    Difference operators of a fixed accuracy order.
    second_derivative_scale other than 1 gives a deliberately wrong operator, it exists only
    for the fault-injection run of the invariant suite.
    """
    accuracy: int = 4
    second_derivative_scale: float = 1.0

    def derivative(self, values: FloatArray, spacing: float, order: int,
                   parity: Optional[Parity] = None) -> FloatArray:
        """
        :param parity: symmetry of values about both ends, central stencils are then used up to the ends
        """
        if parity is None:
            matrix = derivative_matrix(len(values), order, self.accuracy)
            result = (matrix @ values) / spacing ** order
        else:
            width = _half_width(order, self.accuracy)
            padded = mirror_pad(np.asarray(values, dtype=float), width, parity)
            matrix = derivative_matrix(len(padded), order, self.accuracy)
            result = (matrix @ padded)[width:-width] / spacing ** order
        if order == 2:
            result = result * self.second_derivative_scale
        return result

    def flux_derivative(self, values: FloatArray, spacing: float, factor: FloatArray, parity: Parity) -> FloatArray:
        """
        d/ds (factor * d/ds values) as two first derivatives, factor must be even about the ends.
        Counts as a second derivative for second_derivative_scale.
        """
        flux = factor * self.derivative(values, spacing, 1, parity)
        return self.derivative(flux, spacing, 1, parity.flipped) * self.second_derivative_scale


DEFAULT_STENCIL = Stencil()
BROKEN_STENCIL = Stencil(second_derivative_scale=1.01)
