"""Derivative jets of chart fields, with a declared accuracy contract.

``scalar_jet`` returns all mixed partials of a scalar field up to a total
order <= 4 at one chart point.  The primary mode evaluates the expression
tree in truncated Taylor arithmetic (exact to roundoff for the supported
node set); the fallback mode uses nested central finite differences with
one Richardson level and carries degraded tolerances (see `curvcheck.fd`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fd, taylor
from .errors import InvalidArgumentError, OrderError
from .expressions import MetricField, ScalarField

__all__ = ["Jet", "scalar_jet", "metric_jet", "JET_MODES"]

JET_MODES = ("taylor", "fd")


@dataclass(frozen=True)
class Jet:
    """Mixed partial derivatives at a point, keyed by multi-index.

    ``values[alpha]`` is d^alpha f evaluated at ``point`` (derivative values,
    not Taylor coefficients); every multi-index with total order <= ``order``
    is present.
    """

    order: int
    point: tuple[float, ...]
    values: dict[tuple[int, ...], float]

    def __getitem__(self, alpha: tuple[int, ...]) -> float:
        if sum(alpha) > self.order:
            raise OrderError(f"jet holds orders <= {self.order}, requested {alpha}")
        return self.values[alpha]

    @property
    def value(self) -> float:
        return self.values[(0, 0, 0, 0)]

    def to_taylor(self) -> taylor.Taylor:
        """Convert derivative values to ring coefficients (divide by alpha!)."""
        coeffs = {
            alpha: v / math.prod(math.factorial(a) for a in alpha)
            for alpha, v in self.values.items()
        }
        return taylor.Taylor.from_jet_coeffs(coeffs, self.order)


def _check_args(field: ScalarField, point, order: int) -> np.ndarray:
    if not isinstance(field, ScalarField):
        raise InvalidArgumentError("scalar_jet requires a ScalarField")
    if not 0 <= order <= 4:
        raise OrderError(f"jet order must be 0..4, got {order}")
    pt = np.asarray(point, dtype=float).reshape(-1)
    if pt.shape != (4,):
        raise InvalidArgumentError(f"point must have 4 coordinates, got shape {pt.shape}")
    field.domain.require(pt)
    return pt


def scalar_jet(
    field: ScalarField,
    point,
    order: int,
    mode: str = "taylor",
    fd_step: float = fd.DEFAULT_STEP,
) -> Jet:
    """Mixed partials of ``field`` up to total ``order`` at ``point``."""
    pt = _check_args(field, point, order)
    if mode == "taylor":
        seeds = taylor.seed_point(pt, order)
        t = taylor.evaluate_taylor(field.expr, seeds, order)
        values = {}
        for alpha in taylor.basis(order):
            fact = math.prod(math.factorial(a) for a in alpha)
            values[alpha] = float(t.coeff(alpha)) * fact
    elif mode == "fd":
        values = fd.fd_jet_coeffs(field, pt, order, step=fd_step)
    else:
        raise InvalidArgumentError(f"unknown jet mode {mode!r}; use one of {JET_MODES}")
    return Jet(order=order, point=tuple(pt.tolist()), values=values)


def metric_jet(
    g: MetricField,
    point,
    order: int,
    mode: str = "taylor",
    fd_step: float = fd.DEFAULT_STEP,
) -> np.ndarray:
    """Componentwise jets of the metric: a symmetric 4x4 object array.

    Entries (i, j) and (j, i) are the same Jet object, so symmetry of the
    jets is enforced structurally.
    """
    out = np.empty((4, 4), dtype=object)
    for i in range(4):
        for j in range(i, 4):
            comp = ScalarField(g.components[i][j], g.domain)
            jet = scalar_jet(comp, point, order, mode=mode, fd_step=fd_step)
            out[i, j] = jet
            out[j, i] = jet
    return out
