"""Classical curvature pipeline: Christoffel, Riemann, Ricci, Hessians.

Public, single-point wrappers around :class:`curvcheck.geometry.GeometryBundle`.
The sign conventions are pinned so that the unit round 4-sphere has scalar
curvature +12 and Ricci = 3 g; see the geometry module header.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .expressions import Expr, MetricField, ScalarField
from .geometry import GeometryBundle
from .taylor import Taylor, nbasis
from .tensors import TensorValue

__all__ = ["CurvaturePoint", "curvature_at", "covariant_derivative", "hessian_laplacian"]

#: Symmetry-check tolerances attached to constructed tensors, per jet mode.
SYMMETRY_TOL = {"taylor": 1e-9, "fd": 1e-4}


@dataclass(frozen=True)
class CurvaturePoint:
    """Curvature data of a metric at one chart point."""

    point: tuple[float, ...]
    g: TensorValue
    g_inv: TensorValue
    christoffel: TensorValue
    riemann: TensorValue
    ricci: TensorValue
    scalar: float
    bundle: GeometryBundle

    @property
    def dim(self) -> int:
        return 4


def _bundle(g: MetricField, point, order: int, mode: str, potential=None,
            fd_step=None) -> GeometryBundle:
    kwargs = {}
    if fd_step is not None:
        kwargs["fd_step"] = fd_step
    return GeometryBundle(g, np.asarray(point, dtype=float), order=order, mode=mode,
                          potential=potential, **kwargs)


def curvature_at(g: MetricField, point, mode: str = "taylor", order: int = 2,
                 fd_step=None) -> CurvaturePoint:
    """Evaluate the curvature pipeline of ``g`` at one chart point."""
    b = _bundle(g, point, max(order, 2), mode, fd_step=fd_step)
    tol = SYMMETRY_TOL[mode]
    return CurvaturePoint(
        point=tuple(np.asarray(point, dtype=float).tolist()),
        g=TensorValue(b.g.value[0], "dd", symmetry="symmetric-2"),
        g_inv=TensorValue(b.ginv.value[0], "uu", symmetry="symmetric-2", sym_tol=1e-10),
        christoffel=TensorValue(b.christoffel.value[0], "udd"),
        riemann=TensorValue(b.riemann.value[0], "dddd", symmetry="riemann-type", sym_tol=tol),
        ricci=TensorValue(b.ricci.value[0], "dd", symmetry="symmetric-2", sym_tol=tol),
        scalar=float(b.scalar_curv.value[0]),
        bundle=b,
    )


def _expr_tensor(b: GeometryBundle, components, rank: int) -> Taylor:
    comps = np.asarray(components, dtype=object)
    if comps.shape != (4,) * rank:
        raise InvalidArgumentError(f"components must have shape {(4,) * rank}")
    deg = b.order
    c = np.zeros((b.npoints,) + (4,) * rank + (nbasis(deg),))
    for idx in np.ndindex(*comps.shape):
        e = comps[idx]
        if not isinstance(e, Expr):
            raise InvalidArgumentError("tensor components must be expression trees")
        c[(slice(None),) + idx] = b._eval_scalar(e, deg).c
    return Taylor(c, deg)


def covariant_derivative(g: MetricField, components, variance: str, point,
                         mode: str = "taylor", order: int | None = None) -> TensorValue:
    """Covariant derivative of an expression-valued tensor field at a point.

    ``components`` is a nested 4**rank table of expression trees and
    ``variance`` its slot signature.  The result gains one covariant slot in
    front (the derivative slot); for the flat metric it reduces to the table
    of partial derivatives.
    """
    rank = len(variance)
    if order is None:
        order = 1
    b = _bundle(g, point, max(order, 1), mode)
    t = _expr_tensor(b, components, rank)
    cov = b.covariant_derivative(t, variance)
    return TensorValue(cov.value[0], "d" + variance)


def hessian_laplacian(f: ScalarField, g: MetricField, point,
                      mode: str = "taylor") -> tuple[TensorValue, float]:
    """Covariant Hessian and Laplace-Beltrami value of ``f`` at a point."""
    b = _bundle(g, point, 2, mode, potential=f)
    hess = TensorValue(b.hess_f.value[0], "dd", symmetry="symmetric-2",
                       sym_tol=SYMMETRY_TOL[mode])
    return hess, float(b.lap_f.value[0])
