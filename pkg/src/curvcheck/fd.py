"""Finite-difference jets: nested 4th-order central stencils plus Richardson.

This is the degraded fallback behind the Taylor mode.  Mixed partials are
built by applying one-dimensional central stencils axis by axis on a tensor
grid of offsets, then extrapolating one Richardson level from steps h and
h/2 (both stencils have leading error h^4, so the combination
(16 D(h/2) - D(h)) / 15 cancels it).

Declared accuracy on unit-scale charts with the default step 1e-2:
roughly 1e-7 for total order <= 2, 1e-5 for order 3, 1e-3 for order 4.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import product

import numpy as np

from .errors import DomainError, OrderError
from .expressions import ScalarField, evaluate

__all__ = ["fd_jet_coeffs", "DEFAULT_STEP", "stencil"]

DEFAULT_STEP = 1e-2
_ACCURACY = 4


@lru_cache(maxsize=None)
def stencil(deriv_order: int) -> tuple[np.ndarray, np.ndarray]:
    """Offsets and weights of the 4th-order central stencil for one axis.

    Weights solve the moment system sum_j w_j o_j^m / m! = delta(m, order)
    over symmetric integer offsets; multiply by h**-order at use time.
    """
    if not 1 <= deriv_order <= 4:
        raise OrderError(f"stencils available for derivative orders 1..4, got {deriv_order}")
    half = (deriv_order + 1) // 2 + _ACCURACY // 2
    offsets = np.arange(-half, half + 1, dtype=float)
    n = len(offsets)
    van = np.zeros((n, n))
    fact = 1.0
    for m in range(n):
        if m > 0:
            fact *= m
        van[m] = offsets**m / fact
    rhs = np.zeros(n)
    rhs[deriv_order] = 1.0
    weights = np.linalg.solve(van, rhs)
    return offsets, weights


def _mixed_partial(field: ScalarField, point: np.ndarray, alpha: tuple[int, ...], h: float) -> float:
    """One mixed partial by nesting per-axis stencils at a single step h."""
    axes = [k for k, a in enumerate(alpha) if a > 0]
    grids = []
    for k in axes:
        offsets, weights = stencil(alpha[k])
        grids.append((k, offsets * h, weights / h ** alpha[k]))
    total = 0.0
    pts = []
    coefs = []
    for combo in product(*[range(len(g[1])) for g in grids]):
        p = point.copy()
        w = 1.0
        for (k, offs, wts), idx in zip(grids, combo):
            p[k] += offs[idx]
            w *= wts[idx]
        pts.append(p)
        coefs.append(w)
    vals = evaluate(field.expr, np.asarray(pts))
    total = float(np.dot(np.asarray(coefs), vals))
    return total


def fd_jet_coeffs(
    field: ScalarField, point, order: int, step: float = DEFAULT_STEP
) -> dict[tuple[int, ...], float]:
    """All mixed partials (not Taylor coefficients) up to total ``order``.

    Returns a map multi-index -> derivative value.  Requires the stencil
    footprint (max offset 3 * step, plus the refined pass) to stay inside
    the field domain.
    """
    from .taylor import basis

    if not 0 <= order <= 4:
        raise OrderError(f"jet order must be 0..4, got {order}")
    pt = np.asarray(point, dtype=float)
    margin = 3.0 * step
    if not np.all(field.domain.contains(pt, margin=margin)):
        raise DomainError(
            f"point {pt.tolist()} too close to the domain boundary for the FD stencil "
            f"(needs margin {margin})"
        )
    out: dict[tuple[int, ...], float] = {}
    for alpha in basis(order):
        total = sum(alpha)
        if total == 0:
            out[alpha] = float(evaluate(field.expr, pt))
            continue
        coarse = _mixed_partial(field, pt, alpha, step)
        fine = _mixed_partial(field, pt, alpha, step / 2.0)
        out[alpha] = (16.0 * fine - coarse) / 15.0
    return out
