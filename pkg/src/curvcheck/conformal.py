"""Weyl, Cotton and Schouten tensors, and divergences of (0,4) fields.

Conventions (n = 4 throughout, general n kept in the coefficients):

    W_ijkl = R_ijkl - (Ric_ik g_jl + Ric_jl g_ik - Ric_il g_jk - Ric_jk g_il) / (n-2)
             + R (g_ik g_jl - g_il g_jk) / ((n-1)(n-2))
    C_ijk  = nabla_i Ric_jk - nabla_j Ric_ik
             - (nabla_i R g_jk - nabla_j R g_ik) / (2(n-1))
    (div T)_jkl = g^{ab} nabla_a T_{b j k l}

The divergence of the Weyl tensor determines the Cotton tensor.  The slot
correspondence and sign were fixed numerically on generic (non conformally
flat) fixtures, where both tensors are nonzero, and then frozen:

    C_ijk = ((n-2)/(n-3)) * (div W)_{k i j}

which also follows from the pair symmetry of W.  ``cotton_from_div_weyl``
implements exactly this frozen form.
"""

from __future__ import annotations

import numpy as np

from .curvature import SYMMETRY_TOL, CurvaturePoint, _bundle, _expr_tensor
from .errors import InvalidArgumentError
from .expressions import MetricField
from .geometry import GeometryBundle
from .tensors import TensorValue

__all__ = [
    "weyl_tensor",
    "cotton_tensor",
    "schouten_tensor",
    "divergence_four_tensor",
    "cotton_from_div_weyl",
]

#: Frozen relation sign: C_ijk = DIV_WEYL_SIGN * (n-2)/(n-3) * (div W)_{kij}.
DIV_WEYL_SIGN = +1.0


def weyl_tensor(cp: CurvaturePoint) -> TensorValue:
    """Trace-free curvature remainder of the decomposition formula."""
    if cp.dim < 3:
        raise InvalidArgumentError("the Weyl tensor needs dimension >= 3")
    b = cp.bundle
    return TensorValue(b.weyl.value[0], "dddd", symmetry="riemann-type",
                       sym_tol=SYMMETRY_TOL[b.mode])


def schouten_tensor(cp: CurvaturePoint) -> TensorValue:
    """Trace-adjusted Ricci tensor (Ric - R g / (2(n-1))) / (n-2)."""
    b = cp.bundle
    return TensorValue(b.schouten.value[0], "dd", symmetry="symmetric-2",
                       sym_tol=SYMMETRY_TOL[b.mode])


def cotton_tensor(g: MetricField, point, mode: str = "taylor") -> TensorValue:
    """Antisymmetrized covariant derivative of the trace-adjusted Ricci.

    The scalar-curvature gradient terms are always evaluated, even though
    they vanish identically on constant-scalar-curvature metrics.
    """
    b = _bundle(g, point, 3, mode)
    return TensorValue(b.cotton.value[0], "ddd", symmetry="antisymmetric-01",
                       sym_tol=SYMMETRY_TOL[b.mode])


def divergence_four_tensor(g: MetricField, field, point, mode: str = "taylor") -> TensorValue:
    """First-slot divergence of a (0,4) tensor field at a point.

    ``field`` selects a built-in curvature-derived field ('weyl',
    'weyl_plus', 'weyl_minus') or supplies a 4x4x4x4 table of expression
    trees for an explicit field.
    """
    b = _bundle(g, point, 3, mode)
    if isinstance(field, str):
        try:
            ring = {"weyl": lambda: b.div_weyl,
                    "weyl_plus": lambda: b.div_weyl_plus,
                    "weyl_minus": lambda: b.div_weyl_minus}[field]()
        except KeyError:
            raise InvalidArgumentError(f"unknown built-in field {field!r}") from None
        return TensorValue(ring.value[0], "ddd")
    t = _expr_tensor(b, field, 4)
    return TensorValue(b.divergence_four(t).value[0], "ddd")


def cotton_from_div_weyl(div_weyl_values: np.ndarray, n: int = 4) -> np.ndarray:
    """Predict Cotton components from divergence-of-Weyl components.

    Applies the frozen slot permutation and sign; works on arrays with
    leading batch axes, the last three axes being the tensor slots.
    """
    if n <= 3:
        raise InvalidArgumentError("relation requires n >= 4")
    permuted = np.einsum("...kij->...ijk", div_weyl_values)
    return DIV_WEYL_SIGN * ((n - 2) / (n - 3)) * permuted
