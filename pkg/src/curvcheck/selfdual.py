"""Four-dimensional duality machinery: frames, Hodge star, W+/W- blocks.

Everything here works on pointwise values.  Bivectors and curvature-type
tensors are handled in the components of an oriented orthonormal frame,
where the Hodge star is the constant map *(e1^e2) = e3^e4 and friends.
The three-dimensional bases of the +1 / -1 star eigenspaces are

    L+ : (e1^e2 + e3^e4)/sqrt2, (e1^e3 + e4^e2)/sqrt2, (e3^e2 + e4^e1)/sqrt2
    L- : (e1^e2 - e3^e4)/sqrt2, (e1^e3 - e4^e2)/sqrt2, (e3^e2 - e4^e1)/sqrt2

with the bivector inner product <u, v> = sum_{ab} u_ab v_ab / 2.  A
curvature-type (0,4) tensor acts on bivectors by (T u)_ab = T_abcd u_cd / 2,
and its matrix in the bases above is M[p, q] = <B_p, T B_q>; this factor
convention makes the full curvature operator of the unit round sphere equal
the identity, pinning the R/12 normalization of the block matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curvature import _bundle
from .errors import DegenerateMetricError, InvalidArgumentError
from .expressions import MetricField
from .geometry import GeometryBundle, levi_civita_signs
from .tensors import TensorValue

__all__ = [
    "Frame",
    "TwoFormSplit",
    "WeylBlocks",
    "orthonormal_frame",
    "frame_components",
    "hodge_star",
    "dual_pair",
    "selfdual_part_frame",
    "two_form_split",
    "weyl_blocks",
    "curvature_operator_blocks",
    "DivWeylSplit",
    "div_weyl_split",
    "weitzenbock_residual",
]

_EPS = levi_civita_signs()


def _wedge(a: int, b: int) -> np.ndarray:
    out = np.zeros((4, 4))
    out[a, b] = 1.0
    out[b, a] = -1.0
    return out


_SQ2 = np.sqrt(2.0)
#: Frame-component bases of the +/- star eigenspaces (shape (3, 4, 4) each).
LAMBDA_PLUS_BASIS = np.stack([
    (_wedge(0, 1) + _wedge(2, 3)) / _SQ2,
    (_wedge(0, 2) + _wedge(3, 1)) / _SQ2,
    (_wedge(2, 1) + _wedge(3, 0)) / _SQ2,
])
LAMBDA_MINUS_BASIS = np.stack([
    (_wedge(0, 1) - _wedge(2, 3)) / _SQ2,
    (_wedge(0, 2) - _wedge(3, 1)) / _SQ2,
    (_wedge(2, 1) - _wedge(3, 0)) / _SQ2,
])


@dataclass(frozen=True)
class Frame:
    """Oriented orthonormal frame at a point.

    ``vectors`` rows are the frame vectors in chart components (e_a =
    vectors[a, i] d/dx_i); ``coframe`` rows are the dual 1-forms.  The
    orientation is always +1 relative to the chart.
    """

    point: tuple[float, ...]
    vectors: np.ndarray
    coframe: np.ndarray
    orientation: int = 1


def orthonormal_frame(g_matrix, point=(0.0, 0.0, 0.0, 0.0)) -> Frame:
    """Gram-Schmidt frame from the coordinate basis, in fixed order.

    Deterministic: e_1 is the normalized first coordinate vector, and each
    following coordinate vector is orthogonalized against its predecessors.
    The resulting frame is positively oriented with respect to the chart.
    """
    g = g_matrix.entries if isinstance(g_matrix, TensorValue) else np.asarray(g_matrix, dtype=float)
    if g.shape != (4, 4):
        raise InvalidArgumentError(f"metric matrix must be 4x4, got {g.shape}")
    rows = np.zeros((4, 4))
    for a in range(4):
        v = np.eye(4)[a].astype(float)
        for c in range(a):
            v = v - (rows[c] @ g @ v) * rows[c]
        n2 = v @ g @ v
        if not n2 > 1e-24:
            raise DegenerateMetricError("metric is degenerate: Gram-Schmidt collapsed")
        rows[a] = v / np.sqrt(n2)
    coframe = np.linalg.inv(rows).T
    return Frame(point=tuple(float(x) for x in np.asarray(point, dtype=float)),
                 vectors=rows, coframe=coframe)


def frame_components(values: np.ndarray, frame: Frame, variance: str) -> np.ndarray:
    """Convert chart tensor components to frame components.

    Covariant slots contract with the frame vectors, contravariant slots
    with the coframe rows.
    """
    out = np.asarray(values, dtype=float)
    for slot, v in enumerate(variance):
        mat = frame.vectors if v == "d" else frame.coframe
        out = np.moveaxis(np.moveaxis(out, slot, -1) @ mat.T, -1, slot)
    return out


def hodge_star(omega: np.ndarray, frame: Frame | None = None) -> np.ndarray:
    """Hodge star of a bivector given in oriented orthonormal frame components."""
    w = np.asarray(omega, dtype=float)
    if w.shape != (4, 4):
        raise InvalidArgumentError("bivector must be a 4x4 array")
    if np.max(np.abs(w + w.T)) > 1e-9 * max(1.0, np.max(np.abs(w))):
        raise InvalidArgumentError("bivector must be antisymmetric")
    return 0.5 * np.einsum("abcd,cd->ab", _EPS, w)


def dual_pair(r: int, s: int) -> tuple[int, int]:
    """Complementary index pair (1-based) completing (r, s) to an even permutation."""
    if not (1 <= r <= 4 and 1 <= s <= 4):
        raise InvalidArgumentError("indices must lie in 1..4")
    if r == s:
        raise InvalidArgumentError("dual pair needs two distinct indices")
    rest = [a for a in range(1, 5) if a not in (r, s)]
    perm = [r, s] + rest
    sign = 1
    for i in range(4):
        for j in range(i + 1, 4):
            if perm[i] > perm[j]:
                sign = -sign
    return tuple(rest) if sign > 0 else (rest[1], rest[0])


def selfdual_part_frame(t_frame: np.ndarray, sign: float = +1.0) -> np.ndarray:
    """Componentwise dual projection in an oriented orthonormal frame.

    T(+/-)_pqrs = (T_pqrs +/- T_pq rbar sbar) / 2, with (rbar, sbar) the dual
    pair of (r, s); entries with r = s vanish by antisymmetry.
    """
    t = np.asarray(t_frame, dtype=float)
    out = np.zeros_like(t)
    for r in range(4):
        for s in range(4):
            if r == s:
                continue
            rb, sb = dual_pair(r + 1, s + 1)
            out[:, :, r, s] = 0.5 * (t[:, :, r, s] + sign * t[:, :, rb - 1, sb - 1])
    return out


@dataclass(frozen=True)
class TwoFormSplit:
    """Star eigenbases at a point, in frame and in chart components."""

    frame: Frame
    lambda_plus: np.ndarray   # (3, 4, 4) frame components
    lambda_minus: np.ndarray

    def chart_components(self, which: str = "plus") -> np.ndarray:
        """Covariant chart components of the chosen basis bivectors."""
        base = self.lambda_plus if which == "plus" else self.lambda_minus
        co = self.frame.coframe
        return np.einsum("pab,ai,bj->pij", base, co, co)


def two_form_split(frame: Frame) -> TwoFormSplit:
    return TwoFormSplit(frame=frame, lambda_plus=LAMBDA_PLUS_BASIS.copy(),
                        lambda_minus=LAMBDA_MINUS_BASIS.copy())


def _operator_matrix(t_frame: np.ndarray, basis_a: np.ndarray, basis_b: np.ndarray) -> np.ndarray:
    """M[p, q] = <B_p, T B_q> for a curvature-type tensor in frame components."""
    return 0.25 * np.einsum("pab,abcd,qcd->pq", basis_a, t_frame, basis_b)


@dataclass(frozen=True)
class WeylBlocks:
    """3x3 blocks of the Weyl operator on the star eigenspaces."""

    w_plus: np.ndarray
    w_minus: np.ndarray
    ric_block: np.ndarray
    scalar: float


def weyl_blocks(weyl_frame: np.ndarray, ricci_frame: np.ndarray, scalar: float,
                sym_tol: float = 1e-8) -> WeylBlocks:
    """Project a frame-component Weyl tensor onto the star eigenspaces.

    ``ricci_frame`` enters only through the mixed block of the curvature
    operator, reconstructed from the decomposition formula with g = delta in
    frame components.
    """
    w = np.asarray(weyl_frame, dtype=float)
    if w.shape != (4, 4, 4, 4):
        raise InvalidArgumentError("frame Weyl tensor must be 4x4x4x4")
    scale = max(1.0, float(np.max(np.abs(w))))
    bad = max(
        np.max(np.abs(w + np.swapaxes(w, 0, 1))),
        np.max(np.abs(w - np.transpose(w, (2, 3, 0, 1)))),
        np.max(np.abs(np.einsum("abad->bd", w))),
    )
    if bad > sym_tol * scale:
        raise InvalidArgumentError(
            f"input lacks trace-free curvature symmetries (violation {bad:.2e})"
        )
    ric = np.asarray(ricci_frame, dtype=float)
    delta = np.eye(4)
    kn = (
        np.einsum("ik,jl->ijkl", ric, delta)
        + np.einsum("jl,ik->ijkl", ric, delta)
        - np.einsum("il,jk->ijkl", ric, delta)
        - np.einsum("jk,il->ijkl", ric, delta)
    ) / 2.0
    gg = np.einsum("ik,jl->ijkl", delta, delta) - np.einsum("il,jk->ijkl", delta, delta)
    riem = w + kn - (scalar / 6.0) * gg
    return WeylBlocks(
        w_plus=_operator_matrix(w, LAMBDA_PLUS_BASIS, LAMBDA_PLUS_BASIS),
        w_minus=_operator_matrix(w, LAMBDA_MINUS_BASIS, LAMBDA_MINUS_BASIS),
        ric_block=_operator_matrix(riem, LAMBDA_PLUS_BASIS, LAMBDA_MINUS_BASIS),
        scalar=float(scalar),
    )


def curvature_operator_blocks(cp, frame: Frame) -> np.ndarray:
    """Full 6x6 matrix of the curvature operator on 2-forms.

    Basis order: the three L+ elements, then the three L- elements.  The
    diagonal blocks equal w_plus + (R/12) I and w_minus + (R/12) I; the
    off-diagonal block vanishes exactly when the metric is Einstein at the
    point.
    """
    riem_frame = frame_components(cp.riemann.entries, frame, "dddd")
    bases = np.concatenate([LAMBDA_PLUS_BASIS, LAMBDA_MINUS_BASIS])
    return _operator_matrix(riem_frame, bases, bases)


@dataclass(frozen=True)
class DivWeylSplit:
    """Divergences of W, W+ and W- at a point, with their metric norms."""

    div_w: TensorValue
    div_w_plus: TensorValue
    div_w_minus: TensorValue
    norm2: float
    norm2_plus: float
    norm2_minus: float


def _norm2_ddd(values: np.ndarray, ginv: np.ndarray) -> float:
    return float(np.einsum("ijk,pqr,ip,jq,kr->", values, values, ginv, ginv, ginv))


def div_weyl_split(g: MetricField, point, mode: str = "taylor") -> DivWeylSplit:
    """Divergences of the Weyl field and of its two dual halves.

    The dual halves are built pointwise from the star on the second index
    pair and differentiated as fields; the squared norms satisfy
    |div W|^2 = |div W+|^2 + |div W-|^2.
    """
    b = _bundle(g, point, 3, mode)
    ginv = b.ginv.value[0]
    dw = b.div_weyl.value[0]
    dwp = b.div_weyl_plus.value[0]
    dwm = b.div_weyl_minus.value[0]
    return DivWeylSplit(
        div_w=TensorValue(dw, "ddd"),
        div_w_plus=TensorValue(dwp, "ddd"),
        div_w_minus=TensorValue(dwm, "ddd"),
        norm2=_norm2_ddd(dw, ginv),
        norm2_plus=_norm2_ddd(dwp, ginv),
        norm2_minus=_norm2_ddd(dwm, ginv),
    )


def weitzenbock_residual(g: MetricField, point, mode: str = "taylor") -> tuple[float, float, float]:
    """Rough-Laplacian identity for the self-dual Weyl norm.

    Returns (lhs, rhs, lhs - rhs) where lhs is the Laplacian of |W+|^2 and
    rhs = 2 |nabla W+|^2 + R |W+|^2 - 36 det W+.  Norms and the determinant
    use the 3x3 endomorphism normalization of W+ on the +1 star eigenspace
    (tensor-norm conventions differ by a constant factor and break the
    closed-form Kaehler check); the gradient term uses the matching quarter
    of the (0,5) tensor norm.  Meaningful as an identity where div W+ = 0.
    """
    b = _bundle(g, point, 4, mode)
    lhs = float(b.laplacian_scalar(b.weyl_plus_norm2_op).value[0])
    w2 = float(b.weyl_plus_norm2_op.value[0])
    det = float(b.det_weyl_plus_op.value[0])
    grad2 = float(b.grad_weyl_plus_norm2_op()[0])
    scal = float(b.scalar_curv.value[0])
    rhs = 2.0 * grad2 + scal * w2 - 36.0 * det
    return lhs, rhs, lhs - rhs
