"""Critical-point-equation residuals and level-set geometry.

A CPE instance pairs a constant-scalar-curvature metric with a scalar
potential; the fundamental equation, its trace, the first-order identity
chain through the Cotton tensor, and the level-set geometry of the
potential are all evaluated as pointwise residuals.

All residual operations come in two layers: a batched layer working on a
prepared :class:`GeometryBundle` (used by the check runner and the batched
public entry points) and thin single-point wrappers returning
:class:`TensorValue` objects.

Adapted frames put the unit potential gradient first; barred (dual pair)
indices are only ever taken in an oriented orthonormal frame, never on raw
chart indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import CriticalPointError, CurvcheckError, InvalidArgumentError
from .expressions import MetricField, ScalarField, evaluate
from .geometry import DIM, REGULAR_GRAD_THRESHOLD, GeometryBundle
from .selfdual import dual_pair
from .tensors import TensorValue

__all__ = [
    "CPEInstance",
    "LevelSetData",
    "linearized_adjoint",
    "cpe_residual",
    "cpe_residual_via_adjoint",
    "trace_residual",
    "ricci_gradient_tensor",
    "cotton_identity_residual",
    "ricci_gradient_contraction",
    "ricci_eigensystem_residual",
    "level_set_geometry",
    "codazzi_residual",
    "gradient_norm_constancy",
    "selfdual_divergence_cotton_residual",
    "level_set_points",
]

#: |f + 1| below this is flagged: the first-order identity degenerates there.
POTENTIAL_SINGULAR_THRESHOLD = 1e-8


@dataclass(frozen=True)
class CPEInstance:
    """A metric/potential pair with cached (asserted constant) scalar curvature.

    Volume normalization is deliberately not enforced: every implemented
    identity is pointwise and invariant under it.
    """

    g: MetricField
    f: ScalarField
    n: int = DIM
    scalar_curvature: float = 0.0
    scalar_deviation: float = 0.0

    @classmethod
    def build(cls, g: MetricField, f: ScalarField, sample_count: int = 40,
              seed: int = 0, check_constant_scalar: bool = True,
              rtol: float = 1e-6, sample_box=None) -> "CPEInstance":
        """Create an instance, measuring R on sampled points.

        With ``check_constant_scalar`` the constancy hypothesis is enforced
        (max relative deviation below ``rtol``); disable it only for
        negative controls.  ``sample_box`` restricts where R is probed
        (defaults to the middle half of the domain).
        """
        from .catalog import halton_points

        pts = halton_points(sample_box or g.domain.shrink(0.5), sample_count, seed)
        bundle = GeometryBundle(g, pts, order=2)
        rv = bundle.scalar_curv.value
        r_mean = float(np.mean(rv))
        dev = float(np.max(np.abs(rv - r_mean)) / max(abs(r_mean), 1.0))
        if check_constant_scalar and dev > rtol:
            raise InvalidArgumentError(
                f"scalar curvature varies over the chart (relative deviation {dev:.3e}); "
                "not a constant-scalar-curvature instance"
            )
        return cls(g=g, f=f, scalar_curvature=r_mean, scalar_deviation=dev)

    def bundle(self, points, order: int, mode: str = "taylor") -> GeometryBundle:
        return GeometryBundle(self.g, points, order=order, mode=mode, potential=self.f)


# ---------------------------------------------------------------------------
# batched residual kernels
# ---------------------------------------------------------------------------

def adjoint_values(b: GeometryBundle, n: int = DIM) -> np.ndarray:
    """-(lap f) g + Hess f - f Ric, shape (N, 4, 4)."""
    g, ric = b.g.value, b.ricci.value
    f, lap, hess = b.f.value, b.lap_f.value, b.hess_f.value
    return -lap[:, None, None] * g + hess - f[:, None, None] * ric


def cpe_residual_values(b: GeometryBundle, n: int = DIM) -> np.ndarray:
    """[Ric - (R/n) g] - [Hess f - (Ric - R/(n-1) g) f]."""
    g, ric, r = b.g.value, b.ricci.value, b.scalar_curv.value
    f, hess = b.f.value, b.hess_f.value
    traceless = ric - (r / n)[:, None, None] * g
    modified = ric - (r / (n - 1))[:, None, None] * g
    return traceless - (hess - modified * f[:, None, None])


def adjoint_residual_values(b: GeometryBundle, n: int = DIM) -> np.ndarray:
    """L*(f) - (Ric - (R/n) g)."""
    g, ric, r = b.g.value, b.ricci.value, b.scalar_curv.value
    return adjoint_values(b, n) - (ric - (r / n)[:, None, None] * g)


def trace_residual_values(b: GeometryBundle, n: int = DIM) -> np.ndarray:
    """lap f + R f / (n-1); equals minus the metric trace of the residual."""
    return b.lap_f.value + b.scalar_curv.value * b.f.value / (n - 1)


def ricci_gradient_tensor_values(b: GeometryBundle, n: int = DIM) -> np.ndarray:
    """The antisymmetrized Ricci/gradient combination of the Cotton identity.

    T_ijk = (n-1)/(n-2) (Ric_ik df_j - Ric_jk df_i)
            - (Ric_is grad^s f g_jk - Ric_js grad^s f g_ik) / (n-2)
            - R (df_j g_ik - df_i g_jk) / (n-2)
    """
    g, ric, r = b.g.value, b.ricci.value, b.scalar_curv.value
    df, grad = b.df.value, b.grad_f_up.value
    ric_grad = np.einsum("nis,ns->ni", ric, grad)
    term1 = np.einsum("nik,nj->nijk", ric, df) - np.einsum("njk,ni->nijk", ric, df)
    term2 = np.einsum("ni,njk->nijk", ric_grad, g) - np.einsum("nj,nik->nijk", ric_grad, g)
    term3 = np.einsum("nj,nik->nijk", df, g) - np.einsum("ni,njk->nijk", df, g)
    return ((n - 1) * term1 - term2 - r[:, None, None, None] * term3) / (n - 2)


def cotton_identity_values(b: GeometryBundle, n: int = DIM):
    """Residual of (f+1) C_ijk - W_ijks grad^s f - T_ijk, plus singular flags."""
    f = b.f.value
    cot = b.cotton.value
    wgrad = np.einsum("nijks,ns->nijk", b.weyl.value, b.grad_f_up.value)
    t = ricci_gradient_tensor_values(b, n)
    res = (1.0 + f)[:, None, None, None] * cot - wgrad - t
    singular = np.abs(1.0 + f) < POTENTIAL_SINGULAR_THRESHOLD
    return res, singular


def ricci_gradient_contraction_values(b: GeometryBundle, n: int = DIM):
    """Both sides of T_ijk grad^k f = (Ric_ik df_j - Ric_jk df_i) grad^k f."""
    t = ricci_gradient_tensor_values(b, n)
    grad, df, ric = b.grad_f_up.value, b.df.value, b.ricci.value
    lhs = np.einsum("nijk,nk->nij", t, grad)
    ric_grad = np.einsum("nik,nk->ni", ric, grad)
    rhs = np.einsum("ni,nj->nij", ric_grad, df) - np.einsum("nj,ni->nij", ric_grad, df)
    return lhs, rhs


def _sign_fix(vecs: np.ndarray) -> np.ndarray:
    """Deterministic eigenvector signs: largest-magnitude entry positive."""
    out = vecs.copy()
    for k in range(out.shape[1]):
        col = out[:, k]
        lead = np.argmax(np.abs(col))
        if col[lead] < 0:
            out[:, k] = -col
    return out


def ricci_eigenbasis(g: np.ndarray, ric: np.ndarray):
    """Eigenvalues (ascending) and g-orthonormal, oriented eigenvectors of Ric.

    Ties are broken by the deterministic sign fix; if the sign-fixed frame is
    negatively oriented against the chart, the last eigenvector is flipped.
    """
    lam, vecs = scipy.linalg.eigh(ric, g)
    vecs = _sign_fix(vecs)
    if np.linalg.det(vecs) * np.sqrt(np.linalg.det(g)) < 0:
        vecs = vecs.copy()
        vecs[:, 3] = -vecs[:, 3]
    return lam, vecs


def eigensystem_residuals(lam: np.ndarray, fcomp: np.ndarray) -> np.ndarray:
    """The three bilinear combinations of the eigenvalue system.

    fcomp holds the gradient components in the (ascending, oriented)
    eigenbasis.  Every term carries an eigenvalue difference, which makes
    the residual-vector norm invariant under re-orthonormalization inside
    degenerate eigenspaces.
    """
    l1, l2, l3, l4 = lam
    f1, f2, f3, f4 = fcomp
    return np.array([
        (l1 - l2) * f1 * f2 + (l3 - l4) * f3 * f4,
        (l1 - l3) * f1 * f3 + (l4 - l2) * f4 * f2,
        (l1 - l4) * f1 * f4 + (l2 - l3) * f2 * f3,
    ])


def eigensystem_values(b: GeometryBundle) -> np.ndarray:
    """Per-point residual triples of the eigenvalue system, shape (N, 3)."""
    if not np.all(b.regular_mask()):
        raise CriticalPointError("eigensystem residuals need regular points")
    g, ric, grad = b.g.value, b.ricci.value, b.grad_f_up.value
    out = np.empty((b.npoints, 3))
    for idx in range(b.npoints):
        lam, vecs = ricci_eigenbasis(g[idx], ric[idx])
        fcomp = vecs.T @ g[idx] @ grad[idx]
        out[idx] = eigensystem_residuals(lam, fcomp)
    return out


def adapted_frames(b: GeometryBundle) -> np.ndarray:
    """Per-point orthonormal frames with e_1 = grad f / |grad f|, shape (N, 4, 4).

    Completion is Gram-Schmidt over the coordinate vectors in fixed order,
    skipping a candidate when it is numerically dependent on the rows built
    so far.
    """
    if not np.all(b.regular_mask()):
        raise CriticalPointError("adapted frames need regular points")
    g, grad = b.g.value, b.grad_f_up.value
    frames = np.empty((b.npoints, 4, 4))
    for idx in range(b.npoints):
        gm = g[idx]
        rows = [grad[idx] / np.sqrt(grad[idx] @ gm @ grad[idx])]
        for k in range(4):
            if len(rows) == 4:
                break
            v = np.eye(4)[k].astype(float)
            for r in rows:
                v = v - (r @ gm @ v) * r
            n2 = v @ gm @ v
            if n2 > 1e-20:
                rows.append(v / np.sqrt(n2))
        if len(rows) < 4:
            raise CurvcheckError("adapted frame construction collapsed")
        frames[idx] = np.array(rows)
    return frames


@dataclass(frozen=True)
class LevelSetData:
    """Second-fundamental-form data of a potential level set at a point."""

    point: tuple[float, ...]
    frame: np.ndarray                  # rows: e_1 = unit normal, e_2..e_4 tangent
    h: np.ndarray                      # 3x3 second fundamental form (tangent frame)
    mean_curvature: float              # trace of h
    grad_norm: float                   # |grad f|
    mean_curvature_hessian_form: float  # (f_11 - lap f) / |grad f|
    mean_curvature_quadratic_form: float  # (f_11 - lap f) / |grad f|^2


def level_set_values(b: GeometryBundle):
    """Batched level-set data arrays: (frames, h, H, |grad f|, f11, lap f)."""
    frames = adapted_frames(b)
    s = b.shape_field.value
    h = np.einsum("nai,nbj,nij->nab", frames[:, 1:], frames[:, 1:], s)
    hess = b.hess_f.value
    f11 = np.einsum("ni,nj,nij->n", frames[:, 0], frames[:, 0], hess)
    grad_norm = np.sqrt(np.maximum(b.grad_f_norm2.value, 0.0))
    mean = np.einsum("naa->n", h)
    return frames, h, mean, grad_norm, f11, b.lap_f.value


def codazzi_values(b: GeometryBundle) -> np.ndarray:
    """Codazzi residual R_abc1 - (nabla_b h)_ac + (nabla_a h)_bc, tangent frame.

    A universal identity at regular points of any (g, f): the sign and slot
    order are frozen against generic fixtures.  Shape (N, 3, 3, 3).
    """
    frames = adapted_frames(b)
    riem = b.riemann.value
    ds = b.cov_shape_field.value
    tang, nor = frames[:, 1:], frames[:, 0]
    riem_f = np.einsum("nai,nbj,nck,nl,nijkl->nabc", tang, tang, tang, nor, riem)
    ds_f = np.einsum("nai,nbj,nck,nijk->nabc", tang, tang, tang, ds)
    # ds_f[a, b, c] = (nabla_{e_a} S)(e_b, e_c); tangential derivative slots only
    return riem_f - (np.einsum("nbac->nabc", ds_f) - ds_f)


def selfdual_chain_values(b: GeometryBundle):
    """Two residuals of the self-dual divergence / Cotton chain.

    First: 4 (div W+)_jkl - (C_klj + C_kbar lbar j) in an oriented
    orthonormal frame, with the full Cotton tensor (identical to the
    reduced form on constant-scalar-curvature instances, where the
    scalar-gradient terms vanish).  Second: the contracted combination
    (T_ijk + T_ibar jbar k) grad^k f, evaluated raw.
    """
    from .selfdual import orthonormal_frame

    n_pts = b.npoints
    dwp = b.div_weyl_plus.value
    cot = b.cotton.value
    tgrad = np.einsum(
        "nijk,nk->nij", ricci_gradient_tensor_values(b), b.grad_f_up.value
    )
    res1 = np.empty((n_pts, 4, 4, 4))
    res2 = np.empty((n_pts, 4, 4))
    g = b.g.value
    for idx in range(n_pts):
        fr = orthonormal_frame(g[idx], b.points[idx]).vectors
        dwp_f = np.einsum("ja,kb,lc,nabc->njkl", fr, fr, fr, dwp[idx][None])[0]
        cot_f = np.einsum("ja,kb,lc,nabc->njkl", fr, fr, fr, cot[idx][None])[0]
        tg_f = np.einsum("ia,jb,nab->nij", fr, fr, tgrad[idx][None])[0]
        for j in range(4):
            for k in range(4):
                for l in range(4):
                    if k == l:
                        res1[idx, j, k, l] = 4.0 * dwp_f[j, k, l]
                        continue
                    kb, lb = dual_pair(k + 1, l + 1)
                    res1[idx, j, k, l] = 4.0 * dwp_f[j, k, l] - (
                        cot_f[k, l, j] + cot_f[kb - 1, lb - 1, j]
                    )
        for i in range(4):
            for j in range(4):
                if i == j:
                    res2[idx, i, j] = 0.0
                    continue
                ib, jb = dual_pair(i + 1, j + 1)
                res2[idx, i, j] = tg_f[i, j] + tg_f[ib - 1, jb - 1]
    return res1, res2


# ---------------------------------------------------------------------------
# single-point public wrappers
# ---------------------------------------------------------------------------

def _point_bundle(inst: CPEInstance, point, order: int, mode: str) -> GeometryBundle:
    return inst.bundle(np.asarray(point, dtype=float), order=order, mode=mode)


def linearized_adjoint(inst: CPEInstance, point, mode: str = "taylor") -> TensorValue:
    """Formal adjoint of the scalar-curvature linearization applied to f."""
    b = _point_bundle(inst, point, 2, mode)
    return TensorValue(adjoint_values(b, inst.n)[0], "dd")


def cpe_residual(inst: CPEInstance, point, mode: str = "taylor") -> TensorValue:
    """Pointwise defect of the fundamental equation; zero on genuine instances."""
    b = _point_bundle(inst, point, 2, mode)
    return TensorValue(cpe_residual_values(b, inst.n)[0], "dd")


def cpe_residual_via_adjoint(inst: CPEInstance, point, mode: str = "taylor") -> TensorValue:
    """Defect of the adjoint form of the critical point equation.

    The two residual forms satisfy the exact pointwise relation
    ``adjoint_form + fundamental_form + trace_residual * g = 0``; they vanish
    simultaneously, and their norms agree wherever the trace equation holds.
    """
    b = _point_bundle(inst, point, 2, mode)
    return TensorValue(adjoint_residual_values(b, inst.n)[0], "dd")


def trace_residual(inst: CPEInstance, point, mode: str = "taylor") -> float:
    """lap f + R f / (n-1); equals -trace of cpe_residual (sign fixed here)."""
    b = _point_bundle(inst, point, 2, mode)
    return float(trace_residual_values(b, inst.n)[0])


def ricci_gradient_tensor(inst: CPEInstance, point, mode: str = "taylor") -> TensorValue:
    """The auxiliary antisymmetric combination; vanishes on Einstein metrics."""
    b = _point_bundle(inst, point, 2, mode)
    return TensorValue(ricci_gradient_tensor_values(b, inst.n)[0], "ddd",
                       symmetry="antisymmetric-01")


def cotton_identity_residual(inst: CPEInstance, point, mode: str = "taylor") -> TensorValue:
    """(f+1) C - W . grad f - T; expected zero only on genuine instances."""
    b = _point_bundle(inst, point, 3, mode)
    res, _ = cotton_identity_values(b, inst.n)
    return TensorValue(res[0], "ddd")


def ricci_gradient_contraction(inst: CPEInstance, point, mode: str = "taylor",
                               atol: float = 1e-9) -> TensorValue:
    """T_ijk grad^k f, asserted equal to its Ricci-only simplification."""
    b = _point_bundle(inst, point, 2, mode)
    lhs, rhs = ricci_gradient_contraction_values(b, inst.n)
    scale = max(1.0, float(np.max(np.abs(lhs))))
    if np.max(np.abs(lhs - rhs)) > atol * scale:
        raise CurvcheckError("gradient contraction simplification failed")
    return TensorValue(lhs[0], "dd")


def ricci_eigensystem_residual(inst: CPEInstance, point, mode: str = "taylor") -> tuple[float, float, float]:
    """The three bilinear residuals in the Ricci eigenbasis at a regular point."""
    b = _point_bundle(inst, point, 2, mode)
    res = eigensystem_values(b)
    return tuple(float(v) for v in res[0])


def level_set_geometry(inst: CPEInstance, point, mode: str = "taylor") -> LevelSetData:
    """Second fundamental form and mean curvature of the level set through a point.

    Both normalizations of the (f_11 - lap f) mean-curvature expression are
    reported; the trace of h matches the |grad f| (not |grad f|^2) version,
    and the two agree exactly on unit-gradient level sets.
    """
    b = _point_bundle(inst, point, 2, mode)
    frames, h, mean, grad_norm, f11, lap = level_set_values(b)
    return LevelSetData(
        point=tuple(np.asarray(point, dtype=float).tolist()),
        frame=frames[0],
        h=h[0],
        mean_curvature=float(mean[0]),
        grad_norm=float(grad_norm[0]),
        mean_curvature_hessian_form=float((f11[0] - lap[0]) / grad_norm[0]),
        mean_curvature_quadratic_form=float((f11[0] - lap[0]) / grad_norm[0] ** 2),
    )


def codazzi_residual(inst: CPEInstance, point, mode: str = "taylor") -> TensorValue:
    """Universal hypersurface identity residual in the adapted frame."""
    b = _point_bundle(inst, point, 3, mode)
    return TensorValue(codazzi_values(b)[0], "ddd")


def selfdual_divergence_cotton_residual(inst: CPEInstance, point, mode: str = "taylor"):
    """Residual pair of the self-dual divergence / Cotton chain at a point."""
    b = _point_bundle(inst, point, 3, mode)
    res1, res2 = selfdual_chain_values(b)
    return TensorValue(res1[0], "ddd"), TensorValue(res2[0], "dd")


def gradient_norm_constancy(inst: CPEInstance, points, mode: str = "taylor",
                            level_tol: float = 1e-8):
    """Constancy of |grad f|^2 across supplied points of one level set.

    Returns (max pairwise deviation of |grad f|^2, max tangential derivative
    of |grad f|^2, max of the curvature form (f+1) ric0(grad f, e_a)
    - R f g(grad f, e_a) / (n (n-1))).  The points must share a level value
    within ``level_tol``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise InvalidArgumentError("need at least two points on the level set")
    fvals = evaluate(inst.f.expr, pts)
    level = float(fvals[0])
    if np.max(np.abs(fvals - level)) > level_tol:
        raise InvalidArgumentError(
            f"points do not lie on a common level set (spread "
            f"{np.max(np.abs(fvals - level)):.2e} > {level_tol:.0e})"
        )
    b = inst.bundle(pts, order=2)
    n = inst.n
    gn2 = b.grad_f_norm2
    deviation = float(np.max(gn2.value) - np.min(gn2.value))
    frames = adapted_frames(b)
    dgn2 = np.stack([gn2.diff(k).value for k in range(4)], axis=1)
    tangential = np.einsum("nai,ni->na", frames[:, 1:], dgn2)
    g, ric, r = b.g.value, b.ricci.value, b.scalar_curv.value
    f, grad = b.f.value, b.grad_f_up.value
    ric0 = ric - (r / n)[:, None, None] * g
    rhs_vec = (1.0 + f)[:, None] * np.einsum("nij,ni->nj", ric0, grad) - (
        (r * f) / (n * (n - 1))
    )[:, None] * np.einsum("nij,ni->nj", g, grad)
    rhs_tan = np.einsum("nai,ni->na", frames[:, 1:], rhs_vec)
    return deviation, float(np.max(np.abs(tangential))), float(np.max(np.abs(rhs_tan)))


def level_set_points(inst: CPEInstance, level: float, base_points, mode: str = "taylor",
                     max_iter: int = 40, tol: float = 1e-12) -> np.ndarray:
    """Project chart points onto the level set f = level along chart gradients.

    One-dimensional Newton iteration from each base point; points that fail
    to converge inside the domain are dropped.  Deterministic.
    """
    pts = np.asarray(base_points, dtype=float)
    out = []
    for p in pts:
        x = p.copy()
        ok = False
        for _ in range(max_iter):
            fx = float(evaluate(inst.f.expr, x))
            if abs(fx - level) < tol:
                ok = True
                break
            b = inst.bundle(x, order=1)
            d = b.df.value[0]
            n2 = float(d @ d)
            if n2 < REGULAR_GRAD_THRESHOLD**2:
                break
            x = x - (fx - level) * d / n2
            if not np.all(inst.g.domain.contains(x)):
                ok = False
                break
        if ok and np.all(inst.g.domain.contains(x)):
            out.append(x)
    return np.asarray(out)
