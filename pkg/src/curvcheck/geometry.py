"""The batched curvature pipeline in truncated Taylor arithmetic.

A :class:`GeometryBundle` evaluates a metric field (and optionally a scalar
potential) at a batch of chart points and derives every curvature-level
quantity needed by the identity checks, carrying each quantity's own spatial
Taylor expansion so covariant derivatives of derived fields (Weyl parts,
second fundamental forms, norms) come from exact polynomial differentiation
rather than nested numerical differencing.

Array layout: one batch axis first, then index axes, then the Taylor
coefficient axis, e.g. ``riemann.c`` has shape (N, 4, 4, 4, 4, K).

Sign conventions, pinned by the unit-sphere checks (scalar curvature +12,
Ricci = 3 g on the unit round 4-sphere):

    Gamma^m_ij   = g^{mk} (d_i g_kj + d_j g_ki - d_k g_ij) / 2
    R^i_jkl      = d_k Gamma^i_lj - d_l Gamma^i_kj
                   + Gamma^i_km Gamma^m_lj - Gamma^i_lm Gamma^m_kj
    R_ijkl       = g_im R^m_jkl
    Ric_jl       = R^k_jkl          (trace on slots 1 and 3 of R_ijkl)
    R            = g^jl Ric_jl
"""

from __future__ import annotations

import math
from itertools import permutations

import numpy as np

from . import fd
from .errors import (
    CriticalPointError,
    DegenerateMetricError,
    InvalidArgumentError,
    OrderError,
)
from .expressions import MetricField, ScalarField
from .taylor import Taylor, basis, evaluate_taylor, nbasis, seed_point, t_einsum, t_trace

__all__ = ["GeometryBundle", "levi_civita_signs", "REGULAR_GRAD_THRESHOLD"]

DIM = 4

#: Points with |grad f| below this are treated as critical.
REGULAR_GRAD_THRESHOLD = 1e-8


def levi_civita_signs() -> np.ndarray:
    """The alternating sign array sgn(i j k l), shape (4, 4, 4, 4)."""
    eps = np.zeros((DIM,) * DIM)
    for perm in permutations(range(DIM)):
        sign = 1.0
        p = list(perm)
        for i in range(DIM):
            for j in range(i + 1, DIM):
                if p[i] > p[j]:
                    sign = -sign
        eps[perm] = sign
    return eps


_EPS_SIGNS = levi_civita_signs()

_IDX_LETTERS = "bcdefgh"


class GeometryBundle:
    """All derived geometry at a batch of points, lazily computed and cached.

    Parameters
    ----------
    metric : MetricField
    points : array_like, shape (N, 4) or (4,)
    order : int
        Jet order of the metric (and potential): 2 suffices for curvature,
        3 for Cotton / divergence-level checks, 4 for the Laplacian of the
        self-dual Weyl norm.
    mode : str
        'taylor' (exact) or 'fd' (finite-difference fallback).
    potential : ScalarField, optional
    """

    def __init__(self, metric: MetricField, points, order: int = 2,
                 mode: str = "taylor", potential: ScalarField | None = None,
                 fd_step: float = fd.DEFAULT_STEP):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[None, :]
        if pts.ndim != 2 or pts.shape[1] != DIM:
            raise InvalidArgumentError(f"points must have shape (N, 4), got {pts.shape}")
        if not 0 <= order <= 4:
            raise OrderError(f"jet order must be 0..4, got {order}")
        if mode not in ("taylor", "fd"):
            raise InvalidArgumentError(f"unknown jet mode {mode!r}")
        margin = 3.0 * fd_step if mode == "fd" else 0.0
        metric.domain.require(pts, margin=margin)
        if potential is not None:
            potential.domain.require(pts, margin=margin)
        self.metric = metric
        self.points = pts
        self.order = order
        self.mode = mode
        self.potential = potential
        self.fd_step = fd_step
        self._cache: dict[str, Taylor] = {}

    @property
    def npoints(self) -> int:
        return self.points.shape[0]

    def _get(self, name: str, builder):
        if name not in self._cache:
            self._cache[name] = builder()
        return self._cache[name]

    def _need(self, deg: int, what: str):
        if deg > self.order:
            raise OrderError(f"{what} needs metric jets of order {deg}, bundle has {self.order}")

    def _dstack(self, t: Taylor) -> Taylor:
        """Stack of partials d_a placed as a new first index axis."""
        return Taylor(np.stack([t.diff(k).c for k in range(DIM)], axis=1), t.deg - 1)

    # -- field evaluation ---------------------------------------------------

    def _eval_scalar(self, expr, deg: int) -> Taylor:
        if self.mode == "taylor":
            seeds = self._get(f"_seeds{deg}", lambda: seed_point(self.points, deg))
            return evaluate_taylor(expr, seeds, deg)
        rows = np.empty((self.npoints, nbasis(deg)))
        field = ScalarField(expr, self.metric.domain)
        for n in range(self.npoints):
            coeffs = fd.fd_jet_coeffs(field, self.points[n], deg, step=self.fd_step)
            for idx, alpha in enumerate(basis(deg)):
                fact = math.prod(math.factorial(a) for a in alpha)
                rows[n, idx] = coeffs[alpha] / fact
        return Taylor(rows, deg)

    @property
    def g(self) -> Taylor:
        def build():
            deg = self.order
            c = np.zeros((self.npoints, DIM, DIM, nbasis(deg)))
            for i in range(DIM):
                for j in range(i, DIM):
                    t = self._eval_scalar(self.metric.components[i][j], deg)
                    c[:, i, j] = t.c
                    c[:, j, i] = t.c
            return Taylor(c, deg)

        return self._get("g", build)

    @property
    def ginv(self) -> Taylor:
        def build():
            g = self.g
            g0 = g.value
            eigs = np.linalg.eigvalsh(g0)
            if np.any(eigs <= 0.0):
                raise DegenerateMetricError("metric is not positive definite at a sampled point")
            x = Taylor.const(0.0, g.deg, lead_shape=g.c.shape[:-1])
            x.c[..., 0] = np.linalg.inv(g0)
            # Newton lift X <- X (2 I - g X): the defect I - g X has no
            # constant term, so each step doubles the exact degree.
            steps = 0
            while (1 << steps) < g.deg + 1:
                steps += 1
            for _ in range(steps):
                gx = t_einsum("im,mj->ij", g, x)
                two_minus = Taylor(-gx.c, gx.deg)
                two_minus.c[..., 0] += 2.0 * np.eye(DIM)
                x = t_einsum("im,mj->ij", x, two_minus)
            return x

        return self._get("ginv", build)

    @property
    def det_g(self) -> Taylor:
        def build():
            g = self.g

            def m(i, j):
                return Taylor(g.c[:, i, j], g.deg)

            def det3(rows, cols):
                (r0, r1, r2), (c0, c1, c2) = rows, cols
                return (
                    m(r0, c0) * (m(r1, c1) * m(r2, c2) - m(r1, c2) * m(r2, c1))
                    - m(r0, c1) * (m(r1, c0) * m(r2, c2) - m(r1, c2) * m(r2, c0))
                    + m(r0, c2) * (m(r1, c0) * m(r2, c1) - m(r1, c1) * m(r2, c0))
                )

            total = None
            for j, sign in zip(range(4), (1.0, -1.0, 1.0, -1.0)):
                cols = tuple(c for c in range(4) if c != j)
                term = m(0, j) * det3((1, 2, 3), cols)
                term = Taylor(sign * term.c, term.deg)
                total = term if total is None else total + term
            return total

        return self._get("det_g", build)

    @property
    def sqrt_det_g(self) -> Taylor:
        return self._get("sqrt_det_g", lambda: self.det_g.sqrt())

    # -- connection and curvature -------------------------------------------

    @property
    def dg(self) -> Taylor:
        def build():
            self._need(1, "metric first derivatives")
            return self._dstack(self.g)  # dg[a, i, j] = d_a g_ij

        return self._get("dg", build)

    @property
    def christoffel(self) -> Taylor:
        def build():
            dg = self.dg
            b1 = dg.c.transpose(0, 2, 1, 3, 4)  # b1[k, i, j] = d_i g_kj
            b2 = np.swapaxes(b1, 2, 3)          # b2[k, i, j] = d_j g_ki
            b = Taylor(0.5 * (b1 + b2 - dg.c), dg.deg)
            return t_einsum("mk,kij->mij", self.ginv, b)

        return self._get("christoffel", build)

    @property
    def riemann_up(self) -> Taylor:
        def build():
            self._need(2, "curvature")
            gam = self.christoffel
            dgam = self._dstack(gam)  # dgam[a, m, i, j] = d_a Gamma^m_ij
            # t1[i, j, k, l] = d_k Gamma^i_lj ; antisymmetrize in (k, l)
            t1 = dgam.c.transpose(0, 2, 4, 1, 3, 5)
            lin = Taylor(t1 - np.swapaxes(t1, 3, 4), dgam.deg)
            q1 = t_einsum("ikm,mlj->ijkl", gam, gam)  # Gamma^i_km Gamma^m_lj
            quad = Taylor(q1.c - np.swapaxes(q1.c, 3, 4), q1.deg)
            return lin + quad

        return self._get("riemann_up", build)

    @property
    def riemann(self) -> Taylor:
        return self._get("riemann", lambda: t_einsum("im,mjkl->ijkl", self.g, self.riemann_up))

    @property
    def ricci(self) -> Taylor:
        return self._get("ricci", lambda: t_trace(self.riemann_up, 1, 3))

    @property
    def scalar_curv(self) -> Taylor:
        return self._get("scalar_curv", lambda: t_einsum("jl,jl->", self.ginv, self.ricci))

    @property
    def grad_scalar_curv(self) -> Taylor:
        def build():
            self._need(3, "scalar-curvature gradient")
            return self._dstack(self.scalar_curv)

        return self._get("grad_scalar_curv", build)

    # -- covariant derivatives ----------------------------------------------

    def covariant_derivative(self, t: Taylor, variance: str) -> Taylor:
        """Covariant derivative; the new covariant slot comes first."""
        rank = len(variance)
        if rank > len(_IDX_LETTERS):
            raise InvalidArgumentError(f"rank {rank} beyond supported contraction letters")
        if t.deg < 1:
            raise OrderError("insufficient jet order for a covariant derivative")
        idx = _IDX_LETTERS[:rank]
        out = self._dstack(t)
        gam = self.christoffel
        for s, v in enumerate(variance):
            dummy = idx[:s] + "p" + idx[s + 1 :]
            if v == "d":
                corr = t_einsum(f"pa{idx[s]},{dummy}->a{idx}", gam, t)
                out = out - corr
            else:
                corr = t_einsum(f"{idx[s]}ap,{dummy}->a{idx}", gam, t)
                out = out + corr
        return out

    def laplacian_scalar(self, u: Taylor) -> Taylor:
        """Laplace-Beltrami of a scalar ring value (needs u.deg >= 2)."""
        if u.deg < 2:
            raise OrderError("scalar Laplacian needs two remaining derivative orders")
        du = self._dstack(u)
        ddu = self._dstack(du)  # ddu[b, a] = d_b d_a u
        corr = t_einsum("pab,p->ab", self.christoffel, du)
        hess = ddu - corr
        return t_einsum("ab,ab->", self.ginv, hess)

    @property
    def cov_ricci(self) -> Taylor:
        def build():
            self._need(3, "Ricci covariant derivative")
            return self.covariant_derivative(self.ricci, "dd")

        return self._get("cov_ricci", build)

    @property
    def div_ricci(self) -> Taylor:
        # g^{lj} nabla_l Ric_jk
        return self._get("div_ricci", lambda: t_einsum("lj,ljk->k", self.ginv, self.cov_ricci))

    # -- conformal tensors ----------------------------------------------------

    @property
    def weyl(self) -> Taylor:
        def build():
            n = DIM
            rg = t_einsum("ik,jl->ijkl", self.ricci, self.g)  # Ric_ik g_jl
            gg = t_einsum("ik,jl->ijkl", self.g, self.g)      # g_ik g_jl
            ricci_block = (
                rg.c
                + rg.c.transpose(0, 2, 1, 4, 3, 5)  # Ric_jl g_ik
                - rg.c.transpose(0, 1, 2, 4, 3, 5)  # Ric_il g_jk
                - rg.c.transpose(0, 2, 1, 3, 4, 5)  # Ric_jk g_il
            )
            gg_anti = Taylor(gg.c - gg.c.transpose(0, 1, 2, 4, 3, 5), gg.deg)
            scal = t_einsum(",ijkl->ijkl", self.scalar_curv, gg_anti)
            deg = self.riemann.deg
            w = (
                self.riemann.c
                - ricci_block[..., : nbasis(deg)] / (n - 2)
                + scal.c[..., : nbasis(deg)] / ((n - 1) * (n - 2))
            )
            return Taylor(w, deg)

        return self._get("weyl", build)

    @property
    def schouten(self) -> Taylor:
        def build():
            n = DIM
            term = t_einsum(",ij->ij", self.scalar_curv, self.g)
            return Taylor((self.ricci.c - term.c / (2 * (n - 1))) / (n - 2), term.deg)

        return self._get("schouten", build)

    @property
    def cotton(self) -> Taylor:
        def build():
            n = DIM
            cr = self.cov_ricci  # cr[i, j, k] = nabla_i Ric_jk
            drg = t_einsum("i,jk->ijk", self.grad_scalar_curv, self.g)
            c = (
                cr.c
                - cr.c.transpose(0, 2, 1, 3, 4)
                - (drg.c - drg.c.transpose(0, 2, 1, 3, 4)) / (2 * (n - 1))
            )
            return Taylor(c, cr.deg)

        return self._get("cotton", build)

    def divergence_four(self, t: Taylor) -> Taylor:
        """First-slot divergence of a (0,4) ring tensor."""
        cov = self.covariant_derivative(t, "dddd")
        return t_einsum("ab,abjkl->jkl", self.ginv, cov)

    @property
    def div_weyl(self) -> Taylor:
        def build():
            self._need(3, "Weyl divergence")
            return self.divergence_four(self.weyl)

        return self._get("div_weyl", build)

    # -- duality machinery ----------------------------------------------------

    @property
    def volume_form(self) -> Taylor:
        def build():
            s = self.sqrt_det_g
            c = _EPS_SIGNS[None, :, :, :, :, None] * s.c[:, None, None, None, None, :]
            return Taylor(c, s.deg)

        return self._get("volume_form", build)

    @property
    def volume_form_uu(self) -> Taylor:
        def build():
            e1 = t_einsum("ap,pqkl->aqkl", self.ginv, self.volume_form)
            return t_einsum("bq,aqkl->abkl", self.ginv, e1)

        return self._get("volume_form_uu", build)

    def star_second_pair(self, t: Taylor) -> Taylor:
        """Hodge star acting on the last index pair of a (0,4) ring tensor."""
        half = t_einsum("ijpq,pqkl->ijkl", t, self.volume_form_uu)
        return Taylor(0.5 * half.c, half.deg)

    @property
    def weyl_plus(self) -> Taylor:
        def build():
            ws = self.star_second_pair(self.weyl)
            return Taylor(0.5 * (self.weyl.c[..., : nbasis(ws.deg)] + ws.c), ws.deg)

        return self._get("weyl_plus", build)

    @property
    def weyl_minus(self) -> Taylor:
        def build():
            ws = self.star_second_pair(self.weyl)
            return Taylor(0.5 * (self.weyl.c[..., : nbasis(ws.deg)] - ws.c), ws.deg)

        return self._get("weyl_minus", build)

    @property
    def div_weyl_plus(self) -> Taylor:
        def build():
            self._need(3, "self-dual Weyl divergence")
            return self.divergence_four(self.weyl_plus)

        return self._get("div_weyl_plus", build)

    @property
    def div_weyl_minus(self) -> Taylor:
        def build():
            self._need(3, "anti-self-dual Weyl divergence")
            return self.divergence_four(self.weyl_minus)

        return self._get("div_weyl_minus", build)

    def raise_last_pair(self, t: Taylor) -> Taylor:
        a = t_einsum("pk,ijkl->ijpl", self.ginv, t)
        return t_einsum("ql,ijpl->ijpq", self.ginv, a)

    def raise_all_four(self, t: Taylor) -> Taylor:
        up = self.raise_last_pair(t)                       # T_ij^{kl}
        swapped = Taylor(up.c.transpose(0, 3, 4, 1, 2, 5), up.deg)
        up_all = self.raise_last_pair(swapped)             # layout [k, l, i, j] fully up
        return Taylor(up_all.c.transpose(0, 3, 4, 1, 2, 5), up_all.deg)

    def compose_on_bivectors(self, a: Taylor, b: Taylor) -> Taylor:
        """Composition of curvature-type operators acting on 2-forms."""
        up = self.raise_last_pair(a)  # up[i, j, p, q] = A_ij^{pq}
        half = t_einsum("ijpq,pqkl->ijkl", up, b)
        return Taylor(0.5 * half.c, half.deg)

    def trace_on_bivectors(self, a: Taylor) -> Taylor:
        up = self.raise_last_pair(a)
        tr = t_trace(t_trace(up, 1, 3), 1, 2)
        return Taylor(0.5 * tr.c, tr.deg)

    def norm2_04(self, t: Taylor) -> Taylor:
        """Full tensor norm squared of a (0,4) ring value."""
        return t_einsum("ijkl,ijkl->", t, self.raise_all_four(t))

    @property
    def weyl_plus_norm2_op(self) -> Taylor:
        """|W+|^2 in the Lambda+ endomorphism normalization, tr((W+)^2)."""
        def build():
            return self.trace_on_bivectors(
                self.compose_on_bivectors(self.weyl_plus, self.weyl_plus)
            )

        return self._get("weyl_plus_norm2_op", build)

    @property
    def det_weyl_plus_op(self) -> Taylor:
        """det of the traceless 3x3 operator W+ via det = tr(A^3) / 3."""
        def build():
            w2 = self.compose_on_bivectors(self.weyl_plus, self.weyl_plus)
            tr3 = self.trace_on_bivectors(self.compose_on_bivectors(w2, self.weyl_plus))
            return Taylor(tr3.c / 3.0, tr3.deg)

        return self._get("det_weyl_plus_op", build)

    @property
    def cov_weyl_plus(self) -> Taylor:
        def build():
            self._need(3, "covariant derivative of the self-dual Weyl part")
            return self.covariant_derivative(self.weyl_plus, "dddd")

        return self._get("cov_weyl_plus", build)

    def grad_weyl_plus_norm2_op(self) -> np.ndarray:
        """|nabla W+|^2 values, operator-normalized (1/4 of the tensor norm)."""
        cov = self.cov_weyl_plus
        covv = cov.c[..., 0]  # (N, a, i, j, k, l)
        ginv0 = self.ginv.value
        raised = np.einsum(
            "nbijkl,nip,njq,nkr,nls->nbpqrs", covv, ginv0, ginv0, ginv0, ginv0
        )
        total = np.einsum("naijkl,nbijkl,nab->n", covv, raised, ginv0)
        return 0.25 * total

    # -- potential-side quantities -------------------------------------------

    def _require_potential(self):
        if self.potential is None:
            raise InvalidArgumentError("this quantity needs a potential field")

    @property
    def f(self) -> Taylor:
        def build():
            self._require_potential()
            return self._eval_scalar(self.potential.expr, self.order)

        return self._get("f", build)

    @property
    def df(self) -> Taylor:
        return self._get("df", lambda: self._dstack(self.f))

    @property
    def grad_f_up(self) -> Taylor:
        return self._get("grad_f_up", lambda: t_einsum("ij,j->i", self.ginv, self.df))

    @property
    def grad_f_norm2(self) -> Taylor:
        return self._get("grad_f_norm2", lambda: t_einsum("i,i->", self.df, self.grad_f_up))

    @property
    def hess_f(self) -> Taylor:
        return self._get("hess_f", lambda: self.covariant_derivative(self.df, "d"))

    @property
    def lap_f(self) -> Taylor:
        return self._get("lap_f", lambda: t_einsum("ij,ij->", self.ginv, self.hess_f))

    def regular_mask(self, threshold: float = REGULAR_GRAD_THRESHOLD) -> np.ndarray:
        """Boolean mask of points where |grad f| exceeds the threshold."""
        return np.sqrt(np.maximum(self.grad_f_norm2.value, 0.0)) > threshold

    @property
    def unit_normal_low(self) -> Taylor:
        def build():
            if not np.all(self.regular_mask()):
                raise CriticalPointError(
                    "potential gradient vanishes (or nearly) at a sampled point"
                )
            inv_len = self.grad_f_norm2.sqrt().reciprocal()
            return t_einsum(",i->i", inv_len, self.df)

        return self._get("unit_normal_low", build)

    @property
    def unit_normal_up(self) -> Taylor:
        return self._get(
            "unit_normal_up", lambda: t_einsum("ij,j->i", self.ginv, self.unit_normal_low)
        )

    @property
    def tangent_projector(self) -> Taylor:
        def build():
            nn = t_einsum("a,i->ai", self.unit_normal_up, self.unit_normal_low)
            c = -nn.c
            c[..., 0] += np.eye(DIM)
            return Taylor(c, nn.deg)

        return self._get("tangent_projector", build)

    @property
    def shape_field(self) -> Taylor:
        """Level-set shape tensor S_ij = -P^a_i P^b_j nabla_a nu_b."""
        def build():
            dnu = self.covariant_derivative(self.unit_normal_low, "d")
            p = self.tangent_projector
            e1 = t_einsum("ai,ab->ib", p, dnu)
            s = t_einsum("bj,ib->ij", p, e1)
            return Taylor(-s.c, s.deg)

        return self._get("shape_field", build)

    @property
    def cov_shape_field(self) -> Taylor:
        return self._get("cov_shape_field", lambda: self.covariant_derivative(self.shape_field, "dd"))
