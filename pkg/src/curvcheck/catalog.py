"""Canonical metric/potential fixtures, random fixtures, and chart quadrature.

Every fixture is a single explicit chart with machine-checkable known facts.
Decaying charts (stereographic projections, the affine chart of the complex
projective plane) integrate over a truncated tangent-mapped tensor grid; the
truncation radius is recorded per fixture together with the decay rate that
bounds the discarded tail below 1e-6 of the integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .errors import DegenerateMetricError, InvalidArgumentError, QuadratureError
from .expressions import (
    COORDS,
    Box,
    Call,
    Const,
    Expr,
    MetricField,
    Mul,
    ScalarField,
    parse_expr,
)
from .geometry import GeometryBundle

__all__ = [
    "FixtureSpec",
    "fixture",
    "random_fixture",
    "halton_points",
    "sample_points",
    "regular_sample_points",
    "total_scalar_curvature",
    "FIXTURE_IDS",
]

FIXTURE_IDS = (
    "euclidean",
    "flat_torus",
    "s4_round",
    "cp2_fubini_study",
    "s2xs2",
    "conformal_flat",
    "perturbed",
)

x1, x2, x3, x4 = COORDS


@dataclass(frozen=True)
class FixtureSpec:
    """A chart metric with optional potentials and machine-readable facts."""

    fixture_id: str
    params: dict
    metric: MetricField
    potentials: dict[str, ScalarField] = field(default_factory=dict)
    known_facts: dict = field(default_factory=dict)
    sample_box: Box | None = None
    quadrature: dict = field(default_factory=dict)

    def potential(self, name: str) -> ScalarField:
        try:
            return self.potentials[name]
        except KeyError:
            raise InvalidArgumentError(
                f"fixture {self.fixture_id!r} has no potential {name!r}; "
                f"available: {sorted(self.potentials)}"
            ) from None


def _radius2(coords=COORDS) -> Expr:
    acc: Expr = Const(0.0)
    for c in coords:
        acc = acc + c * c
    return acc


def _s4_round(radius: float) -> FixtureSpec:
    if radius <= 0:
        raise InvalidArgumentError("radius must be positive")
    r2 = _radius2()
    denom = (Const(radius**2) + r2) * (Const(radius**2) + r2)
    conf = Const(4.0 * radius**4) / denom
    domain = Box.cube(1e7)  # the chart covers all of R^4; bounded for validation
    metric = MetricField.from_upper({(i, i): conf for i in range(4)}, domain)
    # Stereographic pullbacks of the five ambient coordinate functions.
    emb_denom = Const(radius**2) + r2
    potentials = {}
    for k in range(4):
        potentials[f"height{k + 1}"] = ScalarField(
            Const(2.0 * radius**2) * COORDS[k] / emb_denom, domain
        )
    potentials["height5"] = ScalarField(
        Const(radius) * (Const(radius**2) - r2) / emb_denom, domain
    )
    return FixtureSpec(
        fixture_id="s4_round",
        params={"radius": radius},
        metric=metric,
        potentials=potentials,
        known_facts={
            "scalar_curvature": 12.0 / radius**2,
            "einstein": True,
            "weyl_zero": True,
            "volume": (8.0 * math.pi**2 / 3.0) * radius**4,
            "total_scalar_curvature": 32.0 * math.pi**2 * radius**2,
        },
        sample_box=Box.cube(0.8 * radius),
        quadrature={"kind": "decay", "truncation": 60.0 * radius,
                    "tail_exponent": 4},
    )


def _flat(fixture_id: str, domain: Box, facts: dict) -> FixtureSpec:
    return FixtureSpec(
        fixture_id=fixture_id,
        params={},
        metric=MetricField.euclidean(domain),
        potentials={"linear1": ScalarField(x1, domain),
                    "radial2": ScalarField(_radius2() * Const(0.5), domain)},
        known_facts=facts,
        sample_box=domain.shrink(0.6),
        quadrature={"kind": "box"},
    )


def _cp2(scale: float) -> FixtureSpec:
    if scale <= 0:
        raise InvalidArgumentError("scale must be positive")
    a = Const(1.0) + _radius2()
    a2 = a * a
    p = x1 * x3 + x2 * x4
    q = x1 * x4 - x2 * x3
    s2 = Const(2.0 * scale**2)
    g11 = s2 * (Const(1.0) + x3 * x3 + x4 * x4) / a2
    g33 = s2 * (Const(1.0) + x1 * x1 + x2 * x2) / a2
    upper = {
        (0, 0): g11, (1, 1): g11, (2, 2): g33, (3, 3): g33,
        (0, 2): Const(0.0) - s2 * p / a2,
        (1, 3): Const(0.0) - s2 * p / a2,
        (1, 2): s2 * q / a2,
        (0, 3): Const(0.0) - s2 * q / a2,
    }
    domain = Box.cube(1e7)
    r = 12.0 / scale**2
    return FixtureSpec(
        fixture_id="cp2_fubini_study",
        params={"scale": scale},
        metric=MetricField.from_upper(upper, domain),
        known_facts={
            "scalar_curvature": r,
            "einstein": True,
            "weyl_minus_zero": True,
            "wplus_spectrum": (r / 6.0, -r / 12.0, -r / 12.0),
            "wplus_norm2_op": r**2 / 24.0,
            "wplus_det_op": r**3 / 864.0,
        },
        sample_box=Box.cube(0.8),
        quadrature={"kind": "decay", "truncation": 4000.0, "tail_exponent": 2},
    )


def _s2xs2(a: float, b: float) -> FixtureSpec:
    if a <= 0 or b <= 0:
        raise InvalidArgumentError("sphere radii must be positive")
    ra = x1 * x1 + x2 * x2
    rb = x3 * x3 + x4 * x4
    ca = Const(4.0 * a**4) / ((Const(a * a) + ra) * (Const(a * a) + ra))
    cb = Const(4.0 * b**4) / ((Const(b * b) + rb) * (Const(b * b) + rb))
    domain = Box.cube(1e7)
    r = 2.0 / a**2 + 2.0 / b**2
    return FixtureSpec(
        fixture_id="s2xs2",
        params={"a": a, "b": b},
        metric=MetricField.from_upper(
            {(0, 0): ca, (1, 1): ca, (2, 2): cb, (3, 3): cb}, domain
        ),
        potentials={"linear1": ScalarField(x1, domain)},
        known_facts={
            "scalar_curvature": r,
            "einstein": a == b,
            "cotton_zero": True,
            "harmonic_weyl": True,
            "ricci_eigenvalues": tuple(sorted((1/a**2, 1/a**2, 1/b**2, 1/b**2))),
            "volume": (4 * math.pi * a**2) * (4 * math.pi * b**2),
        },
        sample_box=Box.cube(0.8 * min(a, b)),
        quadrature={"kind": "decay", "truncation": 4000.0 * max(a, b),
                    "tail_exponent": 2},
    )


def _conformal_flat(phi, domain: Box | None = None, params: dict | None = None) -> FixtureSpec:
    if isinstance(phi, str):
        phi = parse_expr(phi)
    if not isinstance(phi, Expr):
        raise InvalidArgumentError("phi must be an expression or expression text")
    domain = domain or Box.cube(1.0)
    metric = MetricField.conformal(phi, domain)
    return FixtureSpec(
        fixture_id="conformal_flat",
        params=params or {},
        metric=metric,
        potentials={"linear1": ScalarField(x1, domain)},
        known_facts={"weyl_zero": True},
        sample_box=domain.shrink(0.6),
        quadrature={"kind": "box"},
    )


def fixture(fixture_id: str, **params) -> FixtureSpec:
    """Instantiate a catalog fixture by id.

    Ids and parameters: ``euclidean``, ``flat_torus``, ``s4_round(radius)``,
    ``cp2_fubini_study(scale)``, ``s2xs2(a, b)``, ``conformal_flat(phi=...)``
    or ``conformal_flat(seed=...)``, ``perturbed(base=..., epsilon=...,
    seed=..., base_params=...)``.
    """
    try:
        if fixture_id == "euclidean":
            return _flat("euclidean", Box.cube(4.0), {"scalar_curvature": 0.0, "flat": True})
        if fixture_id == "flat_torus":
            return _flat(
                "flat_torus",
                Box(tuple((0.0, 1.0) for _ in range(4))),
                {"scalar_curvature": 0.0, "flat": True, "volume": 1.0,
                 "total_scalar_curvature": 0.0},
            )
        if fixture_id == "s4_round":
            return _s4_round(float(params.pop("radius", 1.0)))
        if fixture_id == "cp2_fubini_study":
            return _cp2(float(params.pop("scale", 1.0)))
        if fixture_id == "s2xs2":
            return _s2xs2(float(params.pop("a", 1.0)), float(params.pop("b", 1.0)))
        if fixture_id == "conformal_flat":
            if "seed" in params:
                return random_fixture("conformal_flat", int(params.pop("seed")))
            return _conformal_flat(params.pop("phi"), params=dict(params))
        if fixture_id == "perturbed":
            base = params.pop("base")
            eps = float(params.pop("epsilon", 0.05))
            seed = int(params.pop("seed", 0))
            base_params = params.pop("base_params", {})
            return _perturbed(base, base_params, eps, seed)
    except KeyError as err:
        raise InvalidArgumentError(f"missing fixture parameter: {err}") from None
    raise InvalidArgumentError(
        f"unknown fixture id {fixture_id!r}; known ids: {FIXTURE_IDS}"
    )


# ---------------------------------------------------------------------------
# random fixtures
# ---------------------------------------------------------------------------

def _random_poly(rng: np.random.Generator, max_degree: int, coeff_range: float) -> Expr:
    """Random polynomial with coefficients uniform in [-coeff_range, coeff_range]."""
    from .taylor import basis

    acc: Expr = Const(0.0)
    for alpha in basis(max_degree):
        c = float(rng.uniform(-coeff_range, coeff_range))
        if sum(alpha) == 0:
            acc = acc + Const(c)
            continue
        term: Expr = Const(c)
        for axis, power in enumerate(alpha):
            for _ in range(power):
                term = Mul(term, COORDS[axis])
        acc = acc + term
    return acc


def random_potential(seed: int, domain: Box, max_degree: int = 3,
                     coeff_range: float = 0.5) -> ScalarField:
    """Deterministic random polynomial potential on a domain."""
    rng = np.random.default_rng(np.random.SeedSequence([337, seed]))
    return ScalarField(_random_poly(rng, max_degree, coeff_range), domain)


def _bump(width: float) -> Expr:
    """Polynomial bump prod_k (1 - (x_k / width)^2)^2, vanishing on the box edge."""
    acc: Expr = Const(1.0)
    for c in COORDS:
        t = Const(1.0) - (c / Const(width)) * (c / Const(width))
        acc = acc * t * t
    return acc


def _perturbed(base_id: str, base_params: dict, epsilon: float, seed: int,
               max_tries: int = 8) -> FixtureSpec:
    base = fixture(base_id, **base_params)
    width = 1.0
    sample_box = Box.cube(0.8 * width)
    for attempt in range(max_tries):
        rng = np.random.default_rng(np.random.SeedSequence([991, seed, attempt]))
        bump = _bump(width)
        upper: dict[tuple[int, int], Expr] = {}
        for i in range(4):
            for j in range(i, 4):
                pert = Mul(Const(epsilon), Mul(_random_poly(rng, 2, 1.0), bump))
                upper[(i, j)] = base.metric.components[i][j] + pert
        metric = MetricField.from_upper(upper, base.metric.domain)
        probe = halton_points(sample_box, 64, seed=1234)
        try:
            metric.check_positive_definite(probe)
        except DegenerateMetricError:
            continue
        return FixtureSpec(
            fixture_id="perturbed",
            params={"base": base_id, "base_params": dict(base_params),
                    "epsilon": epsilon, "seed": seed, "attempt": attempt},
            potentials=dict(base.potentials),
            metric=metric,
            known_facts={} if epsilon else dict(base.known_facts),
            sample_box=sample_box,
            quadrature=dict(base.quadrature),
        )
    raise DegenerateMetricError(
        f"could not build a positive-definite perturbation after {max_tries} tries"
    )


def random_fixture(kind: str, seed: int) -> FixtureSpec:
    """Deterministic random fixture: 'conformal_flat' or 'perturbed'."""
    if kind == "conformal_flat":
        rng = np.random.default_rng(np.random.SeedSequence([101, seed]))
        phi = _random_poly(rng, 3, 0.3)
        return _conformal_flat(phi, Box.cube(1.0), params={"seed": seed})
    if kind == "perturbed":
        return _perturbed("s2xs2", {"a": 1.0, "b": 1.0}, epsilon=0.05, seed=seed)
    raise InvalidArgumentError(f"unknown random fixture kind {kind!r}")


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def halton_points(box: Box, count: int, seed: int) -> np.ndarray:
    """Low-discrepancy points inside a box; bit-deterministic given the seed."""
    sampler = qmc.Halton(d=4, scramble=True, seed=int(seed))
    unit = sampler.random(count)
    lo = np.array([b[0] for b in box.bounds])
    hi = np.array([b[1] for b in box.bounds])
    return lo + unit * (hi - lo)


def sample_points(fix: FixtureSpec, count: int, seed: int,
                  sub_box: Box | None = None) -> np.ndarray:
    box = sub_box or fix.sample_box or fix.metric.domain.shrink(0.5)
    return halton_points(box, count, seed)


def regular_sample_points(fix: FixtureSpec, potential: ScalarField, count: int,
                          seed: int, sub_box: Box | None = None,
                          threshold: float = 1e-6, max_rounds: int = 8) -> np.ndarray:
    """Sampled points with |grad f| above a threshold, resampling as needed."""
    box = sub_box or fix.sample_box or fix.metric.domain.shrink(0.5)
    out: list[np.ndarray] = []
    for round_idx in range(max_rounds):
        pts = halton_points(box, count * (2**round_idx), seed + round_idx)
        b = GeometryBundle(fix.metric, pts, order=1, potential=potential)
        mask = b.regular_mask(threshold)
        for p in pts[mask]:
            out.append(p)
            if len(out) == count:
                return np.asarray(out)
    raise InvalidArgumentError(
        "could not find enough regular points; potential may be nearly constant"
    )


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

def _axis_rule(box_bounds, npts: int, truncation: float | None):
    """Per-axis nodes/weights: plain Gauss-Legendre on a finite interval,
    tangent-substituted Gauss-Legendre on a truncated unbounded axis."""
    u, w = np.polynomial.legendre.leggauss(npts)
    if truncation is None:
        lo, hi = box_bounds
        x = 0.5 * (hi - lo) * u + 0.5 * (hi + lo)
        return x, 0.5 * (hi - lo) * w
    theta_max = math.atan(truncation)
    theta = theta_max * u
    x = np.tan(theta)
    return x, theta_max * w / np.cos(theta) ** 2


def _integrate_once(fix: FixtureSpec, npts: int, chunk: int = 4096):
    quad = fix.quadrature
    trunc = quad.get("truncation") if quad.get("kind") == "decay" else None
    axes = [_axis_rule(fix.metric.domain.bounds[k], npts, trunc) for k in range(4)]
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=-1)
    wgrid = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    weights = np.prod(np.stack([w.reshape(-1) for w in wgrid], axis=-1), axis=-1)
    s_total, v_total = 0.0, 0.0
    for start in range(0, len(pts), chunk):
        blk = pts[start : start + chunk]
        bundle = GeometryBundle(fix.metric, blk, order=2)
        dens = bundle.sqrt_det_g.value
        rval = bundle.scalar_curv.value
        wblk = weights[start : start + chunk]
        v_total += float(np.dot(wblk, dens))
        s_total += float(np.dot(wblk, rval * dens))
    return s_total, v_total


def total_scalar_curvature(fix: FixtureSpec, rel_tol: float = 1e-4,
                           start_points: int = 16, max_points: int = 56):
    """Integrate R dV and dV over the chart by refined tensor quadrature.

    Returns (S, Vol).  Refinement doubles down until two successive rules
    agree within ``rel_tol`` relative; persistent disagreement (for example
    a non-integrable integrand) raises QuadratureError.
    """
    prev = None
    npts = start_points
    while npts <= max_points:
        cur = _integrate_once(fix, npts)
        if prev is not None:
            ds = abs(cur[0] - prev[0]) / max(abs(cur[0]), 1e-12)
            dv = abs(cur[1] - prev[1]) / max(abs(cur[1]), 1e-12)
            if max(ds if abs(cur[0]) > 1e-9 else 0.0, dv) < rel_tol:
                return cur
        prev = cur
        npts += 8
    raise QuadratureError(
        f"quadrature did not converge to {rel_tol:g} relative by {max_points} "
        "points per axis (non-integrable decay?)"
    )
