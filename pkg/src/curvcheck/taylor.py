"""Truncated multivariate Taylor arithmetic in four chart variables.

A value is the Taylor polynomial of a smooth function at a base point,
truncated at a total degree ``deg <= 4``: an array whose trailing axis holds
one coefficient per multi-index alpha with |alpha| <= deg, in the fixed
basis order below.  The coefficient of alpha is d^alpha f / alpha!, so the
zero index is the plain value.  Leading axes are free (tensor slots, batched
points) and broadcast through every operation.

Degree bookkeeping: a value exact to degree ``da`` times one exact to ``db``
is exact to ``min(da, db)``; a partial derivative drops the degree by one.
Products are truncated with precomputed sparse index tables, one table per
(da, db, dout) triple, so low-degree stages cost little.

This single mechanism provides both the derivative jets of chart fields and
the derivatives of every quantity assembled from them (curvature, Weyl
parts, and their covariant derivatives), all exact to roundoff for analytic
expressions.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import EvaluationError, InvalidArgumentError, OrderError
from . import expressions as ex

__all__ = ["Taylor", "basis", "nbasis", "seed_point", "evaluate_taylor", "t_einsum", "t_trace"]

NVARS = 4
MAX_DEG = 4


@lru_cache(maxsize=None)
def basis(deg: int) -> tuple[tuple[int, ...], ...]:
    """Multi-indices with |alpha| <= deg: degree-major, lexicographic within."""
    if not 0 <= deg <= MAX_DEG:
        raise OrderError(f"degree {deg} outside supported range 0..{MAX_DEG}")
    out = []
    for total in range(deg + 1):
        level = []

        def rec(prefix, remaining, slots):
            if slots == 1:
                level.append(prefix + (remaining,))
                return
            for v in range(remaining + 1):
                rec(prefix + (v,), remaining - v, slots - 1)

        rec((), total, NVARS)
        out.extend(sorted(level))
    return tuple(out)


@lru_cache(maxsize=None)
def _index_of(deg: int) -> dict[tuple[int, ...], int]:
    return {a: i for i, a in enumerate(basis(deg))}


def nbasis(deg: int) -> int:
    return len(basis(deg))


@lru_cache(maxsize=None)
def _mul_table(da: int, db: int, dout: int):
    """Sparse product table: (ia, ib, scatter matrix) for the truncation."""
    ba, bb = basis(da), basis(db)
    idx_out = _index_of(dout)
    ia, ib, io = [], [], []
    for i, alpha in enumerate(ba):
        ra = dout - sum(alpha)
        if ra < 0:
            continue
        for j, beta in enumerate(bb):
            if sum(beta) > ra:
                continue
            ia.append(i)
            ib.append(j)
            io.append(idx_out[tuple(a + b for a, b in zip(alpha, beta))])
    scatter = np.zeros((len(io), nbasis(dout)))
    scatter[np.arange(len(io)), io] = 1.0
    return np.asarray(ia), np.asarray(ib), scatter


@lru_cache(maxsize=None)
def _diff_table(deg: int, axis: int):
    """Gather indices and factors mapping coefficients of deg to deg-1."""
    src, factor = [], []
    for beta in basis(deg - 1):
        shifted = list(beta)
        shifted[axis] += 1
        src.append(_index_of(deg)[tuple(shifted)])
        factor.append(float(beta[axis] + 1))
    return np.asarray(src), np.asarray(factor)


class Taylor:
    """Truncated Taylor value; ``c`` has trailing coefficient axis."""

    __slots__ = ("c", "deg")

    def __init__(self, c: np.ndarray, deg: int):
        c = np.asarray(c, dtype=float)
        if c.shape[-1] != nbasis(deg):
            raise InvalidArgumentError(
                f"coefficient axis {c.shape[-1]} does not match degree {deg}"
            )
        self.c = c
        self.deg = deg

    # -- constructors ------------------------------------------------------

    @classmethod
    def const(cls, value, deg: int, lead_shape=()) -> "Taylor":
        value = np.asarray(value, dtype=float)
        c = np.zeros(np.broadcast_shapes(value.shape, lead_shape) + (nbasis(deg),))
        c[..., 0] = value
        return cls(c, deg)

    @classmethod
    def from_jet_coeffs(cls, coeffs: dict[tuple[int, ...], float], deg: int) -> "Taylor":
        c = np.zeros(nbasis(deg))
        idx = _index_of(deg)
        for alpha, val in coeffs.items():
            c[idx[alpha]] = val
        return cls(c, deg)

    # -- views -------------------------------------------------------------

    @property
    def value(self) -> np.ndarray:
        return self.c[..., 0]

    def coeff(self, alpha: tuple[int, ...]) -> np.ndarray:
        total = sum(alpha)
        if total > self.deg:
            raise OrderError(f"coefficient {alpha} beyond degree {self.deg}")
        return self.c[..., _index_of(self.deg)[alpha]]

    def truncate(self, deg: int) -> "Taylor":
        if deg > self.deg:
            raise OrderError(f"cannot extend degree {self.deg} value to degree {deg}")
        if deg == self.deg:
            return self
        return Taylor(self.c[..., : nbasis(deg)], deg)

    # -- ring operations ----------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, Taylor):
            c = self.c.copy()
            c[..., 0] += other
            return Taylor(c, self.deg)
        d = min(self.deg, other.deg)
        return Taylor(self.truncate(d).c + other.truncate(d).c, d)

    __radd__ = __add__

    def __neg__(self):
        return Taylor(-self.c, self.deg)

    def __sub__(self, other):
        if not isinstance(other, Taylor):
            return self + (-other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Taylor):
            return Taylor(self.c * other, self.deg)
        dout = min(self.deg, other.deg)
        ia, ib, scatter = _mul_table(self.deg, other.deg, dout)
        prod = self.c[..., ia] * other.c[..., ib]
        return Taylor(prod @ scatter, dout)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Taylor):
            return Taylor(self.c / other, self.deg)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def diff(self, axis: int) -> "Taylor":
        """Partial derivative along a chart axis; degree drops by one."""
        if self.deg == 0:
            raise OrderError("cannot differentiate a degree-0 value")
        src, factor = _diff_table(self.deg, axis)
        return Taylor(self.c[..., src] * factor, self.deg - 1)

    # -- composition with univariate analytic functions ---------------------

    def _compose(self, derivs: np.ndarray) -> "Taylor":
        """Sum_k derivs[k]/k! * (self - value)^k via Horner in the ring.

        ``derivs`` has shape (deg+1,) + lead_shape: the k-th derivative of
        the outer function at the constant coefficient.
        """
        d = self.deg
        q = Taylor(self.c.copy(), d)
        q.c[..., 0] = 0.0
        fact = 1.0
        coeffs = []
        for k in range(d + 1):
            coeffs.append(derivs[k] / fact)
            fact *= k + 1
        acc = Taylor.const(coeffs[d], d, lead_shape=self.c.shape[:-1])
        for k in range(d - 1, -1, -1):
            acc = acc * q
            acc.c[..., 0] += coeffs[k]
        return acc

    def reciprocal(self) -> "Taylor":
        a0 = self.value
        if np.any(np.abs(a0) < 1e-300):
            raise EvaluationError("division by a value that vanishes at the point")
        ks = np.arange(self.deg + 1)
        sign = np.where(ks % 2 == 0, 1.0, -1.0)
        fact = np.cumprod(np.concatenate([[1.0], np.arange(1, self.deg + 1)]))
        derivs = sign * fact
        derivs = derivs.reshape((-1,) + (1,) * a0.ndim) / a0 ** (ks.reshape((-1,) + (1,) * a0.ndim) + 1)
        return self._compose(derivs)

    def sqrt(self) -> "Taylor":
        a0 = self.value
        if np.any(a0 <= 0.0):
            raise EvaluationError("sqrt requires a strictly positive value at the point")
        p = 0.5
        derivs = [np.sqrt(a0)]
        for k in range(1, self.deg + 1):
            derivs.append(derivs[-1] * (p - (k - 1)) / a0)
        return self._compose(np.stack(derivs))

    def exp(self) -> "Taylor":
        e0 = np.exp(self.value)
        return self._compose(np.stack([e0] * (self.deg + 1)))

    def log(self) -> "Taylor":
        a0 = self.value
        if np.any(a0 <= 0.0):
            raise EvaluationError("log requires a strictly positive value at the point")
        derivs = [np.log(a0)]
        for k in range(1, self.deg + 1):
            derivs.append(
                np.full_like(a0, 1.0) * ((-1.0) ** (k - 1)) * _factorial(k - 1) / a0**k
            )
        return self._compose(np.stack(derivs))

    def sin(self) -> "Taylor":
        s0, c0 = np.sin(self.value), np.cos(self.value)
        cycle = [s0, c0, -s0, -c0]
        return self._compose(np.stack([cycle[k % 4] for k in range(self.deg + 1)]))

    def cos(self) -> "Taylor":
        s0, c0 = np.sin(self.value), np.cos(self.value)
        cycle = [c0, -s0, -c0, s0]
        return self._compose(np.stack([cycle[k % 4] for k in range(self.deg + 1)]))

    def ipow(self, n: int) -> "Taylor":
        """Integer power by repeated squaring (exact for negative bases)."""
        if n == 0:
            return Taylor.const(1.0, self.deg, lead_shape=self.c.shape[:-1])
        if n < 0:
            return self.reciprocal().ipow(-n)
        half = self.ipow(n // 2)
        out = half * half
        return out * self if n % 2 else out

    def pow(self, p: float) -> "Taylor":
        if float(p).is_integer():
            return self.ipow(int(p))
        a0 = self.value
        if np.any(a0 <= 0.0):
            raise EvaluationError("non-integer power requires a positive base at the point")
        derivs = [a0**p]
        for k in range(1, self.deg + 1):
            derivs.append(derivs[-1] * (p - (k - 1)) / a0)
        return self._compose(np.stack(derivs))


def _factorial(k: int) -> float:
    out = 1.0
    for i in range(2, k + 1):
        out *= i
    return out


def seed_point(points, deg: int) -> list[Taylor]:
    """Coordinate seeds x_k = point_k + h_k for evaluating expressions.

    ``points`` has shape (..., 4); each seed carries the leading shape.
    """
    pts = np.asarray(points, dtype=float)
    seeds = []
    for k in range(NVARS):
        t = Taylor.const(pts[..., k], deg)
        if deg >= 1:
            unit = tuple(1 if a == k else 0 for a in range(NVARS))
            t.c[..., _index_of(deg)[unit]] = 1.0
        seeds.append(t)
    return seeds


def evaluate_taylor(expr: ex.Expr, seeds: list[Taylor], deg: int) -> Taylor:
    """Evaluate an expression tree in the truncated Taylor ring."""
    if isinstance(expr, ex.Const):
        return Taylor.const(expr.value, deg, lead_shape=seeds[0].c.shape[:-1])
    if isinstance(expr, ex.Coord):
        return seeds[expr.axis]
    if isinstance(expr, ex.Add):
        return evaluate_taylor(expr.a, seeds, deg) + evaluate_taylor(expr.b, seeds, deg)
    if isinstance(expr, ex.Sub):
        return evaluate_taylor(expr.a, seeds, deg) - evaluate_taylor(expr.b, seeds, deg)
    if isinstance(expr, ex.Mul):
        return evaluate_taylor(expr.a, seeds, deg) * evaluate_taylor(expr.b, seeds, deg)
    if isinstance(expr, ex.Div):
        return evaluate_taylor(expr.a, seeds, deg) / evaluate_taylor(expr.b, seeds, deg)
    if isinstance(expr, ex.Neg):
        return -evaluate_taylor(expr.a, seeds, deg)
    if isinstance(expr, ex.Pow):
        if not isinstance(expr.expo, ex.Const):
            raise EvaluationError("exponent must be a constant expression")
        return evaluate_taylor(expr.base, seeds, deg).pow(expr.expo.value)
    if isinstance(expr, ex.Call):
        arg = evaluate_taylor(expr.arg, seeds, deg)
        return getattr(arg, expr.fn)()
    raise InvalidArgumentError(f"unknown node type {type(expr).__name__}")


# ---------------------------------------------------------------------------
# indexed contractions on tensors of Taylor values
# ---------------------------------------------------------------------------

def t_einsum(spec: str, a: Taylor, b: Taylor) -> Taylor:
    """einsum over index axes with the ring product on the coefficient axis.

    ``spec`` names only the index axes (for example ``'im,mjk->ijk'``); any
    leading batch axes are broadcast (as einsum '...').  The coefficient
    axis is appended internally.
    """
    lhs, out = spec.split("->")
    sa, sb = lhs.split(",")
    dout = min(a.deg, b.deg)
    ia, ib, scatter = _mul_table(a.deg, b.deg, dout)
    ga = a.c[..., ia]
    gb = b.c[..., ib]
    script = f"...{sa}T,...{sb}T->...{out}T"
    prod = np.einsum(script, ga, gb)
    return Taylor(prod @ scatter, dout)


def t_trace(a: Taylor, axis1: int, axis2: int) -> Taylor:
    """Plain trace over two index axes (no metric, no ring product).

    Axis numbers refer to the leading (index) axes, counted from the left of
    the index block; negative axes are not supported.
    """
    return Taylor(np.trace(a.c, axis1=axis1, axis2=axis2).copy(), a.deg)
