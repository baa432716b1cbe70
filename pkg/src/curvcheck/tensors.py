"""Dense pointwise tensors with explicit variance, and 2-operator algebra.

A :class:`TensorValue` is a dense ``float64`` array of shape ``(dim,)*rank``
together with a variance signature: one character per slot, ``'d'`` for a
covariant (lower) slot and ``'u'`` for a contravariant (upper) slot.  All
index operations take explicit slot positions; there is no implicit
summation convention.  Values are immutable after construction and all
operations are pure functions, so they are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, InvalidArgumentError

__all__ = [
    "TensorValue",
    "Operator2",
    "contract",
    "raise_slot",
    "lower_slot",
    "hs_inner",
    "traceless_part",
    "tensor_norm",
]

_VALID_SLOTS = frozenset("du")

#: Symmetry tags accepted by TensorValue and the slot pairs they constrain.
SYMMETRY_KINDS = ("symmetric-2", "antisymmetric-2", "antisymmetric-01", "riemann-type")


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


def _sym_violation(entries: np.ndarray, kind: str) -> float:
    """Largest absolute violation of the declared symmetry."""
    if kind == "symmetric-2":
        return float(np.max(np.abs(entries - entries.T)))
    if kind == "antisymmetric-2":
        return float(np.max(np.abs(entries + entries.T)))
    if kind == "antisymmetric-01":
        return float(np.max(np.abs(entries + np.swapaxes(entries, 0, 1))))
    if kind == "riemann-type":
        v = np.max(np.abs(entries + np.swapaxes(entries, 0, 1)))
        v = max(v, np.max(np.abs(entries + np.swapaxes(entries, 2, 3))))
        v = max(v, np.max(np.abs(entries - np.transpose(entries, (2, 3, 0, 1)))))
        return float(v)
    raise InvalidArgumentError(f"unknown symmetry kind {kind!r}")


@dataclass(frozen=True)
class TensorValue:
    """A pointwise tensor: dense entries plus a variance signature.

    Parameters
    ----------
    entries : array_like
        Dense array of shape ``(dim,)*rank``.
    variance : str
        One character per slot, ``'d'`` (covariant) or ``'u'``
        (contravariant).  Its length fixes the rank.
    symmetry : str, optional
        Declared symmetry tag (see ``SYMMETRY_KINDS``).  Checked once at
        construction against ``sym_tol`` relative to the largest entry.
    sym_tol : float
        Relative tolerance for the symmetry check (default 1e-12).
    """

    entries: np.ndarray
    variance: str
    symmetry: str | None = None
    sym_tol: float = 1e-12

    def __post_init__(self):
        entries = _freeze(self.entries)
        object.__setattr__(self, "entries", entries)
        if not set(self.variance) <= _VALID_SLOTS:
            raise InvalidArgumentError(f"bad variance string {self.variance!r}")
        rank = len(self.variance)
        if entries.ndim != rank:
            raise InvalidArgumentError(
                f"variance {self.variance!r} declares rank {rank}, "
                f"entries have rank {entries.ndim}"
            )
        if rank > 0:
            dims = set(entries.shape)
            if len(dims) != 1:
                raise InvalidArgumentError(f"entries not cubic: shape {entries.shape}")
            dim = entries.shape[0]
            if not 2 <= dim <= 8:
                raise InvalidArgumentError(f"dimension {dim} outside supported range 2..8")
            if entries.size != dim**rank:
                raise InvalidArgumentError("entry count does not equal dim**rank")
        if self.symmetry is not None:
            scale = max(float(np.max(np.abs(entries))), 1.0)
            bad = _sym_violation(entries, self.symmetry)
            if bad > self.sym_tol * scale:
                raise InvalidArgumentError(
                    f"declared symmetry {self.symmetry!r} violated by {bad:.3e} "
                    f"(tol {self.sym_tol:.1e} relative)"
                )

    @property
    def dim(self) -> int:
        return self.entries.shape[0] if self.rank else 0

    @property
    def rank(self) -> int:
        return len(self.variance)

    def norm(self, metric: np.ndarray | None = None) -> float:
        """Metric norm; Euclidean (frame) norm when ``metric`` is None."""
        return tensor_norm(self, metric)

    def __repr__(self):  # pragma: no cover - debugging aid
        return f"TensorValue(variance={self.variance!r}, shape={self.entries.shape})"


def _as_matrix(metric, dim: int) -> np.ndarray:
    m = metric.entries if isinstance(metric, TensorValue) else np.asarray(metric, dtype=float)
    if m.shape != (dim, dim):
        raise DimensionMismatchError(f"metric shape {m.shape} does not match dimension {dim}")
    return m


def contract(t: TensorValue, slot_a: int, slot_b: int, metric=None) -> TensorValue:
    """Contract two slots of a tensor, inserting the metric when needed.

    Slots of opposite variance are traced directly.  Slots of equal
    variance require ``metric`` (the covariant metric): two lower slots
    contract against the inverse metric, two upper slots against the
    metric itself.

    Parameters
    ----------
    t : TensorValue
    slot_a, slot_b : int
        Distinct slot positions in ``range(t.rank)``.
    metric : array or TensorValue, optional
        Covariant metric components, required for equal-variance slots.

    Returns
    -------
    TensorValue
        Rank reduced by two; remaining slots keep their order.
    """
    rank = t.rank
    if not (0 <= slot_a < rank and 0 <= slot_b < rank):
        raise InvalidArgumentError(f"slots ({slot_a}, {slot_b}) out of range for rank {rank}")
    if slot_a == slot_b:
        raise InvalidArgumentError("contraction slots must be distinct")
    va, vb = t.variance[slot_a], t.variance[slot_b]
    if va == vb:
        if metric is None:
            raise InvalidArgumentError("equal-variance contraction requires a metric")
        m = _as_matrix(metric, t.dim)
        pair = np.linalg.inv(m) if va == "d" else m
        moved = np.moveaxis(t.entries, (slot_a, slot_b), (-2, -1))
        out = np.einsum("...ab,ab->...", moved, pair)
    else:
        out = np.trace(t.entries, axis1=slot_a, axis2=slot_b)
    new_var = "".join(c for i, c in enumerate(t.variance) if i not in (slot_a, slot_b))
    return TensorValue(out, new_var)


def _apply_matrix_to_slot(entries: np.ndarray, mat: np.ndarray, slot: int) -> np.ndarray:
    moved = np.moveaxis(entries, slot, -1)
    out = moved @ mat.T
    return np.moveaxis(out, -1, slot)


def raise_slot(t: TensorValue, slot: int, metric) -> TensorValue:
    """Raise one covariant slot with the inverse metric."""
    if t.variance[slot] != "d":
        raise InvalidArgumentError(f"slot {slot} is already contravariant")
    ginv = np.linalg.inv(_as_matrix(metric, t.dim))
    out = _apply_matrix_to_slot(t.entries, ginv, slot)
    var = t.variance[:slot] + "u" + t.variance[slot + 1 :]
    return TensorValue(out, var)


def lower_slot(t: TensorValue, slot: int, metric) -> TensorValue:
    """Lower one contravariant slot with the metric."""
    if t.variance[slot] != "u":
        raise InvalidArgumentError(f"slot {slot} is already covariant")
    g = _as_matrix(metric, t.dim)
    out = _apply_matrix_to_slot(t.entries, g, slot)
    var = t.variance[:slot] + "d" + t.variance[slot + 1 :]
    return TensorValue(out, var)


def tensor_norm(t: TensorValue, metric=None) -> float:
    """Full-contraction norm ``sqrt(T . T)`` with all slots paired by the metric.

    With ``metric=None`` the slots are paired with the identity, which is the
    correct inner product for components expressed in an orthonormal frame.
    """
    if t.rank == 0:
        return abs(float(t.entries))
    if metric is None:
        return float(np.sqrt(np.sum(t.entries**2)))
    g = _as_matrix(metric, t.dim)
    ginv = np.linalg.inv(g)
    other = t.entries
    for slot, v in enumerate(t.variance):
        pair = ginv if v == "d" else g
        other = _apply_matrix_to_slot(other, pair, slot)
    val = float(np.sum(t.entries * other))
    # Roundoff can push a zero norm slightly negative.
    return float(np.sqrt(max(val, 0.0)))


@dataclass(frozen=True)
class Operator2:
    """A linear operator on the tangent space at one point.

    The operator is stored as a plain matrix in chart components together
    with the (covariant) metric at the base point, which defines its
    adjoint: ``<S x, y>_g = <x, adj(S) y>_g``.
    """

    matrix: np.ndarray
    metric: np.ndarray = field(default=None)

    def __post_init__(self):
        m = _freeze(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidArgumentError(f"operator matrix must be square, got {m.shape}")
        g = np.eye(m.shape[0]) if self.metric is None else _freeze(self.metric)
        if g.shape != m.shape:
            raise DimensionMismatchError("metric shape does not match operator shape")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "metric", _freeze(g))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def adjoint(self) -> np.ndarray:
        """Metric adjoint ``g^{-1} S^T g``."""
        g = self.metric
        return np.linalg.inv(g) @ self.matrix.T @ g

    def trace(self) -> float:
        return float(np.trace(self.matrix))


def _check_compatible(s: Operator2, t: Operator2):
    if s.dim != t.dim:
        raise DimensionMismatchError(f"operator dimensions differ: {s.dim} vs {t.dim}")
    if not np.allclose(s.metric, t.metric, rtol=0.0, atol=1e-14 * max(1.0, np.max(np.abs(s.metric)))):
        raise DimensionMismatchError("operators are based at different metrics")


def hs_inner(s: Operator2, t: Operator2) -> float:
    """Hilbert-Schmidt inner product ``tr(S T*)`` with the metric adjoint."""
    _check_compatible(s, t)
    return float(np.trace(s.matrix @ t.adjoint()))


def traceless_part(t: Operator2) -> Operator2:
    """Remove the trace: ``T - (tr T / n) I``.  Idempotent."""
    n = t.dim
    out = t.matrix - (np.trace(t.matrix) / n) * np.eye(n)
    return Operator2(out, t.metric)
