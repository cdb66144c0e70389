"""Dense pointwise tensors over a chart basis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "TensorValue",
    "TensorError",
    "contract",
    "raise_lower",
    "max_abs_diff",
    "within_tolerance",
    "MAX_CONDITION",
]

MAX_CONDITION = 1e12


class TensorError(ValueError):
    pass


@dataclass(frozen=True)
class TensorValue:
    """A tensor at a point: dense row-major components plus variance tags.

    ``variance`` holds one ``"u"`` (contravariant) or ``"d"`` (covariant) per
    slot.  Rank 0 is a plain scalar.
    """

    data: np.ndarray
    variance: tuple[str, ...] = ()

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        object.__setattr__(self, "data", data)
        variance = tuple(self.variance)
        object.__setattr__(self, "variance", variance)
        if data.ndim != len(variance):
            raise TensorError(f"rank {data.ndim} data with {len(variance)} variance tags")
        if any(v not in ("u", "d") for v in variance):
            raise TensorError(f"variance tags must be 'u' or 'd', got {variance}")
        if data.ndim and len(set(data.shape)) != 1:
            raise TensorError(f"all slots must share the chart dimension, got shape {data.shape}")

    @property
    def rank(self) -> int:
        return self.data.ndim

    @property
    def dim(self) -> int:
        return self.data.shape[0] if self.data.ndim else 0

    def __float__(self) -> float:
        if self.rank:
            raise TensorError("only rank-0 tensors convert to float")
        return float(self.data)

    def __add__(self, other: "TensorValue") -> "TensorValue":
        _check_compatible(self, other)
        return TensorValue(self.data + other.data, self.variance)

    def __sub__(self, other: "TensorValue") -> "TensorValue":
        _check_compatible(self, other)
        return TensorValue(self.data - other.data, self.variance)

    def __mul__(self, alpha: float) -> "TensorValue":
        return TensorValue(alpha * self.data, self.variance)

    __rmul__ = __mul__


def _check_compatible(a: TensorValue, b: TensorValue) -> None:
    if a.data.shape != b.data.shape or a.variance != b.variance:
        raise TensorError(
            f"shape/variance mismatch: {a.data.shape}{a.variance} vs {b.data.shape}{b.variance}"
        )


def _check_slot(t: TensorValue, slot: int) -> None:
    if not 0 <= slot < t.rank:
        raise TensorError(f"slot {slot} out of range for rank {t.rank}")


def _metric_inverse(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if np.linalg.cond(g) > MAX_CONDITION:
        raise TensorError("metric is singular (condition number above 1e12)")
    return np.linalg.inv(g)


def contract(t: TensorValue, i: int, j: int, g=None) -> TensorValue:
    """Trace over slots ``i`` and ``j``.

    One slot must be up and the other down.  When both share a variance a
    metric ``g`` (covariant components) must be supplied and is used to flip
    slot ``j`` first.
    """
    _check_slot(t, i)
    _check_slot(t, j)
    if i == j:
        raise TensorError("cannot contract a slot with itself")
    if t.variance[i] == t.variance[j]:
        if g is None:
            raise TensorError("contracting two slots of equal variance needs a metric")
        t = raise_lower(t, j, g, "down" if t.variance[j] == "u" else "up")
    data = np.trace(t.data, axis1=i, axis2=j)
    variance = tuple(v for k, v in enumerate(t.variance) if k not in (i, j))
    return TensorValue(data, variance)


def raise_lower(t: TensorValue, slot: int, g, direction: str) -> TensorValue:
    """Flip the variance of one slot using ``g`` (down) or its inverse (up)."""
    _check_slot(t, slot)
    g = np.asarray(g, dtype=float)
    if direction == "down":
        if t.variance[slot] != "u":
            raise TensorError(f"slot {slot} is already covariant")
        m, tag = g, "d"
        if np.linalg.cond(g) > MAX_CONDITION:
            raise TensorError("metric is singular (condition number above 1e12)")
    elif direction == "up":
        if t.variance[slot] != "d":
            raise TensorError(f"slot {slot} is already contravariant")
        m, tag = _metric_inverse(g), "u"
    else:
        raise TensorError(f"direction must be 'up' or 'down', got {direction!r}")
    data = np.moveaxis(np.tensordot(m, t.data, axes=([1], [slot])), 0, slot)
    variance = t.variance[:slot] + (tag,) + t.variance[slot + 1 :]
    return TensorValue(data, variance)


def max_abs_diff(a: TensorValue, b: TensorValue) -> float:
    _check_compatible(a, b)
    if a.data.size == 0:
        return 0.0
    return float(np.max(np.abs(a.data - b.data)))


def within_tolerance(residual: float, scale: float, tol_abs: float, tol_rel: float = 0.0) -> bool:
    """Absolute test with a relative floor: ``residual <= tol_abs + tol_rel * scale``."""
    return residual <= tol_abs + tol_rel * scale
