"""Knot parameterization of a distributed normal pressure around a ring.

Angles are in degrees, measured from the crown (0 deg) and increasing
clockwise in the standard cross-section view. Knots are evenly spaced with
the first knot at the crown, and the pressure between knots is linear in
angle, wrapping from the last knot back to the first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "InvalidFieldError",
    "PressureField",
    "knot_angles",
    "interpolation_matrix",
    "evaluate",
    "evaluate_many",
]


class InvalidFieldError(ValueError):
    """Raised for a pressure field with fewer than two knots."""


def knot_angles(n: int) -> np.ndarray:
    """Evenly spaced knot angles in degrees, first knot at 0."""
    if n < 2:
        raise InvalidFieldError(f"need at least 2 knots, got {n}")
    return np.arange(n) * (360.0 / n)


def interpolation_matrix(n: int, thetas) -> np.ndarray:
    """Sparse-pattern operator mapping n knot values to pressures at `thetas`.

    Row j holds the two linear weights of the knots bracketing ``thetas[j]``,
    so that ``interpolation_matrix(n, thetas) @ knots`` evaluates the field.
    """
    if n < 2:
        raise InvalidFieldError(f"need at least 2 knots, got {n}")
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    spacing = 360.0 / n
    pos = np.mod(thetas, 360.0) / spacing
    # knot angles themselves carry round-off; snap them onto the knot
    near = np.rint(pos)
    pos = np.where(np.abs(pos - near) < 1e-9, near, pos)
    lo = np.floor(pos).astype(int)
    frac = pos - lo
    # mod may round up to exactly 360 for tiny negative angles
    lo = np.mod(lo, n)
    hi = np.mod(lo + 1, n)
    out = np.zeros((thetas.size, n))
    rows = np.arange(thetas.size)
    np.add.at(out, (rows, lo), 1.0 - frac)
    np.add.at(out, (rows, hi), frac)
    return out


@dataclass(frozen=True)
class PressureField:
    """Periodic piecewise-linear pressure (kPa) controlled by evenly spaced knots."""

    knots: np.ndarray = field()

    def __post_init__(self):
        knots = np.array(self.knots, dtype=float).ravel()
        if knots.size < 2:
            raise InvalidFieldError(f"need at least 2 knots, got {knots.size}")
        if not np.all(np.isfinite(knots)):
            raise InvalidFieldError("knot values must be finite")
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)

    @property
    def n(self) -> int:
        return self.knots.size

    @property
    def spacing(self) -> float:
        return 360.0 / self.n

    @property
    def knot_angles(self) -> np.ndarray:
        return knot_angles(self.n)

    @classmethod
    def constant(cls, value: float, n: int = 2) -> "PressureField":
        return cls(np.full(n, float(value)))

    @classmethod
    def from_function(cls, func, n: int = 720) -> "PressureField":
        """Sample ``func(theta_deg)`` on `n` knots (dense piecewise-linear proxy)."""
        return cls(np.asarray(func(knot_angles(n)), dtype=float))

    def __call__(self, theta):
        if np.ndim(theta) == 0:
            return evaluate(self, float(theta))
        return evaluate_many(self, theta)

    def __add__(self, other: "PressureField") -> "PressureField":
        if not isinstance(other, PressureField) or other.n != self.n:
            return NotImplemented
        return PressureField(self.knots + other.knots)

    def __mul__(self, scale: float) -> "PressureField":
        return PressureField(self.knots * float(scale))

    __rmul__ = __mul__

    def shifted(self, offset: float) -> "PressureField":
        """Same shape plus a uniform pressure `offset`."""
        return PressureField(self.knots + float(offset))

    def rotated(self, steps: int) -> "PressureField":
        """Field rotated clockwise by `steps` knot spacings."""
        return PressureField(np.roll(self.knots, steps))


def evaluate(field: PressureField, theta: float) -> float:
    """Pressure at a single angle (degrees, any real value)."""
    t = float(theta) % 360.0
    pos = t / field.spacing
    if abs(pos - round(pos)) < 1e-9:
        pos = float(round(pos))
    lo = int(np.floor(pos))
    frac = pos - lo
    lo %= field.n
    if frac == 0.0:
        return float(field.knots[lo])
    hi = (lo + 1) % field.n
    return float((1.0 - frac) * field.knots[lo] + frac * field.knots[hi])


def evaluate_many(field: PressureField, thetas) -> np.ndarray:
    """Vectorized :func:`evaluate`; preserves input order."""
    thetas = np.asarray(thetas, dtype=float)
    if thetas.size == 0:
        return np.zeros(0)
    return interpolation_matrix(field.n, thetas.ravel()) @ field.knots
