"""Dyadic circle geometry and exact weighted-area masses on the unit disk.

Angles are normalized so the full circle has length 1, and every dyadic-grid
quantity is kept as an exact rational, which makes containment and nesting
decisions immune to float rounding.  The weighted area of an annular sector,

    mass = len * ((1 - r1^2)^(a+1) - (1 - r2^2)^(a+1)),

is the single measure formula used by the whole package; with it the total
mass of the disk is 1 for every admissible weight exponent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

GRID_SHIFTS = (Fraction(0), Fraction(1, 3))

REGION_KINDS = ("carleson_box", "top_half", "sector")

ROOT_LEVEL = -1


def check_alpha(alpha: float) -> float:
    """Validate the weight exponent of the measure (must exceed -1)."""
    alpha = float(alpha)
    if not alpha > -1.0:
        raise ValueError(f"measure exponent must be > -1, got {alpha}")
    return alpha


def one_minus_sq(r: float) -> float:
    """1 - r^2 computed as (1-r)(1+r) to avoid cancellation near the rim."""
    return (1.0 - r) * (1.0 + r)


@dataclass(frozen=True)
class DyadicArc:
    """Arc of the circle identified by (grid shift, level, index).

    The arc is [shift + index/2^level, shift + (index+1)/2^level) mod 1.
    Level -1 is the synthetic root: the full circle, whose box is the disk.
    The two children of (shift, j, m) are (shift, j+1, 2m) and
    (shift, j+1, 2m+1); same-level arcs of one grid tile the circle.
    """

    shift: Fraction
    level: int
    index: int

    def __post_init__(self):
        if self.shift not in GRID_SHIFTS:
            raise ValueError(f"grid shift must be one of {GRID_SHIFTS}")
        if self.level < ROOT_LEVEL:
            raise ValueError(f"level must be >= {ROOT_LEVEL}")
        span = 1 << self.level if self.level > 0 else 1
        if not 0 <= self.index < span:
            raise ValueError(f"index {self.index} out of range for level {self.level}")

    @property
    def length(self) -> Fraction:
        return Fraction(1) if self.level <= 0 else Fraction(1, 1 << self.level)

    @property
    def start(self) -> Fraction:
        return (self.shift + self.index * self.length) % 1

    def parent(self) -> "DyadicArc":
        if self.level == ROOT_LEVEL:
            raise ValueError("the root arc has no parent")
        if self.level == 0:
            return DyadicArc(self.shift, ROOT_LEVEL, 0)
        return DyadicArc(self.shift, self.level - 1, self.index >> 1)

    def children(self) -> tuple["DyadicArc", ...]:
        if self.level == ROOT_LEVEL:
            return (DyadicArc(self.shift, 0, 0),)
        return (
            DyadicArc(self.shift, self.level + 1, 2 * self.index),
            DyadicArc(self.shift, self.level + 1, 2 * self.index + 1),
        )

    def contains_arc(self, other: "DyadicArc") -> bool:
        """Nesting within one grid (the root contains everything)."""
        if other.shift != self.shift:
            raise ValueError("nesting is only defined within one grid")
        if self.level <= 0:
            return True
        if other.level < self.level:
            return False
        return (other.index >> (other.level - self.level)) == self.index

    def contains_angle(self, theta: float) -> bool:
        if self.level <= 0:
            return True
        rel = (float(theta) - float(self.start)) % 1.0
        return rel < float(self.length)

    def box_contains(self, theta: float, r: float) -> bool:
        """Membership of the point (angle, radius) in the Carleson box."""
        if not 0.0 <= r < 1.0:
            return False
        return r >= 1.0 - float(self.length) and self.contains_angle(theta)

    def box(self) -> "Region":
        h = float(self.length)
        return Region(float(self.start), h, 1.0 - h, 1.0, "carleson_box")

    def top(self) -> "Region":
        h = float(self.length)
        return Region(float(self.start), h, 1.0 - h, 1.0 - h / 2.0, "top_half")


@dataclass(frozen=True)
class Region:
    """Annular sector: angular interval (start, length) x radial [r1, r2)."""

    theta_start: float
    theta_len: float
    r_inner: float
    r_outer: float
    kind: str = "sector"

    def __post_init__(self):
        if not 0.0 < self.theta_len <= 1.0:
            raise ValueError(f"angular length must lie in (0, 1], got {self.theta_len}")
        if not 0.0 <= self.r_inner <= self.r_outer <= 1.0:
            raise ValueError(
                f"malformed radial interval [{self.r_inner}, {self.r_outer})"
            )
        if self.kind not in REGION_KINDS:
            raise ValueError(f"unknown region kind {self.kind!r}")


def disk_region() -> Region:
    return Region(0.0, 1.0, 0.0, 1.0, "sector")


def region_mass(region: Region, alpha: float) -> float:
    """Exact weighted area of a region; the whole disk has mass 1."""
    a1 = check_alpha(alpha) + 1.0
    u1 = one_minus_sq(region.r_inner)
    u2 = one_minus_sq(region.r_outer)
    return region.theta_len * (u1 ** a1 - u2 ** a1)


def box_mass(arc: DyadicArc, alpha: float) -> float:
    return region_mass(arc.box(), alpha)


def top_mass(arc: DyadicArc, alpha: float) -> float:
    return region_mass(arc.top(), alpha)


def shrink_factor(alpha: float) -> float:
    """(3/4)^(alpha+1): the per-layer area shrink rate of nested remainders."""
    return 0.75 ** (check_alpha(alpha) + 1.0)


def top_share_lower_bound(alpha: float) -> float:
    """Uniform lower bound for mass(top half)/mass(box) over all arcs."""
    return 1.0 - shrink_factor(alpha)


def arc_containing(shift: Fraction, level: int, theta: float) -> DyadicArc:
    """The level-`level` arc of the given grid containing the angle."""
    if level < 0:
        return DyadicArc(shift, ROOT_LEVEL, 0)
    rel = (float(theta) - float(shift)) % 1.0
    index = min(int(rel * (1 << level)), (1 << level) - 1)
    return DyadicArc(shift, level, index)


def deepest_containing_level(r: float) -> int:
    """Deepest grid level whose boxes reach inward to radius r."""
    if not 0.0 <= r < 1.0:
        raise ValueError(f"radius must lie in [0, 1), got {r}")
    gap = 1.0 - r
    level = int(math.floor(-math.log2(gap))) if gap < 1.0 else 0
    # float log guard: fix up by direct comparison
    while 2.0 ** -(level + 1) >= gap:
        level += 1
    while level > 0 and 2.0 ** -level < gap:
        level -= 1
    return level


def ancestors_of_point(shift: Fraction, theta: float, r: float) -> list[DyadicArc]:
    """All arcs of one grid whose Carleson box contains the point."""
    deepest = deepest_containing_level(r)
    return [arc_containing(shift, lev, theta) for lev in range(deepest + 1)]


def arc_navigate(arc: DyadicArc, query: str, point: tuple[float, float] | None = None):
    """Uniform navigation surface: parent | children | contains | ancestors."""
    if query == "parent":
        return arc.parent()
    if query == "children":
        return arc.children()
    if query == "contains":
        if point is None:
            raise ValueError("contains requires a (theta, r) point")
        return arc.box_contains(*point)
    if query == "ancestors":
        if point is None:
            raise ValueError("ancestors requires a (theta, r) point")
        return ancestors_of_point(arc.shift, *point)
    raise ValueError(f"unknown query {query!r}")


def arcs_at_level(shift: Fraction, level: int) -> list[DyadicArc]:
    if level < 0:
        return [DyadicArc(shift, ROOT_LEVEL, 0)]
    return [DyadicArc(shift, level, m) for m in range(1 << level)]
