"""Inequality check records and their fixed CSV schema."""

from __future__ import annotations

from dataclasses import dataclass, field

CSV_COLUMNS = (
    "experiment", "theorem", "alpha", "depth", "p", "q", "r", "t",
    "weight_id", "f_id", "lhs", "rhs_explicit", "ratio", "pass",
)


@dataclass
class InequalityReport:
    """One checked inequality with every explicit constant factored out.

    `ratio` = lhs / rhs_explicit stands in for the unspecified absolute
    constant whenever the source bound has one; `passed` is None for
    ratio-only checks that carry no assertion.
    """

    theorem: str
    lhs: float
    rhs_explicit: float
    alpha: float
    passed: bool | None = None
    weight_id: str = ""
    f_id: str = ""
    p: float | None = None
    q: float | None = None
    r: float | None = None
    t: float | None = None
    depth: int | None = None
    provenance: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        if self.rhs_explicit == 0.0:
            return float("inf")
        return self.lhs / self.rhs_explicit

    def csv_row(self, experiment: str = "") -> list:
        def fmt(x):
            if x is None:
                return ""
            if isinstance(x, bool):
                return str(x)
            if isinstance(x, float):
                return repr(x)
            return str(x)

        return [
            experiment, self.theorem, fmt(self.alpha), fmt(self.depth),
            fmt(self.p), fmt(self.q), fmt(self.r), fmt(self.t),
            self.weight_id, self.f_id, fmt(float(self.lhs)),
            fmt(float(self.rhs_explicit)), fmt(float(self.ratio)),
            fmt(self.passed),
        ]
