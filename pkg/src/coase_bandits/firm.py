"""Two-firm externality demo with quadratic costs.

Firm 1's production hurts firm 2 (or the world) at a constant per-unit
rate; both sell at the same price. Competitive firms ignore the harm and
produce until marginal cost meets price. The efficient plan internalizes
the harm for firm 1 only. A single transfer equal to firm 1's forgone
profit makes the efficient plan incentive-compatible, and welfare under
that bargain equals efficient welfare because the transfer cancels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class FirmExample:
    """price: common output price; cost_slope_i: marginal cost coefficient of
    firm i (cost is slope * q^2 / 2); externality_rate: harm per unit of
    firm 1's output."""

    price: float = 10.0
    cost_slope_1: float = 1.0
    cost_slope_2: float = 1.0
    externality_rate: float = 2.0

    def __post_init__(self):
        for name in ("price", "cost_slope_1", "cost_slope_2"):
            x = getattr(self, name)
            if not math.isfinite(x) or x <= 0.0:
                raise ValueError(f"{name} must be positive and finite, got {x!r}")
        if not math.isfinite(self.externality_rate) or self.externality_rate < 0.0:
            raise ValueError(f"externality_rate must be >= 0, got {self.externality_rate!r}")
        if self.price - self.externality_rate <= 0.0:
            raise ValueError(
                "externality_rate must stay below price or the efficient plan "
                "shuts firm 1 down entirely"
            )

    def profit_1(self, q1: float) -> float:
        return self.price * q1 - self.cost_slope_1 * q1 * q1 / 2.0

    def profit_2(self, q2: float) -> float:
        return self.price * q2 - self.cost_slope_2 * q2 * q2 / 2.0

    def welfare(self, q1: float, q2: float) -> float:
        return self.profit_1(q1) + self.profit_2(q2) - self.externality_rate * q1

    def competitive_quantities(self) -> tuple[float, float]:
        """Each firm sets marginal cost equal to price; harm is ignored."""
        return self.price / self.cost_slope_1, self.price / self.cost_slope_2

    def efficient_quantities(self) -> tuple[float, float]:
        """Welfare's stationary point: firm 1 nets out the harm it causes."""
        return (self.price - self.externality_rate) / self.cost_slope_1, (
            self.price / self.cost_slope_2
        )

    def coasean_transfer(self) -> float:
        """Payment making firm 1 whole for scaling back to the efficient plan:
        its unconstrained profit max minus its profit at the efficient output.
        For quadratic costs that difference is rate^2 / (2 k1); the closed
        form avoids cancelling two near-equal profits when the rate is small.
        """
        return self.externality_rate**2 / (2.0 * self.cost_slope_1)


@dataclass(frozen=True)
class FirmDemoReport:
    example: FirmExample
    competitive_q: tuple[float, float]
    efficient_q: tuple[float, float]
    competitive_welfare: float
    efficient_welfare: float
    transfer: float
    bargaining_welfare: float


def firm_demo(example: FirmExample) -> FirmDemoReport:
    """Work the example end to end; bargaining welfare includes the transfer
    on both sides of the books, so it matches efficient welfare."""
    q_comp = example.competitive_quantities()
    q_eff = example.efficient_quantities()
    transfer = example.coasean_transfer()
    # Firm 1 receives the transfer, firm 2 (standing in for whoever bears the
    # harm) pays it; the harm itself stays a welfare cost.
    bargaining = (example.profit_1(q_eff[0]) + transfer) + (
        example.profit_2(q_eff[1]) - transfer
    ) - example.externality_rate * q_eff[0]
    return FirmDemoReport(
        example=example,
        competitive_q=q_comp,
        efficient_q=q_eff,
        competitive_welfare=example.welfare(*q_comp),
        efficient_welfare=example.welfare(*q_eff),
        transfer=transfer,
        bargaining_welfare=bargaining,
    )


def render_report(report: FirmDemoReport) -> str:
    e = report.example
    lines = [
        f"price={e.price:g} cost_slopes=({e.cost_slope_1:g}, {e.cost_slope_2:g}) "
        f"externality_rate={e.externality_rate:g}",
        f"competitive quantities: q1={report.competitive_q[0]:.6g} q2={report.competitive_q[1]:.6g}"
        f"  welfare={report.competitive_welfare:.6g}",
        f"efficient quantities:   q1={report.efficient_q[0]:.6g} q2={report.efficient_q[1]:.6g}"
        f"  welfare={report.efficient_welfare:.6g}",
        f"coasean transfer to firm 1: {report.transfer:.6g}",
        f"bargaining welfare: {report.bargaining_welfare:.6g} "
        "(matches efficient welfare: "
        f"{math.isclose(report.bargaining_welfare, report.efficient_welfare, rel_tol=1e-12)})",
    ]
    return "\n".join(lines)
