"""Upstream player policies.

The upstream player sees only its own reward draws plus, each round, an
incentive offer: a target arm and a transfer amount paid iff the played
arm equals the target. Policies here never see true means; the
best-response double (test oracle) is the one exception and says so.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .env import BanditInstance


@dataclass(frozen=True)
class IncentiveOffer:
    """One round's transfer offer: ``amount`` is paid iff ``arm`` is played."""

    arm: int
    amount: float

    def __post_init__(self):
        if self.amount < 0.0 or not math.isfinite(self.amount):
            raise ValueError(f"offer amount must be finite and >= 0, got {self.amount!r}")

    def bonus(self, arm: int) -> float:
        return self.amount if arm == self.arm else 0.0


#: The no-offer placeholder used by the no-property baseline.
NO_OFFER = IncentiveOffer(arm=0, amount=0.0)


@dataclass(frozen=True)
class RegretCertificate:
    """Promise that batched pseudo-regret over any t offer rounds stays below
    scale * t**exponent except with probability decaying like t**(-tail)."""

    scale: float
    exponent: float = 0.5
    tail: float = 2.0


def ucb_certificate(n_arms: int, horizon: float) -> RegretCertificate:
    """Certificate the incentive-aware UCB below actually earns.

    scale = 8 * sqrt(K * ln(K * T^3)); the exponent is 1/2 and the failure
    tail decays quadratically. ``horizon`` may be fractional so the log term
    can be pinned exactly in arithmetic tests.
    """
    if n_arms < 1 or horizon <= 0:
        raise ValueError("need n_arms >= 1 and horizon > 0")
    return RegretCertificate(scale=8.0 * math.sqrt(n_arms * math.log(n_arms * horizon**3)))


class IncentiveAwareUCB:
    """UCB that adds the current offer's transfer to the index of its target.

    First K rounds pull each arm once in index order, ignoring offers. After
    that the played arm maximizes

        mean_hat[a] + 2 * sqrt(ln(K * T^3) / pulls[a]) + offer.bonus(a)

    with ties to the lowest index. Means track raw rewards only; transfers
    never contaminate the estimates.
    """

    def __init__(self, n_arms: int, horizon: int):
        if horizon < n_arms:
            raise ValueError(f"horizon {horizon} cannot fit one forced pull of {n_arms} arms")
        self.n_arms = n_arms
        self.horizon = horizon
        self.log_term = math.log(n_arms * horizon**3)
        self.pulls = [0] * n_arms
        self.means = [0.0] * n_arms
        self.t = 0  # completed step() calls

    def step(self, offer: IncentiveOffer, u: float = 0.0) -> int:
        """Pick this round's arm. ``u`` is the exogenous uniform slot; the
        decision is deterministic given history so it goes unused."""
        self.t += 1
        if self.t <= self.n_arms:
            return self.t - 1
        best_arm, best_index = 0, -math.inf
        for a in range(self.n_arms):
            idx = self.means[a] + 2.0 * math.sqrt(self.log_term / self.pulls[a]) + offer.bonus(a)
            if idx > best_index:
                best_arm, best_index = a, idx
        return best_arm

    def update(self, arm: int, reward: float) -> None:
        n = self.pulls[arm] + 1
        self.pulls[arm] = n
        self.means[arm] += (reward - self.means[arm]) / n


class BestResponseUpstream:
    """Test double that plays argmax of v_up[a] + offer.bonus(a) exactly.

    Knows the true means, so it belongs in tests and acceptance runs only.
    Indifference is resolved in favor of the offered arm (the standard
    rationality convention for take-it-or-leave-it transfers; the offered
    amount for the marginal arm is exactly the one that makes it weakly
    best, and acceptance at indifference is what makes that offer optimal);
    remaining ties go to the lowest index.
    """

    def __init__(self, instance: BanditInstance):
        self.v_up = instance.v_up

    def step(self, offer: IncentiveOffer, u: float = 0.0) -> int:
        best_arm, best_value = 0, -math.inf
        for a in range(len(self.v_up)):
            value = self.v_up[a] + offer.bonus(a)
            if value > best_value:
                best_arm, best_value = a, value
        if offer.amount > 0.0 and self.v_up[offer.arm] + offer.amount == best_value:
            return offer.arm
        return best_arm

    def update(self, arm: int, reward: float) -> None:
        pass
