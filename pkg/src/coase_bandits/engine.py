"""Round loop, regret accounting, and path-wise invariant checks.

Both game modes share one accounting convention: regrets are pseudo-regrets,
accumulated from true means along the realized path, never from sampled
rewards. Per-round draw order is fixed in both modes (downstream uniform,
upstream uniform, upstream noise, downstream noise) so that runs with the
same seed stay comparable across modes and policies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env import (
    BanditInstance,
    Oracle,
    compute_oracle,
    misalignment_holds,
    sample_downstream,
    sample_upstream,
)
from .upstream import NO_OFFER, IncentiveOffer

#: Slack allowed to the per-round regret decomposition inequality; covers
#: float rounding only, the inequality itself is exact.
DECOMPOSITION_TOL = 1e-12


@dataclass
class RegretLedger:
    """Cumulative path-wise regrets and expected-utility tallies.

    r_up_n / r_down_n accumulate in the no-property mode, r_up_p / r_down_p
    in the property mode, r_sw in both. r_down_p sums signed gaps: a round
    where the realized transfer overshoots the oracle optimum goes in
    negative, never clamped.
    """

    rounds: int = 0
    r_up_n: float = 0.0
    r_down_n: float = 0.0
    r_sw: float = 0.0
    r_up_p: float = 0.0
    r_down_p: float = 0.0
    up_utility: float = 0.0
    down_utility: float = 0.0
    welfare: float = 0.0
    decomposition_min_slack: float = math.inf


@dataclass(frozen=True)
class RoundRecord:
    """One trajectory row; offered_arm/tau are None in the no-property mode."""

    t: int
    phase: str
    offered_arm: int | None
    tau: float | None
    up_arm: int
    down_arm: int
    gap_sw: float
    gap_up: float
    gap_down: float


@dataclass
class GameResult:
    mode: str
    seed: int
    horizon: int
    instance: BanditInstance
    oracle: Oracle
    ledger: RegretLedger
    misaligned: bool
    records: list[RoundRecord] | None = None
    tau_hat: tuple[float, ...] | None = None
    phase1_rounds: int = 0
    phase1_batches: list | None = None
    breakdown_bound: float | None = None


def per_round_gaps(
    instance: BanditInstance,
    oracle: Oracle,
    offer: IncentiveOffer | None,
    up_arm: int,
    down_arm: int,
) -> tuple[float, float, float]:
    """(welfare gap, upstream gap, downstream gap) for one played round.

    offer is None in the no-property mode: the upstream gap benchmarks the
    best unilateral mean and the downstream gap the best response to the
    observed arm. With an offer, both players are benchmarked against the
    transfer-adjusted optima; the downstream gap can be negative.
    """
    v_up, v_down = instance.v_up, instance.v_down
    gap_sw = oracle.welfare_star - (v_up[up_arm] + v_down[up_arm][down_arm])
    if offer is None:
        gap_up = oracle.mu_star_up - v_up[up_arm]
        gap_down = max(v_down[up_arm]) - v_down[up_arm][down_arm]
    else:
        paid = offer.bonus(up_arm)
        best = max(v_up[a] + offer.bonus(a) for a in range(instance.n_arms))
        gap_up = best - (v_up[up_arm] + paid)
        gap_down = oracle.mu_star_down - (v_down[up_arm][down_arm] - paid)
    return gap_sw, gap_up, gap_down


def breakdown_lower_bound(oracle: Oracle, horizon: int, r_up_n: float) -> float:
    """Welfare-regret floor forced by upstream no-regret under misalignment:
    every round the upstream spends on its favorite arm costs at least
    delta_sw of welfare, and its own regret caps the rounds spent elsewhere."""
    return oracle.delta_sw * (horizon - r_up_n / oracle.delta_up)


def _check_decomposition(ledger: RegretLedger, gap_sw: float, gap_up: float, gap_down: float, t: int):
    slack = gap_up + gap_down - gap_sw
    if slack < ledger.decomposition_min_slack:
        ledger.decomposition_min_slack = slack
    if slack < -DECOMPOSITION_TOL:
        raise RuntimeError(
            f"round {t}: player regret gaps {gap_up:.17g} + {gap_down:.17g} fell below "
            f"the welfare gap {gap_sw:.17g} by {-slack:.3e}; transfers should cancel exactly"
        )


def run_no_property(
    instance: BanditInstance,
    upstream,
    downstream,
    horizon: int,
    seed: int,
    record_trajectory: bool = False,
) -> GameResult:
    """Baseline game: no offers, the downstream merely adapts to contexts.

    After the run, if the instance is misaligned, the path-wise welfare
    breakdown bound is asserted: r_sw >= delta_sw * (T - r_up_n / delta_up)
    up to float slack proportional to the horizon.
    """
    oracle = compute_oracle(instance)
    misaligned = oracle.up_argmax_unique and misalignment_holds(instance, oracle)
    rng = np.random.default_rng(seed)
    ledger = RegretLedger()
    records: list[RoundRecord] | None = [] if record_trajectory else None
    v_up, v_down = instance.v_up, instance.v_down

    for t in range(1, horizon + 1):
        u = rng.random()
        v = rng.random()
        up_arm = upstream.step(NO_OFFER, v)
        z = sample_upstream(instance, up_arm, rng)
        upstream.update(up_arm, z)
        down_arm = downstream.step(up_arm, u)
        x = sample_downstream(instance, up_arm, down_arm, rng)
        downstream.update(up_arm, down_arm, x)

        gap_sw, gap_up, gap_down = per_round_gaps(instance, oracle, None, up_arm, down_arm)
        ledger.rounds += 1
        ledger.r_up_n += gap_up
        ledger.r_down_n += gap_down
        ledger.r_sw += gap_sw
        ledger.up_utility += v_up[up_arm]
        ledger.down_utility += v_down[up_arm][down_arm]
        ledger.welfare += v_up[up_arm] + v_down[up_arm][down_arm]
        if records is not None:
            records.append(
                RoundRecord(t, "-", None, None, up_arm, down_arm, gap_sw, gap_up, gap_down)
            )

    bound = None
    if misaligned:
        bound = breakdown_lower_bound(oracle, horizon, ledger.r_up_n)
        if ledger.r_sw < bound - 1e-9 * horizon:
            raise RuntimeError(
                f"misaligned run broke the welfare floor: r_sw = {ledger.r_sw:.17g} "
                f"< bound {bound:.17g}"
            )
    return GameResult(
        mode="no-property",
        seed=seed,
        horizon=horizon,
        instance=instance,
        oracle=oracle,
        ledger=ledger,
        misaligned=misaligned,
        records=records,
        breakdown_bound=bound,
    )


def run_property(
    instance: BanditInstance,
    upstream,
    downstream,
    horizon: int,
    seed: int,
    record_trajectory: bool = False,
) -> GameResult:
    """Property-rights game: the downstream opens each round with an offer.

    Every round asserts the decomposition inequality gap_up + gap_down >=
    gap_sw (transfers cancel, so the players' regrets jointly dominate the
    welfare regret); the minimum slack is kept in the ledger.
    """
    params = getattr(downstream, "params", None)
    if params is not None:
        if params.horizon != horizon:
            raise ValueError(f"downstream expects horizon {params.horizon}, engine got {horizon}")
        if params.n_arms != instance.n_arms:
            raise ValueError(f"downstream expects {params.n_arms} arms, instance has {instance.n_arms}")

    oracle = compute_oracle(instance)
    misaligned = oracle.up_argmax_unique and misalignment_holds(instance, oracle)
    rng = np.random.default_rng(seed)
    ledger = RegretLedger()
    records: list[RoundRecord] | None = [] if record_trajectory else None
    v_up, v_down = instance.v_up, instance.v_down

    for t in range(1, horizon + 1):
        u = rng.random()
        in_search = getattr(downstream, "in_search_phase", False)
        offer, down_arm = downstream.step(u)
        v = rng.random()
        up_arm = upstream.step(offer, v)
        z = sample_upstream(instance, up_arm, rng)
        upstream.update(up_arm, z)
        x = sample_downstream(instance, up_arm, down_arm, rng)
        downstream.observe(up_arm, x)

        paid = offer.bonus(up_arm)
        gap_sw, gap_up, gap_down = per_round_gaps(instance, oracle, offer, up_arm, down_arm)
        _check_decomposition(ledger, gap_sw, gap_up, gap_down, t)
        ledger.rounds += 1
        ledger.r_up_p += gap_up
        ledger.r_down_p += gap_down
        ledger.r_sw += gap_sw
        ledger.up_utility += v_up[up_arm] + paid
        ledger.down_utility += v_down[up_arm][down_arm] - paid
        ledger.welfare += v_up[up_arm] + v_down[up_arm][down_arm]
        if records is not None:
            records.append(
                RoundRecord(
                    t,
                    "search" if in_search else "play",
                    offer.arm,
                    offer.amount,
                    up_arm,
                    down_arm,
                    gap_sw,
                    gap_up,
                    gap_down,
                )
            )

    estimates = getattr(downstream, "estimates", None)
    return GameResult(
        mode="property",
        seed=seed,
        horizon=horizon,
        instance=instance,
        oracle=oracle,
        ledger=ledger,
        misaligned=misaligned,
        records=records,
        tau_hat=None if estimates is None else estimates.tau_hat,
        phase1_rounds=getattr(downstream, "phase1_rounds", 0),
        phase1_batches=list(getattr(downstream, "diagnostics", [])) or None,
    )
