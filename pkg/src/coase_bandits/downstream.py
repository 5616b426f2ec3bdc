"""Downstream player policies.

The centerpiece is BELGIC, the two-phase policy for the property-rights
game: phase 1 runs a batched binary search per upstream arm to bracket the
minimal transfer that redirects the upstream player to that arm; phase 2
treats the K^2 (offered arm, own arm) pairs as one bandit over
transfer-adjusted rewards. A naive per-context UCB plays the no-property
baseline, and deterministic doubles cover the test matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env import BanditInstance, Oracle, sample_downstream, sample_upstream
from .upstream import IncentiveOffer, RegretCertificate


@dataclass(frozen=True)
class BelgicParams:
    """Static parameters of the two-phase policy.

    alpha: batch length exponent, each binary-search batch lasts ceil(T^alpha).
    beta:  precision exponent, the search slack per update is 1/T^beta and the
           final estimates resolve tau to that order.
    certificate: the upstream policy's batched-regret promise; its scale also
           sets the mismatch threshold separating decisive from ambiguous
           batches.
    """

    n_arms: int
    horizon: int
    alpha: float
    beta: float
    certificate: RegretCertificate

    @property
    def batch_length(self) -> int:
        return math.ceil(self.horizon**self.alpha)

    @property
    def n_batches(self) -> int:
        return math.ceil(self.beta * math.log2(self.horizon))

    @property
    def precision(self) -> float:
        return 1.0 / self.horizon**self.beta

    @property
    def threshold(self) -> float:
        c = self.certificate
        return c.scale * self.batch_length ** (c.exponent + self.beta / self.alpha)

    @property
    def estimate_pad(self) -> float:
        c = self.certificate
        return c.scale * self.horizon ** ((c.exponent - 1.0) / 2.0)

    @property
    def phase1_max_rounds(self) -> int:
        return self.n_arms * self.batch_length * self.n_batches


def validate_params(params: BelgicParams) -> None:
    """Reject parameterizations whose guarantees are vacuous or unrunnable."""
    if params.n_arms < 1:
        raise ValueError("need at least one arm")
    if params.horizon < 1:
        raise ValueError("horizon must be positive")
    if not 0.0 < params.alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {params.alpha}")
    if params.beta <= 0.0:
        raise ValueError(f"beta must be positive, got {params.beta}")
    c = params.certificate
    if c.scale < 0.0:
        raise ValueError(f"certificate scale must be >= 0, got {c.scale}")
    slack_cap = 1.0 - c.exponent
    if not params.beta / params.alpha < slack_cap:
        raise ValueError(
            "precision/batch tradeoff violated: beta/alpha = "
            f"{params.beta / params.alpha:.6g} must be < 1 - exponent = {slack_cap:.6g}"
        )
    if not params.phase1_max_rounds < params.horizon:
        raise ValueError(
            f"phase 1 cannot fit: {params.n_arms} arms x {params.batch_length} rounds x "
            f"{params.n_batches} batches = {params.phase1_max_rounds} >= horizon {params.horizon}"
        )
    if not params.threshold < params.batch_length / 2.0:
        raise ValueError(
            f"mismatch threshold {params.threshold:.6g} must be < half the batch "
            f"length {params.batch_length / 2.0:.6g}; lower the certificate scale "
            "or raise the horizon"
        )


@dataclass
class BinarySearchState:
    """Bracket [tau_lower, tau_upper] for one arm's minimal sufficient transfer."""

    arm: int
    tau_lower: float = 0.0
    tau_upper: float = 1.0
    batches_done: int = 0
    finished: bool = False
    early_return: bool = False

    def midpoint(self) -> float:
        return (self.tau_lower + self.tau_upper) / 2.0


def _clamp01(x: float) -> float:
    return min(max(x, 0.0), 1.0)


def binary_search_batch_update(
    state: BinarySearchState, mismatch_count: int, params: BelgicParams
) -> str:
    """Fold one batch's mismatch count into the bracket; returns the branch taken.

    With theta the mismatch threshold, a count strictly inside
    (theta, batch - theta) is ambiguous: it contradicts the upstream regret
    certificate on both hypotheses, so the search stops early for this arm
    and the bracket is left as-is. A small count means the offer was taken,
    so the midpoint (plus slack) is a valid upper bound; a large count means
    it was refused, giving a lower bound (minus slack). Bounds are clamped
    to [0, 1], where the true minimal transfer always lives.
    """
    if state.finished:
        raise ValueError(f"arm {state.arm}: search already finished")
    batch = params.batch_length
    if not 0 <= mismatch_count <= batch:
        raise ValueError(f"mismatch count {mismatch_count} outside [0, {batch}]")
    theta = params.threshold
    mid = state.midpoint()
    slack = params.precision
    if theta < mismatch_count < batch - theta:
        state.early_return = True
        state.finished = True
        branch = "early_return"
    elif mismatch_count <= theta:
        state.tau_upper = _clamp01(mid + slack)
        branch = "upper"
    else:
        state.tau_lower = _clamp01(mid - slack)
        branch = "lower"
    state.batches_done += 1
    if state.batches_done >= params.n_batches:
        state.finished = True
    return branch


@dataclass(frozen=True)
class TransferEstimates:
    """Phase-1 output: per-arm transfer estimates and their final brackets."""

    tau_hat: tuple[float, ...]
    tau_lower: tuple[float, ...]
    tau_upper: tuple[float, ...]
    early_return: tuple[bool, ...]
    batches_done: tuple[int, ...]


@dataclass(frozen=True)
class Phase1Batch:
    """Diagnostics row for one completed binary-search batch."""

    arm: int
    batch_index: int
    tau_mid: float
    mismatches: int
    branch: str
    tau_lower: float
    tau_upper: float


def _finish_estimates(params: BelgicParams, states: list[BinarySearchState]) -> TransferEstimates:
    pad = params.precision + params.estimate_pad
    return TransferEstimates(
        tau_hat=tuple(s.tau_upper + pad for s in states),
        tau_lower=tuple(s.tau_lower for s in states),
        tau_upper=tuple(s.tau_upper for s in states),
        early_return=tuple(s.early_return for s in states),
        batches_done=tuple(s.batches_done for s in states),
    )


class PairUCB:
    """UCB over the K^2 (offered arm, own arm) pairs on shifted rewards.

    Pairs are numbered row-major: pair = offered_arm * K + own_arm. Updates
    land only on rounds where the upstream actually played the offered arm,
    so the init sweep keeps proposing the same pair until its sample lands.
    """

    def __init__(self, n_arms: int, horizon: int):
        self.n_arms = n_arms
        n_pairs = n_arms * n_arms
        self.n_pairs = n_pairs
        self.log_term = math.log(n_pairs * horizon**3)
        self.counts = [0] * n_pairs
        self.means = [0.0] * n_pairs
        self.init_pointer = 0

    def step(self, u: float = 0.0) -> int:
        if self.init_pointer < self.n_pairs:
            return self.init_pointer
        best_pair, best_index = 0, -math.inf
        for p in range(self.n_pairs):
            idx = self.means[p] + 2.0 * math.sqrt(self.log_term / self.counts[p])
            if idx > best_index:
                best_pair, best_index = p, idx
        return best_pair

    def record(self, pair: int, shifted_reward: float) -> None:
        n = self.counts[pair] + 1
        self.counts[pair] = n
        self.means[pair] += (shifted_reward - self.means[pair]) / n
        if pair == self.init_pointer:
            self.init_pointer += 1

    def snapshot(self) -> tuple:
        return (tuple(self.counts), tuple(self.means), self.init_pointer)


class Belgic:
    """Two-phase downstream policy: bracket the transfers, then play pairs.

    step() -> (IncentiveOffer, own_arm); observe(upstream_arm, reward) must
    follow every step. During the search phase the policy offers the current
    bracket midpoint on the arm under search and plays own arm 0; rewards in
    that phase are ignored, only compliance counts. The play phase offers
    tau_hat on the proposed pair's arm and feeds reward - tau_hat through
    the pair bandit whenever the upstream complied.
    """

    def __init__(self, params: BelgicParams):
        validate_params(params)
        self.params = params
        self.t = 0
        self.search_arm = 0
        self.search_state = BinarySearchState(arm=0)
        self.arm_states: list[BinarySearchState] = [self.search_state]
        self.batch_round = 0
        self.mismatches = 0
        self.diagnostics: list[Phase1Batch] = []
        self.estimates: TransferEstimates | None = None
        self.pair_ucb = PairUCB(params.n_arms, params.horizon)
        self.phase1_rounds = 0
        self._pending: tuple[IncentiveOffer, int, int] | None = None

    @property
    def in_search_phase(self) -> bool:
        return self.estimates is None

    def step(self, u: float = 0.0) -> tuple[IncentiveOffer, int]:
        if self.t >= self.params.horizon:
            raise ValueError(f"round {self.t + 1} exceeds horizon {self.params.horizon}")
        if self._pending is not None:
            raise RuntimeError("step() called twice without observe()")
        if self.in_search_phase:
            offer = IncentiveOffer(self.search_arm, self.search_state.midpoint())
            own_arm, pair = 0, -1
        else:
            pair = self.pair_ucb.step(u)
            arm, own_arm = divmod(pair, self.params.n_arms)
            offer = IncentiveOffer(arm, self.estimates.tau_hat[arm])
        self._pending = (offer, own_arm, pair)
        return offer, own_arm

    def observe(self, upstream_arm: int, reward: float) -> None:
        if self._pending is None:
            raise RuntimeError("observe() called without a pending step()")
        offer, _own_arm, pair = self._pending
        self._pending = None
        self.t += 1
        if pair < 0:
            self._observe_search(offer, upstream_arm)
        elif upstream_arm == offer.arm:
            self.pair_ucb.record(pair, reward - offer.amount)

    def _observe_search(self, offer: IncentiveOffer, upstream_arm: int) -> None:
        self.phase1_rounds += 1
        self.batch_round += 1
        if upstream_arm != self.search_arm:
            self.mismatches += 1
        if self.batch_round < self.params.batch_length:
            return
        state = self.search_state
        batch_index = state.batches_done
        branch = binary_search_batch_update(state, self.mismatches, self.params)
        self.diagnostics.append(
            Phase1Batch(
                arm=state.arm,
                batch_index=batch_index,
                tau_mid=offer.amount,
                mismatches=self.mismatches,
                branch=branch,
                tau_lower=state.tau_lower,
                tau_upper=state.tau_upper,
            )
        )
        self.batch_round = 0
        self.mismatches = 0
        if not state.finished:
            return
        if state.arm + 1 < self.params.n_arms:
            self.search_arm = state.arm + 1
            self.search_state = BinarySearchState(arm=self.search_arm)
            self.arm_states.append(self.search_state)
        else:
            self.estimates = _finish_estimates(self.params, self.arm_states)


def run_phase1(
    instance: BanditInstance,
    upstream,
    params: BelgicParams,
    rng: np.random.Generator,
) -> tuple[TransferEstimates, list[Phase1Batch], int]:
    """Drive only the search phase against a live upstream policy.

    Rounds mirror the full engine exactly (same per-round draw order:
    downstream uniform, upstream uniform, upstream noise, downstream noise),
    so phase 1 here is bit-identical to phase 1 inside a full game with the
    same rng. Downstream rewards are drawn and discarded; the search only
    consumes compliance.
    """
    belgic = Belgic(params)
    while belgic.in_search_phase:
        u = rng.random()
        offer, own_arm = belgic.step(u)
        v = rng.random()
        upstream_arm = upstream.step(offer, v)
        z = sample_upstream(instance, upstream_arm, rng)
        upstream.update(upstream_arm, z)
        x = sample_downstream(instance, upstream_arm, own_arm, rng)
        belgic.observe(upstream_arm, x)
    return belgic.estimates, belgic.diagnostics, belgic.phase1_rounds


class NaiveContextUCB:
    """No-property baseline: an independent UCB per observed upstream arm.

    The upstream arm is a context the downstream cannot influence; each
    context gets its own forced sweep and index. Bonus matches the upstream
    policy's ln(K * T^3) scaling since each context is a K-armed problem.
    """

    def __init__(self, n_arms: int, horizon: int):
        self.n_arms = n_arms
        self.log_term = math.log(n_arms * horizon**3)
        self.counts = [[0] * n_arms for _ in range(n_arms)]
        self.means = [[0.0] * n_arms for _ in range(n_arms)]

    def step(self, context: int, u: float = 0.0) -> int:
        counts = self.counts[context]
        for b in range(self.n_arms):
            if counts[b] == 0:
                return b
        means = self.means[context]
        best_arm, best_index = 0, -math.inf
        for b in range(self.n_arms):
            idx = means[b] + 2.0 * math.sqrt(self.log_term / counts[b])
            if idx > best_index:
                best_arm, best_index = b, idx
        return best_arm

    def update(self, context: int, arm: int, reward: float) -> None:
        n = self.counts[context][arm] + 1
        self.counts[context][arm] = n
        self.means[context][arm] += (reward - self.means[context][arm]) / n


class OracleTransferDownstream:
    """Property-mode double: offers the welfare arm at its exact minimal
    transfer and plays the welfare-optimal own arm. Needs the oracle."""

    def __init__(self, oracle: Oracle):
        self.offer = IncentiveOffer(oracle.a_sw, oracle.tau_star[oracle.a_sw])
        self.own_arm = oracle.b_sw

    @property
    def in_search_phase(self) -> bool:
        return False

    def step(self, u: float = 0.0) -> tuple[IncentiveOffer, int]:
        return self.offer, self.own_arm

    def observe(self, upstream_arm: int, reward: float) -> None:
        pass


class ZeroTransferDownstream:
    """Property-mode double that never pays: the game collapses to the
    no-property dynamics for the upstream player."""

    def __init__(self, own_arm: int = 0):
        self.offer = IncentiveOffer(0, 0.0)
        self.own_arm = own_arm

    @property
    def in_search_phase(self) -> bool:
        return False

    def step(self, u: float = 0.0) -> tuple[IncentiveOffer, int]:
        return self.offer, self.own_arm

    def observe(self, upstream_arm: int, reward: float) -> None:
        pass


class BestResponseDownstream:
    """No-property double: plays argmax_b v_down[context][b], lowest index ties."""

    def __init__(self, instance: BanditInstance):
        self.best = []
        for a in range(instance.n_arms):
            row = instance.v_down[a]
            best_b = 0
            for b in range(1, instance.n_arms):
                if row[b] > row[best_b]:
                    best_b = b
            self.best.append(best_b)

    def step(self, context: int, u: float = 0.0) -> int:
        return self.best[context]

    def update(self, context: int, arm: int, reward: float) -> None:
        pass
