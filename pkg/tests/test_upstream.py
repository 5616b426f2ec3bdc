"""Upstream policies: incentive-aware UCB and its certificate."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coase_bandits.env import build_instance, sample_upstream
from coase_bandits.upstream import (
    NO_OFFER,
    BestResponseUpstream,
    IncentiveAwareUCB,
    IncentiveOffer,
    ucb_certificate,
)


class TestIncentiveOffer:
    def test_bonus_indicator(self):
        offer = IncentiveOffer(1, 0.4)
        assert offer.bonus(1) == 0.4
        assert offer.bonus(0) == 0.0

    def test_rejects_negative_and_nonfinite(self):
        with pytest.raises(ValueError):
            IncentiveOffer(0, -0.1)
        with pytest.raises(ValueError):
            IncentiveOffer(0, math.inf)

    def test_no_offer_is_neutral(self):
        assert NO_OFFER.bonus(0) == 0.0
        assert NO_OFFER.bonus(3) == 0.0


class TestInitialization:
    def test_three_arms_sweep_in_order(self):
        ucb = IncentiveAwareUCB(3, 100)
        # huge offer on arm 2 is ignored during the forced sweep
        seen = [ucb.step(IncentiveOffer(2, 50.0)) for _ in range(3)]
        assert seen == [0, 1, 2]

    def test_single_arm(self):
        ucb = IncentiveAwareUCB(1, 10)
        assert ucb.step(NO_OFFER) == 0

    def test_horizon_too_short(self):
        with pytest.raises(ValueError, match="cannot fit"):
            IncentiveAwareUCB(3, 2)


class TestUpdate:
    def test_two_point_mean(self):
        ucb = IncentiveAwareUCB(2, 100)
        ucb.update(0, 0.4)
        ucb.update(0, 0.8)
        assert ucb.pulls[0] == 2
        assert ucb.means[0] == pytest.approx(0.6)

    def test_first_update_sets_mean(self):
        ucb = IncentiveAwareUCB(2, 100)
        ucb.update(1, -2.5)
        assert ucb.means[1] == -2.5

    @given(st.floats(-5, 5, allow_nan=False), st.integers(1, 40))
    @settings(max_examples=50, deadline=None)
    def test_constant_rewards_fix_the_mean(self, c, n):
        ucb = IncentiveAwareUCB(1, 100)
        for _ in range(n):
            ucb.update(0, c)
        assert ucb.means[0] == pytest.approx(c)


def primed_ucb(means, pulls, horizon=4096):
    """UCB past initialization with chosen empirical state."""
    ucb = IncentiveAwareUCB(len(means), horizon)
    ucb.t = len(means)
    ucb.means = list(means)
    ucb.pulls = list(pulls)
    return ucb


def index_of(ucb, arm, offer):
    return (
        ucb.means[arm]
        + 2.0 * math.sqrt(ucb.log_term / ucb.pulls[arm])
        + offer.bonus(arm)
    )


class TestStep:
    def test_equal_pulls_argmax_of_means(self):
        ucb = primed_ucb([0.9, 0.1], [5, 5])
        assert ucb.step(IncentiveOffer(0, 0.0)) == 0

    def test_large_transfer_overrides_any_deficit(self):
        # amount 12 exceeds the largest possible index gap
        # (means in [0,1], exploration term <= 2*sqrt(log(K T^3)))
        ucb = primed_ucb([0.9, 0.1], [500, 1], horizon=4096)
        gap_cap = 1.0 + 2.0 * math.sqrt(ucb.log_term)
        assert 12.0 > gap_cap
        assert ucb.step(IncentiveOffer(1, 12.0)) == 1

    def test_exact_tie_goes_to_lowest_index(self):
        ucb = primed_ucb([0.5, 0.5], [7, 7])
        assert ucb.step(NO_OFFER) == 0

    @given(
        st.lists(st.floats(0, 1, allow_nan=False), min_size=2, max_size=4),
        st.integers(0, 3),
        st.floats(0, 4, allow_nan=False),
        st.data(),
    )
    @settings(max_examples=120, deadline=None)
    def test_transfer_shift_argmax(self, means, target, extra, data):
        k = len(means)
        target %= k
        pulls = data.draw(st.lists(st.integers(1, 50), min_size=k, max_size=k))
        ucb = primed_ucb(means, pulls)
        base = IncentiveOffer(target, 0.0)
        deficit = max(index_of(ucb, a, base) for a in range(k)) - index_of(
            ucb, target, base
        )
        offer = IncentiveOffer(target, deficit + 1e-9 + extra)
        assert ucb.step(offer) == target

    def test_zero_offers_reproduce_classic_ucb(self):
        """With zero-amount offers the transfer term vanishes and the policy
        must walk the classical UCB trajectory on the same reward stream."""
        inst = build_instance((0.8, 0.4, 0.1), ((0.0,) * 3,) * 3)
        horizon = 600

        def classic_trace(seed):
            rng = np.random.default_rng(seed)
            log_term = math.log(3 * horizon**3)
            pulls, means, path = [0, 0, 0], [0.0, 0.0, 0.0], []
            for t in range(1, horizon + 1):
                if t <= 3:
                    arm = t - 1
                else:
                    arm = max(
                        range(3),
                        key=lambda a: (means[a] + 2.0 * math.sqrt(log_term / pulls[a]), -a),
                    )
                z = sample_upstream(inst, arm, rng)
                pulls[arm] += 1
                means[arm] += (z - means[arm]) / pulls[arm]
                path.append(arm)
            return path

        def incentive_trace(seed):
            rng = np.random.default_rng(seed)
            ucb = IncentiveAwareUCB(3, horizon)
            path = []
            for _ in range(horizon):
                arm = ucb.step(IncentiveOffer(2, 0.0))
                ucb.update(arm, sample_upstream(inst, arm, rng))
                path.append(arm)
            return path

        for seed in (0, 1, 2):
            assert incentive_trace(seed) == classic_trace(seed)


class TestCertificate:
    def test_reference_scale(self):
        cert = ucb_certificate(2, 4096)
        assert cert.scale == pytest.approx(57.2952445420377, rel=1e-12)
        assert cert.exponent == 0.5
        assert cert.tail == 2.0

    def test_unit_log_term_gives_eight(self):
        # horizon e^(1/3) makes log(1 * T^3) = 1 exactly
        cert = ucb_certificate(1, math.e ** (1.0 / 3.0))
        assert cert.scale == 8.0

    def test_exponent_below_one(self):
        assert ucb_certificate(5, 100).exponent < 1.0

    def test_rejects_degenerate_inputs(self):
        with pytest.raises(ValueError):
            ucb_certificate(0, 10)
        with pytest.raises(ValueError):
            ucb_certificate(2, 0)


class TestRegretBehavior:
    def test_pseudo_regret_sublinear(self):
        """Per-round regret at T=2^14 under half its T=2^10 value (gap 0.4)."""
        inst = build_instance((0.9, 0.5), ((0.0, 0.0), (0.0, 0.0)))

        def per_round_regret(horizon, seed):
            rng = np.random.default_rng(seed)
            ucb = IncentiveAwareUCB(2, horizon)
            regret = 0.0
            for _ in range(horizon):
                arm = ucb.step(NO_OFFER)
                ucb.update(arm, sample_upstream(inst, arm, rng))
                regret += 0.9 - inst.v_up[arm]
            return regret / horizon

        for seed in (0, 1, 2):
            assert per_round_regret(2**14, seed) < per_round_regret(2**10, seed) / 2.0

    def test_certificate_envelope_smoke(self):
        """Light version of the batched-regret acceptance run: prefix regret
        under constant per-arm transfers stays below scale * sqrt(t * K)."""
        inst = build_instance((1.0, 0.3), ((0.0, 0.0), (0.0, 0.0)))
        horizon, check_t = 2**14, 1024
        scale = ucb_certificate(2, horizon).scale
        tau = (0.2, 0.4)
        for seed in range(5):
            rng = np.random.default_rng(seed)
            ucb = IncentiveAwareUCB(2, horizon)
            regret = 0.0
            for t in range(1, check_t + 1):
                arm_offered = ((t - 1) // 256) % 2
                offer = IncentiveOffer(arm_offered, tau[arm_offered])
                played = ucb.step(offer, rng.random())
                ucb.update(played, sample_upstream(inst, played, rng))
                best = max(inst.v_up[a] + offer.bonus(a) for a in range(2))
                regret += best - (inst.v_up[played] + offer.bonus(played))
            assert regret <= scale * math.sqrt(check_t * 2)


class TestBestResponseDouble:
    def test_plays_argmax_without_offer(self):
        inst = build_instance((0.2, 0.9, 0.5), ((0.0,) * 3,) * 3)
        double = BestResponseUpstream(inst)
        assert double.step(NO_OFFER) == 1

    def test_sufficient_transfer_redirects(self):
        inst = build_instance((0.9, 0.5), ((0.0, 0.0), (0.0, 0.0)))
        double = BestResponseUpstream(inst)
        assert double.step(IncentiveOffer(1, 0.5)) == 1  # indifferent: takes it
        assert double.step(IncentiveOffer(1, 0.41)) == 1
        assert double.step(IncentiveOffer(1, 0.39)) == 0

    def test_zero_offer_tie_breaks_low(self):
        inst = build_instance((0.7, 0.7), ((0.0, 0.0), (0.0, 0.0)))
        double = BestResponseUpstream(inst)
        assert double.step(IncentiveOffer(1, 0.0)) == 0

    def test_update_is_noop(self):
        inst = build_instance((0.7, 0.2), ((0.0, 0.0), (0.0, 0.0)))
        double = BestResponseUpstream(inst)
        double.update(0, 123.0)
        assert double.step(NO_OFFER) == 0
