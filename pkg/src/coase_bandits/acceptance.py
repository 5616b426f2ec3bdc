"""Pinned acceptance criteria.

Eight checks, each a self-contained function returning a CriterionResult
with one human-readable pass/fail line. Everything is pinned: instances,
seeds, horizons, search parameters, and tolerances. The test suite and the
``accept`` CLI subcommand both run these; nothing here depends on wall
clock, machine, or process count.
"""

from __future__ import annotations

import filecmp
import math
import os
import tempfile
import time
from dataclasses import dataclass

import numpy as np

from .config import GameConfig
from .downstream import (
    Belgic,
    BelgicParams,
    NaiveContextUCB,
    OracleTransferDownstream,
    ZeroTransferDownstream,
    run_phase1,
)
from .engine import run_no_property, run_property
from .env import (
    BanditInstance,
    build_instance,
    compute_oracle,
    optimal_split_identity_holds,
    random_instance,
    transfer_grid_optimum,
)
from .firm import FirmExample, firm_demo
from .runner import simulate_command, sweep
from .upstream import (
    BestResponseUpstream,
    IncentiveAwareUCB,
    IncentiveOffer,
    RegretCertificate,
    ucb_certificate,
)


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    runtime_s: float

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict}  criterion {self.number} ({self.name}): {self.detail} [{self.runtime_s:.1f}s]"


def _timed(number: int, name: str, passed: bool, detail: str, t0: float) -> CriterionResult:
    return CriterionResult(number, name, passed, detail, time.perf_counter() - t0)


# ---------------------------------------------------------------- instance suite

SUITE_SEED = 20260815
SUITE_SIZE = 50
SUITE_ARM_CYCLE = (2, 3, 5)


def instance_suite() -> list[BanditInstance]:
    """50 pinned random instances, arm counts cycling through 2, 3, 5."""
    rng = np.random.default_rng(SUITE_SEED)
    return [
        random_instance(rng, SUITE_ARM_CYCLE[i % len(SUITE_ARM_CYCLE)])
        for i in range(SUITE_SIZE)
    ]


# ---------------------------------------------------------------- criterion 1

GRID_STEP = 1e-6
GRID_TOL = 2e-6


def criterion_1_oracle_identity() -> CriterionResult:
    """Exact welfare-split identity plus a brute-force transfer-grid cross-check."""
    t0 = time.perf_counter()
    exact = 0
    worst = 0.0
    for inst in instance_suite():
        oracle = compute_oracle(inst)
        if optimal_split_identity_holds(inst, oracle):
            exact += 1
        dev = abs(transfer_grid_optimum(inst, GRID_STEP) - oracle.mu_star_down)
        worst = max(worst, dev)
    passed = exact == SUITE_SIZE and worst <= GRID_TOL
    detail = (
        f"split identity exact on {exact}/{SUITE_SIZE} instances; "
        f"max |grid - closed form| = {worst:.3g} (tol {GRID_TOL:g})"
    )
    return _timed(1, "oracle-identity", passed, detail, t0)


# ---------------------------------------------------------------- criterion 2

MATRIX_HORIZON = 4096
MATRIX_SEEDS = (0, 1, 2)
MATRIX_INSTANCES = (
    build_instance((1.0, 0.3), ((0.0, 0.0), (0.9, 0.85))),
    build_instance((0.9, 0.5), ((0.2, 0.1), (0.8, 0.3))),
)
MATRIX_ALPHA, MATRIX_BETA, MATRIX_SCALE = 0.75, 0.25, 1.0
DECOMPOSITION_TOL = 1e-12


def _matrix_downstream(kind: str, instance: BanditInstance, horizon: int):
    if kind == "belgic":
        return Belgic(
            BelgicParams(
                n_arms=instance.n_arms,
                horizon=horizon,
                alpha=MATRIX_ALPHA,
                beta=MATRIX_BETA,
                certificate=RegretCertificate(scale=MATRIX_SCALE),
            )
        )
    if kind == "oracle":
        return OracleTransferDownstream(compute_oracle(instance))
    return ZeroTransferDownstream()


def _matrix_upstream(kind: str, instance: BanditInstance, horizon: int):
    if kind == "ucb":
        return IncentiveAwareUCB(instance.n_arms, horizon)
    return BestResponseUpstream(instance)


def criterion_2_pathwise_decomposition() -> CriterionResult:
    """Per-round regret decomposition across the whole property-mode matrix.

    The engine raises on any violation; this criterion also reports the
    minimum observed slack, which must stay above -1e-12.
    """
    t0 = time.perf_counter()
    rounds = 0
    min_slack = math.inf
    runs = 0
    for inst in MATRIX_INSTANCES:
        for up_kind in ("ucb", "best_response"):
            for down_kind in ("belgic", "oracle", "zero"):
                for seed in MATRIX_SEEDS:
                    result = run_property(
                        inst,
                        _matrix_upstream(up_kind, inst, MATRIX_HORIZON),
                        _matrix_downstream(down_kind, inst, MATRIX_HORIZON),
                        MATRIX_HORIZON,
                        seed,
                    )
                    rounds += result.ledger.rounds
                    min_slack = min(min_slack, result.ledger.decomposition_min_slack)
                    runs += 1
    passed = min_slack >= -DECOMPOSITION_TOL
    detail = (
        f"{runs} runs / {rounds} property-mode rounds, zero violations; "
        f"min decomposition slack = {min_slack:.3g} (floor -{DECOMPOSITION_TOL:g})"
    )
    return _timed(2, "pathwise-decomposition", passed, detail, t0)


# ---------------------------------------------------------------- criterion 3

BREAKDOWN_INSTANCE = build_instance((1.0, 0.3), ((0.0, 0.0), (0.9, 0.85)))
BREAKDOWN_HORIZONS = (2**10, 2**12, 2**14)
BREAKDOWN_SEEDS = tuple(range(50))
BREAKDOWN_TOP_T = 2**14


def criterion_3_welfare_breakdown() -> CriterionResult:
    """Misaligned baseline: welfare-regret floor on every path, and the mean
    per-round welfare regret at the largest horizon lands in [0.9, 1.0] of
    the misalignment margin."""
    t0 = time.perf_counter()
    oracle = compute_oracle(BREAKDOWN_INSTANCE)
    held = total = 0
    top_rates = []
    for horizon in BREAKDOWN_HORIZONS:
        for seed in BREAKDOWN_SEEDS:
            result = run_no_property(
                BREAKDOWN_INSTANCE,
                IncentiveAwareUCB(BREAKDOWN_INSTANCE.n_arms, horizon),
                NaiveContextUCB(BREAKDOWN_INSTANCE.n_arms, horizon),
                horizon,
                seed,
            )
            total += 1
            if result.ledger.r_sw >= result.breakdown_bound - 1e-9 * horizon:
                held += 1
            if horizon == BREAKDOWN_TOP_T:
                top_rates.append(result.ledger.r_sw / horizon)
    mean_rate = float(np.mean(top_rates))
    lo, hi = 0.9 * oracle.delta_sw, oracle.delta_sw
    passed = held == total and lo <= mean_rate <= hi
    detail = (
        f"welfare floor held on {held}/{total} paths; "
        f"mean r_sw/T at T={BREAKDOWN_TOP_T} = {mean_rate:.4f}, needs [{lo:g}, {hi:g}]"
    )
    return _timed(3, "welfare-breakdown", passed, detail, t0)


# ---------------------------------------------------------------- criterion 4

SEARCH_HORIZON = 2**14
SEARCH_ALPHA, SEARCH_BETA = 0.75, 0.25
SEARCH_SCALE = 1.0
SANDWICH_INSTANCE = build_instance((0.9, 0.5), ((0.2, 0.1), (0.8, 0.3)))
SANDWICH_SEEDS = tuple(range(1000, 1200))
WIDTH_TOL = 1e-12
# The default exponents cannot fit phase 1 for K in {3, 5} at desk horizons,
# so the containment replay pins a faster schedule; the recurrence under test
# is the same.
CONTAIN_ALPHA, CONTAIN_BETA, CONTAIN_SCALE = 0.5, 0.2, 0.5


def _search_params(n_arms: int) -> BelgicParams:
    return BelgicParams(
        n_arms=n_arms,
        horizon=SEARCH_HORIZON,
        alpha=SEARCH_ALPHA,
        beta=SEARCH_BETA,
        certificate=RegretCertificate(scale=SEARCH_SCALE),
    )


def _contain_params(n_arms: int) -> BelgicParams:
    return BelgicParams(
        n_arms=n_arms,
        horizon=SEARCH_HORIZON,
        alpha=CONTAIN_ALPHA,
        beta=CONTAIN_BETA,
        certificate=RegretCertificate(scale=CONTAIN_SCALE),
    )


def _check_brackets(inst: BanditInstance, seed: int) -> tuple[bool, float]:
    """Replay the binary search against the exact best responder and verify,
    batch by batch, bracket containment of tau* and the width recurrence
    (both the bit-exact update arithmetic and the closed-form w/2 + h)."""
    params = _contain_params(inst.n_arms)
    oracle = compute_oracle(inst)
    rng = np.random.default_rng(seed)
    _, batches, _ = run_phase1(inst, BestResponseUpstream(inst), params, rng)

    h = params.precision
    ok = True
    worst_drift = 0.0
    lo, hi, ideal = {}, {}, {}
    for row in batches:
        a = row.arm
        l = lo.get(a, 0.0)
        u = hi.get(a, 1.0)
        w_ideal = ideal.get(a, 1.0)
        mid = (l + u) / 2.0
        if row.tau_mid != mid or row.branch == "early_return":
            ok = False
            break
        if row.branch == "upper":
            u = min(max(mid + h, 0.0), 1.0)
        else:
            l = min(max(mid - h, 0.0), 1.0)
        if row.tau_lower != l or row.tau_upper != u:
            ok = False
            break
        if not l <= oracle.tau_star[a] <= u:
            ok = False
            break
        w_ideal = w_ideal / 2.0 + h
        drift = abs((u - l) - w_ideal)
        worst_drift = max(worst_drift, drift)
        if drift > WIDTH_TOL:
            ok = False
            break
        lo[a], hi[a], ideal[a] = l, u, w_ideal
    return ok, worst_drift


def criterion_4_binary_search() -> CriterionResult:
    """Bracket correctness with the exact responder, then the estimate
    sandwich under the learning upstream at the pinned failure budget."""
    t0 = time.perf_counter()
    contained = 0
    worst_drift = 0.0
    suite = instance_suite()
    for i, inst in enumerate(suite):
        ok, drift = _check_brackets(inst, seed=3000 + i)
        contained += ok
        worst_drift = max(worst_drift, drift)

    params = _search_params(SANDWICH_INSTANCE.n_arms)
    oracle = compute_oracle(SANDWICH_INSTANCE)
    pad = params.estimate_pad
    h = params.precision
    failures = 0
    for seed in SANDWICH_SEEDS:
        rng = np.random.default_rng(seed)
        upstream = IncentiveAwareUCB(SANDWICH_INSTANCE.n_arms, SEARCH_HORIZON)
        est, _, _ = run_phase1(SANDWICH_INSTANCE, upstream, params, rng)
        for a, tau_true in enumerate(oracle.tau_star):
            tau_hat = est.tau_hat[a]
            if not tau_hat - 4.0 * h - pad <= tau_true <= tau_hat:
                failures += 1
                break
    n_runs = len(SANDWICH_SEEDS)
    zeta = params.certificate.tail
    budget = (
        params.n_arms
        * math.ceil(math.log2(SEARCH_HORIZON**SEARCH_BETA))
        / SEARCH_HORIZON ** (SEARCH_ALPHA * zeta)
        + 0.05
    )
    frac = failures / n_runs
    passed = contained == len(suite) and frac <= budget
    detail = (
        f"bracket contained tau* every batch on {contained}/{len(suite)} instances "
        f"(max width drift {worst_drift:.2e}, tol {WIDTH_TOL:g}); "
        f"sandwich failed {failures}/{n_runs} = {frac:.3f} (budget {budget:.5f})"
    )
    return _timed(4, "binary-search", passed, detail, t0)


# ---------------------------------------------------------------- criterion 5

EFFICIENCY_INSTANCE = build_instance((0.5, 0.9), ((0.9, 0.0), (0.49, 0.0)))
EFFICIENCY_HORIZONS = tuple(2**k for k in range(10, 17))
EFFICIENCY_SEEDS = tuple(range(30))
EFFICIENCY_ALPHA, EFFICIENCY_BETA, EFFICIENCY_SCALE = 0.5, 0.2, 0.5
SLOPE_CAP = 0.9


def efficiency_config() -> GameConfig:
    return GameConfig(
        mode="property",
        n_arms=2,
        horizon=EFFICIENCY_HORIZONS[0],
        seeds=EFFICIENCY_SEEDS,
        v_up=EFFICIENCY_INSTANCE.v_up,
        v_down=EFFICIENCY_INSTANCE.v_down,
        alpha=EFFICIENCY_ALPHA,
        beta=EFFICIENCY_BETA,
        upstream_policy="ucb",
        c_mode=f"fixed:{EFFICIENCY_SCALE}",
        downstream_policy="belgic",
    )


def downstream_regret_bound(n_arms: int, horizon: int, v_bar: float, v_under: float) -> float:
    """Closed-form ceiling on the downstream player's property-mode regret,
    evaluated with the full theoretical constant (base-2 logs)."""
    k, t = n_arms, float(horizon)
    lead = 10.0 + 4.0 * k + 32.0 * math.sqrt(k * math.log2(k * t**3)) + v_bar - v_under
    return lead * math.log2(t) * (3.0 + 2.0 * t**0.75) + 3.0 * k * k * (v_bar - v_under)


def criterion_5_welfare_efficiency() -> CriterionResult:
    """Per-round welfare regret of the full two-phase stack shrinks with the
    horizon, the log-log growth of total welfare regret stays well below
    linear, and downstream regret sits under its closed-form ceiling."""
    t0 = time.perf_counter()
    cfg = efficiency_config()
    rows, slope, _ = sweep(cfg, list(EFFICIENCY_HORIZONS))
    rates = [r.mean_r_sw_per_round for r in rows]
    decreasing = all(b < a for a, b in zip(rates, rates[1:]))

    oracle = compute_oracle(EFFICIENCY_INSTANCE)
    worst_ratio = -math.inf
    for row in rows:
        bound = downstream_regret_bound(2, row.horizon, oracle.v_bar, oracle.v_under)
        worst_ratio = max(worst_ratio, row.mean_r_down / bound)
    under_bound = worst_ratio <= 1.0

    passed = decreasing and slope <= SLOPE_CAP and under_bound
    rate_text = " ".join(f"{x:.4f}" for x in rates)
    detail = (
        f"mean r_sw/T over T=2^10..2^16: {rate_text} "
        f"({'strictly decreasing' if decreasing else 'NOT decreasing'}); "
        f"log-log slope {slope:.3f} (cap {SLOPE_CAP}); "
        f"max r_down/bound = {worst_ratio:.2e} (cap 1)"
    )
    return _timed(5, "welfare-efficiency", passed, detail, t0)


# ---------------------------------------------------------------- criterion 6

CERT_HORIZON = 2**14
CERT_CHECKPOINTS = (256, 1024, 4096)
CERT_BATCH = 256
CERT_RUNS = 200
CERT_V_UP = (1.0, 0.3)
CERT_TAU = (0.2, 0.4)
CERT_MAX_FRACTION = 0.05


def _certificate_run(seed: int) -> list[float]:
    """Drive the incentive-aware UCB through batched constant per-arm offers
    and return its transfer-adjusted pseudo-regret at each checkpoint."""
    inst = build_instance(CERT_V_UP, ((0.0, 0.0), (0.0, 0.0)))
    k = inst.n_arms
    rng = np.random.default_rng(seed)
    ucb = IncentiveAwareUCB(k, CERT_HORIZON)
    regret = 0.0
    out = []
    from .env import sample_upstream

    for t in range(1, max(CERT_CHECKPOINTS) + 1):
        arm = ((t - 1) // CERT_BATCH) % k
        offer = IncentiveOffer(arm, CERT_TAU[arm])
        v = rng.random()
        played = ucb.step(offer, v)
        z = sample_upstream(inst, played, rng)
        ucb.update(played, z)
        best = max(inst.v_up[a] + offer.bonus(a) for a in range(k))
        regret += best - (inst.v_up[played] + offer.bonus(played))
        if t in CERT_CHECKPOINTS:
            out.append(regret)
    return out


def criterion_6_certificate() -> CriterionResult:
    """The upstream policy earns its promised regret envelope under batched
    constant per-arm transfers at every checkpoint."""
    t0 = time.perf_counter()
    k = len(CERT_V_UP)
    scale = ucb_certificate(k, CERT_HORIZON).scale
    exceed = [0] * len(CERT_CHECKPOINTS)
    for seed in range(CERT_RUNS):
        prefix = _certificate_run(seed)
        for i, (t, r) in enumerate(zip(CERT_CHECKPOINTS, prefix)):
            if r > scale * math.sqrt(t * k):
                exceed[i] += 1
    fractions = [e / CERT_RUNS for e in exceed]
    passed = all(f <= CERT_MAX_FRACTION for f in fractions)
    pairs = " ".join(
        f"t={t}:{f:.3f}" for t, f in zip(CERT_CHECKPOINTS, fractions)
    )
    detail = (
        f"envelope scale {scale:.1f}; exceedance fractions {pairs} "
        f"(cap {CERT_MAX_FRACTION}) over {CERT_RUNS} runs"
    )
    return _timed(6, "upstream-certificate", passed, detail, t0)


# ---------------------------------------------------------------- criterion 7


def criterion_7_firm_demo() -> CriterionResult:
    """Quadratic-cost two-firm example: pinned welfare numbers, exact
    transfer, bargaining equals efficiency, and the zero-harm collapse."""
    t0 = time.perf_counter()
    report = firm_demo(FirmExample(price=10.0, cost_slope_1=1.0, cost_slope_2=1.0, externality_rate=2.0))
    checks = [
        report.competitive_welfare == 80.0,
        report.efficient_welfare == 82.0,
        report.transfer == 2.0,
        report.bargaining_welfare == report.efficient_welfare,
    ]
    zero = firm_demo(FirmExample(price=10.0, cost_slope_1=1.0, cost_slope_2=1.0, externality_rate=0.0))
    checks += [
        zero.competitive_q == zero.efficient_q,
        zero.competitive_welfare == zero.efficient_welfare,
        zero.transfer == 0.0,
    ]
    passed = all(checks)
    detail = (
        f"competitive W = {report.competitive_welfare:g} (want 80), efficient W = "
        f"{report.efficient_welfare:g} (want 82), transfer = {report.transfer:g} (want 2), "
        f"bargaining == efficient: {report.bargaining_welfare == report.efficient_welfare}; "
        f"zero-rate collapse: {checks[4] and checks[5] and checks[6]}"
    )
    return _timed(7, "firm-demo", passed, detail, t0)


# ---------------------------------------------------------------- criterion 8

DETERMINISM_CONFIGS = (
    GameConfig(
        mode="property",
        n_arms=2,
        horizon=2048,
        seeds=(7, 11),
        v_up=(0.9, 0.5),
        v_down=((0.2, 0.1), (0.8, 0.3)),
        alpha=0.75,
        beta=0.25,
        upstream_policy="ucb",
        c_mode="fixed:1.0",
        downstream_policy="belgic",
        trajectory="full",
    ),
    GameConfig(
        mode="no-property",
        n_arms=2,
        horizon=2048,
        seeds=(7, 11),
        v_up=(1.0, 0.3),
        v_down=((0.0, 0.0), (0.9, 0.85)),
        upstream_policy="ucb",
        downstream_policy="naive",
        trajectory="full",
    ),
)


def criterion_8_determinism(base_dir: str | None = None) -> CriterionResult:
    """Simulate each pinned config twice and compare every CSV byte for byte."""
    t0 = time.perf_counter()
    root = base_dir or tempfile.mkdtemp(prefix="coase-accept-")
    compared = 0
    identical = True
    for i, cfg in enumerate(DETERMINISM_CONFIGS):
        dirs = [os.path.join(root, f"cfg{i}_run{j}") for j in (0, 1)]
        manifests = [simulate_command(cfg, out_dir=d) for d in dirs]
        names = [sorted(os.path.basename(p) for p in m["files"]) for m in manifests]
        if names[0] != names[1]:
            identical = False
            break
        for name in names[0]:
            compared += 1
            if not filecmp.cmp(os.path.join(dirs[0], name), os.path.join(dirs[1], name), shallow=False):
                identical = False
    detail = (
        f"{len(DETERMINISM_CONFIGS)} configs simulated twice; "
        f"{compared} output files compared, byte-identical: {identical}"
    )
    return _timed(8, "determinism", identical, detail, t0)


# ---------------------------------------------------------------- suites

CRITERIA = {
    1: criterion_1_oracle_identity,
    2: criterion_2_pathwise_decomposition,
    3: criterion_3_welfare_breakdown,
    4: criterion_4_binary_search,
    5: criterion_5_welfare_efficiency,
    6: criterion_6_certificate,
    7: criterion_7_firm_demo,
    8: criterion_8_determinism,
}

SUITES = {
    "oracle": (1,),
    "pathwise": (2,),
    "breakdown": (3,),
    "belgic": (4,),
    "welfare": (5,),
    "certificate": (6,),
    "firm": (7,),
    "determinism": (8,),
    "all": tuple(range(1, 9)),
}


def run_suite(name: str = "all", report=print) -> list[CriterionResult]:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; expected one of {sorted(SUITES)}")
    results = []
    for number in SUITES[name]:
        result = CRITERIA[number]()
        results.append(result)
        if report is not None:
            report(result.line())
    return results
