"""Run orchestration and CSV serialization.

All CSV output is schema-stable: fixed headers, '\\n' line endings, '.'
decimal points, floats at 17 significant digits so every value parses back
bit-identically. Identical config + seed means byte-identical files.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from .config import GameConfig, belgic_params, config_instance
from .downstream import (
    Belgic,
    BestResponseDownstream,
    NaiveContextUCB,
    OracleTransferDownstream,
    ZeroTransferDownstream,
)
from .engine import GameResult, run_no_property, run_property
from .env import BanditInstance, compute_oracle
from .upstream import BestResponseUpstream, IncentiveAwareUCB

WORKERS_ENV_VAR = "COASE_BANDITS_WORKERS"


def _fmt_float(x: float) -> str:
    return format(x, ".17g")


def _fmt_opt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return _fmt_float(x)
    return str(x)


@dataclass(frozen=True)
class RunSummary:
    """Flat, lossless record of one finished game."""

    mode: str
    seed: int
    horizon: int
    n_arms: int
    reward_model: str
    upstream_policy: str
    downstream_policy: str
    r_sw: float
    r_up_n: float
    r_down_n: float
    r_up_p: float
    r_down_p: float
    up_utility: float
    down_utility: float
    welfare: float
    decomposition_min_slack: float
    misaligned: bool
    phase1_rounds: int
    tau_hat: tuple[float, ...] | None
    a_sw: int
    b_sw: int
    welfare_star: float
    mu_star_up: float
    mu_star_down: float
    delta_up: float
    delta_sw: float
    breakdown_bound: float | None

    def to_row(self) -> list[str]:
        out = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "tau_hat":
                out.append("" if value is None else ";".join(_fmt_float(x) for x in value))
            elif isinstance(value, bool):
                out.append("yes" if value else "no")
            elif isinstance(value, float):
                out.append(_fmt_float(value))
            else:
                out.append(_fmt_opt(value))
        return out

    @classmethod
    def from_row(cls, row: list[str]) -> "RunSummary":
        names = [f.name for f in fields(cls)]
        if len(row) != len(names):
            raise ValueError(f"expected {len(names)} columns, got {len(row)}")
        raw = dict(zip(names, row))
        return cls(
            mode=raw["mode"],
            seed=int(raw["seed"]),
            horizon=int(raw["horizon"]),
            n_arms=int(raw["n_arms"]),
            reward_model=raw["reward_model"],
            upstream_policy=raw["upstream_policy"],
            downstream_policy=raw["downstream_policy"],
            r_sw=float(raw["r_sw"]),
            r_up_n=float(raw["r_up_n"]),
            r_down_n=float(raw["r_down_n"]),
            r_up_p=float(raw["r_up_p"]),
            r_down_p=float(raw["r_down_p"]),
            up_utility=float(raw["up_utility"]),
            down_utility=float(raw["down_utility"]),
            welfare=float(raw["welfare"]),
            decomposition_min_slack=float(raw["decomposition_min_slack"]),
            misaligned=raw["misaligned"] == "yes",
            phase1_rounds=int(raw["phase1_rounds"]),
            tau_hat=tuple(float(x) for x in raw["tau_hat"].split(";")) if raw["tau_hat"] else None,
            a_sw=int(raw["a_sw"]),
            b_sw=int(raw["b_sw"]),
            welfare_star=float(raw["welfare_star"]),
            mu_star_up=float(raw["mu_star_up"]),
            mu_star_down=float(raw["mu_star_down"]),
            delta_up=float(raw["delta_up"]),
            delta_sw=float(raw["delta_sw"]),
            breakdown_bound=float(raw["breakdown_bound"]) if raw["breakdown_bound"] else None,
        )


def summary_header() -> list[str]:
    return [f.name for f in fields(RunSummary)]


def build_upstream(cfg: GameConfig, instance: BanditInstance, horizon: int):
    if cfg.upstream_policy == "ucb":
        return IncentiveAwareUCB(instance.n_arms, horizon)
    return BestResponseUpstream(instance)


def build_downstream(cfg: GameConfig, instance: BanditInstance, horizon: int):
    if cfg.mode == "property":
        if cfg.downstream_policy == "belgic":
            return Belgic(belgic_params(cfg, horizon))
        if cfg.downstream_policy == "oracle":
            return OracleTransferDownstream(compute_oracle(instance))
        return ZeroTransferDownstream()
    if cfg.downstream_policy == "naive":
        return NaiveContextUCB(instance.n_arms, horizon)
    return BestResponseDownstream(instance)


def simulate_run(
    cfg: GameConfig, instance: BanditInstance, horizon: int, seed: int, record_trajectory=False
) -> GameResult:
    """One fresh game at (horizon, seed); policies never survive across runs."""
    upstream = build_upstream(cfg, instance, horizon)
    downstream = build_downstream(cfg, instance, horizon)
    if cfg.mode == "property":
        return run_property(instance, upstream, downstream, horizon, seed, record_trajectory)
    return run_no_property(instance, upstream, downstream, horizon, seed, record_trajectory)


def summarize(cfg: GameConfig, result: GameResult) -> RunSummary:
    led, oracle = result.ledger, result.oracle
    return RunSummary(
        mode=result.mode,
        seed=result.seed,
        horizon=result.horizon,
        n_arms=result.instance.n_arms,
        reward_model=result.instance.reward_model,
        upstream_policy=cfg.upstream_policy,
        downstream_policy=cfg.downstream_policy,
        r_sw=led.r_sw,
        r_up_n=led.r_up_n,
        r_down_n=led.r_down_n,
        r_up_p=led.r_up_p,
        r_down_p=led.r_down_p,
        up_utility=led.up_utility,
        down_utility=led.down_utility,
        welfare=led.welfare,
        decomposition_min_slack=led.decomposition_min_slack,
        misaligned=result.misaligned,
        phase1_rounds=result.phase1_rounds,
        tau_hat=result.tau_hat,
        a_sw=oracle.a_sw,
        b_sw=oracle.b_sw,
        welfare_star=oracle.welfare_star,
        mu_star_up=oracle.mu_star_up,
        mu_star_down=oracle.mu_star_down,
        delta_up=oracle.delta_up,
        delta_sw=oracle.delta_sw,
        breakdown_bound=result.breakdown_bound,
    )


def _write_csv(path: str, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _read_csv(path: str) -> tuple[list[str], list[list[str]]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ValueError(f"{path}: empty CSV, expected a header")
    header = lines[0].split(",")
    return header, [line.split(",") for line in lines[1:]]


def write_run_summaries(path: str, summaries: list[RunSummary]) -> None:
    _write_csv(path, summary_header(), [s.to_row() for s in summaries])


def read_run_summaries(path: str) -> list[RunSummary]:
    header, rows = _read_csv(path)
    if header != summary_header():
        raise ValueError(f"{path}: unexpected summary header {header}")
    return [RunSummary.from_row(row) for row in rows]


TRAJECTORY_HEADER = [
    "t", "phase", "offered_arm", "tau", "up_arm", "down_arm", "gap_sw", "gap_up", "gap_down",
]


def write_trajectory(path: str, records) -> None:
    rows = []
    for r in records:
        rows.append(
            [
                str(r.t),
                r.phase,
                _fmt_opt(r.offered_arm),
                _fmt_opt(r.tau),
                str(r.up_arm),
                str(r.down_arm),
                _fmt_float(r.gap_sw),
                _fmt_float(r.gap_up),
                _fmt_float(r.gap_down),
            ]
        )
    _write_csv(path, TRAJECTORY_HEADER, rows)


PHASE1_HEADER = ["arm", "batch_index", "tau_mid", "mismatches", "branch", "tau_lower", "tau_upper"]


def write_phase1_batches(path: str, batches) -> None:
    rows = [
        [
            str(b.arm),
            str(b.batch_index),
            _fmt_float(b.tau_mid),
            str(b.mismatches),
            b.branch,
            _fmt_float(b.tau_lower),
            _fmt_float(b.tau_upper),
        ]
        for b in batches
    ]
    _write_csv(path, PHASE1_HEADER, rows)


def simulate_command(cfg: GameConfig, out_dir: str | None = None) -> dict:
    """Run every seed of the config and write the output tree.

    Writes run_summary.csv, a canonical config echo, and per-seed trajectory
    and search-diagnostics files when enabled. Returns a manifest of paths.
    """
    from .config import serialize_config

    out = out_dir if out_dir is not None else cfg.output_dir
    os.makedirs(out, exist_ok=True)
    instance = config_instance(cfg)
    summaries, manifest = [], {"dir": out, "files": []}

    echo_path = os.path.join(out, "config_echo.cfg")
    with open(echo_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(serialize_config(cfg))
    manifest["files"].append(echo_path)

    for seed in cfg.seeds:
        record = cfg.trajectory == "full"
        result = simulate_run(cfg, instance, cfg.horizon, seed, record_trajectory=record)
        summaries.append(summarize(cfg, result))
        if record:
            path = os.path.join(out, f"trajectory_{seed}.csv")
            write_trajectory(path, result.records)
            manifest["files"].append(path)
        if result.phase1_batches:
            path = os.path.join(out, f"phase1_{seed}.csv")
            write_phase1_batches(path, result.phase1_batches)
            manifest["files"].append(path)

    summary_path = os.path.join(out, "run_summary.csv")
    write_run_summaries(summary_path, summaries)
    manifest["files"].append(summary_path)
    manifest["summaries"] = summaries
    return manifest


def worker_cap(requested: int | None = None) -> int:
    cap = os.environ.get(WORKERS_ENV_VAR)
    limit = int(cap) if cap else (os.cpu_count() or 1)
    if requested is not None:
        limit = min(limit, requested)
    return max(1, limit)


def _sweep_task(packed):
    cfg, horizon, seed = packed
    instance = config_instance(cfg)
    result = simulate_run(cfg, instance, horizon, seed)
    return horizon, seed, summarize(cfg, result)


@dataclass(frozen=True)
class SweepRow:
    """Per-horizon aggregate; r_up / r_down are the mode's own regrets
    (property: transfer-adjusted, no-property: unilateral)."""

    horizon: int
    n_seeds: int
    mean_r_sw: float
    sem_r_sw: float
    mean_r_sw_per_round: float
    sem_r_sw_per_round: float
    mean_r_up: float
    sem_r_up: float
    mean_r_up_per_round: float
    sem_r_up_per_round: float
    mean_r_down: float
    sem_r_down: float
    mean_r_down_per_round: float
    sem_r_down_per_round: float


SWEEP_HEADER = [f.name for f in fields(SweepRow)]


def _mean_sem(xs: list[float]) -> tuple[float, float]:
    arr = np.asarray(xs, dtype=float)
    mean = float(arr.mean())
    sem = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return mean, sem


def sweep(
    cfg: GameConfig, horizons: list[int], max_workers: int | None = None
) -> tuple[list[SweepRow], float, dict[tuple[int, int], RunSummary]]:
    """Run the config's seeds at each horizon; aggregate and fit the slope.

    Horizons are validated up front (each must pass the same checks as a
    single run at that horizon). Work is distributed over processes capped
    by the COASE_BANDITS_WORKERS environment variable; results are collected
    and sorted so output never depends on scheduling order.
    """
    from .config import validate_config
    from dataclasses import replace

    if not horizons:
        raise ValueError("need at least one horizon")
    if len(set(horizons)) != len(horizons):
        raise ValueError("horizons must be distinct")
    for horizon in horizons:
        validate_config(replace(cfg, horizon=horizon))

    tasks = [(cfg, horizon, seed) for horizon in sorted(horizons) for seed in cfg.seeds]
    workers = worker_cap(max_workers if max_workers is not None else len(tasks))
    results: dict[tuple[int, int], RunSummary] = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for horizon, seed, summary in pool.map(_sweep_task, tasks):
                results[(horizon, seed)] = summary
    else:
        for packed in tasks:
            horizon, seed, summary = _sweep_task(packed)
            results[(horizon, seed)] = summary

    rows = []
    for horizon in sorted(horizons):
        group = [results[(horizon, seed)] for seed in cfg.seeds]
        if cfg.mode == "property":
            ups = [s.r_up_p for s in group]
            downs = [s.r_down_p for s in group]
        else:
            ups = [s.r_up_n for s in group]
            downs = [s.r_down_n for s in group]
        stats = []
        for series in ([s.r_sw for s in group], ups, downs):
            stats.extend(_mean_sem(series))
            stats.extend(_mean_sem([x / horizon for x in series]))
        rows.append(SweepRow(horizon, len(group), *stats))

    slope = fit_loglog_slope([r.horizon for r in rows], [r.mean_r_sw for r in rows])
    return rows, slope, results


def fit_loglog_slope(horizons: list[int], values: list[float]) -> float:
    """Least-squares slope of ln(value) against ln(horizon); nan when any
    value is nonpositive (no log) or fewer than two points."""
    if len(horizons) < 2 or any(v <= 0.0 for v in values):
        return math.nan
    x = np.log(np.asarray(horizons, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def write_sweep_table(path: str, rows: list[SweepRow]) -> None:
    out = []
    for r in rows:
        out.append(
            [str(r.horizon), str(r.n_seeds)]
            + [_fmt_float(getattr(r, name)) for name in SWEEP_HEADER[2:]]
        )
    _write_csv(path, SWEEP_HEADER, out)


def read_sweep_table(path: str) -> list[SweepRow]:
    header, rows = _read_csv(path)
    if header != SWEEP_HEADER:
        raise ValueError(f"{path}: unexpected sweep header {header}")
    return [
        SweepRow(int(r[0]), int(r[1]), *(float(x) for x in r[2:])) for r in rows
    ]
