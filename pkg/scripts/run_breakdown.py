#!/usr/bin/env python3
"""Welfare breakdown without property rights.

Sweeps the misaligned baseline config over doubling horizons. The upstream
learner locks onto its privately best arm, so per-round welfare regret does
not decay: it climbs toward the instance's welfare gap delta_sw while the
upstream's own per-round regret goes to zero. Writes the aggregate table
into the config's output directory.
"""

import argparse
import os

from coase_bandits.config import config_instance, parse_config_file
from coase_bandits.env import compute_oracle
from coase_bandits.runner import sweep, write_sweep_table

HERE = os.path.dirname(os.path.abspath(__file__))
DEFAULT_CONFIG = os.path.join(HERE, "..", "configs", "breakdown.cfg")
DEFAULT_HORIZONS = [2**10, 2**12, 2**14]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=DEFAULT_CONFIG)
    parser.add_argument("--horizons", type=int, nargs="+", default=DEFAULT_HORIZONS)
    parser.add_argument("--workers", type=int, default=None)
    args = parser.parse_args()

    cfg = parse_config_file(args.config)
    oracle = compute_oracle(config_instance(cfg))
    print(f"welfare gap delta_sw = {oracle.delta_sw!r}")
    print(f"upstream gap delta_up = {oracle.delta_up!r}")
    print(f"seeds per horizon: {len(cfg.seeds)}")

    rows, slope, _ = sweep(cfg, args.horizons, max_workers=args.workers)
    print(f"{'T':>8}  {'mean r_sw/T':>12}  {'sem':>10}  {'mean r_up/T':>12}")
    for row in rows:
        print(
            f"{row.horizon:>8}  {row.mean_r_sw_per_round:>12.5f}"
            f"  {row.sem_r_sw_per_round:>10.5f}  {row.mean_r_up_per_round:>12.5f}"
        )
    print(f"log-log slope of mean r_sw vs T: {slope:.3f} (1.0 = linear growth)")

    os.makedirs(cfg.output_dir, exist_ok=True)
    out = os.path.join(cfg.output_dir, "breakdown_sweep.csv")
    write_sweep_table(out, rows)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
