"""Run orchestration: summaries, CSV fidelity, sweeps, and worker caps."""

import math
import os

import pytest

from coase_bandits.config import ConfigError, GameConfig, parse_config_file
from coase_bandits.runner import (
    RunSummary,
    SweepRow,
    fit_loglog_slope,
    read_run_summaries,
    read_sweep_table,
    simulate_command,
    simulate_run,
    summarize,
    summary_header,
    sweep,
    worker_cap,
    write_run_summaries,
    write_sweep_table,
    write_trajectory,
)

DYADIC_NO_PROPERTY = GameConfig(
    mode="no-property",
    n_arms=2,
    horizon=64,
    seeds=(0, 1),
    v_up=(1.0, 0.5),
    v_down=((0.0, 0.0), (0.75, 0.0)),
    upstream_policy="best_response",
    downstream_policy="best_response",
)

BREAKDOWN_CFG = GameConfig(
    mode="no-property",
    n_arms=2,
    horizon=16384,
    seeds=(0, 1, 2),
    v_up=(1.0, 0.3),
    v_down=((0.0, 0.0), (0.9, 0.85)),
    downstream_policy="naive",
)

PROPERTY_CFG = GameConfig(
    mode="property",
    n_arms=2,
    horizon=4096,
    seeds=(7,),
    v_up=(0.9, 0.5),
    v_down=((0.2, 0.1), (0.8, 0.3)),
    c_mode="fixed:1.0",
    downstream_policy="belgic",
)


def sample_summary(**overrides):
    base = dict(
        mode="property",
        seed=3,
        horizon=4096,
        n_arms=2,
        reward_model="gaussian",
        upstream_policy="ucb",
        downstream_policy="belgic",
        r_sw=12.25,
        r_up_n=0.0,
        r_down_n=0.0,
        r_up_p=3.0 + 1e-13,
        r_down_p=-0.75,
        up_utility=4000.123456789012345,
        down_utility=812.0,
        welfare=4812.123456789012345,
        decomposition_min_slack=math.inf,
        misaligned=True,
        phase1_rounds=3072,
        tau_hat=(0.59375, 0.78125),
        a_sw=1,
        b_sw=0,
        welfare_star=1.3,
        mu_star_up=0.9,
        mu_star_down=0.4,
        delta_up=0.4,
        delta_sw=0.2,
        breakdown_bound=None,
    )
    base.update(overrides)
    return RunSummary(**base)


class TestRunSummaryRow:
    def test_round_trip_is_lossless(self):
        s = sample_summary()
        assert RunSummary.from_row(s.to_row()) == s

    def test_round_trip_without_tau_hat(self):
        s = sample_summary(tau_hat=None, breakdown_bound=204.79999999999973)
        assert RunSummary.from_row(s.to_row()) == s

    def test_awkward_floats_survive_17g(self):
        s = sample_summary(r_sw=0.1 + 0.2, r_down_p=-1.0 / 3.0, welfare=1e-17)
        back = RunSummary.from_row(s.to_row())
        assert back.r_sw == 0.1 + 0.2
        assert back.r_down_p == -1.0 / 3.0
        assert back.welfare == 1e-17

    def test_infinity_survives(self):
        s = sample_summary(delta_up=math.inf)
        assert RunSummary.from_row(s.to_row()).delta_up == math.inf

    def test_wrong_column_count_rejected(self):
        with pytest.raises(ValueError, match="columns"):
            RunSummary.from_row(["property", "3"])


class TestSummaryFiles:
    def test_write_read_round_trip(self, tmp_path):
        path = str(tmp_path / "run_summary.csv")
        rows = [sample_summary(seed=s) for s in (0, 1, 2)]
        write_run_summaries(path, rows)
        assert read_run_summaries(path) == rows

    def test_file_has_unix_endings_and_header(self, tmp_path):
        path = str(tmp_path / "run_summary.csv")
        write_run_summaries(path, [sample_summary()])
        with open(path, "rb") as fh:
            blob = fh.read()
        assert b"\r" not in blob
        assert blob.endswith(b"\n")
        assert blob.split(b"\n")[0].decode() == ",".join(summary_header())

    def test_tampered_header_rejected(self, tmp_path):
        path = str(tmp_path / "run_summary.csv")
        write_run_summaries(path, [sample_summary()])
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        lines[0] = lines[0].replace("r_sw", "regret")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        with pytest.raises(ValueError, match="header"):
            read_run_summaries(path)

    def test_missing_trailing_newline_tolerated(self, tmp_path):
        path = str(tmp_path / "run_summary.csv")
        write_run_summaries(path, [sample_summary()])
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text.rstrip("\n"))
        assert len(read_run_summaries(path)) == 1

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("", encoding="utf-8")
        with pytest.raises(ValueError, match="empty CSV"):
            read_run_summaries(str(path))


class TestTrajectoryFiles:
    def test_trajectory_schema_and_values(self, tmp_path):
        from coase_bandits.config import config_instance

        inst = config_instance(DYADIC_NO_PROPERTY)
        result = simulate_run(DYADIC_NO_PROPERTY, inst, 8, 0, record_trajectory=True)
        path = str(tmp_path / "trajectory_0.csv")
        write_trajectory(path, result.records)
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        assert lines[0] == "t,phase,offered_arm,tau,up_arm,down_arm,gap_sw,gap_up,gap_down"
        assert len(lines) == 9
        first = lines[1].split(",")
        assert first[0] == "1"
        assert first[1] == "-"
        assert first[2] == "" and first[3] == ""  # no offer in this mode
        assert float(first[6]) == 0.25


class TestSimulateCommand:
    def test_no_property_outputs(self, tmp_path):
        out = str(tmp_path / "runs")
        cfg = GameConfig(
            mode="no-property",
            n_arms=2,
            horizon=64,
            seeds=(0, 1),
            v_up=(1.0, 0.5),
            v_down=((0.0, 0.0), (0.75, 0.0)),
            upstream_policy="best_response",
            downstream_policy="best_response",
            trajectory="full",
        )
        manifest = simulate_command(cfg, out_dir=out)
        for path in manifest["files"]:
            assert os.path.exists(path)
        names = {os.path.basename(p) for p in manifest["files"]}
        assert names == {"config_echo.cfg", "trajectory_0.csv", "trajectory_1.csv", "run_summary.csv"}

        summaries = read_run_summaries(os.path.join(out, "run_summary.csv"))
        assert [s.seed for s in summaries] == [0, 1]
        assert all(s.r_sw == 16.0 for s in summaries)  # 64 rounds x exact 0.25

        assert parse_config_file(os.path.join(out, "config_echo.cfg")) == cfg

    def test_property_run_writes_search_diagnostics(self, tmp_path):
        out = str(tmp_path / "runs")
        manifest = simulate_command(PROPERTY_CFG, out_dir=out)
        names = {os.path.basename(p) for p in manifest["files"]}
        assert "phase1_7.csv" in names
        assert "trajectory_7.csv" not in names  # trajectory defaults to none
        summary = manifest["summaries"][0]
        # whole batches only; early returns may shorten the search
        assert 0 < summary.phase1_rounds <= 3072
        assert summary.phase1_rounds % 512 == 0
        assert summary.tau_hat is not None

    def test_rerun_is_byte_identical(self, tmp_path):
        import filecmp

        out_a = str(tmp_path / "a")
        out_b = str(tmp_path / "b")
        simulate_command(PROPERTY_CFG, out_dir=out_a)
        simulate_command(PROPERTY_CFG, out_dir=out_b)
        for name in os.listdir(out_a):
            assert filecmp.cmp(os.path.join(out_a, name), os.path.join(out_b, name), shallow=False)


class TestWorkerCap:
    def test_env_variable_caps(self, monkeypatch):
        monkeypatch.setenv("COASE_BANDITS_WORKERS", "2")
        assert worker_cap() == 2
        assert worker_cap(8) == 2
        assert worker_cap(1) == 1

    def test_without_env_uses_cpu_count(self, monkeypatch):
        monkeypatch.delenv("COASE_BANDITS_WORKERS", raising=False)
        assert worker_cap() >= 1
        assert worker_cap(1) == 1

    def test_floor_is_one(self, monkeypatch):
        monkeypatch.setenv("COASE_BANDITS_WORKERS", "0")
        assert worker_cap() == 1


class TestSweep:
    def test_exact_rates_on_deterministic_doubles(self):
        rows, slope, results = sweep(DYADIC_NO_PROPERTY, [64, 128], max_workers=1)
        assert [r.horizon for r in rows] == [64, 128]
        for row in rows:
            assert row.n_seeds == 2
            assert row.mean_r_sw == 0.25 * row.horizon
            assert row.sem_r_sw == 0.0
            assert row.mean_r_sw_per_round == 0.25
            assert row.mean_r_up == 0.0 and row.mean_r_down == 0.0
        assert slope == pytest.approx(1.0, abs=1e-12)
        assert set(results) == {(64, 0), (64, 1), (128, 0), (128, 1)}

    def test_parallel_matches_serial(self, monkeypatch):
        monkeypatch.setenv("COASE_BANDITS_WORKERS", "2")
        parallel = sweep(DYADIC_NO_PROPERTY, [64, 128])
        monkeypatch.setenv("COASE_BANDITS_WORKERS", "1")
        serial = sweep(DYADIC_NO_PROPERTY, [64, 128])
        assert parallel[0] == serial[0]
        assert parallel[2] == serial[2]

    def test_unsorted_horizons_are_sorted(self):
        rows, _, _ = sweep(DYADIC_NO_PROPERTY, [128, 64], max_workers=1)
        assert [r.horizon for r in rows] == [64, 128]

    def test_duplicate_horizons_rejected(self):
        with pytest.raises(ValueError, match="distinct"):
            sweep(DYADIC_NO_PROPERTY, [64, 64], max_workers=1)

    def test_empty_horizons_rejected(self):
        with pytest.raises(ValueError, match="at least one"):
            sweep(DYADIC_NO_PROPERTY, [], max_workers=1)

    def test_each_horizon_validated(self):
        # belgic cannot fit its search phase at the small horizon
        with pytest.raises(ConfigError, match="invalid search parameters"):
            sweep(PROPERTY_CFG, [64, 4096], max_workers=1)

    def test_misaligned_baseline_rate_approaches_welfare_gap(self):
        # path-wise: the per-round welfare regret is capped by delta_sw here
        # and the breakdown floor keeps it within a whisker of the cap
        rows, _, _ = sweep(BREAKDOWN_CFG, [16384], max_workers=1)
        rate = rows[0].mean_r_sw_per_round
        assert 0.19 <= rate <= 0.2 + 1e-12

    def test_property_welfare_regret_decays_sublinearly(self):
        cfg = GameConfig(
            mode="property",
            n_arms=2,
            horizon=1024,
            seeds=(0, 1, 2, 3, 4),
            v_up=(0.5, 0.9),
            v_down=((0.9, 0.0), (0.49, 0.0)),
            alpha=0.5,
            beta=0.2,
            c_mode="fixed:0.5",
            downstream_policy="belgic",
        )
        rows, slope, _ = sweep(cfg, [2**10, 2**12, 2**14])
        rates = [r.mean_r_sw_per_round for r in rows]
        assert rates[0] > rates[1] > rates[2]
        assert slope <= 0.9


class TestSweepFiles:
    def test_write_read_round_trip(self, tmp_path):
        rows, _, _ = sweep(DYADIC_NO_PROPERTY, [64, 128], max_workers=1)
        path = str(tmp_path / "sweep.csv")
        write_sweep_table(path, rows)
        assert read_sweep_table(path) == rows

    def test_header_checked(self, tmp_path):
        path = tmp_path / "sweep.csv"
        path.write_text("wrong,header\n1,2\n", encoding="utf-8")
        with pytest.raises(ValueError, match="header"):
            read_sweep_table(str(path))


class TestSlopeFit:
    def test_recovers_power_law(self):
        horizons = [256, 1024, 4096, 16384]
        values = [t**0.75 for t in horizons]
        assert fit_loglog_slope(horizons, values) == pytest.approx(0.75, rel=1e-9)

    def test_nan_on_nonpositive_values(self):
        assert math.isnan(fit_loglog_slope([10, 100], [5.0, 0.0]))

    def test_nan_on_single_point(self):
        assert math.isnan(fit_loglog_slope([10], [5.0]))


class TestSummarize:
    def test_summary_reflects_run(self):
        from coase_bandits.config import config_instance

        inst = config_instance(BREAKDOWN_CFG)
        result = simulate_run(BREAKDOWN_CFG, inst, 1024, 0)
        s = summarize(BREAKDOWN_CFG, result)
        assert s.mode == "no-property"
        assert s.seed == 0
        assert s.horizon == 1024
        assert s.misaligned
        assert s.r_sw == result.ledger.r_sw
        assert s.breakdown_bound == result.breakdown_bound
        assert s.tau_hat is None
