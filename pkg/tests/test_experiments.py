"""Tests for configuration loading, runs, sweeps, heatmaps and audits."""

import tempfile
import unittest
import warnings
from pathlib import Path

import numpy as np
import pandas as pd

from retri_schedules.cost_model import cost_from_metrics
from retri_schedules.experiments import (
    BUNDLED_CONFIGS,
    SWEEP_COLUMNS,
    BaselineConfig,
    ConfigError,
    ExperimentConfig,
    GridMismatchError,
    audit_reconfiguration_plans,
    cell_cost,
    emit_comparison,
    emit_heatmap,
    format_bytes,
    format_duration,
    format_duration_ns,
    load_config,
    parse_baseline,
    parse_baselines,
    parse_bytes,
    parse_duration,
    parse_duration_ns,
    parse_rate,
    read_sweep,
    render_comparison_text,
    render_heatmap_text,
    run_comparison,
    run_single,
    run_sweep,
    sweep_csv,
    verify_invariants,
    write_comparison,
    write_heatmap,
    write_sweep,
)
from retri_schedules.optimizer import balanced_segments, plan_from_segments
from retri_schedules.propagation import execute
from retri_schedules.schedules import Algorithm, retri_schedule

MB = 2**20


def write_config(tmp, text):
    path = Path(tmp) / "experiment.cfg"
    path.write_text(text)
    return path


class UnitsTest(unittest.TestCase):
    def test_bytes(self):
        self.assertEqual(parse_bytes("256MB"), 256 * MB)
        self.assertEqual(parse_bytes("1KB"), 1024)
        self.assertEqual(parse_bytes("81"), 81)
        with self.assertRaises(ValueError):
            parse_bytes("1.5B")
        with self.assertRaises(ValueError):
            parse_bytes("3 parsecs")

    def test_durations(self):
        self.assertEqual(parse_duration_ns("1.7us"), 1700)
        self.assertEqual(parse_duration_ns("50ms"), 50_000_000)
        self.assertEqual(parse_duration_ns("0.5"), 500_000_000)
        self.assertEqual(parse_duration("1us"), 1e-6)
        with self.assertRaises(ValueError):
            parse_duration_ns("0.5ns")

    def test_rate(self):
        self.assertEqual(parse_rate("400Gbps"), 400e9)
        self.assertEqual(parse_rate("100"), 100.0)

    def test_formatting(self):
        self.assertEqual(format_bytes(256 * MB), "256MB")
        self.assertEqual(format_bytes(1000), "1000B")
        self.assertEqual(format_duration(1.7e-6), "1700ns")
        self.assertEqual(format_duration(0.05), "50ms")

    def test_baseline(self):
        baseline = parse_baseline("bruck:64")
        self.assertIs(baseline.algorithm, Algorithm.BRUCK_MIRRORED)
        self.assertEqual(baseline.n, 64)
        self.assertEqual(baseline.reconfigs, "auto")
        self.assertEqual(parse_baseline("retri:27:1").reconfigs, 1)
        self.assertIsNone(parse_baseline("none"))
        with self.assertRaises(ValueError):
            parse_baseline("direct")

    def test_baselines(self):
        baselines = parse_baselines("bruck:8, direct:8")
        self.assertEqual([b.algorithm for b in baselines], [Algorithm.BRUCK_MIRRORED, Algorithm.DIRECT])
        self.assertEqual(parse_baselines("none"), [])
        with self.assertRaises(ValueError):
            parse_baselines("bruck:8, direct")

    def test_format_duration_ns(self):
        self.assertEqual(format_duration_ns(150_000_000), "150ms")
        self.assertEqual(format_duration_ns(1700), "1700ns")
        self.assertEqual(format_duration_ns(parse_duration_ns("1.7us")), "1700ns")


class LoadConfigTest(unittest.TestCase):
    def test_bundled_evaluation_grid(self):
        config = load_config()
        self.assertIs(config.algorithm, Algorithm.RETRI)
        self.assertEqual(config.n, 81)
        self.assertEqual(len(config.message_bytes), 9)
        self.assertEqual(config.message_bytes[-1], 256 * MB)
        self.assertEqual(len(config.delta_seconds), 6)
        self.assertEqual(config.alpha_s, 1.7e-6)
        self.assertEqual(config.alpha_h, 1e-6)
        self.assertEqual(config.bandwidth_bits_per_s, 400e9)
        self.assertEqual(config.baseline, BaselineConfig(algorithm="direct", n=64))

    def test_durations_kept_as_integer_ns(self):
        config = load_config()
        self.assertEqual(config.alpha_s_ns, 1700)
        self.assertEqual(config.alpha_h_ns, 1000)
        self.assertIn(50_000_000, config.delta_ns)
        self.assertTrue(all(isinstance(d, int) for d in config.delta_ns))
        self.assertEqual(config.delta_seconds[-1], 0.05)
        self.assertEqual(config.params(1e-3).alpha_s, 1.7e-6)

    def test_bundled_grids_by_name(self):
        for name in BUNDLED_CONFIGS:
            self.assertIs(load_config(name).algorithm, Algorithm.RETRI, name)
        self.assertEqual(load_config("evaluation_grid"), load_config())
        self.assertEqual(load_config("bruck_grid").baseline, BaselineConfig(algorithm="bruck", n=64))

        small = load_config("small_ring_grid")
        self.assertEqual(small.n, 9)
        self.assertEqual([str(b) for b in small.comparison], ["bruck_mirrored:8:auto", "direct:8:auto"])
        self.assertEqual(small.delta_ns[-1], 150_000_000)

        large = load_config("large_ring_grid")
        self.assertEqual(large.n, 243)
        self.assertTrue(large.normalize_per_node)
        self.assertEqual([b.n for b in large.comparison], [256, 256])
        self.assertEqual(large.delta_ns[-1], 150_000_000)

    def test_compare_override(self):
        config = load_config(overrides={"compare": "bruck:64,direct:64"})
        self.assertEqual(len(config.comparison), 2)
        self.assertEqual(load_config(overrides={"compare": "none"}).comparison, [])

    def test_overrides(self):
        config = load_config(overrides={"n": "27", "delta": "1ms, 2ms", "baseline": "none", "reconfigs": None})
        self.assertEqual(config.n, 27)
        self.assertEqual(config.delta_seconds, [1e-3, 2e-3])
        self.assertIsNone(config.baseline)
        self.assertEqual(config.reconfigs, "auto")

    def test_unknown_key(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_config(tmp, "n = 9\nspeed = fast\n")
            with self.assertRaises(ConfigError) as ctx:
                load_config(path)
        self.assertEqual(ctx.exception.field, "speed")
        self.assertEqual(ctx.exception.line, 2)

    def test_bad_value(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_config(tmp, "# grid\n\ndelta = 1us, soon\n")
            with self.assertRaises(ConfigError) as ctx:
                load_config(path)
        self.assertEqual(ctx.exception.field, "delta")
        self.assertEqual(ctx.exception.line, 3)

    def test_validation_error_names_line(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_config(tmp, "algorithm = retri\nn = 1\n")
            with self.assertRaises(ConfigError) as ctx:
                load_config(path)
        self.assertEqual(ctx.exception.field, "n")
        self.assertEqual(ctx.exception.line, 2)

    def test_override_error_has_no_line(self):
        with self.assertRaises(ConfigError) as ctx:
            load_config(overrides={"algorithm": "ring"})
        self.assertEqual(ctx.exception.field, "algorithm")
        self.assertIsNone(ctx.exception.line)

    def test_duplicate_key(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_config(tmp, "n = 9\nn = 27\n")
            with self.assertRaises(ConfigError) as ctx:
                load_config(path)
        self.assertEqual(ctx.exception.line, 2)

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            load_config("/nonexistent/experiment.cfg")

    def test_echo_round_trip(self):
        overrides = {"baseline": "bruck:64:auto", "normalize_per_node": "true", "compare": "bruck:64, direct:64"}
        config = load_config(overrides=overrides)
        with tempfile.TemporaryDirectory() as tmp:
            path = write_config(tmp, "\n".join(config.echo_lines()) + "\n")
            self.assertEqual(load_config(path), config)


class RunSingleTest(unittest.TestCase):
    def test_retri_end_to_end(self):
        config = ExperimentConfig(n=81, message_bytes=[81 * 12], baseline=BaselineConfig(algorithm="direct", n=64))
        report = run_single(config)
        self.assertTrue(report.ok)
        self.assertTrue(report.delivery.ok)
        self.assertEqual(report.n, 81)
        self.assertEqual(len(report.metrics), 4)
        self.assertLess(report.crosscheck_error, 1e-9)
        self.assertEqual(report.R, report.plan.R)
        self.assertGreater(report.speedup, 1.0)

    def test_non_divisible_message_crosschecks(self):
        config = ExperimentConfig(n=81, message_bytes=[1024])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            report = run_single(config)
        self.assertTrue(report.delivery.ok)
        self.assertLess(report.crosscheck_error, 1e-9)
        self.assertIsNone(report.speedup)

    def test_non_divisible_sweep_total_matches_execution(self):
        # 13-byte blocks: 351 bytes per direction and phase, R* = 3 at 1us
        config = ExperimentConfig(n=81, message_bytes=[1024], delta_ns=[1000])
        row = run_sweep(config).iloc[0]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            schedule = retri_schedule(81, 1024)
        R = int(row["R"])
        _, metrics = execute(schedule, plan_from_segments(balanced_segments(4, R)))
        simulated = cost_from_metrics(metrics, config.params(), R)
        self.assertEqual(R, 3)
        self.assertAlmostEqual(row["total"] / simulated.total, 1.0, places=12)
        self.assertAlmostEqual(row["total"] / 1.382808e-05, 1.0, places=9)

    def test_odd_bruck_blocks_crosscheck(self):
        config = ExperimentConfig(algorithm="bruck", n=8, message_bytes=[24], delta_ns=[1000])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            report = run_single(config)
        self.assertTrue(report.delivery.ok)
        self.assertLess(report.crosscheck_error, 1e-9)

    def test_direct(self):
        report = run_single(ExperimentConfig(algorithm="direct", n=64, message_bytes=[64 * 16]))
        self.assertEqual(report.R, 0)
        self.assertEqual(len(report.metrics), 1)
        self.assertTrue(report.ok)

    def test_padding(self):
        report = run_single(ExperimentConfig(n=10, message_bytes=[100]))
        self.assertTrue(report.padded)
        self.assertEqual(report.n, 27)
        self.assertEqual(report.n_requested, 10)
        self.assertIsNone(report.crosscheck_error)
        self.assertTrue(report.delivery.ok)

    def test_bruck_extrapolation_flag(self):
        config = ExperimentConfig(algorithm="bruck", n=64, message_bytes=[64 * 4], reconfigs=2)
        report = run_single(config)
        self.assertTrue(report.extrapolated)
        self.assertTrue(report.ok)

    def test_fixed_reconfigs_out_of_range(self):
        with self.assertRaises(ConfigError):
            run_single(ExperimentConfig(n=9, message_bytes=[9], reconfigs=2))

    def test_schedule_export(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "schedule.csv"
            run_single(ExperimentConfig(n=9, message_bytes=[9]), schedule_path=path)
            self.assertTrue(path.read_text().startswith("# retri-schedules schedule v1"))


class SweepTest(unittest.TestCase):
    def test_evaluation_grid(self):
        config = load_config()
        frame = run_sweep(config)
        self.assertEqual(len(frame), 54)
        self.assertEqual(list(frame.columns), SWEEP_COLUMNS)
        self.assertEqual(frame["m_bytes"].iloc[:6].tolist(), [1024] * 6)
        self.assertEqual(frame["delta"].iloc[:6].tolist(), config.delta_seconds)

    def test_single_cell_matches_run_single(self):
        config = ExperimentConfig(
            n=27, message_bytes=[27 * 30], delta_ns=[100_000], baseline=BaselineConfig(algorithm="bruck", n=32)
        )
        frame = run_sweep(config)
        self.assertEqual(len(frame), 1)
        self.assertEqual(frame.iloc[0].to_dict(), run_single(config).row())

    def test_deterministic(self):
        config = load_config()
        first = sweep_csv(run_sweep(config), config)
        self.assertEqual(first, sweep_csv(run_sweep(config), config))
        self.assertEqual(first, sweep_csv(run_sweep(config, n_jobs=2), config))

    def test_written_header_echoes_config(self):
        config = load_config()
        with tempfile.TemporaryDirectory() as tmp:
            path = write_sweep(run_sweep(config), config, Path(tmp) / "sweep.csv")
            lines = path.read_text().splitlines()
            self.assertIn("# alpha_s = 1700ns", lines)
            self.assertIn("# baseline = direct:64:auto", lines)
            self.assertEqual(len(read_sweep(path)), 54)

    def test_speedup_non_increasing_in_delta(self):
        frame = run_sweep(load_config())
        grid = frame.pivot(index="m_bytes", columns="delta", values="speedup_vs_baseline")
        self.assertTrue((np.diff(grid.to_numpy(), axis=1) <= 1e-12).all())


class AcceptanceTrendTest(unittest.TestCase):
    def setUp(self):
        self.config = load_config()

    def test_against_static_ring(self):
        params = self.config.params(1e-6)
        retri = cell_cost("retri", 81, "auto", 256 * MB, params)
        direct = cell_cost("direct", 64, "auto", 256 * MB, params)
        speedup = direct.cost.total / retri.cost.total
        self.assertTrue(4 <= speedup <= 12, speedup)
        self.assertAlmostEqual(speedup, 6.18, places=2)

    def test_against_mirrored_bruck(self):
        params = self.config.params(1e-6)
        for m in (MB, 8 * MB, 64 * MB, 256 * MB):
            retri = cell_cost("retri", 81, "auto", m, params)
            bruck = cell_cost("bruck", 64, "auto", m, params)
            speedup = bruck.cost.total / retri.cost.total
            self.assertTrue(1.05 <= speedup <= 2.5, (m, speedup))

    def test_large_delta_normalized(self):
        config = ExperimentConfig(
            n=243,
            message_bytes=[256 * MB],
            delta_ns=[50_000_000, 150_000_000],
            baseline=BaselineConfig(algorithm="direct", n=256),
            normalize_per_node=True,
        )
        frame = run_sweep(config)
        at_50ms, at_150ms = frame["speedup_vs_baseline"].tolist()
        self.assertGreater(at_50ms, 1.0)
        self.assertGreaterEqual(at_150ms, 0.85)
        self.assertEqual(frame["R"].tolist(), [1, 1])


class HeatmapTest(unittest.TestCase):
    def setUp(self):
        self.config = load_config()
        self.sweep = run_sweep(self.config)
        baseline_config = self.config.model_copy(update={"algorithm": Algorithm.DIRECT, "n": 64, "baseline": None})
        self.baseline = run_sweep(baseline_config)

    def test_against_itself(self):
        speedups, reconfigs = emit_heatmap(self.sweep, self.sweep)
        self.assertEqual(speedups.shape, (9, 6))
        self.assertTrue((speedups == 1.0).all().all())
        self.assertEqual(reconfigs.shape, (9, 6))

    def test_matches_sweep_speedups(self):
        speedups, _ = emit_heatmap(self.sweep, self.baseline)
        expected = self.sweep.pivot(index="m_bytes", columns="delta", values="speedup_vs_baseline")
        np.testing.assert_allclose(speedups.to_numpy(), expected.to_numpy(), rtol=1e-12)
        self.assertTrue(4 <= speedups.loc[256 * MB, 1e-6] <= 12)

    def test_grid_mismatch(self):
        with self.assertRaises(GridMismatchError):
            emit_heatmap(self.sweep, self.baseline.iloc[:-1])

    def test_files(self):
        speedups, reconfigs = emit_heatmap(self.sweep, self.baseline)
        with tempfile.TemporaryDirectory() as tmp:
            sweep_path = write_sweep(self.sweep, self.config, Path(tmp) / "sweep.csv")
            baseline_path = write_sweep(self.baseline, self.config, Path(tmp) / "baseline.csv")
            from_files, _ = emit_heatmap(sweep_path, baseline_path)
            np.testing.assert_allclose(from_files.to_numpy(), speedups.to_numpy(), rtol=1e-12)

            path, sidecar = write_heatmap(speedups, reconfigs, Path(tmp) / "heatmap.csv")
            self.assertEqual(sidecar.name, "heatmap_R.csv")
            matrix = pd.read_csv(path, index_col=0)
            self.assertEqual(matrix.shape, (9, 6))
            cell = path.read_text().splitlines()[1].split(",")[1]
            self.assertRegex(cell, r"^\d+\.\d\d$")
            self.assertEqual(pd.read_csv(sidecar, index_col=0).shape, (9, 6))

    def test_text_rendering(self):
        speedups, reconfigs = emit_heatmap(self.sweep, self.baseline)
        text = render_heatmap_text(speedups, reconfigs)
        self.assertIn("256MB", text)
        self.assertIn("50ms", text)
        self.assertIn("(R=", text)


class ComparisonTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.config = load_config("small_ring_grid")
        cls.sweep = run_sweep(cls.config)
        cls.baselines = [
            run_sweep(cls.config.model_copy(update={"algorithm": b.algorithm, "n": b.n, "baseline": None}))
            for b in cls.config.comparison
        ]
        cls.comparison = emit_comparison(cls.sweep, cls.baselines)

    def test_per_baseline_matrices(self):
        self.assertEqual(self.comparison.labels, ["bruck_mirrored:8", "direct:8"])
        for label, baseline in zip(self.comparison.labels, self.baselines):
            speedups, reconfigs = emit_heatmap(self.sweep, baseline)
            np.testing.assert_allclose(self.comparison.speedups[label].to_numpy(), speedups.to_numpy())
            self.assertTrue(self.comparison.reconfigs.equals(reconfigs))
        self.assertEqual(self.comparison.best.shape, (9, 7))

    def test_best_is_the_stronger_baseline(self):
        best = self.comparison.best
        # Bruck wins large messages at small delays, the static ring small messages
        # and large delays
        self.assertEqual(best.loc[256 * MB, 1e-6], "bruck_mirrored:8")
        self.assertEqual(best.loc[256 * MB, 0.15], "direct:8")
        self.assertEqual(best.loc[1024, 1e-6], "direct:8")

        lowest = self.comparison.best_speedups()
        for m in best.index:
            for delta in best.columns:
                winner = self.comparison.speedups[best.loc[m, delta]].loc[m, delta]
                self.assertEqual(lowest.loc[m, delta], winner)
                for speedups in self.comparison.speedups.values():
                    self.assertLessEqual(winner, speedups.loc[m, delta])

    def test_matches_run_comparison(self):
        from_config = run_comparison(self.config)
        self.assertTrue(from_config.best.equals(self.comparison.best))
        np.testing.assert_allclose(
            from_config.best_speedups().to_numpy(), self.comparison.best_speedups().to_numpy()
        )

    def test_written_table(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_comparison(self.comparison, Path(tmp) / "comparison.csv")
            table = pd.read_csv(path)
        self.assertEqual(
            list(table.columns),
            ["m_bytes", "delta", "R", "speedup_bruck_mirrored:8", "speedup_direct:8", "best"],
        )
        self.assertEqual(len(table), 63)
        row = table[(table["m_bytes"] == 256 * MB) & (table["delta"] == 1e-6)].iloc[0]
        self.assertEqual(row["best"], "bruck_mirrored:8")
        self.assertLess(row["speedup_bruck_mirrored:8"], row["speedup_direct:8"])

    def test_text_rendering(self):
        text = render_comparison_text(self.comparison)
        self.assertIn("* stronger baseline; B = bruck_mirrored:8, S = direct:8", text)
        self.assertRegex(text, r"B \d+\.\d\d\* S \d+\.\d\d \(R=\d\)")
        self.assertIn("150ms", text)

    def test_same_algorithm_keeps_full_labels(self):
        other = run_sweep(self.config.model_copy(update={"algorithm": Algorithm.BRUCK_MIRRORED, "n": 16}))
        comparison = emit_comparison(self.sweep, [self.baselines[0], other], normalize_per_node=True)
        labels = ["bruck_mirrored:8", "bruck_mirrored:16"]
        self.assertEqual(comparison.tags(), dict(zip(labels, labels)))

    def test_rejected_inputs(self):
        with self.assertRaises(ValueError):
            emit_comparison(self.sweep, [])
        with self.assertRaises(GridMismatchError):
            emit_comparison(self.sweep, [self.baselines[0], self.baselines[0]])
        with self.assertRaises(GridMismatchError):
            emit_comparison(self.sweep, [self.baselines[1].iloc[:-1]])
        with self.assertRaises(ConfigError):
            run_comparison(load_config())


class BundledGridTest(unittest.TestCase):
    def test_bruck_grid(self):
        frame = run_sweep(load_config("bruck_grid"))
        at_1us = frame[(frame["delta"] == 1e-6) & (frame["m_bytes"] >= MB)]
        self.assertEqual(len(at_1us), 4)
        self.assertTrue(at_1us["speedup_vs_baseline"].between(1.05, 2.5).all())

    def test_large_ring_grid(self):
        comparison = run_comparison(load_config("large_ring_grid"))
        self.assertEqual(comparison.best.shape, (9, 7))
        self.assertGreater(comparison.speedups["direct:256"].loc[256 * MB, 0.05], 1.0)
        self.assertEqual(comparison.reconfigs.loc[256 * MB, 0.15], 1)


class AuditAndVerifyTest(unittest.TestCase):
    def test_plan_audit_over_grid(self):
        audit = audit_reconfiguration_plans(load_config())
        self.assertEqual(len(audit), 54)
        self.assertTrue(audit["ok"].all())

    def test_direct_has_nothing_to_audit(self):
        self.assertTrue(audit_reconfiguration_plans(ExperimentConfig(algorithm="direct", n=8)).empty)

    def test_verify_retri(self):
        checks = verify_invariants(ExperimentConfig(n=27))
        self.assertTrue(checks["ok"].all(), checks[~checks["ok"]])
        self.assertIn("digit bijection", checks["check"].tolist())

    def test_single_phase_plans_checked_once(self):
        checks = verify_invariants(ExperimentConfig(n=3))
        self.assertTrue(checks["ok"].all(), checks[~checks["ok"]])
        self.assertFalse(checks["check"].duplicated().any(), checks["check"].tolist())

    def test_verify_bruck_and_direct(self):
        self.assertTrue(verify_invariants(ExperimentConfig(algorithm="bruck", n=16))["ok"].all())
        self.assertTrue(verify_invariants(ExperimentConfig(algorithm="direct", n=8))["ok"].all())


if __name__ == "__main__":
    unittest.main()
