"""Tests for experiment configs, the runner, report checks and comparisons."""

import csv
import glob
import json
import os
import tempfile
import unittest
from unittest.mock import patch

from mural.errors import ConfigError, ContractViolation, InvariantViolation, NotRealizableError, ReportMismatchError
from mural.harness.analysis import fit_envelope, scaling_ratio, success_rate, summarize
from mural.harness.compare import compare_reports, load_reports
from mural.harness.config import Cell, default_jobs, load_config, parse_config
from mural.harness.runner import CSV_COLUMNS, DIAGNOSTIC_COLUMNS, EXIT_INVALID, EXIT_MISS, EXIT_OK, \
    run_experiment, strip_runtime
from mural.harness.verify import check_report, verify_report
from mural.report import RunReport
from mural.scenarios import example1_gadget

SMALL_CONFIG = {
    "scenario": {"name": "example1", "params": {}},
    "algorithms": ["agnostic", "passive"],
    "eps": [0.5],
    "delta": 0.1,
    "constant_scale": 0.05,
    "seeds": [0, 1],
}

REALIZABLE_CONFIG = {
    "scenario": {"name": "threshold", "params": {"n_points": 16, "groups": 2, "seed": 0,
                                                 "noise": {"kind": "group_realizable", "offsets": [-2, 2]}}},
    "algorithms": ["group_realizable", "passive"],
    "eps": 0.2,
    "delta": 0.1,
    "seeds": [3],
}


def config_from(data, **overrides):
    return parse_config(json.dumps(dict(data, **overrides), indent=2), "test.json")


def read_csv(path):
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


class TestConfig(unittest.TestCase):
    """Parsing and validation of experiment configs."""

    def test_small_config(self):
        config = config_from(SMALL_CONFIG)
        self.assertEqual(config.algorithms, ("agnostic", "passive"))
        self.assertEqual(config.eps, (0.5,))
        self.assertEqual(config.out_dir, "runs")
        self.assertEqual(config.csv, "results.csv")
        cells = config.cells()
        self.assertEqual(len(cells), 4)
        self.assertEqual(cells[0], Cell("agnostic", 0.5, 0))
        self.assertEqual(cells[0].name, "agnostic-eps0.5-seed0")
        self.assertEqual([c.seed for c in config.cells(seed_offset=10)][:2], [10, 11])

    def test_scalar_forms(self):
        config = config_from({"scenario": "example1", "algorithm": "passive", "eps": 0.1,
                              "delta": 0.05, "seeds": [1]})
        self.assertEqual(config.scenario, "example1")
        self.assertEqual(config.scenario_params, {})
        self.assertEqual(config.algorithms, ("passive",))
        self.assertEqual(config.eps, (0.1,))

    def test_errors_point_at_the_offending_line(self):
        text = '{\n  "scenario": "example1",\n  "algorithm": "passive",\n  "eps": 0.1,\n' \
               '  "delta": 1.5,\n  "seeds": [0]\n}\n'
        with self.assertRaises(ConfigError) as ctx:
            parse_config(text, "bad.json")
        self.assertEqual(ctx.exception.line, 5)
        self.assertTrue(str(ctx.exception).startswith("bad.json:5: delta"))

    def test_unknown_key(self):
        with self.assertRaisesRegex(ConfigError, "unknown key 'epsilon'"):
            config_from(SMALL_CONFIG, epsilon=0.1)

    def test_rejects_bad_values(self):
        cases = {
            "algorithms": ["psychic"],
            "eps": [0.1, -0.2],
            "seeds": [0.5],
            "constant_scale": 2.0,
            "out_dir": 3,
        }
        for key, value in cases.items():
            with self.subTest(key=key):
                with self.assertRaises(ConfigError) as ctx:
                    config_from(SMALL_CONFIG, **{key: value})
                self.assertIsNotNone(ctx.exception.line)

    def test_both_algorithm_keys(self):
        with self.assertRaisesRegex(ConfigError, "either algorithm or algorithms"):
            config_from(SMALL_CONFIG, algorithm="passive")

    def test_scenario_errors_surface(self):
        with self.assertRaisesRegex(ConfigError, "unknown scenario"):
            config_from(SMALL_CONFIG, scenario="spiral")

    def test_group_realizable_needs_realizable_groups(self):
        with self.assertRaisesRegex(ConfigError, "every group is realizable"):
            config_from(SMALL_CONFIG, algorithms=["group_realizable"])
        config_from(REALIZABLE_CONFIG)

    def test_malformed_json(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config('{\n  "scenario": "example1",\n  "eps": [0.1,\n}', "broken.json")
        self.assertIn("invalid JSON", str(ctx.exception))
        self.assertEqual(ctx.exception.path, "broken.json")
        self.assertIsNotNone(ctx.exception.line)

    def test_missing_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaisesRegex(ConfigError, "cannot read config"):
                load_config(os.path.join(tmp, "absent.json"))

    def test_shipped_configs_load(self):
        root = os.path.join(os.path.dirname(__file__), os.pardir, "configs")
        paths = sorted(glob.glob(os.path.join(root, "*.json")))
        self.assertTrue(paths)
        for path in paths:
            with self.subTest(path=os.path.basename(path)):
                self.assertGreater(len(load_config(path).cells()), 0)


class TestDefaultJobs(unittest.TestCase):

    def test_unset(self):
        self.assertEqual(default_jobs({}), 1)
        self.assertEqual(default_jobs({"MURAL_JOBS": ""}), 1)

    @patch.dict(os.environ, {"MURAL_JOBS": "3"})
    def test_from_environment(self):
        self.assertEqual(default_jobs(), 3)

    def test_rejects_nonsense(self):
        for value in ("0", "-2", "many"):
            with self.subTest(value=value):
                with self.assertRaises(ConfigError):
                    default_jobs({"MURAL_JOBS": value})


class TestRunExperiment(unittest.TestCase):
    """End-to-end runs of small configs."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def out(self, name):
        return os.path.join(self.tmp.name, name)

    def test_writes_reports_and_csv(self):
        result = run_experiment(config_from(SMALL_CONFIG), out_dir=self.out("a"))
        self.assertEqual(result.exit_status, EXIT_OK)
        self.assertEqual(len(result.report_paths), 4)
        self.assertTrue(os.path.exists(self.out("a/passive-eps0.5-seed1.json")))
        rows = read_csv(result.csv_path)
        self.assertEqual(list(rows[0]), CSV_COLUMNS)
        self.assertEqual([r["algorithm"] for r in rows], ["agnostic", "agnostic", "passive", "passive"])
        self.assertTrue(all(r["status"] == "ok" for r in rows))
        self.assertTrue(all(r["scenario"] == "example1" for r in rows))

    def test_reports_carry_scenario_and_theta(self):
        result = run_experiment(config_from(SMALL_CONFIG), out_dir=self.out("a"))
        report = load_reports([result.report_paths[0]])[0]
        self.assertEqual(report.scenario, {"name": "example1", "params": {}})
        self.assertEqual(report.config["seed"], 0)
        self.assertEqual(len(report.diagnostics["theta"]), 2)
        self.assertGreater(report.diagnostics["envelope"], 0)

    def test_same_config_same_csv(self):
        first = run_experiment(config_from(SMALL_CONFIG), out_dir=self.out("a"))
        second = run_experiment(config_from(SMALL_CONFIG), out_dir=self.out("b"), jobs=2)
        with open(first.csv_path) as f1, open(second.csv_path) as f2:
            self.assertEqual(strip_runtime(f1.read()), strip_runtime(f2.read()))

    def test_seed_offset_changes_seeds(self):
        result = run_experiment(config_from(SMALL_CONFIG), out_dir=self.out("a"), seed_offset=5)
        self.assertEqual(sorted({int(r["seed"]) for r in read_csv(result.csv_path)}), [5, 6])

    def test_group_realizable_config(self):
        result = run_experiment(config_from(REALIZABLE_CONFIG), out_dir=self.out("r"), strict=True)
        self.assertEqual(result.exit_status, EXIT_OK)
        rows = {r["algorithm"]: r for r in read_csv(result.csv_path)}
        self.assertLess(int(rows["group_realizable"]["total_labels"]),
                        int(rows["passive"]["total_labels"]))

    @patch("mural.harness.runner._status")
    def test_misses_only_fail_strict_runs(self, mock_status):
        mock_status.return_value = "miss"
        config = config_from(SMALL_CONFIG, algorithms=["passive"])
        self.assertEqual(run_experiment(config, out_dir=self.out("a")).exit_status, EXIT_OK)
        self.assertEqual(run_experiment(config, out_dir=self.out("b"), strict=True).exit_status, EXIT_MISS)

    @patch("mural.harness.runner.verify_report")
    def test_inconsistent_report_is_invalid(self, mock_verify):
        mock_verify.return_value = ["ledger mismatch"]
        result = run_experiment(config_from(SMALL_CONFIG, algorithms=["passive"]), out_dir=self.out("a"))
        self.assertEqual(result.exit_status, EXIT_INVALID)
        self.assertEqual([o.status for o in result.outcomes], ["invalid", "invalid"])

    @patch("mural.harness.runner.run_group_realizable")
    def test_failed_cell_leaves_blank_row(self, mock_run):
        mock_run.side_effect = NotRealizableError(1)
        result = run_experiment(config_from(REALIZABLE_CONFIG), out_dir=self.out("r"))
        self.assertEqual(result.exit_status, EXIT_INVALID)
        self.assertEqual(len(result.report_paths), 1)
        failed = [r for r in read_csv(result.csv_path) if r["algorithm"] == "group_realizable"][0]
        self.assertEqual(failed["status"], "error")
        self.assertEqual(failed["total_labels"], "")

    def test_diagnostics_csv(self):
        config = config_from(SMALL_CONFIG, algorithms=["agnostic"], seeds=[0], diagnostics_csv="est.csv")
        run_experiment(config, out_dir=self.out("d"))
        rows = read_csv(self.out("d/est.csv"))
        self.assertTrue(rows)
        self.assertEqual(list(rows[0]), DIAGNOSTIC_COLUMNS)
        inst = example1_gadget()
        for row in rows:
            self.assertAlmostEqual(float(row["true_loss"]),
                                   float(inst.loss_matrix[int(row["h_id"]), int(row["group"])]))


class TestVerifyAndCompare(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.result = run_experiment(config_from(SMALL_CONFIG), out_dir=cls.tmp.name)
        cls.reports = load_reports([os.path.join(cls.tmp.name, "*.json")])

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def test_reports_verify(self):
        inst = example1_gadget()
        for report in self.reports:
            self.assertEqual(verify_report(report, inst), [])

    def test_report_json_names_excess_true_loss(self):
        report = self.reports[0]
        data = json.loads(report.to_json())
        self.assertIn("excess_true_loss", data)
        self.assertNotIn("excess", data)
        self.assertEqual(RunReport.from_dict(data).excess, report.excess)

    def test_tampered_excess_detected(self):
        report = RunReport.from_dict(self.reports[0].to_dict())
        report.excess += 0.25
        problems = verify_report(report, example1_gadget())
        self.assertTrue(any("excess" in p for p in problems))
        with self.assertRaises(InvariantViolation):
            check_report(report, example1_gadget())

    def test_tampered_ledger_detected(self):
        report = next(r for r in self.reports if r.algorithm == "agnostic")
        report = RunReport.from_dict(report.to_dict())
        report.ledger["label_queries"][0] += 1
        self.assertTrue(any("traces charge" in p for p in verify_report(report, example1_gadget())))

    def test_out_of_class_output(self):
        report = RunReport.from_dict(self.reports[0].to_dict())
        report.output_h = 9
        self.assertEqual(len(verify_report(report, example1_gadget())), 1)

    def test_pairs_by_scenario_eps_seed(self):
        rows = compare_reports(self.reports)
        self.assertEqual([(r.algorithm, r.seed) for r in rows], [("agnostic", 0), ("agnostic", 1)])
        for row in rows:
            self.assertEqual(row.ratio, row.active_labels / row.passive_labels)

    def test_unpaired_report(self):
        reports = [r for r in self.reports if not (r.algorithm == "passive" and r.config["seed"] == 1)]
        with self.assertRaises(ReportMismatchError) as ctx:
            compare_reports(reports)
        self.assertEqual(len(ctx.exception.offenders), 1)

    def test_one_sided_reports(self):
        with self.assertRaises(ReportMismatchError):
            compare_reports([r for r in self.reports if r.algorithm == "passive"])

    def test_unreadable_report(self):
        with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as f:
            f.write('["not", "a", "report"]')
        self.addCleanup(os.remove, f.name)
        with self.assertRaises(ContractViolation):
            load_reports([f.name])


class TestAnalysis(unittest.TestCase):

    def test_exact_line(self):
        fit = fit_envelope([1.0, 2.0, 4.0, 8.0], [13.0, 23.0, 43.0, 83.0])
        self.assertAlmostEqual(fit.alpha, 3.0)
        self.assertAlmostEqual(fit.beta, 10.0)
        self.assertAlmostEqual(fit.r_squared, 1.0)

    def test_fit_needs_three_points(self):
        with self.assertRaises(ContractViolation):
            fit_envelope([1.0, 2.0], [1.0, 2.0])

    def test_scaling_ratio(self):
        self.assertAlmostEqual(scaling_ratio([10, 20, 30], [4, 5, 6]), 4.0)
        with self.assertRaises(ContractViolation):
            scaling_ratio([1], [0])

    def test_success_rate(self):
        rate = success_rate(19, 20)
        self.assertAlmostEqual(rate.rate, 0.95)
        self.assertLess(rate.low, 0.95)
        self.assertLessEqual(rate.high, 1.0)
        with self.assertRaises(ContractViolation):
            success_rate(3, 2)

    def test_summarize(self):
        rows = [
            {"algorithm": "passive", "eps": "0.1", "total_labels": "100", "status": "ok"},
            {"algorithm": "passive", "eps": "0.1", "total_labels": "300", "status": "miss"},
            {"algorithm": "agnostic", "eps": "0.1", "total_labels": "50", "status": "ok"},
        ]
        summaries = {s.algorithm: s for s in summarize(rows)}
        self.assertEqual(summaries["passive"].median_labels, 200.0)
        self.assertEqual(summaries["passive"].success.successes, 1)
        self.assertEqual(summaries["agnostic"].success.trials, 1)


if __name__ == "__main__":
    unittest.main()
