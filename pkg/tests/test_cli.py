import unittest
from unittest.mock import patch
import argparse
import io
import tempfile
import sys
import os
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path

# Add path
sys.path.append(os.getcwd())

from solenoid.core.config_store import ConfigStore
from solenoid.core.errors import InvalidParameterError
from solenoid.core.file_formats import read_charge, read_ensemble, read_measure, read_report, write_report
from solenoid.harness.verify import CheckResult, SuiteReport, VerificationSuite
from solenoid.main import EXIT_CHECK_FAILED, EXIT_IO, EXIT_OK, EXIT_USAGE, main, resolve_seed

SMALL_RUN = ["--ell", "1.0", "--eps", "0.2", "--curves", "8", "--step", "0.05", "--record-count", "21",
             "--threads", "2"]


class CliTestCase(unittest.TestCase):

    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.dir = Path(tmp.name)
        self.config = str(self.dir / "absent" / "verify.json")
        env = patch.dict(os.environ)
        env.start()
        self.addCleanup(env.stop)
        os.environ.pop("SOLENOID_SEED", None)

    def run_cli(self, *argv):
        out, err = io.StringIO(), io.StringIO()
        with redirect_stdout(out), redirect_stderr(err):
            code = main(list(argv) + ["--config", self.config])
        return code, out.getvalue(), err.getvalue()

    def gen(self, scenario, name, *extra):
        path = str(self.dir / name)
        code, _, _ = self.run_cli("gen", "--scenario", scenario, "--out", path, *extra)
        self.assertEqual(code, EXIT_OK)
        return path


class TestGenAndCheck(CliTestCase):

    def test_gen_loop(self):
        path = self.gen("loop", "loop.json", "--atoms", "40", "--radius", "0.5")
        self.assertEqual(len(read_charge(path)), 40)

    def test_gen_segment_with_divergence(self):
        div = str(self.dir / "div.json")
        path = self.gen("segment", "seg.json", "--div-out", div)
        self.assertEqual(len(read_charge(path)), 64)
        self.assertEqual(len(read_measure(div)), 2)

    def test_gen_without_divergence_warns(self):
        div = self.dir / "div.json"
        code, _, err = self.run_cli("gen", "--scenario", "loop", "--atoms", "8", "--out",
                                    str(self.dir / "l.json"), "--div-out", str(div))
        self.assertEqual(code, EXIT_OK)
        self.assertIn("Warning", err)
        self.assertFalse(div.exists())

    def test_check_div(self):
        loop = self.gen("loop", "loop.json")
        code, out, _ = self.run_cli("check-div", "--charge", loop)
        self.assertEqual(code, EXIT_OK)
        self.assertIn("PASS", out)
        atom = self.gen("single_atom", "atom.json")
        code, out, _ = self.run_cli("check-div", "--charge", atom, "--threshold", "1e-3")
        self.assertEqual(code, EXIT_CHECK_FAILED)
        self.assertIn("FAIL", out)

    def test_check_div_pair(self):
        div = str(self.dir / "div.json")
        seg = self.gen("segment", "seg.json", "--div-out", div)
        code, out, _ = self.run_cli("check-div", "--charge", seg, "--div", div)
        self.assertEqual(code, EXIT_OK)
        self.assertIn("certification error", out)


class TestDecompose(CliTestCase):

    def test_decompose_writes_outputs(self):
        loop = self.gen("loop", "loop.json", "--atoms", "32")
        out, report, table = (str(self.dir / n) for n in ("nu.json", "report.json", "nu.csv"))
        code, stdout, _ = self.run_cli("decompose", "--charge", loop, *SMALL_RUN, "--seed", "3",
                                       "--out", out, "--report", report, "--csv", table)
        self.assertEqual(code, EXIT_OK)
        self.assertIn("mass =", stdout)
        nu = read_ensemble(out)
        self.assertEqual(len(nu), 8)
        self.assertEqual(nu.m, 20)
        data = read_report(report)
        self.assertEqual(data["command"], "decompose")
        self.assertIn("timestamp", data)
        self.assertEqual(data["report"]["params"]["seed"], 3)
        self.assertTrue(Path(table).exists())

    def test_seed_reproducible_across_threads(self):
        loop = self.gen("loop", "loop.json", "--atoms", "32")
        first, second = str(self.dir / "a.json"), str(self.dir / "b.json")
        self.run_cli("decompose", "--charge", loop, *SMALL_RUN, "--report", first)
        with patch.dict(os.environ, {"SOLENOID_SEED": "0"}):
            self.run_cli("decompose", "--charge", loop, *SMALL_RUN, "-j", "1", "--report", second)
        code, stdout, _ = self.run_cli("report", first, "--compare", second)
        self.assertEqual(code, EXIT_OK, stdout)

    def test_lift_decompose(self):
        div = str(self.dir / "div.json")
        seg = self.gen("segment", "seg.json", "--atoms", "32", "--div-out", div)
        report = str(self.dir / "lift.json")
        code, stdout, _ = self.run_cli("lift-decompose", "--charge", seg, "--div", div, *SMALL_RUN,
                                       "--column-atoms", "16", "--slab", "0.1", "--report", report)
        self.assertEqual(code, EXIT_OK)
        self.assertIn("kept", stdout)
        self.assertEqual(read_report(report)["command"], "lift-decompose")

    def test_invalid_parameter(self):
        loop = self.gen("loop", "loop.json", "--atoms", "16")
        code, _, err = self.run_cli("decompose", "--charge", loop, "--eps", "-0.1")
        self.assertEqual(code, EXIT_USAGE)
        self.assertIn("Error", err)

    def test_missing_and_corrupt_files(self):
        code, _, _ = self.run_cli("decompose", "--charge", str(self.dir / "nothing.json"))
        self.assertEqual(code, EXIT_IO)
        bad = self.dir / "bad.json"
        bad.write_text("{\"dim\": 2, \"atoms\": [")
        code, _, err = self.run_cli("check-div", "--charge", str(bad))
        self.assertEqual(code, EXIT_IO)
        self.assertIn("not valid JSON", err)
        bad.write_bytes(b"\xff\xfe")
        code, _, err = self.run_cli("check-div", "--charge", str(bad))
        self.assertEqual(code, EXIT_IO)
        self.assertIn("not UTF-8", err)

    def test_no_subcommand(self):
        with redirect_stderr(io.StringIO()):
            with self.assertRaises(SystemExit) as ctx:
                main([])
        self.assertEqual(ctx.exception.code, 2)


class TestSeed(CliTestCase):

    def test_precedence(self):
        config = ConfigStore(Path(self.config))
        args = argparse.Namespace(seed=None)
        self.assertEqual(resolve_seed(args, config), 0)
        args.seed = 5
        self.assertEqual(resolve_seed(args, config), 5)
        with patch.dict(os.environ, {"SOLENOID_SEED": "11"}):
            self.assertEqual(resolve_seed(args, config), 11)

    def test_invalid_env(self):
        with patch.dict(os.environ, {"SOLENOID_SEED": "eleven"}):
            with self.assertRaises(InvalidParameterError):
                resolve_seed(argparse.Namespace(seed=None), ConfigStore(Path(self.config)))


class TestVerifyAndReport(CliTestCase):

    def _suite(self, passed):
        suite = patch('solenoid.main.VerificationSuite')
        mock_cls = suite.start()
        self.addCleanup(suite.stop)
        mock_cls.CHECKS = VerificationSuite.CHECKS
        checks = [CheckResult("mass_budget", 0.0, 1e-12, passed)]
        mock_cls.return_value.run.return_value = SuiteReport(checks, {"seed": 0}, "2026-01-01T00:00:00+00:00")
        return mock_cls

    def test_verify_pass(self):
        mock_cls = self._suite(True)
        report = str(self.dir / "suite.json")
        code, out, _ = self.run_cli("verify", "--only", "mass_budget", "--report", report)
        self.assertEqual(code, EXIT_OK)
        self.assertIn("PASSED", out)
        mock_cls.return_value.run.assert_called_once_with(["mass_budget"])
        self.assertTrue(read_report(report)["passed"])

    def test_verify_fail(self):
        self._suite(False)
        code, _, err = self.run_cli("verify")
        self.assertEqual(code, EXIT_CHECK_FAILED)
        self.assertIn("mass_budget", err)

    def test_verify_tolerance_override(self):
        mock_cls = self._suite(True)
        code, _, _ = self.run_cli("verify", "--tolerance", "mass_budget=1e-9")
        self.assertEqual(code, EXIT_OK)
        config = mock_cls.call_args[0][0]
        self.assertEqual(config.get("tolerances", "mass_budget"), 1e-9)

    def test_verify_bad_arguments(self):
        self._suite(True)
        self.assertEqual(self.run_cli("verify", "--tolerance", "nonsense=1")[0], EXIT_USAGE)
        self.assertEqual(self.run_cli("verify", "--tolerance", "mass_budget")[0], EXIT_USAGE)
        self.assertEqual(self.run_cli("verify", "--only", "everything")[0], EXIT_USAGE)

    def test_report_compare(self):
        a, b = self.dir / "a.json", self.dir / "b.json"
        write_report(a, {"timestamp": "x", "passed": True, "value": 1.0})
        write_report(b, {"timestamp": "y", "passed": True, "value": 1.0})
        self.assertEqual(self.run_cli("report", str(a), "--compare", str(b))[0], EXIT_OK)
        write_report(b, {"timestamp": "y", "passed": True, "value": 1.5})
        code, out, _ = self.run_cli("report", str(a), "--compare", str(b))
        self.assertEqual(code, EXIT_CHECK_FAILED)
        self.assertIn("value", out)
        code, out, _ = self.run_cli("report", str(a))
        self.assertEqual(code, EXIT_OK)
        self.assertIn("value", out)


if __name__ == '__main__':
    unittest.main()
