import unittest
import csv
import json
import tempfile
import sys
import os
from pathlib import Path

import numpy as np

# Add path
sys.path.append(os.getcwd())

from solenoid.core.charge import AtomicCharge, ScalarAtomicMeasure
from solenoid.core.curves import CurveEnsemble
from solenoid.core.errors import FileFormatError
from solenoid.core.file_formats import (read_charge, read_ensemble, read_measure, read_report, write_charge,
                                        write_ensemble, write_ensemble_csv, write_measure, write_report)


class TestFileFormats(unittest.TestCase):

    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.dir = Path(tmp.name)
        rng = np.random.default_rng(12)
        self.mu = AtomicCharge(rng.standard_normal((25, 2)), rng.standard_normal((25, 2)) / 3.0)
        paths = np.cumsum(rng.uniform(-0.05, 0.05, size=(6, 11, 2)), axis=1)
        self.nu = CurveEnsemble(1.0, paths, rng.uniform(0.1, 1.0, size=6))

    def test_charge_bit_exact(self):
        path = self.dir / "charge.json"
        write_charge(path, self.mu)
        self.assertEqual(read_charge(path), self.mu)

    def test_measure_bit_exact(self):
        sigma = ScalarAtomicMeasure([[0.1, 1.0 / 3.0], [2.0, -7.0]], [np.pi, -np.e])
        path = self.dir / "sigma.json"
        write_measure(path, sigma)
        self.assertEqual(read_measure(path), sigma)

    def test_ensemble_bit_exact(self):
        path = self.dir / "nu.json"
        write_ensemble(path, self.nu)
        again = read_ensemble(path)
        self.assertEqual(again.ell, 1.0)
        np.testing.assert_array_equal(again.paths, self.nu.paths)
        np.testing.assert_array_equal(again.weights, self.nu.weights)

    def test_empty_ensemble(self):
        path = self.dir / "empty.json"
        write_ensemble(path, CurveEnsemble(2.0, np.zeros((0, 2, 3)), [], dim=3))
        again = read_ensemble(path)
        self.assertEqual(len(again), 0)
        self.assertEqual(again.dim, 3)

    def test_csv_export(self):
        path = self.dir / "nu.csv"
        write_ensemble_csv(path, self.nu)
        with open(path, newline='') as f:
            rows = list(csv.reader(f))
        self.assertEqual(rows[0], ["curve", "k", "t", "weight", "x0", "x1"])
        self.assertEqual(len(rows), 1 + 6 * 11)
        self.assertEqual(float(rows[-1][2]), 1.0)

    def test_malformed_json(self):
        path = self.dir / "bad.json"
        path.write_text("{not json")
        with self.assertRaises(FileFormatError):
            read_charge(path)

    def test_undecodable_bytes(self):
        path = self.dir / "binary.json"
        path.write_bytes(b"\xff\xfe{\"dim\": 2}")
        with self.assertRaises(FileFormatError):
            read_charge(path)

    def test_wrong_structure(self):
        path = self.dir / "list.json"
        path.write_text("[1, 2, 3]")
        with self.assertRaises(FileFormatError):
            read_report(path)
        path.write_text(json.dumps({"dim": 2, "atoms": [{"x": [0.0, 0.0]}]}))
        with self.assertRaises(FileFormatError):
            read_charge(path)
        path.write_text(json.dumps({"ell": 1.0, "dim": 2, "curves": [{"w": 1.0, "pts": [[0.0, 0.0], [5.0, 0.0]]}]}))
        with self.assertRaises(FileFormatError):
            read_ensemble(path)

    def test_missing_file(self):
        with self.assertRaises(OSError):
            read_charge(self.dir / "absent.json")

    def test_report_with_numpy_scalars(self):
        path = self.dir / "report.json"
        write_report(path, {"passed": np.bool_(True), "count": np.int64(3), "value": np.float64(0.5),
                            "rows": np.arange(3.0)})
        data = read_report(path)
        self.assertIs(data["passed"], True)
        self.assertEqual(data["count"], 3)
        self.assertEqual(data["rows"], [0.0, 1.0, 2.0])


if __name__ == '__main__':
    unittest.main()
