import unittest
from unittest.mock import patch
import json
import tempfile
import sys
import os
from pathlib import Path

# Add path
sys.path.append(os.getcwd())

from solenoid.core.config_store import DEFAULTS, ConfigStore
from solenoid.core.errors import FileFormatError


class TestConfigStore(unittest.TestCase):

    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.dir = Path(tmp.name)
        self.path = self.dir / "nested" / "verify.json"

    def test_defaults_when_missing(self):
        store = ConfigStore(self.path)
        self.assertEqual(store.sections, {})
        self.assertEqual(store.section("flow"), DEFAULTS["flow"])
        self.assertEqual(store.get("decompose", "n_curves"), 20000)

    def test_section_is_a_copy(self):
        store = ConfigStore(self.path)
        store.section("segment")["start"].append(9.0)
        self.assertEqual(DEFAULTS["segment"]["start"], [0.0, 0.0])

    def test_set_save_reload(self):
        store = ConfigStore(self.path)
        store.set("decompose", "epsilon", 0.2)
        store.save()
        self.assertTrue(self.path.exists())
        again = ConfigStore(self.path)
        self.assertEqual(again.get("decompose", "epsilon"), 0.2)
        self.assertEqual(again.get("decompose", "n_curves"), DEFAULTS["decompose"]["n_curves"])

    def test_reset(self):
        store = ConfigStore(self.path)
        store.set("lift", "threshold", 1.0)
        store.reset("lift")
        self.assertEqual(store.get("lift", "threshold"), DEFAULTS["lift"]["threshold"])
        store.reset("panel")

    def test_unknown_section_name(self):
        store = ConfigStore(self.path)
        with self.assertRaises(KeyError):
            store.section("gui")
        with self.assertRaises(KeyError):
            store.set("gui", "scale", 2)

    def test_malformed_file(self):
        self.path.parent.mkdir(parents=True)
        self.path.write_text("{broken")
        with self.assertRaises(FileFormatError):
            ConfigStore(self.path)
        self.path.write_text(json.dumps({"flow": 3}))
        with self.assertRaises(FileFormatError):
            ConfigStore(self.path)

    def test_undecodable_file(self):
        self.path.parent.mkdir(parents=True)
        self.path.write_bytes(b"\xff\xfe\x00")
        with self.assertRaises(FileFormatError):
            ConfigStore(self.path)

    def test_unknown_sections_ignored(self):
        self.path.parent.mkdir(parents=True)
        self.path.write_text(json.dumps({"flow": {"step": 0.01}, "window": {"width": 800}}))
        with self.assertLogs("solenoid.core.config_store", level="WARNING"):
            store = ConfigStore(self.path)
        self.assertNotIn("window", store.sections)
        self.assertEqual(store.get("flow", "step"), 0.01)

    def test_default_location(self):
        with patch('solenoid.core.config_store.Path.home', return_value=self.dir):
            store = ConfigStore()
        self.assertEqual(store.config_file, self.dir / ".config" / "solenoid" / "verify.json")


if __name__ == '__main__':
    unittest.main()
