import copy
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

from .errors import FileFormatError

logger = logging.getLogger(__name__)

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "loop": {"atoms": 512, "radius": 1.0},
    "two_loops": {"atoms": 256, "radius": 0.5, "separation": 2.0},
    "segment": {"atoms": 64, "start": [0.0, 0.0], "end": [1.0, 0.0]},
    "panel": {"seed": 7, "n_fields": 10, "n_functions": 10, "margin": 0.5},
    "flow": {"ell": 1.0, "step": 1e-3, "record_count": 101},
    "decompose": {"epsilon": 0.05, "n_curves": 20000, "seed": 0, "schedule": [0.4, 0.2, 0.1, 0.05]},
    "liouville": {"n_samples": 100000, "times": [0.5, 1.0], "step": 0.05},
    "lift": {"column_atoms": 64, "slab_width": 0.1, "threshold": 0.05},
    "tolerances": {
        "curve_divergence": 1e-5,
        "drift_bound": 1e-12,
        "single_atom_drift": 1e-12,
        "mass_budget": 1e-12,
        "reconstruction_relative": 0.02,
        "reconstruction_se": 4.0,
        "refinement_ratio": 0.15,
        "liouville_se": 3.0,
        "liouville_slack": 1e-6,
        "rk4_order_low": 3.7,
        "rk4_order_high": 4.3,
        "endpoint_start_se": 4.0,
        "endpoint_cancel_se": 3.0,
        "endpoint_cancel_slack": 1e-4,
        "mean_length": 0.95,
        "back_and_forth_lower": 0.05,
        "lift_divergence_slack": 1e-3,
        "lift_relative": 0.10,
        "limit_case_se": 3.0,
        "vertical_speed": 0.8,
        "determinism": 1e-12,
    },
}


class ConfigStore:
    """Persists verification parameters as JSON, falling back to built-in defaults."""

    def __init__(self, config_file: Optional[Path] = None):
        if config_file is None:
            self.config_dir = Path.home() / ".config" / "solenoid"
            self.config_file = self.config_dir / "verify.json"
        else:
            self.config_file = Path(config_file)
            self.config_dir = self.config_file.parent
        self.sections: Dict[str, Dict[str, Any]] = {}
        self._load()

    def _load(self):
        """Loads the configuration from disk; a missing file means all defaults."""
        if not self.config_file.exists():
            self.sections = {}
            return

        try:
            with open(self.config_file, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise FileFormatError(f"{self.config_file}: not valid JSON ({e})") from e
        except UnicodeDecodeError as e:
            raise FileFormatError(f"{self.config_file}: not UTF-8 text ({e.reason})") from e
        if not isinstance(data, dict) or not all(isinstance(v, dict) for v in data.values()):
            raise FileFormatError(f"{self.config_file}: expected an object of sections")
        unknown = set(data) - set(DEFAULTS)
        if unknown:
            logger.warning(f"Ignoring unknown config sections: {sorted(unknown)}")
        self.sections = {k: v for k, v in data.items() if k in DEFAULTS}

    def save(self):
        """Saves the overridden values to disk."""
        self.config_dir.mkdir(parents=True, exist_ok=True)
        with open(self.config_file, 'w', encoding='utf-8') as f:
            json.dump(self.sections, f, indent=4)

    def section(self, name: str) -> Dict[str, Any]:
        """Defaults for the section overlaid with stored values."""
        if name not in DEFAULTS:
            raise KeyError(f"unknown config section {name!r}")
        merged = copy.deepcopy(DEFAULTS[name])
        merged.update(self.sections.get(name, {}))
        return merged

    def get(self, name: str, key: str) -> Any:
        return self.section(name)[key]

    def set(self, name: str, key: str, value: Any):
        if name not in DEFAULTS:
            raise KeyError(f"unknown config section {name!r}")
        self.sections.setdefault(name, {})[key] = value

    def reset(self, name: str):
        """Drops stored overrides for a section."""
        if name in self.sections:
            del self.sections[name]
