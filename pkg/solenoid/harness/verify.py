"""Acceptance suite: runs every identity check on the built-in scenarios."""
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from ..core.charge import pair_with_field, total_variation
from ..core.config_store import ConfigStore
from ..core.curves import Curve, curve_action, ensemble_action, ensemble_mass, variation_bracket
from ..core.decompose import (DecomposeParams, build_report, decompose_div_free, endpoint_identity_error,
                              length_statistics, mollification_gaps, reconstruction_error)
from ..core.drift import RotationalDrift
from ..core.errors import SolenoidError
from ..core.fields import Box, FieldPanel, GradientField, TestField, TestFunction, make_panel
from ..core.flow import DEFAULT_CHUNK, FlowConfig, liouville_discrepancy, rk4_order_study
from ..core.lift import (DivergencePair, LiftParams, build_lift, decompose_with_divergence, lifted_panel,
                         verify_lift_divergence)
from ..core.mollifier import MollifiedCharge, drift_eval
from ..core.regions import Ball, HalfSpace
from .report import compare_reports, max_scalar_difference
from .scenarios import Scenario, bounding_box, dipole, generate

logger = logging.getLogger(__name__)

CURVE_CHECK_COUNT = 50
CURVE_CHECK_SAMPLES = 4096
DRIFT_PROBES = 10000
# several chunks, so a threaded run really splits the work
DETERMINISM_CURVES = 4 * DEFAULT_CHUNK
RK4_STEP_COUNTS = (128, 256, 512, 1024)


@dataclass
class CheckResult:
    name: str
    measured: float
    tolerance: float
    passed: bool
    detail: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class SuiteReport:
    checks: List[CheckResult]
    params: Dict[str, Any]
    timestamp: str = ""
    wall_time: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> List[str]:
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {"timestamp": self.timestamp, "wall_time": self.wall_time, "passed": self.passed,
                "params": self.params, "checks": [c.to_dict() for c in self.checks]}


class VerificationSuite:
    """Orchestrates scenario generation, decompositions and the acceptance checks."""

    CHECKS = ("curve_divergence", "drift_bound", "mass_budget", "reconstruction", "refinement",
              "liouville", "endpoint", "length_budget", "lift_divergence", "lift_reconstruction",
              "vertical_speed", "determinism")

    def __init__(self, config: Optional[ConfigStore] = None, threads: int = 1, seed: Optional[int] = None):
        self.config = config if config is not None else ConfigStore()
        self.threads = threads
        self.seed = seed if seed is not None else int(self.config.get("decompose", "seed"))
        self.tol = self.config.section("tolerances")
        self._cache: Dict[str, Any] = {}

    def _cached(self, key: str, build: Callable[[], Any]) -> Any:
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def _panel(self, charge, sigma=None) -> FieldPanel:
        p = self.config.section("panel")
        box = bounding_box(charge, sigma, p["margin"])
        return make_panel(p["seed"], p["n_fields"], p["n_functions"], box)

    def _flow(self) -> FlowConfig:
        f = self.config.section("flow")
        return FlowConfig(f["ell"], f["step"], f.get("record_count"))

    def _params(self, **overrides) -> DecomposeParams:
        d = self.config.section("decompose")
        values = {"epsilon": d["epsilon"], "n_curves": d["n_curves"], "flow": self._flow(), "seed": self.seed}
        values.update(overrides)
        return DecomposeParams(**values)

    def _scenario(self, name: str):
        def build():
            section = self.config.section(name) if name in ("loop", "two_loops", "segment") else {}
            kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in section.items()}
            return generate(Scenario(name, **kwargs))
        return self._cached(f"scenario:{name}", build)

    def _loop_run(self):
        def build():
            mu, _ = self._scenario("loop")
            params = self._params()
            nu = decompose_div_free(mu, params, threads=self.threads)
            return mu, params, nu, self._panel(mu)
        return self._cached("loop_run", build)

    def _segment_pair(self) -> DivergencePair:
        def build():
            mu, sigma = self._scenario("segment")
            threshold = self.config.get("lift", "threshold")
            return DivergencePair.certify(mu, sigma, self._panel(mu, sigma), threshold)
        return self._cached("segment_pair", build)

    def _lift_params(self) -> LiftParams:
        lift = self.config.section("lift")
        params = self._params()
        return LiftParams(params.ell, lift["column_atoms"], lift["slab_width"], params)

    def _segment_run(self):
        def build():
            pair = self._segment_pair()
            return decompose_with_divergence(pair, self._lift_params(), self._panel(pair.mu, pair.sigma),
                                             threads=self.threads)
        return self._cached("segment_run", build)

    # checks

    def check_curve_divergence(self) -> CheckResult:
        rng = np.random.default_rng(self.seed)
        box = Box([-1.5, -1.5], [1.5, 1.5])
        functions = make_panel(self.config.get("panel", "seed"), 1, 10, box).functions
        worst = 0.0
        for _ in range(CURVE_CHECK_COUNT):
            vertices = rng.uniform(box.lo, box.hi, size=(8, 2))
            arc = np.concatenate(([0.0], np.cumsum(np.linalg.norm(np.diff(vertices, axis=0), axis=1))))
            times = np.linspace(0.0, arc[-1], CURVE_CHECK_SAMPLES + 1)
            points = np.stack([np.interp(times, arc, vertices[:, k]) for k in range(2)], axis=1)
            gamma = Curve(arc[-1], points)
            for psi in functions:
                exact = float(psi.value(gamma.start)) - float(psi.value(gamma.end))
                worst = max(worst, abs(-curve_action(gamma, GradientField(psi)) - exact))
        tol = self.tol["curve_divergence"]
        return CheckResult("curve_divergence", worst, tol, worst <= tol)

    def check_drift_bound(self) -> CheckResult:
        eps = self.config.get("decompose", "epsilon")
        rng = np.random.default_rng(self.seed)
        excess = 0.0
        for name in ("loop", "two_loops", "segment", "single_atom"):
            mu, sigma = self._scenario(name)
            box = bounding_box(mu, sigma, 1.0)
            probes = rng.uniform(box.lo, box.hi, size=(DRIFT_PROBES, mu.dim))
            norms = np.linalg.norm(drift_eval(MollifiedCharge(mu, eps), probes), axis=1)
            excess = max(excess, float(norms.max()) - 1.0)
        mu, _ = self._scenario("single_atom")
        far = rng.uniform(-50.0, 50.0, size=(DRIFT_PROBES, mu.dim))
        direction = mu.weights[0] / mu.masses[0]
        single = float(np.abs(drift_eval(MollifiedCharge(mu, eps), far) - direction).max())
        tol = self.tol["drift_bound"]
        passed = excess <= tol and single <= self.tol["single_atom_drift"]
        return CheckResult("drift_bound", max(excess, single), tol, passed,
                           {"norm_excess": excess, "single_atom_error": single})

    def check_mass_budget(self) -> CheckResult:
        mu, params, nu, _ = self._loop_run()
        target = total_variation(mu) / params.ell
        loop_err = abs(ensemble_mass(nu) - target) / target
        _, lift_report = self._segment_run()
        lift_err = lift_report.mass_accounting_error
        worst = max(loop_err, lift_err)
        tol = self.tol["mass_budget"]
        return CheckResult("mass_budget", worst, tol, worst <= tol,
                           {"loop": loop_err, "lift_accounting": lift_err})

    def check_reconstruction(self) -> CheckResult:
        mu, params, nu, panel = self._loop_run()
        var = total_variation(mu)
        ratios = []
        for phi, err in zip(panel.fields, reconstruction_error(mu, nu, params.epsilon, panel)):
            allowed = max(self.tol["reconstruction_relative"] * var * phi.probe_supremum(),
                          self.tol["reconstruction_se"] * err.standard_error)
            ratios.append(err.smoothed_gap / allowed)
        worst = max(ratios)
        return CheckResult("reconstruction", worst, 1.0, worst <= 1.0, {"ratios": ratios})

    def check_refinement(self) -> CheckResult:
        mu, _ = self._scenario("loop")
        schedule = self.config.get("decompose", "schedule")
        gaps = np.array(mollification_gaps(mu, schedule, self._panel(mu)))
        decreasing = bool(np.all(np.diff(gaps, axis=0) < 0.0))
        ratio = float(np.max(gaps[-1] / gaps[0]))
        tol = self.tol["refinement_ratio"]
        return CheckResult("refinement", ratio, tol, decreasing and ratio <= tol,
                           {"strictly_decreasing": decreasing, "gaps": gaps.tolist()})

    def check_liouville(self) -> CheckResult:
        mu, _ = self._scenario("loop")
        liou = self.config.section("liouville")
        ell = self.config.get("flow", "ell")
        cfg = FlowConfig(ell, liou["step"], record_count=2)
        radius = self.config.get("loop", "radius")
        psi = TestFunction.bump([radius, 0.0], 0.5 * radius)
        mc = MollifiedCharge(mu, self.config.get("decompose", "epsilon"))
        ratios, results = [], []
        for t in liou["times"]:
            res = liouville_discrepancy(mc, self.seed, liou["n_samples"], psi, t, cfg, threads=self.threads)
            allowed = self.tol["liouville_se"] * res.standard_error + self.tol["liouville_slack"]
            ratios.append(res.discrepancy / allowed)
            results.append(res.to_dict())
        study = rk4_order_study(RotationalDrift(), [1.0, 0.0], RotationalDrift.exact, 2.0 * math.pi,
                                RK4_STEP_COUNTS)
        orders_ok = all(self.tol["rk4_order_low"] <= o <= self.tol["rk4_order_high"] for o in study.orders)
        worst = max(ratios)
        return CheckResult("liouville", worst, 1.0, worst <= 1.0 and orders_ok,
                           {"runs": results, "rk4_orders": study.orders})

    def check_endpoint(self) -> CheckResult:
        mu, params, nu, panel = self._loop_run()
        ratios = []
        for err in endpoint_identity_error(nu, mu, params.epsilon, panel):
            start_allowed = self.tol["endpoint_start_se"] * err.start_se
            cancel_allowed = self.tol["endpoint_cancel_se"] * err.cancellation_se + self.tol["endpoint_cancel_slack"]
            ratios.append(max(err.start_error / start_allowed if start_allowed > 0 else math.inf,
                              err.cancellation / cancel_allowed))
        worst = max(ratios)
        return CheckResult("endpoint", worst, 1.0, worst <= 1.0, {"ratios": ratios})

    def check_length_budget(self) -> CheckResult:
        _, _, nu, panel = self._loop_run()
        stats = length_statistics(nu)
        back_and_forth = Curve.sample(lambda t: [t if t <= 1.0 else 2.0 - t, 0.0], 2.0, CURVE_CHECK_SAMPLES)
        lower, upper = variation_bracket(back_and_forth, panel)
        passed = (stats["mean_over_ell"] >= self.tol["mean_length"]
                  and stats["max_over_ell"] <= 1.0 + 1e-9
                  and lower <= self.tol["back_and_forth_lower"]
                  and abs(upper - 2.0) <= 1e-9)
        return CheckResult("length_budget", stats["mean_over_ell"], self.tol["mean_length"], passed,
                           {"lengths": stats, "back_and_forth": [lower, upper]})

    def check_lift_divergence(self) -> CheckResult:
        pair = self._segment_pair()
        p = self._lift_params()
        panel = lifted_panel(self._panel(pair.mu, pair.sigma), p.ell)
        value = verify_lift_divergence(build_lift(pair, p), panel)
        tol = pair.certification + self.tol["lift_divergence_slack"]
        return CheckResult("lift_divergence", value, tol, value <= tol, {"certification": pair.certification})

    def check_lift_reconstruction(self) -> CheckResult:
        pair = self._segment_pair()
        nu, report = self._segment_run()
        start, end = np.asarray(pair.sigma.positions)[np.argsort(-pair.sigma.masses)]
        aligned = TestField.windowed_constant(end - start, 0.5 * (start + end),
                                              0.5 * float(np.linalg.norm(end - start))).normalized()
        target = pair_with_field(pair.mu, aligned)
        relative = abs(ensemble_action(nu, aligned) - target) / abs(target)

        mu0 = pair.mu.scaled(0.0)
        null_pair = DivergencePair.certify(mu0, dipole(Scenario("segment")), self._panel(pair.mu, pair.sigma),
                                           threshold=math.inf)
        null_nu, null_report = decompose_with_divergence(null_pair, self._lift_params(),
                                                         self._panel(pair.mu, pair.sigma), threads=self.threads)
        null_ratios = [e.gap / (self.tol["limit_case_se"] * e.standard_error) if e.standard_error > 0 else
                       (0.0 if e.gap == 0.0 else math.inf) for e in null_report.reconstruction]
        accounting = max(report.mass_accounting_error, null_report.mass_accounting_error)
        passed = (relative <= self.tol["lift_relative"] and max(null_ratios) <= 1.0
                  and accounting <= self.tol["mass_budget"])
        return CheckResult("lift_reconstruction", relative, self.tol["lift_relative"], passed,
                           {"null_ratios": null_ratios, "accounting": accounting,
                            "kept_curves": report.kept_curves, "null_kept_curves": len(null_nu)})

    def check_vertical_speed(self) -> CheckResult:
        _, report = self._segment_run()
        v = report.vertical
        bound = self.tol["vertical_speed"]
        passed = v.plus_count > 0 and v.minus_count > 0 and v.plus_mean >= bound and v.minus_mean <= -bound
        return CheckResult("vertical_speed", min(v.plus_mean, -v.minus_mean), bound, passed, v.to_dict())

    def check_determinism(self) -> CheckResult:
        mu, _ = self._scenario("loop")
        panel = self._panel(mu)
        params = self._params(n_curves=DETERMINISM_CURVES)
        regions = (HalfSpace([1.0, 0.0], 0.0), Ball([1.0, 0.0], 0.3))

        def run(threads: int) -> Dict[str, Any]:
            nu = decompose_div_free(mu, params, threads=threads)
            return build_report(mu, nu, params, panel, regions).to_dict()

        first, second, parallel = run(1), run(1), run(4)
        identical = not compare_reports(first, second)
        spread = max_scalar_difference(first, parallel)
        tol = self.tol["determinism"]
        return CheckResult("determinism", spread, tol, identical and spread <= tol,
                           {"bit_identical_rerun": identical})

    def run(self, only: Optional[Sequence[str]] = None) -> SuiteReport:
        names = list(only) if only else list(self.CHECKS)
        results = []
        wall_time: Dict[str, float] = {}
        began = time.perf_counter()
        for name in names:
            if name not in self.CHECKS:
                raise KeyError(f"unknown check {name!r}")
            logger.info(f"Running check {name}")
            tick = time.perf_counter()
            try:
                result = getattr(self, f"check_{name}")()
            except SolenoidError as e:
                logger.error(f"Check {name} raised {type(e).__name__}: {e}")
                result = CheckResult(name, math.nan, math.nan, False, {"error": str(e)})
            wall_time[name] = time.perf_counter() - tick
            logger.info(f"Check {name} took {wall_time[name]:.1f} s")
            if not result.passed:
                logger.warning(f"Check {name} failed: measured {result.measured} vs {result.tolerance}")
            results.append(result)
        wall_time["total"] = time.perf_counter() - began
        params = {"seed": self.seed,
                  "config": {name: self.config.section(name) for name in ("loop", "segment", "panel", "flow",
                                                                         "decompose", "liouville", "lift")}}
        stamp = datetime.now(timezone.utc).isoformat()
        return SuiteReport(results, params, stamp, wall_time)
