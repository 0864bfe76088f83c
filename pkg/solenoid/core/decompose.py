"""Curve decomposition of a (nearly) divergence-free charge.

Starting points are exact draws from rho_eps; each is flowed for time ell along
the mollified drift and the resulting curve gets weight Var(mu) / (ell N).
"""
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy.spatial import KDTree

from .charge import AtomicCharge, divergence_action, fixed_order_sum, pair_with_field, total_variation
from .curves import (CurveEnsemble, curve_actions, ensemble_action, ensemble_mass, occupation_times,
                     path_lengths)
from .errors import DimensionMismatchError, EmptyChargeError, EmptyPanelError, InvalidParameterError
from .fields import FieldPanel
from .flow import FlowConfig, integrate_batch
from .mollifier import MollifiedCharge, region_mass, sample_rho, smoothed_action, smoothed_function_integral
from .regions import Region

logger = logging.getLogger(__name__)

SUPPORT_RADIUS_FACTOR = 5.0


@dataclass(frozen=True)
class DecomposeParams:
    epsilon: float
    n_curves: int
    flow: FlowConfig
    seed: int = 0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidParameterError(f"epsilon must be positive, got {self.epsilon}")
        if self.n_curves < 1:
            raise InvalidParameterError(f"need at least one curve, got {self.n_curves}")
        if self.seed < 0:
            raise InvalidParameterError(f"seed must be non-negative, got {self.seed}")

    @property
    def ell(self) -> float:
        return self.flow.ell

    def to_dict(self) -> Dict[str, Any]:
        return {"epsilon": self.epsilon, "n_curves": self.n_curves, "seed": self.seed,
                "flow": self.flow.to_dict()}


def decompose_div_free(mu: AtomicCharge, p: DecomposeParams, threads: int = 1) -> CurveEnsemble:
    if mu.is_empty():
        raise EmptyChargeError("cannot decompose the zero charge")
    mc = MollifiedCharge(mu, p.epsilon)
    logger.info(f"Sampling {p.n_curves} starts from rho_eps (eps={p.epsilon}, seed={p.seed})")
    starts = sample_rho(mc, p.seed, p.n_curves)
    logger.info(f"Integrating {p.n_curves} curves over [0, {p.ell}] with h={p.flow.h}")
    paths = integrate_batch(mc, starts, p.flow, threads=threads)
    weights = np.full(p.n_curves, mc.variation / (p.ell * p.n_curves))
    return CurveEnsemble(p.ell, paths, weights, dim=mu.dim)


def weighted_standard_error(weights: np.ndarray, values: np.ndarray) -> float:
    """Standard error of sum_j w_j a_j read as N times a sample mean."""
    n = values.size
    if n < 2:
        return 0.0
    return float(np.sqrt(n) * np.std(weights * values, ddof=1))


@dataclass
class FieldError:
    ensemble: float
    smoothed: float
    raw: float
    standard_error: float

    @property
    def smoothed_gap(self) -> float:
        return abs(self.ensemble - self.smoothed)

    @property
    def raw_gap(self) -> float:
        return abs(self.ensemble - self.raw)

    def to_dict(self) -> Dict[str, float]:
        out = asdict(self)
        out.update(smoothed_gap=self.smoothed_gap, raw_gap=self.raw_gap)
        return out


def reconstruction_error(mu: AtomicCharge, nu: CurveEnsemble, eps: float,
                         panel: FieldPanel) -> List[FieldError]:
    """Per panel field: ensemble action against the smoothed and the raw pairing with mu."""
    if mu.dim != nu.dim or panel.dim != mu.dim:
        raise DimensionMismatchError(f"charge R^{mu.dim}, ensemble R^{nu.dim}, panel R^{panel.dim}")
    mc = MollifiedCharge(mu, eps)
    errors = []
    for phi in panel.fields:
        actions = curve_actions(nu, phi)
        errors.append(FieldError(ensemble=ensemble_action(nu, phi),
                                 smoothed=smoothed_action(mc, phi),
                                 raw=pair_with_field(mu, phi),
                                 standard_error=weighted_standard_error(nu.weights, actions)))
    return errors


def check_div_free(mu: AtomicCharge, panel: FieldPanel) -> float:
    """max |<Div mu, psi>| / (Var(mu) sup|grad psi|) over the panel functions."""
    if not panel.functions:
        raise EmptyPanelError("check_div_free needs at least one panel function")
    if mu.is_empty():
        return 0.0
    var = total_variation(mu)
    return max(abs(divergence_action(mu, psi)) / (var * psi.gradient_bound())
               for psi in panel.functions)


@dataclass
class EndpointError:
    start_sum: float
    rho_integral: float
    start_se: float
    cancellation: float
    cancellation_se: float

    @property
    def start_error(self) -> float:
        return abs(self.start_sum - self.rho_integral)

    def to_dict(self) -> Dict[str, float]:
        out = asdict(self)
        out["start_error"] = self.start_error
        return out


def endpoint_identity_error(nu: CurveEnsemble, mu: AtomicCharge, eps: float,
                            panel: FieldPanel) -> List[EndpointError]:
    """Start points against rho_eps, and start-vs-end cancellation, per panel function."""
    if not panel.functions:
        raise EmptyPanelError("endpoint_identity_error needs panel functions")
    mc = MollifiedCharge(mu, eps)
    starts, ends = nu.paths[:, 0], nu.paths[:, -1]
    out = []
    for psi in panel.functions:
        at_start = psi.value(starts)
        diff = at_start - psi.value(ends)
        out.append(EndpointError(
            start_sum=nu.ell * fixed_order_sum(nu.weights * at_start),
            rho_integral=smoothed_function_integral(mc, psi),
            start_se=nu.ell * weighted_standard_error(nu.weights, at_start),
            cancellation=abs(fixed_order_sum(nu.weights * diff)),
            cancellation_se=weighted_standard_error(nu.weights, diff)))
    return out


def length_statistics(nu: CurveEnsemble) -> Dict[str, float]:
    if len(nu) == 0:
        return {"mean": 0.0, "min": 0.0, "max": 0.0, "mean_over_ell": 0.0, "max_over_ell": 0.0}
    lengths = path_lengths(nu)
    mean = float(np.mean(lengths))
    return {"mean": mean, "min": float(lengths.min()), "max": float(lengths.max()),
            "mean_over_ell": mean / nu.ell, "max_over_ell": float(lengths.max()) / nu.ell}


def support_concentration(nu: CurveEnsemble, mu: AtomicCharge, radius: float) -> float:
    """Fraction of curve samples farther than radius from every atom of mu."""
    if len(nu) == 0:
        return 0.0
    if mu.is_empty():
        return 1.0
    samples = nu.paths.reshape(-1, nu.dim)
    dist, _ = KDTree(mu.positions).query(samples, k=1, distance_upper_bound=radius)
    return float(np.mean(~np.isfinite(dist)))


@dataclass
class OccupationError:
    region: Dict[str, Any]
    ensemble: float
    exact: float
    standard_error: float

    @property
    def error(self) -> float:
        return abs(self.ensemble - self.exact)

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["error"] = self.error
        return out


def occupation_errors(nu: CurveEnsemble, mc: MollifiedCharge,
                      regions: Sequence[Region]) -> List[OccupationError]:
    """Occupation of the ensemble against rho_eps(A); equal in expectation when rho_eps is invariant."""
    out = []
    for region in regions:
        times = occupation_times(nu, region)
        out.append(OccupationError(region=region.to_dict(),
                                   ensemble=fixed_order_sum(nu.weights * times),
                                   exact=region_mass(mc, region),
                                   standard_error=weighted_standard_error(nu.weights, times)))
    return out


@dataclass
class DecompositionReport:
    params: Dict[str, Any]
    variation: float
    mass: float
    mass_relative_error: float
    div_free: float
    lengths: Dict[str, float]
    support_fraction: float
    reconstruction: List[FieldError] = field(default_factory=list)
    endpoint: List[EndpointError] = field(default_factory=list)
    occupation: List[OccupationError] = field(default_factory=list)
    panel: Optional[Dict[str, Any]] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "params": self.params,
            "variation": self.variation,
            "mass": self.mass,
            "mass_relative_error": self.mass_relative_error,
            "div_free": self.div_free,
            "lengths": self.lengths,
            "support_fraction": self.support_fraction,
            "reconstruction": [e.to_dict() for e in self.reconstruction],
            "endpoint": [e.to_dict() for e in self.endpoint],
            "occupation": [e.to_dict() for e in self.occupation],
            "panel": self.panel,
        }


def build_report(mu: AtomicCharge, nu: CurveEnsemble, params: DecomposeParams, panel: FieldPanel,
                 regions: Sequence[Region] = ()) -> DecompositionReport:
    var = total_variation(mu)
    mass = ensemble_mass(nu)
    target = var / params.ell
    mc = MollifiedCharge(mu, params.epsilon)
    report = DecompositionReport(
        params=params.to_dict(),
        variation=var,
        mass=mass,
        mass_relative_error=abs(mass - target) / target,
        div_free=check_div_free(mu, panel),
        lengths=length_statistics(nu),
        support_fraction=support_concentration(nu, mu, SUPPORT_RADIUS_FACTOR * params.epsilon),
        reconstruction=reconstruction_error(mu, nu, params.epsilon, panel),
        endpoint=endpoint_identity_error(nu, mu, params.epsilon, panel),
        occupation=occupation_errors(nu, mc, regions),
        panel=panel.spec(),
    )
    logger.info(f"Report: mass={mass:.12g} (Var/ell={target:.12g}), "
                f"mean length/ell={report.lengths['mean_over_ell']:.4f}")
    return report


def mollification_gaps(mu: AtomicCharge, schedule: Sequence[float], panel: FieldPanel) -> List[List[float]]:
    """|<mu * g_eps, phi> - <mu, phi>| per epsilon (rows) and panel field (columns)."""
    gaps = []
    for eps in schedule:
        mc = MollifiedCharge(mu, eps)
        gaps.append([abs(smoothed_action(mc, phi) - pair_with_field(mu, phi)) for phi in panel.fields])
    return gaps


def refinement_study(mu: AtomicCharge, params: DecomposeParams, schedule: Sequence[float],
                     panel: FieldPanel, threads: int = 1) -> List[DecompositionReport]:
    """One full decomposition and report per epsilon of the schedule."""
    reports = []
    for eps in schedule:
        p = replace(params, epsilon=eps)
        nu = decompose_div_free(mu, p, threads=threads)
        reports.append(build_report(mu, nu, p, panel))
    return reports
