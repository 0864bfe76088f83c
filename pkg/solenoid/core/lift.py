"""Decomposition of charges whose divergence is a signed measure.

The pair (mu, sigma) with Div(mu) = sigma is lifted to the charge

    mu+ = (mu x (delta_0 - delta_ell), -sigma x lambda|[0, ell])

in R^{n+1}, which is divergence-free. Its curve decomposition is clipped to the
stretch between the first and last visit of the slab |t| <= delta around the
bottom plane and projected back to R^n.

Sign convention: g is the polar density of -sigma, so E+ = {g = +1} holds the
atoms of sigma with negative mass and lifted curves climb there.
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.spatial import KDTree

from .charge import (AtomicCharge, ScalarAtomicMeasure, divergence_action, fixed_order_sum, pair_with_field,
                     total_variation)
from .curves import Curve, CurveEnsemble, curve_actions, ensemble_action, ensemble_divergence
from .decompose import DecomposeParams, check_div_free, decompose_div_free, weighted_standard_error
from .errors import DimensionMismatchError, EmptyPanelError, InvalidParameterError, UncertifiedPairError
from .fields import Box, FieldPanel, VectorField, make_panel

logger = logging.getLogger(__name__)

DEFAULT_CERTIFICATION_THRESHOLD = 0.05
DIAGNOSTIC_RADIUS_FACTOR = 3.0


def _pair_normalizer(mu: AtomicCharge, sigma: ScalarAtomicMeasure, psi) -> float:
    return total_variation(mu) * psi.gradient_bound() + sigma.total_variation() * psi.supremum()


@dataclass(frozen=True, eq=False)
class DivergencePair:
    """A charge together with the signed measure claimed to be its divergence."""
    mu: AtomicCharge
    sigma: ScalarAtomicMeasure
    certification: float
    threshold: float = DEFAULT_CERTIFICATION_THRESHOLD

    def __post_init__(self):
        if self.mu.dim != self.sigma.dim:
            raise DimensionMismatchError(f"charge in R^{self.mu.dim}, divergence in R^{self.sigma.dim}")

    @classmethod
    def certify(cls, mu: AtomicCharge, sigma: ScalarAtomicMeasure, panel: FieldPanel,
                threshold: float = DEFAULT_CERTIFICATION_THRESHOLD) -> "DivergencePair":
        """Max over panel functions of |<sigma, psi> - <Div mu, psi>|, normalized."""
        if not panel.functions:
            raise EmptyPanelError("certification needs at least one panel function")
        if mu.dim != sigma.dim:
            raise DimensionMismatchError(f"charge in R^{mu.dim}, divergence in R^{sigma.dim}")
        worst = 0.0
        for psi in panel.functions:
            scale = _pair_normalizer(mu, sigma, psi)
            if scale > 0.0:
                worst = max(worst, abs(sigma.pair(psi) - divergence_action(mu, psi)) / scale)
        if worst > 0.8 * threshold:
            logger.warning(f"Certification error {worst:.3g} is close to the threshold {threshold}")
        return cls(mu, sigma, worst, threshold)

    @property
    def dim(self) -> int:
        return self.mu.dim

    @property
    def certified(self) -> bool:
        return self.certification <= self.threshold


@dataclass(frozen=True)
class LiftParams:
    """ell: column height and curve horizon; column_atoms: m; slab_width: delta."""
    ell: float
    column_atoms: int
    slab_width: float
    inner: DecomposeParams

    def __post_init__(self):
        if self.column_atoms < 4:
            raise InvalidParameterError(f"need at least 4 column atoms, got {self.column_atoms}")
        if not (0.0 < self.slab_width < self.ell / 4.0):
            raise InvalidParameterError(f"slab width must lie in (0, ell/4), got {self.slab_width}")
        if not math.isclose(self.inner.ell, self.ell, rel_tol=1e-12):
            raise InvalidParameterError(f"inner flow horizon {self.inner.ell} differs from ell {self.ell}")

    def to_dict(self) -> Dict[str, Any]:
        return {"ell": self.ell, "column_atoms": self.column_atoms, "slab_width": self.slab_width,
                "inner": self.inner.to_dict()}


def build_lift(pair: DivergencePair, p: LiftParams) -> AtomicCharge:
    if not pair.certified:
        raise UncertifiedPairError(
            f"certification error {pair.certification:.3g} exceeds threshold {pair.threshold}")
    n = pair.dim
    mu, sigma = pair.mu, pair.sigma
    ell, m = p.ell, p.column_atoms
    bottom = np.hstack([mu.positions, np.zeros((len(mu), 1))])
    top = np.hstack([mu.positions, np.full((len(mu), 1), ell)])
    horizontal = np.hstack([mu.weights, np.zeros((len(mu), 1))])
    heights = (np.arange(1, m + 1) - 0.5) * (ell / m)
    col_pos = np.hstack([np.repeat(sigma.positions, m, axis=0), np.tile(heights, len(sigma))[:, None]])
    col_wts = np.zeros((len(sigma) * m, n + 1))
    col_wts[:, n] = np.repeat(-sigma.masses * (ell / m), m)
    lifted = AtomicCharge(np.vstack([bottom, top, col_pos]),
                          np.vstack([horizontal, -horizontal, col_wts]), dim=n + 1)
    logger.info(f"Lift: {len(mu)} horizontal atoms per layer, {len(sigma)} columns of {m} atoms")
    return lifted


def lifted_panel(panel: FieldPanel, ell: float) -> FieldPanel:
    """Panel of the same seed and counts over the box extended by [0, ell]."""
    box = Box(np.append(panel.box.lo, 0.0), np.append(panel.box.hi, ell))
    return make_panel(panel.seed, len(panel.fields), len(panel.functions), box)


def verify_lift_divergence(lifted: AtomicCharge, panel: FieldPanel) -> float:
    if panel.dim != lifted.dim:
        raise DimensionMismatchError(f"panel in R^{panel.dim}, lift in R^{lifted.dim}")
    return check_div_free(lifted, panel)


def _clip_paths(paths: np.ndarray, slab_width: float) -> Tuple[np.ndarray, np.ndarray]:
    """Clip-and-hold each path to its first and last sample at height <= slab_width, then drop the last coordinate."""
    in_slab = paths[:, :, -1] <= slab_width
    visits = in_slab.any(axis=1)
    last_index = paths.shape[1] - 1
    first = np.argmax(in_slab, axis=1)
    last = last_index - np.argmax(in_slab[:, ::-1], axis=1)
    idx = np.clip(np.arange(paths.shape[1])[None, :], first[:, None], last[:, None])
    clipped = np.take_along_axis(paths[:, :, :-1], idx[:, :, None], axis=1)
    return clipped, visits


def classify_clip_project(gamma_plus: Curve, p: LiftParams) -> Optional[Curve]:
    """Projection of the clipped-and-held curve, or None if it never enters the slab."""
    clipped, visits = _clip_paths(gamma_plus.points[None], p.slab_width)
    if not visits[0]:
        return None
    return Curve(gamma_plus.ell, clipped[0])


def project_ensemble(nu_plus: CurveEnsemble, p: LiftParams) -> Tuple[CurveEnsemble, float]:
    """Projected ensemble of the slab-visiting curves and the discarded weight."""
    n = nu_plus.dim - 1
    if len(nu_plus) == 0:
        return CurveEnsemble(nu_plus.ell, np.zeros((0, 2, n)), np.zeros(0), dim=n), 0.0
    clipped, visits = _clip_paths(nu_plus.paths, p.slab_width)
    discarded = fixed_order_sum(nu_plus.weights[~visits])
    if not visits.any():
        logger.warning("No lifted curve visited the slab; projected ensemble is empty")
    nu = CurveEnsemble(nu_plus.ell, clipped[visits], nu_plus.weights[visits], dim=n)
    return nu, discarded


def slab_restricted_action(nu_plus: CurveEnsemble, phi: VectorField, slab_width: float) -> float:
    """<mu+ restricted to the bottom slab, (phi, 0)>, from the segments whose midpoint lies in the slab."""
    n = nu_plus.dim - 1
    if phi.dim != n:
        raise DimensionMismatchError(f"field in R^{phi.dim}, base space R^{n}")
    if len(nu_plus) == 0:
        return 0.0
    paths = nu_plus.paths
    base = paths[:, :, :n]
    vals = phi.value(base.reshape(-1, n)).reshape(base.shape)
    terms = np.sum(0.5 * (vals[:, 1:] + vals[:, :-1]) * np.diff(base, axis=1), axis=2)
    mid_height = 0.5 * (paths[:, 1:, -1] + paths[:, :-1, -1])
    per_curve = np.sum(np.where(mid_height <= slab_width, terms, 0.0), axis=1)
    return fixed_order_sum(nu_plus.weights * per_curve)


@dataclass
class VerticalSpeed:
    """Mean last-coordinate velocity of lifted curves near E+ (sigma < 0) and E- (sigma > 0)."""
    plus_mean: float
    plus_count: int
    minus_mean: float
    minus_count: int

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _near(points: np.ndarray, centers: np.ndarray, radius: float) -> np.ndarray:
    if centers.shape[0] == 0:
        return np.zeros(points.shape[0], dtype=bool)
    dist, _ = KDTree(centers).query(points, k=1, distance_upper_bound=radius)
    return np.isfinite(dist)


def vertical_speed_diagnostic(nu_plus: CurveEnsemble, pair: DivergencePair, p: LiftParams) -> VerticalSpeed:
    """Forward-difference vertical velocity over samples inside the strip near each sign class of sigma."""
    if len(nu_plus) == 0:
        return VerticalSpeed(float("nan"), 0, float("nan"), 0)
    n = pair.dim
    paths = nu_plus.paths
    dt = nu_plus.ell / (paths.shape[1] - 1)
    samples = paths[:, :-1].reshape(-1, n + 1)
    velocity = (np.diff(paths[:, :, -1], axis=1) / dt).reshape(-1)
    heights = samples[:, -1]
    inside = (heights > p.slab_width) & (heights < p.ell - p.slab_width)
    radius = DIAGNOSTIC_RADIUS_FACTOR * p.inner.epsilon
    sigma = pair.sigma
    plus = inside & _near(samples[:, :n], sigma.positions[sigma.masses < 0], radius)
    minus = inside & _near(samples[:, :n], sigma.positions[sigma.masses > 0], radius)

    def mean(mask):
        return float(np.mean(velocity[mask])) if mask.any() else float("nan")

    return VerticalSpeed(mean(plus), int(plus.sum()), mean(minus), int(minus.sum()))


@dataclass
class ProjectedFieldError:
    ensemble: float
    target: float
    standard_error: float
    slab_action: float

    @property
    def gap(self) -> float:
        return abs(self.ensemble - self.target)

    @property
    def relative(self) -> float:
        return self.gap / abs(self.target) if self.target != 0.0 else float("inf")

    def to_dict(self) -> Dict[str, float]:
        out = asdict(self)
        out.update(gap=self.gap, relative=self.relative)
        return out


@dataclass
class DivergenceGap:
    """|<Div nu, psi> - <sigma, psi>| for the projected ensemble."""
    ensemble: float
    target: float
    standard_error: float

    @property
    def gap(self) -> float:
        return abs(self.ensemble - self.target)

    def to_dict(self) -> Dict[str, float]:
        out = asdict(self)
        out["gap"] = self.gap
        return out


@dataclass
class LiftReport:
    params: Dict[str, Any]
    certification: float
    lift_divergence: float
    lift_variation: float
    kept_weight: float
    discarded_weight: float
    kept_curves: int
    reconstruction: List[ProjectedFieldError] = field(default_factory=list)
    divergence: List[DivergenceGap] = field(default_factory=list)
    vertical: Optional[VerticalSpeed] = None
    panel: Optional[Dict[str, Any]] = None

    @property
    def mass_accounting_error(self) -> float:
        target = self.lift_variation / self.params["ell"]
        return abs(self.kept_weight + self.discarded_weight - target) / target

    def to_dict(self) -> Dict[str, Any]:
        return {
            "params": self.params,
            "certification": self.certification,
            "lift_divergence": self.lift_divergence,
            "lift_variation": self.lift_variation,
            "kept_weight": self.kept_weight,
            "discarded_weight": self.discarded_weight,
            "kept_curves": self.kept_curves,
            "mass_accounting_error": self.mass_accounting_error,
            "reconstruction": [e.to_dict() for e in self.reconstruction],
            "divergence": [g.to_dict() for g in self.divergence],
            "vertical": self.vertical.to_dict() if self.vertical else None,
            "panel": self.panel,
        }


def decompose_with_divergence(pair: DivergencePair, p: LiftParams, panel: FieldPanel,
                              threads: int = 1) -> Tuple[CurveEnsemble, LiftReport]:
    if panel.dim != pair.dim:
        raise DimensionMismatchError(f"panel in R^{panel.dim}, charge in R^{pair.dim}")
    lifted = build_lift(pair, p)
    lift_var = total_variation(lifted)
    lift_div = verify_lift_divergence(lifted, lifted_panel(panel, p.ell))
    nu_plus = decompose_div_free(lifted, p.inner, threads=threads)
    nu, discarded = project_ensemble(nu_plus, p)
    kept = fixed_order_sum(nu.weights) if len(nu) else 0.0
    logger.info(f"Projected {len(nu)} of {len(nu_plus)} lifted curves; discarded weight {discarded:.6g}")

    reconstruction = []
    for phi in panel.fields:
        reconstruction.append(ProjectedFieldError(
            ensemble=ensemble_action(nu, phi),
            target=pair_with_field(pair.mu, phi),
            standard_error=weighted_standard_error(nu.weights, curve_actions(nu, phi)),
            slab_action=slab_restricted_action(nu_plus, phi, p.slab_width)))

    div_nu = ensemble_divergence(nu)
    divergence = []
    for psi in panel.functions:
        if len(nu):
            diff = psi.value(nu.paths[:, 0]) - psi.value(nu.paths[:, -1])
            se = weighted_standard_error(nu.weights, diff)
        else:
            se = 0.0
        divergence.append(DivergenceGap(div_nu.pair(psi), pair.sigma.pair(psi), se))

    report = LiftReport(
        params=p.to_dict(),
        certification=pair.certification,
        lift_divergence=lift_div,
        lift_variation=lift_var,
        kept_weight=kept,
        discarded_weight=discarded,
        kept_curves=len(nu),
        reconstruction=reconstruction,
        divergence=divergence,
        vertical=vertical_speed_diagnostic(nu_plus, pair, p),
        panel=panel.spec(),
    )
    return nu, report
