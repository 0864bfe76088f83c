"""Built-in charges with known variation and, where it exists, known divergence."""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..core.charge import AtomicCharge, ScalarAtomicMeasure
from ..core.errors import InvalidParameterError
from ..core.fields import Box

logger = logging.getLogger(__name__)

SCENARIOS = ("loop", "two_loops", "segment", "null_charge", "single_atom")


@dataclass(frozen=True)
class Scenario:
    """loop: polygon inscribed in a circle, M chords, Var = 2 M r sin(pi / M).
    two_loops: two such circles of opposite orientation, centers +-separation/2 on the first axis.
    segment: M equal pieces of start -> end, Var = |end - start|, Div = delta_start - delta_end.
    null_charge: the empty charge in the plane.
    single_atom: one atom at start with weight end - start.
    """
    name: str
    atoms: int = 512
    radius: float = 1.0
    start: Tuple[float, ...] = (0.0, 0.0)
    end: Tuple[float, ...] = (1.0, 0.0)
    separation: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.name not in SCENARIOS:
            raise InvalidParameterError(f"unknown scenario {self.name!r}; choose from {', '.join(SCENARIOS)}")
        if self.name in ("loop", "two_loops") and self.atoms < 3:
            raise InvalidParameterError(f"a loop needs at least 3 atoms, got {self.atoms}")
        if self.atoms < 1:
            raise InvalidParameterError(f"atom count must be positive, got {self.atoms}")
        if not self.radius > 0:
            raise InvalidParameterError(f"radius must be positive, got {self.radius}")
        if len(self.start) != len(self.end):
            raise InvalidParameterError("start and end must share a dimension")
        if self.name in ("segment", "single_atom") and np.allclose(self.start, self.end, rtol=0.0, atol=0.0):
            raise InvalidParameterError("start and end must differ")
        if self.name == "two_loops" and not self.separation > 2.0 * self.radius:
            raise InvalidParameterError("two_loops needs separation > 2 * radius")

    def exact_variation(self) -> float:
        if self.name == "loop":
            return 2.0 * self.atoms * self.radius * math.sin(math.pi / self.atoms)
        if self.name == "two_loops":
            return 4.0 * self.atoms * self.radius * math.sin(math.pi / self.atoms)
        if self.name in ("segment", "single_atom"):
            return float(np.linalg.norm(np.subtract(self.end, self.start)))
        return 0.0


def _polygon(center, radius: float, atoms: int, orientation: float) -> Tuple[np.ndarray, np.ndarray]:
    angles = orientation * 2.0 * np.pi * np.arange(atoms + 1) / atoms
    vertices = np.asarray(center) + radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return 0.5 * (vertices[1:] + vertices[:-1]), np.diff(vertices, axis=0)


def dipole(s: Scenario) -> ScalarAtomicMeasure:
    """delta_start - delta_end: the divergence of any curve from start to end."""
    return ScalarAtomicMeasure(np.array([s.start, s.end], dtype=float), [1.0, -1.0])


def generate(s: Scenario) -> Tuple[AtomicCharge, Optional[ScalarAtomicMeasure]]:
    if s.name == "loop":
        mids, steps = _polygon((0.0, 0.0), s.radius, s.atoms, 1.0)
        charge, div = AtomicCharge(mids, steps), None
    elif s.name == "two_loops":
        half = 0.5 * s.separation
        m1, w1 = _polygon((-half, 0.0), s.radius, s.atoms, 1.0)
        m2, w2 = _polygon((half, 0.0), s.radius, s.atoms, -1.0)
        charge, div = AtomicCharge(np.vstack([m1, m2]), np.vstack([w1, w2])), None
    elif s.name == "segment":
        start, end = np.asarray(s.start, dtype=float), np.asarray(s.end, dtype=float)
        knots = start + np.linspace(0.0, 1.0, s.atoms + 1)[:, None] * (end - start)
        charge = AtomicCharge(0.5 * (knots[1:] + knots[:-1]), np.diff(knots, axis=0))
        div = dipole(s)
    elif s.name == "single_atom":
        start = np.asarray(s.start, dtype=float)
        charge, div = AtomicCharge(start[None], (np.asarray(s.end, dtype=float) - start)[None]), None
    else:
        charge, div = AtomicCharge.empty(len(s.start)), None
    logger.info(f"Generated scenario {s.name}: {len(charge)} atoms")
    return charge, div


def bounding_box(charge: AtomicCharge, sigma: Optional[ScalarAtomicMeasure] = None,
                 margin: float = 0.5) -> Box:
    """Axis box around every atom of the charge and of sigma, widened by margin."""
    parts = [charge.positions]
    if sigma is not None:
        parts.append(sigma.positions)
    points = np.vstack(parts)
    if points.shape[0] == 0:
        return Box(np.full(charge.dim, -1.0), np.full(charge.dim, 1.0))
    return Box(points.min(axis=0) - margin, points.max(axis=0) + margin)
