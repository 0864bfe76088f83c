"""Atomic charges: vector measures with finitely many atoms.

Sign convention: <Div(mu), psi> = -<mu, grad psi>, so a curve charge has
divergence delta_start - delta_end.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, TYPE_CHECKING

import numpy as np

from .errors import DegenerateCurveError, DimensionMismatchError, InvalidParameterError
from .fields import TestFunction, VectorField

if TYPE_CHECKING:
    from .curves import Curve

logger = logging.getLogger(__name__)


def fixed_order_sum(values) -> float:
    """Sum of a 1-d array in numpy's pairwise order; the order depends only on the length."""
    return float(np.sum(np.ascontiguousarray(values, dtype=float)))


def _canonical_order(positions: np.ndarray, tail: np.ndarray) -> np.ndarray:
    keys = np.hstack([positions, tail if tail.ndim == 2 else tail[:, None]])
    # lexsort treats its last key as primary
    return np.lexsort(keys.T[::-1])


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Atom:
    position: np.ndarray
    weight: np.ndarray


@dataclass(frozen=True, eq=False)
class PolarAtom:
    direction: np.ndarray
    mass: float
    position: np.ndarray


class AtomicCharge:
    """Finite sum of weighted Dirac masses w_i delta_{x_i} with w_i in R^n.

    Zero-weight atoms are dropped; atoms are kept sorted by position, then weight.
    """

    def __init__(self, positions, weights, dim: Optional[int] = None):
        pos = np.asarray(positions, dtype=float)
        wts = np.asarray(weights, dtype=float)
        if dim is None:
            if pos.ndim != 2 or pos.shape[0] == 0:
                raise InvalidParameterError("dim is required for an empty charge")
            dim = pos.shape[1]
        if dim < 1:
            raise InvalidParameterError(f"dimension must be positive, got {dim}")
        pos = pos.reshape(-1, dim) if pos.size else np.zeros((0, dim))
        wts = wts.reshape(-1, dim) if wts.size else np.zeros((0, dim))
        if pos.shape != wts.shape:
            raise DimensionMismatchError(f"positions {pos.shape} and weights {wts.shape} disagree")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(wts))):
            raise InvalidParameterError("atom positions and weights must be finite")
        keep = np.any(wts != 0.0, axis=1)
        pos, wts = pos[keep], wts[keep]
        order = _canonical_order(pos, wts)
        self.dim = int(dim)
        self.positions = _frozen(pos[order])
        self.weights = _frozen(wts[order])

    @classmethod
    def empty(cls, dim: int) -> "AtomicCharge":
        return cls(np.zeros((0, dim)), np.zeros((0, dim)), dim=dim)

    @property
    def atoms(self) -> List[Atom]:
        return [Atom(p, w) for p, w in zip(self.positions, self.weights)]

    @property
    def masses(self) -> np.ndarray:
        return np.linalg.norm(self.weights, axis=1)

    def __len__(self) -> int:
        return self.positions.shape[0]

    def is_empty(self) -> bool:
        return len(self) == 0

    def __eq__(self, other) -> bool:
        if not isinstance(other, AtomicCharge):
            return NotImplemented
        return (self.dim == other.dim
                and np.array_equal(self.positions, other.positions)
                and np.array_equal(self.weights, other.weights))

    def __repr__(self):
        return f"<AtomicCharge dim={self.dim} atoms={len(self)} Var={total_variation(self):.6g}>"

    def scaled(self, factor: float) -> "AtomicCharge":
        return AtomicCharge(self.positions, self.weights * factor, dim=self.dim)

    def __add__(self, other: "AtomicCharge") -> "AtomicCharge":
        return charge_sum(self, other)


class ScalarAtomicMeasure:
    """Signed measure sum_j m_j delta_{y_j}; zero masses are dropped."""

    def __init__(self, positions, masses, dim: Optional[int] = None):
        pos = np.asarray(positions, dtype=float)
        m = np.asarray(masses, dtype=float).reshape(-1)
        if dim is None:
            if pos.ndim != 2 or pos.shape[0] == 0:
                raise InvalidParameterError("dim is required for an empty measure")
            dim = pos.shape[1]
        pos = pos.reshape(-1, dim) if pos.size else np.zeros((0, dim))
        if pos.shape[0] != m.size:
            raise DimensionMismatchError(f"{pos.shape[0]} positions but {m.size} masses")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(m))):
            raise InvalidParameterError("atom positions and masses must be finite")
        keep = m != 0.0
        pos, m = pos[keep], m[keep]
        order = _canonical_order(pos, m)
        self.dim = int(dim)
        self.positions = _frozen(pos[order])
        self.masses = _frozen(m[order])

    @classmethod
    def empty(cls, dim: int) -> "ScalarAtomicMeasure":
        return cls(np.zeros((0, dim)), np.zeros(0), dim=dim)

    def __len__(self) -> int:
        return self.masses.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScalarAtomicMeasure):
            return NotImplemented
        return (self.dim == other.dim
                and np.array_equal(self.positions, other.positions)
                and np.array_equal(self.masses, other.masses))

    def __repr__(self):
        return f"<ScalarAtomicMeasure dim={self.dim} atoms={len(self)}>"

    def total_variation(self) -> float:
        return fixed_order_sum(np.abs(self.masses))

    def pair(self, psi: TestFunction) -> float:
        """<sigma, psi> = sum_j m_j psi(y_j)."""
        if psi.dim != self.dim:
            raise DimensionMismatchError(f"function in R^{psi.dim}, measure in R^{self.dim}")
        if len(self) == 0:
            return 0.0
        return fixed_order_sum(self.masses * psi.value(self.positions))

    def positive_part(self) -> "ScalarAtomicMeasure":
        sel = self.masses > 0
        return ScalarAtomicMeasure(self.positions[sel], self.masses[sel], dim=self.dim)

    def negative_part(self) -> "ScalarAtomicMeasure":
        """The negative atoms with their (negative) masses kept."""
        sel = self.masses < 0
        return ScalarAtomicMeasure(self.positions[sel], self.masses[sel], dim=self.dim)


def total_variation(mu: AtomicCharge) -> float:
    if mu.is_empty():
        return 0.0
    return fixed_order_sum(mu.masses)


def pair_with_field(mu: AtomicCharge, phi: VectorField) -> float:
    """<mu, phi> = sum_i <w_i, phi(x_i)>."""
    if phi.dim != mu.dim:
        raise DimensionMismatchError(f"field in R^{phi.dim}, charge in R^{mu.dim}")
    if mu.is_empty():
        return 0.0
    per_atom = np.sum(mu.weights * phi.value(mu.positions), axis=1)
    return fixed_order_sum(per_atom)


def divergence_action(mu: AtomicCharge, psi: TestFunction) -> float:
    """<Div(mu), psi> = -sum_i <w_i, grad psi(x_i)>."""
    if psi.dim != mu.dim:
        raise DimensionMismatchError(f"function in R^{psi.dim}, charge in R^{mu.dim}")
    if mu.is_empty():
        return 0.0
    per_atom = np.sum(mu.weights * psi.gradient(mu.positions), axis=1)
    return -fixed_order_sum(per_atom)


def polar_decompose(mu: AtomicCharge) -> List[PolarAtom]:
    masses = mu.masses
    directions = mu.weights / masses[:, None] if len(mu) else mu.weights
    return [PolarAtom(d, float(m), p) for d, m, p in zip(directions, masses, mu.positions)]


def polar_reassemble(polar: List[PolarAtom], dim: int) -> AtomicCharge:
    pos = np.array([p.position for p in polar], dtype=float).reshape(-1, dim)
    wts = np.array([p.direction * p.mass for p in polar], dtype=float).reshape(-1, dim)
    return AtomicCharge(pos, wts, dim=dim)


def charge_sum(a: AtomicCharge, b: AtomicCharge) -> AtomicCharge:
    """Atomwise addition; atoms sharing a position merge."""
    if a.dim != b.dim:
        raise DimensionMismatchError(f"cannot add charges in R^{a.dim} and R^{b.dim}")
    pos = np.vstack([a.positions, b.positions])
    wts = np.vstack([a.weights, b.weights])
    if pos.shape[0] == 0:
        return AtomicCharge.empty(a.dim)
    uniq, inverse = np.unique(pos, axis=0, return_inverse=True)
    merged = np.zeros_like(uniq)
    np.add.at(merged, inverse.reshape(-1), wts)
    return AtomicCharge(uniq, merged, dim=a.dim)


def curve_to_charge(gamma: "Curve") -> AtomicCharge:
    """Midpoint discretization of [gamma]: one atom per segment, weight = displacement."""
    pts = gamma.points
    if pts.shape[0] < 2:
        raise DegenerateCurveError("a curve charge needs at least two samples")
    mids = 0.5 * (pts[1:] + pts[:-1])
    steps = pts[1:] - pts[:-1]
    return AtomicCharge(mids, steps, dim=gamma.dim)
