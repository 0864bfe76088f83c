from abc import ABC, abstractmethod
from typing import Any, Dict

import numpy as np

from .errors import DimensionMismatchError, InvalidParameterError, UnsupportedRegionError


class Region(ABC):
    """Borel set with exact segment clipping."""

    @property
    @abstractmethod
    def dim(self) -> int:
        pass

    @abstractmethod
    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask over points of shape (..., dim)."""
        pass

    @abstractmethod
    def segment_fraction(self, p0: np.ndarray, p1: np.ndarray) -> np.ndarray:
        """Fraction of each straight segment p0[k] -> p1[k] lying in the region."""
        pass

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        pass

    def _check(self, points: np.ndarray):
        if points.shape[-1] != self.dim:
            raise DimensionMismatchError(f"region in R^{self.dim}, points of shape {points.shape}")


class Ball(Region):
    """Closed ball |x - center| <= radius."""

    def __init__(self, center, radius: float):
        self.center = np.asarray(center, dtype=float).reshape(-1)
        if not radius > 0:
            raise InvalidParameterError(f"ball radius must be positive, got {radius}")
        self.radius = float(radius)

    @property
    def dim(self) -> int:
        return self.center.size

    def contains(self, points):
        points = np.asarray(points, dtype=float)
        self._check(points)
        return np.sum((points - self.center) ** 2, axis=-1) <= self.radius ** 2

    def segment_fraction(self, p0, p1):
        p0 = np.asarray(p0, dtype=float)
        p1 = np.asarray(p1, dtype=float)
        self._check(p0)
        d = p1 - p0
        off = p0 - self.center
        a = np.sum(d * d, axis=-1)
        b = 2.0 * np.sum(off * d, axis=-1)
        c = np.sum(off * off, axis=-1) - self.radius ** 2
        frac = np.where(c <= 0.0, 1.0, 0.0)
        moving = a > 0.0
        disc = b * b - 4.0 * a * c
        ok = moving & (disc > 0.0)
        root = np.sqrt(np.where(ok, disc, 0.0))
        denom = np.where(moving, 2.0 * a, 1.0)
        s_in = np.clip((-b - root) / denom, 0.0, 1.0)
        s_out = np.clip((-b + root) / denom, 0.0, 1.0)
        return np.where(moving, np.where(ok, s_out - s_in, 0.0), frac)

    def to_dict(self):
        return {"type": "ball", "center": [float(v) for v in self.center], "radius": self.radius}


class HalfSpace(Region):
    """Closed half-space <normal, x> >= offset."""

    def __init__(self, normal, offset: float):
        self.normal = np.asarray(normal, dtype=float).reshape(-1)
        if not np.any(self.normal != 0.0):
            raise InvalidParameterError("half-space normal must be nonzero")
        self.offset = float(offset)

    @property
    def dim(self) -> int:
        return self.normal.size

    def complement(self) -> "HalfSpace":
        return HalfSpace(-self.normal, -self.offset)

    def contains(self, points):
        points = np.asarray(points, dtype=float)
        self._check(points)
        return points @ self.normal >= self.offset

    def segment_fraction(self, p0, p1):
        p0 = np.asarray(p0, dtype=float)
        p1 = np.asarray(p1, dtype=float)
        self._check(p0)
        f0 = p0 @ self.normal - self.offset
        g = (p1 - p0) @ self.normal
        still = g == 0.0
        cross = np.clip(-f0 / np.where(still, 1.0, g), 0.0, 1.0)
        frac = np.where(g > 0.0, 1.0 - cross, cross)
        return np.where(still, np.where(f0 >= 0.0, 1.0, 0.0), frac)

    def to_dict(self):
        return {"type": "halfspace", "normal": [float(v) for v in self.normal], "offset": self.offset}


class RegionFactory:
    @staticmethod
    def from_spec(spec: Dict[str, Any]) -> Region:
        kind = str(spec.get("type", "")).lower()
        if kind == "ball":
            return Ball(spec["center"], spec["radius"])
        elif kind == "halfspace":
            return HalfSpace(spec["normal"], spec["offset"])
        raise UnsupportedRegionError(f"unsupported region type {kind!r}; use 'ball' or 'halfspace'")
