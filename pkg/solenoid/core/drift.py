from abc import ABC, abstractmethod

import numpy as np

from .errors import DimensionMismatchError, InvalidParameterError


class DriftField(ABC):
    """Bounded vector field |phi| <= 1 whose flow produces curves in K_ell."""

    @property
    @abstractmethod
    def dim(self) -> int:
        pass

    @abstractmethod
    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Drift at points of shape (B, dim); returns shape (B, dim)."""
        pass

    def _check(self, points: np.ndarray):
        if points.shape[-1] != self.dim:
            raise DimensionMismatchError(f"drift in R^{self.dim}, points of shape {points.shape}")


class ConstantDrift(DriftField):
    def __init__(self, direction):
        direction = np.asarray(direction, dtype=float).reshape(-1)
        norm = np.linalg.norm(direction)
        if norm == 0.0 or norm > 1.0 + 1e-12:
            raise InvalidParameterError(f"constant drift needs 0 < |v| <= 1, got {norm}")
        self.direction = direction

    @property
    def dim(self) -> int:
        return self.direction.size

    def evaluate(self, points):
        points = np.asarray(points, dtype=float)
        self._check(points)
        return np.broadcast_to(self.direction, points.shape).copy()


class RotationalDrift(DriftField):
    """phi(x) = (-x_2, x_1) / |x|: unit-speed circles about the origin.

    The exact flow from x0 = r(cos a, sin a) is r(cos(a + t/r), sin(a + t/r)).
    """

    @property
    def dim(self) -> int:
        return 2

    def evaluate(self, points):
        points = np.asarray(points, dtype=float)
        self._check(points)
        radius = np.linalg.norm(points, axis=-1, keepdims=True)
        return np.stack([-points[..., 1], points[..., 0]], axis=-1) / radius

    @staticmethod
    def exact(x0, t: float) -> np.ndarray:
        x0 = np.asarray(x0, dtype=float)
        r = float(np.linalg.norm(x0))
        angle = np.arctan2(x0[1], x0[0]) + t / r
        return r * np.array([np.cos(angle), np.sin(angle)])
