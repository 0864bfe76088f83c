"""Smooth probes for weak actions.

Test functions are degree-one polynomials in the scaled offset u = (x - c)/r
times the Gaussian window exp(-|u|^2/2). They are not compactly supported,
but value and gradient fall below 1e-18 beyond ten radii, which is all the
weak-action comparisons need.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from .errors import DimensionMismatchError, InvalidParameterError

logger = logging.getLogger(__name__)

SAFETY_FACTOR = 1.05
WINDOW_REACH = 4.0
PROBE_BUDGET = 40000


def _as_points(x, dim: int) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if pts.shape[-1] != dim:
        raise DimensionMismatchError(f"expected points in R^{dim}, got shape {pts.shape}")
    return pts


def _readonly(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TestFunction:
    """psi(x) = scale * (a + b.u) * exp(-|u|^2 / 2) with u = (x - center) / radius.

    coeffs holds the constant a followed by the n linear coefficients b.
    """
    __test__ = False

    center: np.ndarray
    radius: float
    coeffs: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        center = _readonly(self.center).reshape(-1)
        coeffs = _readonly(self.coeffs).reshape(-1)
        if coeffs.size != center.size + 1:
            raise DimensionMismatchError(
                f"need {center.size + 1} coefficients for dim {center.size}, got {coeffs.size}")
        if not self.radius > 0:
            raise InvalidParameterError(f"radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "scale", float(self.scale))

    @classmethod
    def bump(cls, center, radius: float) -> "TestFunction":
        """Radially symmetric window with peak value 1 at the center."""
        center = np.asarray(center, dtype=float).reshape(-1)
        coeffs = np.zeros(center.size + 1)
        coeffs[0] = 1.0
        return cls(center, radius, coeffs)

    @classmethod
    def linear(cls, center, radius: float, slope) -> "TestFunction":
        """Windowed linear function whose gradient at the center is `slope`."""
        center = np.asarray(center, dtype=float).reshape(-1)
        slope = np.asarray(slope, dtype=float).reshape(-1)
        coeffs = np.concatenate(([0.0], slope * radius))
        return cls(center, radius, coeffs)

    @property
    def dim(self) -> int:
        return self.center.size

    def _window(self, pts: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        u = (pts - self.center) / self.radius
        poly = self.coeffs[0] + u @ self.coeffs[1:]
        window = np.exp(-0.5 * np.sum(u * u, axis=-1))
        return u, poly, window

    def value(self, x) -> np.ndarray:
        pts = _as_points(x, self.dim)
        _, poly, window = self._window(pts)
        return self.scale * poly * window

    def gradient(self, x) -> np.ndarray:
        pts = _as_points(x, self.dim)
        u, poly, window = self._window(pts)
        inner = self.coeffs[1:] - np.asarray(poly)[..., None] * u
        return (self.scale / self.radius) * inner * np.asarray(window)[..., None]

    def supremum(self) -> float:
        """Exact sup of |psi|; attained on the line through the center along b."""
        a = self.coeffs[0]
        beta = float(np.linalg.norm(self.coeffs[1:]))
        if beta == 0.0:
            return abs(self.scale * a)
        disc = np.sqrt(a * a + 4.0 * beta * beta)
        rho = np.array([(-a + disc), (-a - disc)]) / (2.0 * beta)
        vals = np.abs(a + beta * rho) * np.exp(-0.5 * rho * rho)
        return abs(self.scale) * float(vals.max())

    def gradient_bound(self) -> float:
        """Upper bound for sup |grad psi| from the triangle inequality along |u|."""
        a = abs(self.coeffs[0])
        beta = float(np.linalg.norm(self.coeffs[1:]))
        rho = np.linspace(0.0, 12.0, 4801)
        profile = (beta + (a + beta * rho) * rho) * np.exp(-0.5 * rho * rho)
        return abs(self.scale) / self.radius * float(profile.max())

    def rescaled(self, factor: float) -> "TestFunction":
        return TestFunction(self.center, self.radius, self.coeffs, self.scale * factor)

    def normalized(self) -> "TestFunction":
        sup = self.supremum()
        if sup == 0.0:
            return self
        return self.rescaled(1.0 / (sup * SAFETY_FACTOR))


class VectorField(ABC):
    """R^n-valued test field paired with charges and curves."""

    @property
    @abstractmethod
    def dim(self) -> int:
        pass

    @abstractmethod
    def value(self, x) -> np.ndarray:
        """Field values, shape (..., dim)."""
        pass


class TestField(VectorField):
    """phi = (psi_1, ..., psi_n) built from n test functions."""
    __test__ = False

    def __init__(self, components: Sequence[TestFunction]):
        components = tuple(components)
        if not components:
            raise InvalidParameterError("a test field needs at least one component")
        dim = components[0].dim
        if len(components) != dim or any(c.dim != dim for c in components):
            raise DimensionMismatchError(
                f"a field in R^{dim} needs {dim} components of that dimension")
        self.components = components

    @classmethod
    def windowed_constant(cls, direction, center, radius: float) -> "TestField":
        """Field equal to `direction` at the center, fading with a Gaussian window."""
        direction = np.asarray(direction, dtype=float).reshape(-1)
        center = np.asarray(center, dtype=float).reshape(-1)
        comps = []
        for value in direction:
            coeffs = np.zeros(center.size + 1)
            coeffs[0] = value
            comps.append(TestFunction(center, radius, coeffs))
        return cls(comps)

    @property
    def dim(self) -> int:
        return len(self.components)

    def value(self, x) -> np.ndarray:
        pts = _as_points(x, self.dim)
        return np.stack([c.value(pts) for c in self.components], axis=-1)

    def rescaled(self, factor: float) -> "TestField":
        return TestField([c.rescaled(factor) for c in self.components])

    def probe_supremum(self) -> float:
        """sup |phi| from a deterministic grid over the windows, polished locally."""
        centers = np.array([c.center for c in self.components])
        reach = np.array([WINDOW_REACH * c.radius for c in self.components])[:, None]
        lo = (centers - reach).min(axis=0)
        hi = (centers + reach).max(axis=0)
        per_axis = max(9, int(round(PROBE_BUDGET ** (1.0 / self.dim))))
        axes = [np.linspace(lo[k], hi[k], per_axis) for k in range(self.dim)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        norms = np.linalg.norm(self.value(grid), axis=-1)
        best = float(norms.max())
        for start in grid[np.argsort(norms)[-3:]]:
            res = minimize(lambda p: -float(np.sum(self.value(p) ** 2)), start, method="L-BFGS-B")
            best = max(best, float(np.sqrt(max(-res.fun, 0.0))))
        return best

    def normalized(self) -> "TestField":
        sup = self.probe_supremum()
        if sup == 0.0:
            return self
        return self.rescaled(1.0 / (sup * SAFETY_FACTOR))


class GradientField(VectorField):
    """phi = grad psi; used to check the fundamental theorem along curves."""

    def __init__(self, psi: TestFunction):
        self.psi = psi

    @property
    def dim(self) -> int:
        return self.psi.dim

    def value(self, x) -> np.ndarray:
        return self.psi.gradient(x)


@dataclass(frozen=True, eq=False)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = _readonly(self.lo).reshape(-1)
        hi = _readonly(self.hi).reshape(-1)
        if lo.shape != hi.shape:
            raise DimensionMismatchError("box corners differ in dimension")
        if lo.size == 0 or not np.all(hi > lo):
            raise InvalidParameterError(f"empty box [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def min_side(self) -> float:
        return float((self.hi - self.lo).min())

    def to_dict(self) -> Dict[str, Any]:
        return {"lo": [float(v) for v in self.lo], "hi": [float(v) for v in self.hi]}


@dataclass(frozen=True, eq=False)
class FieldPanel:
    seed: int
    fields: Tuple[VectorField, ...]
    functions: Tuple[TestFunction, ...]
    box: Box

    @property
    def dim(self) -> int:
        return self.box.dim

    def spec(self) -> Dict[str, Any]:
        """Panels travel as their generating spec, never by value."""
        return {"seed": self.seed, "n_fields": len(self.fields),
                "n_functions": len(self.functions), "box": self.box.to_dict()}


def eval_function(psi: TestFunction, x) -> np.ndarray:
    return psi.value(x)


def eval_gradient(psi: TestFunction, x) -> np.ndarray:
    return psi.gradient(x)


def _random_window(rng: np.random.Generator, box: Box) -> Tuple[np.ndarray, float]:
    center = rng.uniform(box.lo, box.hi)
    radius = rng.uniform(0.3, 0.6) * box.min_side
    return center, radius


def make_panel(seed: int, n_fields: int, n_functions: int, box: Box) -> FieldPanel:
    """Reproducible panel: identical (seed, counts, box) give identical probes."""
    if n_fields < 1 or n_functions < 1:
        raise InvalidParameterError("panel counts must be at least 1")
    rng = np.random.default_rng(seed)
    dim = box.dim
    fields: List[VectorField] = []
    for _ in range(n_fields):
        center, radius = _random_window(rng, box)
        comps = [TestFunction(center, radius, rng.standard_normal(dim + 1)) for _ in range(dim)]
        fields.append(TestField(comps).normalized())
    functions = []
    for _ in range(n_functions):
        center, radius = _random_window(rng, box)
        functions.append(TestFunction(center, radius, rng.standard_normal(dim + 1)).normalized())
    logger.debug(f"Panel seed={seed}: {n_fields} fields, {n_functions} functions in R^{dim}")
    return FieldPanel(seed, tuple(fields), tuple(functions), box)


def panel_from_spec(spec: Dict[str, Any]) -> FieldPanel:
    box = Box(spec["box"]["lo"], spec["box"]["hi"])
    return make_panel(int(spec["seed"]), int(spec["n_fields"]), int(spec["n_functions"]), box)
