"""Gaussian mollification of atomic charges.

With g_eps the centred Gaussian density of width eps,
    drift   phi_eps = (mu * g_eps) / (||mu|| * g_eps),
    density r_eps   = ||mu|| * g_eps,
and rho_eps = r_eps dx is the Gaussian mixture sum_i |w_i| N(x_i, eps^2 I).
"""
import logging
from typing import Tuple, Union

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.special import logsumexp, ndtr
from scipy.stats import chi2, ncx2

from .charge import AtomicCharge, fixed_order_sum, total_variation
from .drift import DriftField
from .errors import (DimensionMismatchError, EmptyChargeError, InvalidParameterError,
                     QuadratureLimitError, UnsupportedRegionError)
from .fields import TestFunction, VectorField
from .regions import Ball, HalfSpace, Region

logger = logging.getLogger(__name__)

EVAL_BLOCK = 1024
DEFAULT_QUADRATURE_ORDER = 20
DEFAULT_QUADRATURE_MAX_DIM = 4


class MollifiedCharge(DriftField):
    """A nonzero atomic charge seen through a Gaussian kernel of width epsilon."""

    def __init__(self, source: AtomicCharge, epsilon: float):
        if source.is_empty():
            raise EmptyChargeError("cannot mollify the zero charge")
        if not epsilon > 0:
            raise InvalidParameterError(f"epsilon must be positive, got {epsilon}")
        self.source = source
        self.epsilon = float(epsilon)
        self.masses = source.masses
        self.variation = total_variation(source)
        self._positions_t = np.ascontiguousarray(source.positions.T)
        self._position_norms = np.sum(source.positions ** 2, axis=1)[None, :]

    @property
    def dim(self) -> int:
        return self.source.dim

    def __repr__(self):
        return f"<MollifiedCharge atoms={len(self.source)} eps={self.epsilon}>"

    def _exponents(self, pts: np.ndarray) -> np.ndarray:
        # |x - X|^2 = |x|^2 - 2 x.X + |X|^2, clipped at 0 against cancellation
        sq = np.sum(pts * pts, axis=1)[:, None] - 2.0 * (pts @ self._positions_t) + self._position_norms
        np.maximum(sq, 0.0, out=sq)
        sq *= -0.5 / self.epsilon ** 2
        return sq

    def evaluate(self, points) -> np.ndarray:
        """Drift at a batch of points, shape (B, dim)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        self._check(pts)
        out = np.empty_like(pts)
        for lo in range(0, pts.shape[0], EVAL_BLOCK):
            kernel = self._exponents(pts[lo:lo + EVAL_BLOCK])
            # shift by the row maximum: far from every atom both sums underflow otherwise
            kernel -= kernel.max(axis=1, keepdims=True)
            np.exp(kernel, out=kernel)
            num = kernel @ self.source.weights
            den = kernel @ self.masses
            out[lo:lo + EVAL_BLOCK] = num / den[:, None]
        return out

    def log_density(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        self._check(pts)
        norm = -0.5 * self.dim * np.log(2.0 * np.pi) - self.dim * np.log(self.epsilon)
        out = np.empty(pts.shape[0])
        for lo in range(0, pts.shape[0], EVAL_BLOCK):
            expo = self._exponents(pts[lo:lo + EVAL_BLOCK])
            out[lo:lo + EVAL_BLOCK] = logsumexp(expo, axis=1, b=self.masses) + norm
        return out

    def density(self, points) -> np.ndarray:
        return np.exp(self.log_density(points))


def _single_or_batch(x, values: np.ndarray):
    return values[0] if np.ndim(x) == 1 else values


def drift_eval(mc: MollifiedCharge, x) -> np.ndarray:
    if np.shape(x)[-1] != mc.dim:
        raise DimensionMismatchError(f"point of shape {np.shape(x)} for a charge in R^{mc.dim}")
    return _single_or_batch(x, mc.evaluate(x))


def density_eval(mc: MollifiedCharge, x) -> Union[float, np.ndarray]:
    if np.shape(x)[-1] != mc.dim:
        raise DimensionMismatchError(f"point of shape {np.shape(x)} for a charge in R^{mc.dim}")
    values = mc.density(x)
    return float(values[0]) if np.ndim(x) == 1 else values


def sample_rho(mc: MollifiedCharge, seed: int, n: int, return_atoms: bool = False):
    """Exact i.i.d. draws from rho_eps / Var(mu).

    Draw j uses its own child of SeedSequence(seed), so the first k draws do not
    depend on n and any batch of indices can be drawn independently.
    """
    if n < 1:
        raise InvalidParameterError(f"need at least one sample, got {n}")
    if seed < 0:
        raise InvalidParameterError(f"seed must be non-negative, got {seed}")
    cdf = np.cumsum(mc.masses) / mc.variation
    cdf[-1] = 1.0
    last = len(mc.source) - 1
    points = np.empty((n, mc.dim))
    atoms = np.empty(n, dtype=np.int64)
    for j, child in enumerate(np.random.SeedSequence(seed).spawn(n)):
        rng = np.random.default_rng(child)
        idx = min(int(np.searchsorted(cdf, rng.random(), side="right")), last)
        atoms[j] = idx
        points[j] = mc.source.positions[idx] + mc.epsilon * rng.standard_normal(mc.dim)
    if return_atoms:
        return points, atoms
    return points


def _tensor_rule(dim: int, order: int, max_dim: int) -> Tuple[np.ndarray, np.ndarray]:
    if dim > max_dim:
        raise QuadratureLimitError(
            f"tensor Gauss-Hermite in R^{dim} exceeds the limit of {max_dim} dimensions; "
            f"use method='monte_carlo'")
    nodes, weights = hermegauss(order)
    weights = weights / np.sqrt(2.0 * np.pi)
    grid = np.stack(np.meshgrid(*([nodes] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    w = np.ones(1)
    for _ in range(dim):
        w = np.outer(w, weights).reshape(-1)
    return grid, w


def _atom_block(q: int) -> int:
    return max(1, 200000 // max(q, 1))


def smoothed_action(mc: MollifiedCharge, phi: VectorField, order: int = DEFAULT_QUADRATURE_ORDER,
                    max_dim: int = DEFAULT_QUADRATURE_MAX_DIM, method: str = "quadrature",
                    seed: int = 0, n_samples: int = 4096) -> float:
    """<mu * g_eps, phi> = sum_i <w_i, (g_eps * phi)(x_i)>."""
    if phi.dim != mc.dim:
        raise DimensionMismatchError(f"field in R^{phi.dim}, charge in R^{mc.dim}")
    if method == "monte_carlo":
        offsets = np.random.default_rng(seed).standard_normal((n_samples, mc.dim))
        rule = np.full(n_samples, 1.0 / n_samples)
    elif method == "quadrature":
        offsets, rule = _tensor_rule(mc.dim, order, max_dim)
    else:
        raise InvalidParameterError(f"unknown method {method!r}")
    q = rule.size
    pos, wts = mc.source.positions, mc.source.weights
    per_atom = np.empty(len(mc.source))
    block = _atom_block(q)
    for lo in range(0, len(mc.source), block):
        nodes = pos[lo:lo + block, None, :] + mc.epsilon * offsets[None, :, :]
        vals = phi.value(nodes.reshape(-1, mc.dim)).reshape(nodes.shape)
        smoothed = np.einsum("q,bqk->bk", rule, vals)
        per_atom[lo:lo + block] = np.sum(wts[lo:lo + block] * smoothed, axis=1)
    return fixed_order_sum(per_atom)


def smoothed_function_integral(mc: MollifiedCharge, psi: TestFunction,
                               order: int = DEFAULT_QUADRATURE_ORDER,
                               max_dim: int = DEFAULT_QUADRATURE_MAX_DIM) -> float:
    """int psi d(rho_eps) = sum_i |w_i| E[psi(x_i + eps Z)]."""
    if psi.dim != mc.dim:
        raise DimensionMismatchError(f"function in R^{psi.dim}, charge in R^{mc.dim}")
    offsets, rule = _tensor_rule(mc.dim, order, max_dim)
    pos = mc.source.positions
    per_atom = np.empty(len(mc.source))
    block = _atom_block(rule.size)
    for lo in range(0, len(mc.source), block):
        nodes = pos[lo:lo + block, None, :] + mc.epsilon * offsets[None, :, :]
        vals = psi.value(nodes.reshape(-1, mc.dim)).reshape(nodes.shape[:2])
        per_atom[lo:lo + block] = vals @ rule
    return fixed_order_sum(mc.masses * per_atom)


def region_mass(mc: MollifiedCharge, region: Region) -> float:
    """rho_eps(A) in closed form for half-spaces and balls."""
    if region.dim != mc.dim:
        raise DimensionMismatchError(f"region in R^{region.dim}, charge in R^{mc.dim}")
    pos = mc.source.positions
    if isinstance(region, HalfSpace):
        scale = mc.epsilon * np.linalg.norm(region.normal)
        probs = ndtr((pos @ region.normal - region.offset) / scale)
    elif isinstance(region, Ball):
        nc = np.sum((pos - region.center) ** 2, axis=1) / mc.epsilon ** 2
        level = (region.radius / mc.epsilon) ** 2
        safe_nc = np.where(nc > 0.0, nc, 1.0)
        probs = np.where(nc > 0.0, ncx2.cdf(level, mc.dim, safe_nc), chi2.cdf(level, mc.dim))
    else:
        raise UnsupportedRegionError(f"no closed form for {type(region).__name__}")
    return fixed_order_sum(mc.masses * probs)
