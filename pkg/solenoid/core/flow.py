"""Classical RK4 flow of a bounded drift field.

Paths are integrated in fixed-size chunks of starting points. The last chunk is
padded with copies of its final row, so the arithmetic done for any start does
not depend on how many threads run the chunks.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .curves import Curve
from .drift import DriftField
from .errors import DimensionMismatchError, InvalidParameterError, NonFiniteDriftError
from .fields import TestFunction
from .mollifier import MollifiedCharge, sample_rho

logger = logging.getLogger(__name__)

MAX_DEFAULT_RECORDS = 1024
STEP_TOLERANCE = 1e-9
DEFAULT_CHUNK = 256


@dataclass(frozen=True)
class FlowConfig:
    """ell: time horizon; step: RK4 step h; record_count: number of stored samples m + 1."""
    ell: float
    step: float
    record_count: Optional[int] = None
    n_steps: int = field(init=False)
    stride: int = field(init=False)

    def __post_init__(self):
        if not (self.ell > 0 and self.step > 0):
            raise InvalidParameterError(f"ell and step must be positive, got {self.ell}, {self.step}")
        if self.step > self.ell * (1.0 + STEP_TOLERANCE):
            raise InvalidParameterError(f"step {self.step} exceeds ell {self.ell}")
        ratio = self.ell / self.step
        n_steps = int(round(ratio))
        if abs(ratio - n_steps) > STEP_TOLERANCE * max(1.0, ratio):
            raise InvalidParameterError(f"ell / step = {ratio!r} is not an integer")
        if self.record_count is None:
            stride = 1
            while n_steps // stride > MAX_DEFAULT_RECORDS or n_steps % stride:
                stride += 1
        else:
            m = self.record_count - 1
            if m < 1 or n_steps % m:
                raise InvalidParameterError(
                    f"record_count - 1 = {m} must be a positive divisor of {n_steps} steps")
            stride = n_steps // m
        object.__setattr__(self, "n_steps", n_steps)
        object.__setattr__(self, "stride", stride)

    @property
    def m(self) -> int:
        return self.n_steps // self.stride

    @property
    def h(self) -> float:
        """Step actually taken: ell / n_steps, so record times are exact multiples."""
        return self.ell / self.n_steps

    def to_dict(self):
        return {"ell": self.ell, "step": self.step, "record_count": self.m + 1}


def _drift(drift: DriftField, x: np.ndarray) -> np.ndarray:
    v = drift.evaluate(x)
    if not np.all(np.isfinite(v)):
        raise NonFiniteDriftError(f"{type(drift).__name__} returned a non-finite value")
    return v


def _rk4_chunk(drift: DriftField, starts: np.ndarray, cfg: FlowConfig) -> np.ndarray:
    h = cfg.h
    x = starts.copy()
    out = np.empty((starts.shape[0], cfg.m + 1, starts.shape[1]))
    out[:, 0] = starts
    for k in range(1, cfg.n_steps + 1):
        k1 = _drift(drift, x)
        k2 = _drift(drift, x + 0.5 * h * k1)
        k3 = _drift(drift, x + 0.5 * h * k2)
        k4 = _drift(drift, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if k % cfg.stride == 0:
            out[:, k // cfg.stride] = x
    return out


def integrate_batch(drift: DriftField, starts, cfg: FlowConfig, threads: int = 1,
                    chunk: int = DEFAULT_CHUNK) -> np.ndarray:
    """Flow every start for time ell; returns paths of shape (N, m + 1, dim) in input order."""
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    if starts.shape[1] != drift.dim:
        raise DimensionMismatchError(f"starts in R^{starts.shape[1]}, drift in R^{drift.dim}")
    n = starts.shape[0]
    if n == 0:
        return np.zeros((0, cfg.m + 1, drift.dim))
    blocks: List[np.ndarray] = []
    for lo in range(0, n, chunk):
        block = starts[lo:lo + chunk]
        if block.shape[0] < chunk:
            pad = np.repeat(block[-1:], chunk - block.shape[0], axis=0)
            block = np.vstack([block, pad])
        blocks.append(block)
    logger.debug(f"Integrating {n} starts in {len(blocks)} chunks, {cfg.n_steps} steps, {threads} threads")

    def run(block):
        return _rk4_chunk(drift, block, cfg)

    if threads <= 1:
        results = [run(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, blocks))
    return np.concatenate(results)[:n]


def integrate(drift: DriftField, x0, cfg: FlowConfig) -> Curve:
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    paths = integrate_batch(drift, x0[None], cfg, chunk=1)
    return Curve(cfg.ell, paths[0])


@dataclass
class OrderStudy:
    step_counts: List[int]
    errors: List[float]
    orders: List[float]


def rk4_order_study(drift: DriftField, x0, exact: Callable[[np.ndarray, float], np.ndarray],
                    ell: float, step_counts: Sequence[int] = (32, 64, 128, 256)) -> OrderStudy:
    """Endpoint error against an exact solution; orders from consecutive step counts."""
    x0 = np.asarray(x0, dtype=float)
    target = np.asarray(exact(x0, ell), dtype=float)
    errors = []
    for count in step_counts:
        cfg = FlowConfig(ell, ell / count, record_count=2)
        end = integrate_batch(drift, x0[None], cfg, chunk=1)[0, -1]
        errors.append(float(np.linalg.norm(end - target)))
    orders = [math.log(errors[i] / errors[i + 1]) / math.log(step_counts[i + 1] / step_counts[i])
              for i in range(len(errors) - 1)]
    logger.info(f"RK4 order study: errors={errors} orders={orders}")
    return OrderStudy(list(step_counts), errors, orders)


@dataclass
class LiouvilleResult:
    """|mean psi(u(t, x_j)) - mean psi(x_j)| with the standard error of the paired differences."""
    discrepancy: float
    standard_error: float
    n_samples: int
    t: float

    def within(self, n_se: float, slack: float = 0.0) -> bool:
        return self.discrepancy <= n_se * self.standard_error + slack

    def to_dict(self):
        return {"discrepancy": self.discrepancy, "standard_error": self.standard_error,
                "n_samples": self.n_samples, "t": self.t}


def liouville_discrepancy(drift: MollifiedCharge, seed: int, n_samples: int, psi: TestFunction, t: float,
                          cfg: FlowConfig, threads: int = 1) -> LiouvilleResult:
    """Monte Carlo test that the flow of a mollified charge keeps rho_eps invariant up to time t."""
    if t < 0 or t > cfg.ell * (1.0 + STEP_TOLERANCE):
        raise InvalidParameterError(f"t must lie in [0, ell = {cfg.ell}], got {t}")
    if t == 0:
        return LiouvilleResult(0.0, 0.0, n_samples, 0.0)
    starts = sample_rho(drift, seed, n_samples)
    n_steps = max(1, int(math.ceil(t / cfg.step - STEP_TOLERANCE)))
    short = FlowConfig(t, t / n_steps, record_count=2)
    ends = integrate_batch(drift, starts, short, threads=threads)[:, -1]
    diffs = psi.value(ends) - psi.value(starts)
    se = float(np.std(diffs, ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else 0.0
    result = LiouvilleResult(abs(float(np.mean(diffs))), se, n_samples, float(t))
    logger.info(f"Liouville t={t}: discrepancy={result.discrepancy:.3e} se={se:.3e}")
    return result
