"""Bayesian optimization over a mixed continuous/integer box.

The GP works in the unit cube. Each cube point maps to a *raw* point (the
continuous pre-image, with log-scaled dimensions in log10 units) and then,
through :func:`g_map`, to concrete hyperparameter values where integer
dimensions are rounded half-up.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from scipy.special import ndtr

from .errors import OutOfBounds
from .gp import GPState, KernelKind, Posterior, gp_fit

log = logging.getLogger(__name__)

N_CANDIDATES = 2048
N_PERTURBED = 10
PERTURB_SIGMA = 0.05
REFINE_STEPS = 50
REFINE_HALF_WIDTH = 0.1
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Dimension:
    name: str
    low: float
    high: float
    discrete: bool = False
    log_scale: bool = False

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError(f"{self.name}: lower bound must be below upper bound")
        if self.discrete and (self.low != int(self.low) or self.high != int(self.high)):
            raise ValueError(f"{self.name}: discrete bounds must be integers")
        if self.log_scale and self.low <= 0:
            raise ValueError(f"{self.name}: log-scaled bounds must be positive")

    @property
    def raw_bounds(self) -> tuple[float, float]:
        if self.log_scale:
            return math.log10(self.low), math.log10(self.high)
        return float(self.low), float(self.high)


@dataclass(frozen=True)
class SearchSpace:
    dims: tuple[Dimension, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(self.dims))
        names = [d.name for d in self.dims]
        if len(set(names)) != len(names):
            raise ValueError("dimension names must be unique")

    def __len__(self):
        return len(self.dims)

    @property
    def names(self) -> list[str]:
        return [d.name for d in self.dims]

    def without(self, name: str) -> "SearchSpace":
        return SearchSpace(tuple(d for d in self.dims if d.name != name))

    def to_raw(self, u) -> np.ndarray:
        """Unit-cube coordinates to raw coordinates."""
        u = np.asarray(u, dtype=float)
        lo, hi = np.array([d.raw_bounds for d in self.dims]).T
        return lo + u * (hi - lo)

    def to_unit(self, raw) -> np.ndarray:
        raw = np.asarray(raw, dtype=float)
        lo, hi = np.array([d.raw_bounds for d in self.dims]).T
        return (raw - lo) / (hi - lo)

    def embed(self, params: Mapping[str, float]) -> np.ndarray:
        """Raw coordinates of concrete hyperparameter values (inverse of g_map on its image)."""
        return np.array([
            math.log10(params[d.name]) if d.log_scale else float(params[d.name])
            for d in self.dims
        ])


def default_space(include_lag: bool = True) -> SearchSpace:
    dims = [
        Dimension("m", 2, 60, discrete=True),
        Dimension("dr", 0.0, 0.5),
        Dimension("lr", 1e-4, 1e-1, log_scale=True),
        Dimension("hu1", 4, 128, discrete=True),
        Dimension("hu2", 4, 128, discrete=True),
        Dimension("b", 8, 128, discrete=True),
    ]
    space = SearchSpace(tuple(dims))
    return space if include_lag else space.without("m")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def g_map(raw, space: SearchSpace) -> dict:
    """Map a raw point to hyperparameter values: round integer dimensions,
    exponentiate log-scaled ones, pass the rest through."""
    raw = np.atleast_1d(np.asarray(raw, dtype=float))
    if raw.shape != (len(space),):
        raise OutOfBounds(f"expected {len(space)} coordinates, got {raw.shape}")
    out = {}
    for x, dim in zip(raw, space.dims):
        lo, hi = dim.raw_bounds
        tol = 1e-9 * max(1.0, abs(lo), abs(hi))
        if not (lo - tol <= x <= hi + tol):
            raise OutOfBounds(f"{dim.name}={x} outside [{lo}, {hi}]")
        x = min(max(x, lo), hi)
        if dim.log_scale:
            x = 10.0 ** x
        out[dim.name] = _round_half_up(x) if dim.discrete else float(x)
    return out


def expected_improvement(posterior: Posterior, f_best: float) -> float:
    return float(ei_array(np.array([posterior.mean]), np.array([posterior.std]), f_best)[0])


def ei_array(mean, std, f_best) -> np.ndarray:
    """Closed-form EI of a maximization problem, vectorized."""
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    diff = mean - f_best
    out = np.maximum(diff, 0.0)
    pos = std > 0
    if np.any(pos):
        u = diff[pos] / std[pos]
        pdf = np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)
        out[pos] = np.maximum(diff[pos] * ndtr(u) + std[pos] * pdf, 0.0)
    return out


def _ei_at(state: GPState, X, f_best) -> np.ndarray:
    mean, var = state.predict(X)
    return ei_array(mean, np.sqrt(var), f_best)


def _golden_section(fn, lo, hi, iters):
    """Maximize a scalar function on [lo, hi]; returns (x, fx)."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fn(d)
    return (c, fc) if fc >= fd else (d, fd)


def maximize_acquisition(state: GPState, f_best: float, rng,
                         n_candidates: int = N_CANDIDATES,
                         refine_steps: int = REFINE_STEPS) -> np.ndarray:
    """Return the unit-cube point with the largest EI found.

    Random candidates plus perturbed copies of the best observed points are
    scored, then the winner is polished one coordinate at a time by
    golden-section search, keeping a move only when it raises EI.
    """
    rng = np.random.default_rng(rng)
    d = state.points.shape[1]
    cands = rng.uniform(size=(n_candidates, d))
    top = state.points[np.argsort(-state.values, kind="stable")[:N_PERTURBED]]
    jittered = np.clip(top + rng.normal(scale=PERTURB_SIGMA, size=top.shape), 0.0, 1.0)
    cands = np.vstack([cands, jittered])
    ei = _ei_at(state, cands, f_best)
    i_best = int(np.argmax(ei))
    if not ei[i_best] > 0.0:
        log.debug("EI vanished on every candidate; proposing a uniform random point")
        return rng.uniform(size=d)

    x = cands[i_best].copy()
    fx = float(ei[i_best])
    per_dim = [refine_steps // d + (1 if j < refine_steps % d else 0) for j in range(d)]
    for j in range(d):
        if per_dim[j] == 0:
            continue
        lo = max(0.0, x[j] - REFINE_HALF_WIDTH)
        hi = min(1.0, x[j] + REFINE_HALF_WIDTH)

        def along(t, j=j):
            probe = x.copy()
            probe[j] = t
            return float(_ei_at(state, probe[None, :], f_best)[0])

        t, ft = _golden_section(along, lo, hi, per_dim[j])
        if ft > fx:
            x[j], fx = t, ft
    return x


def latin_hypercube(n: int, d: int, rng) -> np.ndarray:
    rng = np.random.default_rng(rng)
    strata = np.column_stack([rng.permutation(n) for _ in range(d)])
    return (strata + rng.uniform(size=(n, d))) / n


@dataclass(frozen=True)
class BORecord:
    iteration: int
    raw: tuple
    params: dict
    value: float
    best_so_far: float
    cached: bool = False


@dataclass
class BOTrace:
    names: list
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def best(self) -> BORecord:
        return max(self.records, key=lambda r: r.value)

    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.records])


def _gp_targets(values: np.ndarray) -> np.ndarray:
    """Failed (-inf) evaluations enter the GP at the worst finite value."""
    finite = np.isfinite(values)
    if not finite.any():
        return np.zeros_like(values)
    out = values.copy()
    out[~finite] = values[finite].min()
    return out


def bo_optimize(objective: Callable[[dict, int], float], space: SearchSpace,
                n_initial: int = 10, n_iterations: int = 40, rng=None,
                kernel_kind=KernelKind.MATERN52):
    """Maximize ``objective(params, iteration)`` over ``space``.

    Non-finite objective values are recorded as -inf and the loop goes on;
    exceptions raised by the objective propagate. Proposals that round to an
    already evaluated parameter set reuse the cached value.

    Returns ``(best_params, trace)``.
    """
    if n_initial < 2:
        raise ValueError("n_initial must be at least 2")
    if n_iterations < 0:
        raise ValueError("n_iterations must be non-negative")
    rng = np.random.default_rng(rng)
    trace = BOTrace(space.names)
    cache: dict[tuple, float] = {}
    units: list[np.ndarray] = []
    best = -math.inf

    def evaluate(u, iteration):
        nonlocal best
        raw = space.to_raw(u)
        params = g_map(raw, space)
        key = tuple(params[n] for n in space.names)
        cached = key in cache
        if cached:
            value = cache[key]
        else:
            value = float(objective(params, iteration))
            if not math.isfinite(value):
                value = -math.inf
            cache[key] = value
        best = max(best, value)
        units.append(np.asarray(u, dtype=float))
        trace.records.append(BORecord(iteration, tuple(float(r) for r in raw), params,
                                      value, best, cached))
        log.debug("iter %d params=%s value=%.6g best=%.6g", iteration, params, value, best)

    for i, u in enumerate(latin_hypercube(n_initial, len(space), rng)):
        evaluate(u, i)

    for i in range(n_initial, n_initial + n_iterations):
        values = trace.values()
        if not np.isfinite(values).any():
            u = rng.uniform(size=len(space))
        else:
            state = gp_fit(np.array(units), _gp_targets(values), kernel_kind,
                           rng=rng.integers(2**63))
            u = maximize_acquisition(state, float(values.max()), rng)
        evaluate(u, i)

    return trace.best().params, trace
