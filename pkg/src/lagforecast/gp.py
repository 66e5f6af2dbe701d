"""Gaussian-process regression on the unit hypercube.

Noise-free model with a small diagonal jitter; kernel hyperparameters are
fitted by maximizing the log marginal likelihood with multi-start
Nelder-Mead in log space.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import CholeskyFailure, DimensionMismatch

JITTER_START = 1e-8
JITTER_MAX = 1e-4
LOG_BOUND = 5.0
N_STARTS = 8

_SQRT5 = math.sqrt(5.0)


class KernelKind(str, enum.Enum):
    SQUARED_EXPONENTIAL = "squared_exponential"
    MATERN52 = "matern52"


@dataclass(frozen=True)
class Kernel:
    kind: KernelKind
    length_scales: np.ndarray
    signal_variance: float
    jitter: float = JITTER_START

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.length_scales, dtype=float))
        object.__setattr__(self, "length_scales", ls)
        object.__setattr__(self, "kind", KernelKind(self.kind))
        if np.any(ls <= 0) or self.signal_variance <= 0 or self.jitter <= 0:
            raise ValueError("kernel parameters must be strictly positive")

    @property
    def dim(self) -> int:
        return len(self.length_scales)

    @property
    def diagonal_jitter(self) -> float:
        """Jitter added to the diagonal; shrinks with the signal variance below 1."""
        return self.jitter * min(1.0, self.signal_variance)

    def __call__(self, A, B) -> np.ndarray:
        """Covariance matrix between the rows of ``A`` and ``B``."""
        A = np.atleast_2d(A)
        B = np.atleast_2d(B)
        if A.shape[1] != self.dim or B.shape[1] != self.dim:
            raise DimensionMismatch(
                f"kernel has {self.dim} dimensions, got {A.shape[1]} and {B.shape[1]}"
            )
        As = A / self.length_scales
        Bs = B / self.length_scales
        d2 = (
            np.sum(As**2, axis=1)[:, None]
            + np.sum(Bs**2, axis=1)[None, :]
            - 2.0 * As @ Bs.T
        )
        np.maximum(d2, 0.0, out=d2)
        return self.signal_variance * _correlation(self.kind, d2)


def _correlation(kind, d2):
    if kind is KernelKind.SQUARED_EXPONENTIAL:
        return np.exp(-0.5 * d2)
    r = np.sqrt(d2)
    return (1.0 + _SQRT5 * r + (5.0 / 3.0) * d2) * np.exp(-_SQRT5 * r)


def kernel_eval(kernel: Kernel, a, b) -> float:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != (kernel.dim,) or b.shape != (kernel.dim,):
        raise DimensionMismatch(f"expected points of dimension {kernel.dim}")
    return float(kernel(a[None, :], b[None, :])[0, 0])


@dataclass(frozen=True)
class Posterior:
    mean: float
    variance: float

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)


def _cholesky_with_jitter(K, jitter=JITTER_START, scale=1.0):
    """Return (L, jitter) with ``jitter`` doubled until ``K + jitter*scale*I`` factorizes."""
    eye = np.eye(len(K))
    while True:
        try:
            return np.linalg.cholesky(K + (jitter * scale) * eye), jitter
        except np.linalg.LinAlgError:
            jitter *= 2.0
            if jitter > JITTER_MAX:
                raise CholeskyFailure(
                    f"kernel matrix not positive definite with jitter up to {JITTER_MAX:g}"
                ) from None


@dataclass(frozen=True)
class GPState:
    points: np.ndarray
    values: np.ndarray
    kernel: Kernel
    mean_const: float
    chol: np.ndarray
    alpha: np.ndarray

    @property
    def n(self) -> int:
        return len(self.values)

    def predict(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized posterior mean and variance at the rows of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.kernel.dim:
            raise DimensionMismatch(f"expected points of dimension {self.kernel.dim}")
        Ks = self.kernel(X, self.points)
        mean = self.mean_const + Ks @ self.alpha
        v = _solve_lower(self.chol, Ks.T)
        var = self.kernel.signal_variance - np.sum(v * v, axis=0)
        return mean, np.maximum(var, 0.0)

    def log_marginal_likelihood(self) -> float:
        r = self.values - self.mean_const
        return float(
            -0.5 * r @ self.alpha
            - np.sum(np.log(np.diag(self.chol)))
            - 0.5 * self.n * math.log(2.0 * math.pi)
        )


def _solve_lower(L, B):
    return solve_triangular(L, B, lower=True, check_finite=False)


def build_state(points, values, kernel: Kernel, mean_const: Optional[float] = None) -> GPState:
    """Condition a GP with fixed kernel hyperparameters on the data."""
    X = np.atleast_2d(np.asarray(points, dtype=float))
    y = np.asarray(values, dtype=float)
    if X.shape[0] != len(y):
        raise DimensionMismatch("points and values differ in length")
    if X.shape[1] != kernel.dim:
        raise DimensionMismatch(f"kernel has {kernel.dim} dimensions, points have {X.shape[1]}")
    mu0 = float(np.mean(y)) if mean_const is None else float(mean_const)
    L, jitter = _cholesky_with_jitter(
        kernel(X, X), kernel.jitter, min(1.0, kernel.signal_variance)
    )
    if jitter != kernel.jitter:
        kernel = Kernel(kernel.kind, kernel.length_scales, kernel.signal_variance, jitter)
    alpha = cho_solve((L, True), y - mu0, check_finite=False)
    return GPState(X, y, kernel, mu0, L, alpha)


def gp_posterior(state: GPState, x) -> Posterior:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (state.kernel.dim,):
        raise DimensionMismatch(f"expected a point of dimension {state.kernel.dim}")
    mean, var = state.predict(x[None, :])
    return Posterior(float(mean[0]), float(var[0]))


class _LogML:
    """Negative log marginal likelihood for a batch of log-hyperparameter vectors.

    Pairwise squared coordinate differences are cached; a batch of M
    parameter vectors costs one stacked kernel assembly and Cholesky.
    """

    def __init__(self, X, y, mu0, kind, var_scale):
        n, d = X.shape
        # (d, n*n) so a batch of inverse squared length scales is one matmul
        self.sqdiff = ((X[:, None, :] - X[None, :, :]) ** 2).reshape(n * n, d).T.copy()
        self.r = y - mu0
        self.rb = None
        self.kind = kind
        self.var_scale = var_scale
        self.n = n
        self.d = d

    def __call__(self, thetas):
        thetas = np.atleast_2d(thetas)
        d, n = self.d, self.n
        d2 = (np.exp(-2.0 * thetas[:, :d]) @ self.sqdiff).reshape(-1, n, n)
        sv = self.var_scale * np.exp(thetas[:, d])
        K = _correlation(self.kind, d2) * sv[:, None, None]
        idx = np.arange(self.n)
        base = JITTER_START * np.minimum(1.0, sv)
        diag = K[:, idx, idx]
        scale = 1.0
        while True:
            K[:, idx, idx] = diag + (scale * base)[:, None]
            try:
                L = np.linalg.cholesky(K)
                break
            except np.linalg.LinAlgError:
                # escalate the whole batch; cheaper than locating the failing member
                scale *= 2.0
                if scale * JITTER_START > JITTER_MAX:
                    return np.full(len(sv), 1e25)
        if self.rb is None or len(self.rb) != len(sv):
            self.rb = np.broadcast_to(self.r[:, None], (len(sv), n, 1))
        z = np.linalg.solve(L, self.rb)[..., 0]
        val = 0.5 * np.sum(z * z, axis=1) + np.sum(np.log(L[:, idx, idx]), axis=1)
        return np.where(np.isfinite(val), val, 1e25)


def batched_nelder_mead(fun, x0s, lo, hi, maxiter, xatol=1e-2, fatol=1e-4, step=1.0):
    """Run one bounded Nelder-Mead minimization per row of ``x0s`` in lockstep.

    ``fun`` maps an (M, p) array of points to M values. Points are clipped
    into ``[lo, hi]``. Returns (x_best, f_best) arrays, one entry per start.
    """
    x0s = np.clip(np.atleast_2d(np.asarray(x0s, dtype=float)), lo, hi)
    B, p = x0s.shape
    sim = np.repeat(x0s[:, None, :], p + 1, axis=1)
    for j in range(p):
        up = sim[:, j + 1, j] + step
        sim[:, j + 1, j] = np.where(up <= hi, up, sim[:, j + 1, j] - step)
    sim = np.clip(sim, lo, hi)
    fsim = fun(sim.reshape(-1, p)).reshape(B, p + 1)
    rows = np.arange(B)

    for _ in range(maxiter):
        order = np.argsort(fsim, axis=1, kind="stable")
        sim = np.take_along_axis(sim, order[..., None], axis=1)
        fsim = np.take_along_axis(fsim, order, axis=1)
        spread_x = np.max(np.abs(sim[:, 1:] - sim[:, :1]), axis=(1, 2))
        spread_f = np.max(np.abs(fsim[:, 1:] - fsim[:, :1]), axis=1)
        # a flat simplex is converged even if it is still wide
        active = ~(((spread_x <= xatol) & (spread_f <= fatol)) | (spread_f <= 1e-2 * fatol))
        if not active.any():
            break
        act = rows[active]
        centroid = sim[act, :-1].mean(axis=1)
        worst = sim[act, -1]
        xr = np.clip(2.0 * centroid - worst, lo, hi)
        fr = fun(xr)
        f_best, f_second, f_worst = fsim[act, 0], fsim[act, -2], fsim[act, -1]

        expand = fr < f_best
        contract_out = (fr >= f_second) & (fr < f_worst)
        contract_in = fr >= f_worst
        second = np.where(expand[:, None], centroid + 2.0 * (xr - centroid),
                          np.where(contract_out[:, None], centroid + 0.5 * (xr - centroid),
                                   centroid + 0.5 * (worst - centroid)))
        second = np.clip(second, lo, hi)
        need = expand | contract_out | contract_in
        f2 = np.full(len(act), np.inf)
        if need.any():
            f2[need] = fun(second[need])

        new_x = xr.copy()
        new_f = fr.copy()
        take_e = expand & (f2 < fr)
        new_x[take_e], new_f[take_e] = second[take_e], f2[take_e]
        ok_out = contract_out & (f2 <= fr)
        ok_in = contract_in & (f2 < f_worst)
        new_x[ok_out | ok_in], new_f[ok_out | ok_in] = second[ok_out | ok_in], f2[ok_out | ok_in]
        shrink = (contract_out & ~ok_out) | (contract_in & ~ok_in)

        keep = ~shrink
        sim[act[keep], -1] = new_x[keep]
        fsim[act[keep], -1] = new_f[keep]
        if shrink.any():
            sh = act[shrink]
            sim[sh, 1:] = np.clip(sim[sh, :1] + 0.5 * (sim[sh, 1:] - sim[sh, :1]), lo, hi)
            fsim[sh, 1:] = fun(sim[sh, 1:].reshape(-1, p)).reshape(len(sh), p)

    best = np.argmin(fsim, axis=1)
    return sim[rows, best], fsim[rows, best]


def gp_fit(points, values, kernel_kind=KernelKind.MATERN52, rng=None) -> GPState:
    """Fit kernel hyperparameters by maximum marginal likelihood and condition on the data.

    Length scales and the signal variance are searched in log space within
    ``[-5, 5]``; the signal variance is measured relative to the sample
    variance of ``values`` so the bounds do not depend on the objective's units.
    """
    X = np.atleast_2d(np.asarray(points, dtype=float))
    y = np.asarray(values, dtype=float)
    if X.shape[0] != len(y):
        raise DimensionMismatch("points and values differ in length")
    if len(y) < 1:
        raise ValueError("need at least one observation")
    kind = KernelKind(kernel_kind)
    rng = np.random.default_rng(rng)
    d = X.shape[1]
    mu0 = float(np.mean(y))
    var_scale = float(np.var(y))
    if not var_scale > 0:
        var_scale = 1.0

    starts = [np.zeros(d + 1)]
    starts += [rng.uniform(-3.0, 3.0, size=d + 1) for _ in range(N_STARTS - 1)]
    objective = _LogML(X, y, mu0, kind, var_scale)
    xs, fs = batched_nelder_mead(objective, np.array(starts), -LOG_BOUND, LOG_BOUND,
                                 maxiter=50 * (d + 1))
    best_theta = xs[int(np.argmin(fs))]
    kernel = Kernel(kind, np.exp(best_theta[:d]), var_scale * math.exp(best_theta[d]))
    return build_state(X, y, kernel, mu0)
