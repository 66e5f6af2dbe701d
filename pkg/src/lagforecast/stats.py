"""Rank-based comparison of k models over N datasets: Friedman chi-square,
Iman-Davenport F and a Hochberg-style step procedure against a reference."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import InsufficientData, UnknownReference
from .special import chi2_sf, f_sf, normal_sf


@dataclass(frozen=True)
class ComparisonTable:
    """Values (N datasets x k models), lower is better."""

    models: tuple
    datasets: tuple
    values: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "datasets", tuple(self.datasets))
        if v.shape != (len(self.datasets), len(self.models)):
            raise ValueError(
                f"values shape {v.shape} does not match {len(self.datasets)} datasets "
                f"x {len(self.models)} models"
            )

    @property
    def k(self) -> int:
        return len(self.models)

    @property
    def n(self) -> int:
        return len(self.datasets)

    @property
    def ranks(self) -> np.ndarray:
        return rankdata(self.values, method="average", axis=1)

    @property
    def average_ranks(self) -> np.ndarray:
        return self.ranks.mean(axis=0)


@dataclass(frozen=True)
class FriedmanResult:
    chi2: float
    chi2_p_value: float
    ff: float
    p_value: float
    degenerate: bool = False


def friedman(table: ComparisonTable) -> FriedmanResult:
    """Friedman statistic on average ranks and its Iman-Davenport F form.

    When chi2 reaches its maximum N(k-1) the F statistic is infinite; this
    is flagged as ``degenerate`` with p-value 0.
    """
    n, k = table.n, table.k
    if n < 2:
        raise InsufficientData(f"Friedman test needs at least 2 datasets, got {n}")
    if k < 2:
        raise InsufficientData(f"Friedman test needs at least 2 models, got {k}")
    R = table.average_ranks
    chi2 = 12.0 * n / (k * (k + 1)) * (float(np.sum(R**2)) - k * (k + 1) ** 2 / 4.0)
    chi2 = max(chi2, 0.0)
    chi2_p = chi2_sf(chi2, k - 1)
    denom = n * (k - 1) - chi2
    if denom <= 1e-12 * n * (k - 1):
        return FriedmanResult(chi2, chi2_p, math.inf, 0.0, degenerate=True)
    ff = (n - 1) * chi2 / denom
    return FriedmanResult(chi2, chi2_p, ff, f_sf(ff, k - 1, (k - 1) * (n - 1)))


@dataclass(frozen=True)
class PostHoc:
    model: str
    z: float
    p_value: float
    threshold: float
    reject: bool


@dataclass(frozen=True)
class TwoStepResult:
    metric: str
    models: tuple
    average_ranks: tuple
    reference: str
    alpha: float
    friedman: FriedmanResult
    comparisons: tuple  # PostHoc per non-reference model, in table order

    @property
    def chi2_F(self) -> float:
        return self.friedman.chi2

    @property
    def F_F(self) -> float:
        return self.friedman.ff

    def comparison(self, model: str) -> PostHoc:
        for c in self.comparisons:
            if c.model == model:
                return c
        raise KeyError(model)

    def as_dict(self) -> dict:
        f = self.friedman
        return {
            "metric": self.metric,
            "reference": self.reference,
            "alpha": self.alpha,
            "average_ranks": dict(zip(self.models, self.average_ranks)),
            "chi2_F": f.chi2,
            "chi2_p_value": f.chi2_p_value,
            "F_F": None if math.isinf(f.ff) else f.ff,
            "F_p_value": f.p_value,
            "degenerate": f.degenerate,
            "post_hoc": [
                {"model": c.model, "z": c.z, "p_value": c.p_value,
                 "threshold": c.threshold, "reject": c.reject}
                for c in self.comparisons
            ],
        }


def hochberg(table: ComparisonTable, reference: str, alpha: float = 0.10,
             metric: str = "", threshold_denominator: Optional[int] = None) -> TwoStepResult:
    """z-tests of every model's average rank against ``reference``.

    Two-sided p-values are sorted ascending and the i-th smallest is
    rejected when it is below ``i / D * alpha``; D defaults to the number
    of comparisons (k - 1).
    """
    if reference not in table.models:
        raise UnknownReference(reference)
    k, n = table.k, table.n
    if k < 2:
        raise InsufficientData("post hoc comparison needs at least 2 models")
    R = table.average_ranks
    ref = table.models.index(reference)
    se = math.sqrt(k * (k + 1) / (6.0 * n))
    others = [j for j in range(k) if j != ref]
    z = {j: (R[j] - R[ref]) / se for j in others}
    p = {j: min(1.0, 2.0 * normal_sf(abs(z[j]))) for j in others}
    denom = threshold_denominator if threshold_denominator is not None else len(others)
    order = sorted(others, key=lambda j: (p[j], j))
    thresholds = {j: (i + 1) / denom * alpha for i, j in enumerate(order)}
    comparisons = tuple(
        PostHoc(table.models[j], float(z[j]), float(p[j]), float(thresholds[j]),
                bool(p[j] < thresholds[j]))
        for j in others
    )
    return TwoStepResult(metric, table.models, tuple(float(r) for r in R), reference,
                         alpha, friedman(table), comparisons)


def two_step(table: ComparisonTable, reference: str, alpha: float = 0.10, metric: str = "") -> TwoStepResult:
    """Friedman/Iman-Davenport omnibus test followed by the post hoc comparisons.

    The post hoc rows are always computed; callers decide whether to act on
    them based on ``result.friedman.p_value``.
    """
    return hochberg(table, reference, alpha, metric)
