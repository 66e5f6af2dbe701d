"""CSV input/output for monthly series and synthetic station generators."""

from __future__ import annotations

import csv
import enum
import re
from pathlib import Path

import numpy as np

from .errors import GapError, NonMonotoneError, ParseError
from .series import Series, month_label

_MONTH = re.compile(r"^(\d{4})-(\d{2})$")


def _month_index(text: str, row: int) -> int:
    m = _MONTH.match(text.strip())
    if not m or not 1 <= int(m.group(2)) <= 12:
        raise ParseError(f"bad month {text!r}, expected YYYY-MM", row)
    return int(m.group(1)) * 12 + int(m.group(2)) - 1


def ingest_csv(path) -> Series:
    """Read a ``month,value`` CSV into a period-12 Series.

    Row numbers in errors are file line numbers (the header is row 1).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["month", "value"]:
        raise ParseError("header must be 'month,value'", 1)
    labels, values, prev = [], [], None
    for row_no, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise ParseError(f"expected 2 fields, got {len(row)}", row_no)
        idx = _month_index(row[0], row_no)
        try:
            value = float(row[1])
        except ValueError:
            raise ParseError(f"value {row[1]!r} is not a number", row_no) from None
        if not np.isfinite(value):
            raise ParseError(f"value {row[1]!r} is not finite", row_no)
        if prev is not None:
            if idx <= prev:
                raise NonMonotoneError(f"row {row_no}: month {row[0].strip()} does not follow {labels[-1]}")
            if idx != prev + 1:
                missing = month_label(labels[-1], 1)
                raise GapError(f"row {row_no}: gap after {labels[-1]}, {missing} is missing")
        prev = idx
        labels.append(row[0].strip())
        values.append(value)
    if not values:
        raise ParseError("no data rows", 2)
    return Series(np.array(values), 12, labels[0])


def write_series_csv(series: Series, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["month", "value"])
        for label, v in zip(series.labels(), series.values):
            w.writerow([label, repr(float(v))])


class SyntheticKind(str, enum.Enum):
    SEASONAL_AR = "seasonal-ar"
    SINE = "sine"
    RANDOM_WALK = "random-walk"


# rainfall-like monthly profile; the trough stays several noise sds above zero
# so rectification barely biases the monthly means
SEASONAL_PROFILE = np.array([80, 90, 120, 170, 250, 330, 360, 340, 270, 190, 110, 85], dtype=float)
AR_COEF = 0.6
NOISE_SD = 15.0


def generate_synthetic(kind, length: int, seed: int, start: str = "1980-01") -> Series:
    """Seeded synthetic monthly series.

    seasonal-ar: y_t = max(0, s[t mod 12] + x_t) with latent x_t = 0.6 x_{t-1} + e_t.
    sine: sin(2 pi t / 12) plus N(0, 0.05^2) noise.
    random-walk: cumulative sum of N(0, 1) steps.
    """
    kind = SyntheticKind(kind)
    if length < 24:
        raise ValueError("synthetic series need at least 24 points")
    rng = np.random.default_rng(seed)
    t = np.arange(length)
    if kind is SyntheticKind.SEASONAL_AR:
        eps = rng.normal(0.0, NOISE_SD, length)
        x = np.empty(length)
        prev = rng.normal(0.0, NOISE_SD / np.sqrt(1 - AR_COEF**2))
        for i in range(length):
            prev = AR_COEF * prev + eps[i]
            x[i] = prev
        y = np.maximum(SEASONAL_PROFILE[t % 12] + x, 0.0)
    elif kind is SyntheticKind.SINE:
        y = np.sin(2 * np.pi * t / 12) + rng.normal(0.0, 0.05, length)
    else:
        y = np.cumsum(rng.normal(0.0, 1.0, length))
    return Series(y, 12, start)
