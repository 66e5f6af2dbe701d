import math

import numpy as np
import pytest
import scipy.special as sc
import scipy.stats as ss
from hypothesis import given, settings, strategies as st

from lagforecast.errors import DomainError
from lagforecast.special import (
    betainc, chi2_sf, erf, f_cdf, f_sf, gammainc, gammaincc, normal_cdf, normal_sf,
)


def test_erf_and_normal():
    assert erf(0.0) == 0.0
    assert normal_cdf(1.96) == pytest.approx(0.9750021048517795, abs=1e-12)
    assert normal_sf(1.96) == pytest.approx(1 - 0.9750021048517795, abs=1e-12)
    assert normal_cdf(0.0) == 0.5


def test_betainc_symmetry_point():
    for a in (0.5, 1.0, 3.0, 17.5):
        assert betainc(a, a, 0.5) == pytest.approx(0.5, abs=1e-12)


def test_betainc_endpoints():
    assert betainc(2.0, 3.0, 0.0) == 0.0
    assert betainc(2.0, 3.0, 1.0) == 1.0


@settings(max_examples=300, deadline=None)
@given(st.floats(0.05, 200), st.floats(0.05, 200), st.floats(0, 1))
def test_betainc_matches_reference(a, b, x):
    assert betainc(a, b, x) == pytest.approx(float(sc.betainc(a, b, x)), abs=1e-10)


@settings(max_examples=300, deadline=None)
@given(st.floats(0.05, 200), st.floats(0, 400))
def test_gammainc_matches_reference(a, x):
    assert gammainc(a, x) == pytest.approx(float(sc.gammainc(a, x)), abs=1e-10)
    assert gammaincc(a, x) == pytest.approx(float(sc.gammaincc(a, x)), abs=1e-10)


def test_f_distribution():
    assert f_cdf(1.0, 5, 5) == pytest.approx(0.5, abs=1e-12)
    for f, d1, d2 in [(13.43, 7, 56), (2.5, 3, 10), (0.2, 1, 1), (40.0, 7, 56)]:
        assert f_sf(f, d1, d2) == pytest.approx(ss.f.sf(f, d1, d2), abs=1e-12)
        assert f_cdf(f, d1, d2) + f_sf(f, d1, d2) == pytest.approx(1.0, abs=1e-12)


def test_chi2_sf():
    for x, k in [(4.6667, 2), (39.481, 7), (0.0, 3), (1e-3, 1)]:
        assert chi2_sf(x, k) == pytest.approx(ss.chi2.sf(x, k), abs=1e-12)
    # df = 2 has a closed form
    assert chi2_sf(3.0, 2) == pytest.approx(math.exp(-1.5), abs=1e-14)


@pytest.mark.parametrize("args", [(-1.0, 2.0, 0.5), (1.0, 0.0, 0.5), (1.0, 1.0, 1.5), (1.0, 1.0, -0.1)])
def test_betainc_domain(args):
    with pytest.raises(DomainError):
        betainc(*args)


@pytest.mark.parametrize("args", [(0.0, 1.0), (1.0, -1.0), (-2.0, 3.0)])
def test_gammainc_domain(args):
    with pytest.raises(DomainError):
        gammainc(*args)
