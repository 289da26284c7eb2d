"""Least-squares fitting of the delay-response model.

Noisy-fit results are checked against two independent implementations
(numpy.polyfit and statistics.linear_regression); algebraic identities
of ordinary least squares (residual orthogonality, scale equivariance,
plcc**2 == R**2) are checked as properties.
"""

import math
import random
import statistics

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from iriscc.regression import RegressionFit, Sample, analyze_trace, fit_k_b, plcc


def make_samples(xs, ys):
    return [Sample(rate_diff=x, delta_rtt=y) for x, y in zip(xs, ys)]


# --- exact fits --------------------------------------------------------------

def test_exact_line_recovered():
    xs = [0.0, 1.0, 2.0, 3.0]
    fit = fit_k_b(make_samples(xs, [2.0 * x + 1.0 for x in xs]))
    assert fit.k == pytest.approx(2.0, abs=1e-12)
    assert fit.b == pytest.approx(1.0, abs=1e-12)
    assert fit.plcc == pytest.approx(1.0, abs=1e-12)
    assert fit.n == 4


def test_negative_slope_and_plcc_sign():
    xs = [0.0, 1.0, 2.0]
    fit = fit_k_b(make_samples(xs, [-0.5 * x + 3.0 for x in xs]))
    assert fit.k == pytest.approx(-0.5, abs=1e-12)
    assert fit.plcc == pytest.approx(-1.0, abs=1e-12)


def test_two_points_exact():
    # Slope through (1, 10) and (-0.5, -5): 15 / 1.5 = 10, intercept 0.
    fit = fit_k_b(make_samples([1.0, -0.5], [10.0, -5.0]))
    assert fit.k == pytest.approx(10.0, abs=1e-9)
    assert fit.b == pytest.approx(0.0, abs=1e-9)
    assert fit.plcc == pytest.approx(1.0, abs=1e-12)


# --- agreement with independent implementations ------------------------------

def test_matches_numpy_polyfit_on_noisy_data():
    rng = random.Random(7)
    xs = [rng.uniform(-3.0, 3.0) for _ in range(200)]
    ys = [1.7 * x - 0.4 + rng.gauss(0.0, 0.3) for x in xs]
    fit = fit_k_b(make_samples(xs, ys))
    k_np, b_np = np.polyfit(np.array(xs), np.array(ys), 1)
    assert fit.k == pytest.approx(float(k_np), rel=1e-9)
    assert fit.b == pytest.approx(float(b_np), rel=1e-9)
    corr_np = float(np.corrcoef(xs, ys)[0, 1])
    assert fit.plcc == pytest.approx(corr_np, rel=1e-9)


def test_matches_stdlib_linear_regression():
    rng = random.Random(11)
    xs = [rng.uniform(0.0, 10.0) for _ in range(50)]
    ys = [-2.2 * x + 5.0 + rng.gauss(0.0, 1.0) for x in xs]
    fit = fit_k_b(make_samples(xs, ys))
    ref = statistics.linear_regression(xs, ys)
    assert fit.k == pytest.approx(ref.slope, rel=1e-9)
    assert fit.b == pytest.approx(ref.intercept, rel=1e-9)
    assert fit.plcc == pytest.approx(statistics.correlation(xs, ys), rel=1e-9)


# --- degenerate inputs --------------------------------------------------------

def test_too_few_samples():
    assert fit_k_b([]) is None
    assert fit_k_b(make_samples([1.0], [2.0])) is None


def test_zero_variance_x():
    assert fit_k_b(make_samples([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])) is None


def test_zero_variance_y():
    assert fit_k_b(make_samples([1.0, 2.0, 3.0], [5.0, 5.0, 5.0])) is None


def test_non_finite_samples():
    assert fit_k_b(make_samples([1.0, math.nan], [1.0, 2.0])) is None
    assert fit_k_b(make_samples([1.0, 2.0], [math.inf, 2.0])) is None


def test_fit_requires_two_samples_to_construct():
    with pytest.raises(ValueError):
        RegressionFit(k=1.0, b=0.0, plcc=1.0, n=1)
    with pytest.raises(ValueError):
        RegressionFit(k=1.0, b=0.0, plcc=1.5, n=3)


# --- plcc helper --------------------------------------------------------------

def test_plcc_matches_fit():
    xs = [0.0, 1.0, 2.0, 4.0]
    ys = [1.0, 0.5, 2.5, 3.0]
    fit = fit_k_b(make_samples(xs, ys))
    assert plcc(xs, ys) == pytest.approx(fit.plcc, abs=1e-15)


def test_plcc_undefined_cases():
    assert plcc([1.0, 1.0], [1.0, 2.0]) is None
    assert plcc([1.0], [1.0]) is None
    with pytest.raises(ValueError):
        plcc([1.0, 2.0], [1.0])


def test_plcc_clamped_to_unit_interval():
    # A perfectly collinear cloud must not exceed 1.0 through rounding.
    xs = [i * 0.1 for i in range(100)]
    ys = [3.0 * x + 1e-9 for x in xs]
    assert abs(plcc(xs, ys)) <= 1.0


# --- trace differencing --------------------------------------------------------

def test_analyze_trace_differences_consecutive_rtts():
    # rtts 50 -> 60 -> 55 with overshoots 1 and -0.5 give samples
    # (1, +10) and (-0.5, -5): slope 10, intercept 0.
    rows = [(2.0, 2.0, 50.0), (3.0, 2.0, 60.0), (1.5, 2.0, 55.0)]
    fit = analyze_trace(rows)
    assert fit.k == pytest.approx(10.0, abs=1e-9)
    assert fit.b == pytest.approx(0.0, abs=1e-9)
    assert fit.n == 2


def test_analyze_trace_too_short():
    assert analyze_trace([]) is None
    assert analyze_trace([(1.0, 1.0, 50.0)]) is None
    assert analyze_trace([(1.0, 1.0, 50.0), (2.0, 1.0, 60.0)]) is None


# --- algebraic properties -------------------------------------------------------

finite_floats = st.floats(min_value=-1e6, max_value=1e6,
                          allow_nan=False, allow_infinity=False)


@st.composite
def sample_clouds(draw):
    n = draw(st.integers(min_value=3, max_value=40))
    xs = draw(st.lists(finite_floats, min_size=n, max_size=n))
    ys = draw(st.lists(finite_floats, min_size=n, max_size=n))
    return xs, ys


@given(sample_clouds())
def test_residuals_orthogonal_to_regressor(cloud):
    xs, ys = cloud
    fit = fit_k_b(make_samples(xs, ys))
    if fit is None:
        return
    residuals = [y - (fit.k * x + fit.b) for x, y in zip(xs, ys)]
    scale = max(1.0, max(abs(y) for y in ys)) * len(xs)
    assert math.fsum(residuals) == pytest.approx(0.0, abs=1e-6 * scale)
    xscale = max(1.0, max(abs(x) for x in xs))
    assert math.fsum(r * x for r, x in zip(residuals, xs)) == pytest.approx(
        0.0, abs=1e-6 * scale * xscale)


@given(sample_clouds(), st.floats(min_value=0.01, max_value=100.0))
def test_slope_scale_equivariance(cloud, c):
    xs, ys = cloud
    fit = fit_k_b(make_samples(xs, ys))
    if fit is None:
        return
    scaled = fit_k_b(make_samples(xs, [c * y for y in ys]))
    assert scaled is not None
    assert scaled.k == pytest.approx(c * fit.k, rel=1e-6, abs=1e-9 * c)
    assert scaled.plcc == pytest.approx(fit.plcc, rel=1e-6, abs=1e-9)


@given(sample_clouds())
def test_plcc_squared_is_variance_explained(cloud):
    xs, ys = cloud
    fit = fit_k_b(make_samples(xs, ys))
    if fit is None:
        return
    my = math.fsum(ys) / len(ys)
    sst = math.fsum((y - my) ** 2 for y in ys)
    sse = math.fsum((y - (fit.k * x + fit.b)) ** 2 for x, y in zip(xs, ys))
    assert fit.plcc ** 2 == pytest.approx(1.0 - sse / sst, rel=1e-6, abs=1e-9)
