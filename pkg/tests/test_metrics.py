import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rrmaxwell import metrics as M
from rrmaxwell.errors import ValidationError
from rrmaxwell.kernels import gamma_sample


def test_w2_1d_basics():
    a = np.random.default_rng(0).exponential(size=1000)
    assert M.w2_1d(a, a) == 0.0
    assert M.w2_1d(np.zeros(10), np.ones(10)) == 1.0
    with pytest.raises(ValidationError):
        M.w2_1d([], [1.0])


def test_w2_1d_translation():
    a = np.random.default_rng(1).exponential(size=100_000)
    assert M.w2_1d(a, a + 0.5) == pytest.approx(0.5, abs=1e-3)


def test_w2_1d_unequal_sizes_resampled():
    rng = np.random.default_rng(2)
    a = rng.normal(size=4000)
    assert M.w2_1d(a, a[::2]) < 0.05


samples = st.lists(st.floats(-10, 10, allow_nan=False), min_size=8, max_size=8)


@settings(max_examples=100, deadline=None)
@given(samples, samples, samples, st.floats(0.1, 10))
def test_w2_1d_metric_properties(a, b, c, k):
    a, b, c = map(np.array, (a, b, c))
    assert M.w2_1d(a, b) == M.w2_1d(b, a)
    assert M.w2_1d(a, c) <= M.w2_1d(a, b) + M.w2_1d(b, c) + 1e-10
    assert M.w2_1d(k * a, k * b) == pytest.approx(k * M.w2_1d(a, b), rel=1e-12, abs=1e-12)


def test_w2_3d_exact_translation_and_triangle():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(200, 3))
    t = np.array([0.3, -1.0, 2.0])
    assert M.w2_3d(a, a) == 0.0
    assert M.w2_3d(a, a + t) == pytest.approx(np.linalg.norm(t), rel=1e-12)
    for _ in range(5):
        x, y, z = (rng.normal(size=(64, 3)) * rng.uniform(0.5, 2) for _ in range(3))
        assert M.w2_3d(x, z) <= M.w2_3d(x, y) + M.w2_3d(y, z) + 1e-10
        assert M.w2_3d(x, y) == pytest.approx(M.w2_3d(y, x), abs=1e-12)
        assert M.w2_3d(2.5 * x, 2.5 * y) == pytest.approx(2.5 * M.w2_3d(x, y), rel=1e-12)


def test_w2_3d_exact_cap():
    a = np.zeros((M.EXACT_CAP + 1, 3))
    with pytest.raises(ValidationError):
        M.w2_3d(a, a)


def test_sliced_close_to_exact_at_512():
    rng = np.random.default_rng(4)
    for shift, sc in [(1.0, 1.3), (2.0, 1.0), (0.0, 2.0)]:
        a = rng.normal(size=(512, 3))
        b = rng.normal(size=(512, 3)) * sc + [shift, 0, 0]
        ex = M.w2_3d(a, b)
        assert M.w2_3d(a, b, "sliced") == pytest.approx(ex, rel=0.15)


def test_sliced_translation():
    a = np.random.default_rng(5).normal(size=(1000, 3))
    val = M.w2_3d(a, a + [0, 0, 1.0], "sliced", n_directions=2000)
    assert val == pytest.approx(1.0, rel=0.05)


def test_cf_at_zero_and_bounded():
    x = np.random.default_rng(6).normal(size=(5000, 3))
    k = np.concatenate([[0.0], M.default_kgrid()])
    for cf in (M.cf_3d(x, k, 8), M.cf_radial(x, k)):
        assert np.allclose(cf.values[:, 0], 1.0)
        assert np.all(np.abs(cf.values) <= 1.0 + 1e-12)


def test_ds_gaussian_pair():
    eps = 0.1
    val = M.ds_analytic(lambda k: np.exp(-k * k / 2), lambda k: np.exp(-(1 + eps) * k * k / 2), 2.0)
    assert val == pytest.approx(eps / 2, rel=0.02)


def test_ds_identical_and_grid_mismatch():
    x = np.random.default_rng(7).normal(size=1000)
    f = M.cf_1d(x)
    assert M.ds_metric(f, f, 2.0) == 0.0
    with pytest.raises(ValidationError):
        M.ds_metric(f, M.cf_1d(x, M.default_kgrid(n=50)), 2.0)


def test_ds_non_decreasing_under_refinement():
    f = lambda k: np.exp(-k * k / 6)
    g = lambda k: np.sinc(k / np.pi)
    vals = []
    n = 25
    for _ in range(5):
        k = M.default_kgrid(n=n)
        vals.append(M.ds_metric(M.cf_analytic(f, k), M.cf_analytic(g, k), 2.0))
        n = 2 * n - 1
    assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))


def test_ds_convexity_on_mixtures():
    # d_s(a f1 + (1-a) f2, a g1 + (1-a) g2) <= a d_s(f1, g1) + (1-a) d_s(f2, g2)
    k = M.default_kgrid(n=400)
    f1, g1 = (lambda k: np.exp(-k * k / 2)), (lambda k: np.exp(-0.6 * k * k))
    f2, g2 = (lambda k: np.exp(-k * k)), (lambda k: 1 / (1 + k * k))
    for a in (0.2, 0.5, 0.9):
        mix_f = lambda k: a * f1(k) + (1 - a) * f2(k)
        mix_g = lambda k: a * g1(k) + (1 - a) * g2(k)
        lhs = M.ds_metric(M.cf_analytic(mix_f, k), M.cf_analytic(mix_g, k), 2.0)
        rhs = a * M.ds_metric(M.cf_analytic(f1, k), M.cf_analytic(g1, k), 2.0) + (1 - a) * M.ds_metric(
            M.cf_analytic(f2, k), M.cf_analytic(g2, k), 2.0)
        assert lhs <= rhs + 1e-12


def test_hill_on_pareto():
    x = (1 - np.random.default_rng(8).random(100_000)) ** (-1 / 3)
    assert M.hill_tail_index(x, 0.02) == pytest.approx(3.0, rel=0.1)
    _, diverging = M.hill_trend(x)
    assert not diverging


def test_hill_on_exponential_diverges():
    est, diverging = M.hill_trend(np.random.default_rng(9).exponential(size=100_000))
    assert diverging and est[-1] > est[0]


def test_hill_on_stationary_wealth():
    lam = 0.5  # mu = 1 + 2/lam = 5
    x = gamma_sample(np.random.default_rng(10), lam, 1_000_000)
    assert M.hill_tail_index(x, 0.005) == pytest.approx(5.0, rel=0.15)


def test_hill_validation():
    with pytest.raises(ValidationError):
        M.hill_tail_index(np.ones(10))
    with pytest.raises(ValidationError):
        M.hill_tail_index(np.ones(2000), 0.5)


def test_metric_report_rows():
    rep = M.MetricReport()
    for t in (0.0, 1.0):
        rep.times.append(t)
        rep.add("w2", 1.0 - t / 2)
        rep.add("ds", {2.0: 0.1, 4.0: 0.01})
    rows = rep.rows()
    assert rows[0] == (0.0, "ds", 2.0, 0.1)
    assert rows[2] == (0.0, "w2", "", 1.0)
    assert rep.w2 == [1.0, 0.5]


def test_radial_defect_small_k():
    k = np.array([1e-4, 1e-3, 0.05, 0.5, 3.0])
    cf = M.cf_radial(np.ones((4, 3)) / np.sqrt(3.0), k)
    exact = 1.0 - np.sin(k) / k
    exact[:3] = [sum((-1) ** (n + 1) * x ** (2 * n) / math.factorial(2 * n + 1) for n in range(1, 8))
                 for x in k[:3]]
    assert np.allclose(cf.defect[0], exact, rtol=1e-13, atol=0)


def test_radial_d4_resolves_fourth_moment_gap():
    # unit-energy clouds with m4 = 5/3 (Gaussian-like) and 1 (sphere): d4 -> (5/3 - 1)/120
    rng = np.random.default_rng(4)
    g = rng.normal(size=(200000, 3))
    s = g / np.linalg.norm(g, axis=1)[:, None]
    fa, fb = M.cf_radial(g), M.cf_radial(s)
    m4 = np.mean(np.sum(g * g, 1) ** 2) / np.mean(np.sum(g * g, 1)) ** 2
    assert M.ds_metric(fa, fb, 4.0) == pytest.approx((m4 - 1) / 120, rel=1e-3)


def test_sliced_is_lower_bound_of_exact():
    rng = np.random.default_rng(12)
    g = rng.normal(size=(400, 3))
    s = g / np.linalg.norm(g, axis=1)[:, None]
    exact = M.w2_3d(g, s, "exact")
    assert M.w2_3d(g, s, "sliced", 256, 1) < exact
    # the radial projection is the optimal map here
    assert exact == pytest.approx(np.sqrt(np.mean(np.sum((g - s) ** 2, 1))), rel=1e-12)
