import math

import numpy as np
import pytest

from tdbilliards.curves import line_curve, push_curve, uniform_measured
from tdbilliards.growth import (
    component_interval,
    growth_statistics,
    image_arc_uniform,
    r_w_n,
    r_w_n_bracket,
    r_w_n_series,
    sample_arclength_params,
    stable_size_proxy,
)


@pytest.fixture(scope="module")
def wide_curve(mid_slope):
    return line_curve(0, 0.3, 0.05, 0.0, mid_slope, n_nodes=65)


class TestRvalues:
    def test_n0_is_distance_to_ends(self, triple_fixed, wide_curve):
        rs = sample_arclength_params(wide_curve, 11)
        r0 = r_w_n(wide_curve, triple_fixed, 0, rs, cap=10.0)
        s = wide_curve.arclength()
        pos = np.interp(rs, wide_curve.r, s)
        assert np.allclose(r0, np.minimum(pos, s[-1] - pos))

    def test_matches_full_transport_at_one_step(self, triple, triple_fixed, mid_slope):
        W = line_curve(0, 0.3, 0.004, 0.05, mid_slope, n_nodes=17)
        rs = sample_arclength_params(W, 11)
        comps = push_curve(
            uniform_measured(W), triple.config, triple.config, triple.beta,
            t_max=triple.horizon.t, return_maps=True,
        )
        rv = r_w_n(W, triple_fixed, 1, rs, cap=10.0)
        for x, got in zip(rs, rv):
            for mcc, s_r, _ in comps:
                a, b = min(s_r[0], s_r[-1]), max(s_r[0], s_r[-1])
                if a <= x <= b:
                    arc = mcc.curve.arclength()
                    order = np.argsort(s_r)
                    pos = np.interp(x, s_r[order], arc[order])
                    want = min(pos, arc[-1] - pos)
                    # point-local Jacobian expansion carries bounded
                    # distortion of the binding arc
                    assert got == pytest.approx(want, rel=2e-2)
                    break

    def test_matches_bracket_oracle_fractions(self, triple_fixed, wide_curve):
        rs = sample_arclength_params(wide_curve, 300)
        for n in (3, 6):
            a = r_w_n(wide_curve, triple_fixed, n, rs, cap=0.02)
            b = r_w_n_bracket(wide_curve, triple_fixed, n, rs, cap=0.02)
            fa = np.mean(a < 0.01)
            fb = np.mean(b < 0.01)
            assert abs(fa - fb) <= 2.0 / len(rs)

    def test_series_consistent(self, triple_fixed, wide_curve):
        rs = sample_arclength_params(wide_curve, 40)
        series = r_w_n_series(wide_curve, triple_fixed, 5, rs, cap=0.05)
        assert series.shape == (6, 40)
        tail = r_w_n(wide_curve, triple_fixed, 5, rs, cap=0.05)
        assert np.array_equal(series[5], tail)


class TestGrowthStatistics:
    def test_saturation_at_zero_steps(self, triple_fixed, wide_curve):
        L = wide_curve.length
        tab = growth_statistics(
            wide_curve, triple_fixed, 0, [L], n_points=500
        )
        assert tab.measure[0] == pytest.approx(L, rel=1e-9)

    def test_affine_shape_and_slope(self, triple_fixed, wide_curve):
        eps = list(np.geomspace(1e-4, 1e-2, 7))
        tab = growth_statistics(
            wide_curve, triple_fixed, 10, eps, n_points=4000
        )
        slope, intercept, r2 = tab.affine_fit()
        assert r2 > 0.9
        assert slope > 0
        assert np.all(np.diff(tab.measure) >= 0)


class TestStableProxy:
    def test_n0_formula(self, triple_fixed, mid_slope, lambda_hat):
        W = line_curve(0, 0.31, 0.003, 0.01, mid_slope, n_nodes=17)
        us, rs = stable_size_proxy(W, triple_fixed, 0, 2.0, lambda_hat,
                                   n_points=9)
        s = W.arclength()
        pos = np.interp(rs, W.r, s)
        want = 2.0 * np.minimum(np.minimum(pos, s[-1] - pos), 0.5)
        assert np.allclose(us, want)

    def test_nonincreasing_in_horizon(self, triple_fixed, mid_slope, lambda_hat):
        W = line_curve(0, 0.31, 0.003, 0.01, mid_slope, n_nodes=17)
        a, _ = stable_size_proxy(W, triple_fixed, 3, 1.0, lambda_hat, n_points=50)
        b, _ = stable_size_proxy(W, triple_fixed, 8, 1.0, lambda_hat, n_points=50)
        assert np.all(b <= a + 1e-15)

    def test_density_of_long_proxies(self, triple, triple_fixed, mid_slope,
                                     lambda_hat):
        # middle subsegment of a curve whose image stays one component for
        # two steps: almost every point carries u^s >= |Wtilde|/2
        W = line_curve(0, 0.31, 0.003, 0.01, mid_slope, n_nodes=17)
        comps = push_curve(
            uniform_measured(W), triple.config, triple.config, triple.beta,
            t_max=triple.horizon.t,
        )
        assert len(comps) == 1
        arc = W.arclength()[-1]
        wt_len = 0.1 * arc
        rs = np.linspace(
            np.interp(0.45 * arc, W.arclength(), W.r),
            np.interp(0.55 * arc, W.arclength(), W.r),
            300,
        )
        us, _ = stable_size_proxy(
            W, triple_fixed, 10, 1.0, lambda_hat, rs=rs, cap=wt_len
        )
        assert np.mean(us >= wt_len / 2) >= 0.99


class TestComponentInterval:
    def test_interval_contains_point_and_is_uncut(self, triple_fixed, mid_slope):
        W = line_curve(0, 0.31, 0.003, 0.01, mid_slope, n_nodes=17)
        mid = 0.5 * (W.r[0] + W.r[-1])
        a, b = component_interval(W, triple_fixed, 3, mid)
        assert a <= mid <= b
        assert b - a > 0
        arc = image_arc_uniform(W, triple_fixed, 3, a, b)
        assert arc > 0
