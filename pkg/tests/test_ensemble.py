import math

import numpy as np
import pytest
import scipy.stats

from tdbilliards.densities import (
    OBSERVABLES,
    SmoothDensity,
    cos_tilt_density,
    disk_peak_density,
    normalization,
    sample_density,
    sine_density,
    uniform_density,
)
from tdbilliards.ensemble import (
    correlation_decay,
    memory_loss,
    tree_sum,
)
from tdbilliards.errors import EnvelopeTooTight
from tdbilliards.scenario import constant, from_spec


class TestDensities:
    def test_normalized(self, triple):
        for make in (uniform_density, sine_density, cos_tilt_density):
            d = make(triple.config)
            assert normalization(d, triple.config) == pytest.approx(1.0, abs=1e-4)

    def test_uniform_phi_law(self, triple):
        d = uniform_density(triple.config)
        di, r, phi = sample_density(d, triple.config, 20_000, seed=3)
        # phi ~ cos(phi)/2: CDF (1 + sin(phi)) / 2
        stat = scipy.stats.kstest(phi, lambda x: (1 + np.sin(x)) / 2).statistic
        assert stat < 1.36 / math.sqrt(len(phi))

    def test_peak_density_concentrates(self, triple):
        d = disk_peak_density(triple.config, disk=2)
        di, _, _ = sample_density(d, triple.config, 2000, seed=4)
        assert np.all(di == 2)

    def test_seed_determinism(self, triple):
        d = sine_density(triple.config)
        a = sample_density(d, triple.config, 5000, seed=5)
        b = sample_density(d, triple.config, 5000, seed=5)
        for x, y in zip(a, b):
            assert np.array_equal(x, y)

    def test_envelope_too_tight(self, triple):
        bad = SmoothDensity(
            lambda di, r, phi, p: np.full_like(r, 1e-6), sup_bound=10.0
        )
        with pytest.raises(EnvelopeTooTight):
            sample_density(bad, triple.config, 5000, seed=6)


def test_tree_sum_matches_reference():
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, 1537)
    assert tree_sum(x) == pytest.approx(math.fsum(x), abs=1e-12)


class TestMemoryLoss:
    def test_equal_measures_zero(self, triple):
        scen = from_spec(triple, "fixed", 4, eps=0)
        mu = sine_density(triple.config)
        ds = memory_loss(mu, mu, "cos_phi", scen, 4, 20_000, seed=7)
        assert np.all(ds.delta == 0.0)

    def test_constant_observable_exact_zero(self, triple):
        scen = from_spec(triple, "fixed", 3, eps=0)
        mu1 = sine_density(triple.config)
        mu2 = uniform_density(triple.config)
        const = lambda di, r, phi, p: np.ones_like(r)
        ds = memory_loss(mu1, mu2, const, scen, 3, 10_000, seed=8)
        assert np.all(ds.delta == 0.0)
        assert not ds.constants_validated

    def test_triangle_bound(self, triple):
        scen = from_spec(triple, "drift", 6, eps=1e-3)
        ds = memory_loss(
            cos_tilt_density(triple.config), uniform_density(triple.config),
            "cos_phi", scen, 6, 50_000, seed=9,
        )
        assert np.all(ds.delta <= 2.0)  # 2 ||f||_inf

    def test_tilt_pair_decay_shape(self, triple):
        scen = from_spec(triple, "drift", 10, eps=1e-3)
        ds = memory_loss(
            cos_tilt_density(triple.config), uniform_density(triple.config),
            "cos_phi", scen, 10, 200_000, seed=11,
        )
        assert ds.delta[0] > 0.02
        assert ds.fit_theta < 1.0
        assert ds.fit_r2 > 0.9
        floor = 3.0 * ds.stderr
        sig = ds.delta > floor
        assert ds.delta[0] / ds.delta[sig].min() >= 10.0
        assert max(ds.step_distances) < 1e-3

    def test_sine_pair_transient(self, triple):
        # the sine-density difference is orthogonal to cos(phi) at n = 0,
        # shows a short significant transient and then sinks below the
        # Monte-Carlo floor; no multi-point exponential range survives
        scen = from_spec(triple, "fixed", 10, eps=0)
        ds = memory_loss(
            sine_density(triple.config), uniform_density(triple.config),
            "cos_phi", scen, 10, 400_000, seed=12,
        )
        assert ds.delta[0] <= 4.0 * ds.stderr[0]
        peak = int(np.argmax(ds.delta))
        assert 1 <= peak <= 4
        assert ds.delta[peak] > 3.0 * ds.stderr[peak]
        tail = ds.delta[peak + 3 :]
        assert np.median(tail) < ds.delta[peak] / 2

    def test_independent_estimator_consistent(self, triple):
        scen = from_spec(triple, "fixed", 3, eps=0)
        mu1 = cos_tilt_density(triple.config)
        mu2 = uniform_density(triple.config)
        a = memory_loss(mu1, mu2, "cos_phi", scen, 3, 100_000, seed=13,
                        estimator="coupled")
        b = memory_loss(mu1, mu2, "cos_phi", scen, 3, 100_000, seed=13,
                        estimator="independent")
        for i in range(4):
            assert abs(a.delta[i] - b.delta[i]) < 4 * (a.stderr[i] + b.stderr[i])


class TestFixedMapInvariance:
    def test_pushforward_preserves_integrals(self, triple):
        # estimates of int f o F_n dmu stay constant in n for K' = K
        mu = uniform_density(triple.config)
        from tdbilliards.densities import get_observable
        from tdbilliards.ensemble import EnsembleTracker

        di, r, phi = sample_density(mu, triple.config, 200_000, seed=15)
        for name in ("cos_phi", "sin_r"):
            f = get_observable(name)
            tr = EnsembleTracker(di, r, phi, f, triple.config.perimeters)
            for i in range(5):
                tr.step(triple.config, triple.config, triple.beta,
                        triple.horizon.t)
            est = tr.estimates()
            se = np.std(f(di, r, phi, triple.config.perimeters)) / math.sqrt(len(r))
            assert np.all(np.abs(est - est[0]) < 3.5 * se * math.sqrt(2))


class TestCorrelation:
    def test_variance_at_zero(self, triple):
        cs = correlation_decay(
            "sin_r", "sin_r", triple.config, 2, 150_000, 16,
            triple.beta, triple.horizon,
        )
        # C(0) = Var(g); quadrature oracle for the variance
        perims = triple.config.perimeters
        var = normalization(
            SmoothDensity(
                lambda di, r, phi, p:
                    (np.sin(2 * np.pi * r / p[di]) - cs.g_mean) ** 2
                    * uniform_density(triple.config)(di, r, phi, p),
                math.inf,
            ),
            triple.config,
        )
        assert cs.delta[0] == pytest.approx(var, rel=0.05)
        assert cs.delta_direct[0] == pytest.approx(var, rel=0.05)

    def test_constant_observable_centered(self, triple):
        const = lambda di, r, phi, p: np.full_like(r, 2.5)
        cs = correlation_decay(
            const, "sin_r", triple.config, 2, 50_000, 17,
            triple.beta, triple.horizon,
        )
        assert np.all(np.abs(cs.delta) < 1e-10)

    def test_estimators_agree_and_decay(self, triple):
        cs = correlation_decay(
            "cos_phi", "sin_r", triple.config, 8, 150_000, 18,
            triple.beta, triple.horizon,
        )
        assert cs.agree
        # decays below the noise floor by some n*
        below = np.abs(cs.delta) < 3.0 * cs.stderr
        assert below[-3:].all()

    def test_determinism(self, triple):
        a = correlation_decay("cos_phi", "sin_r", triple.config, 3, 30_000,
                              19, triple.beta, triple.horizon)
        b = correlation_decay("cos_phi", "sin_r", triple.config, 3, 30_000,
                              19, triple.beta, triple.horizon)
        assert np.array_equal(a.delta, b.delta)
        assert np.array_equal(a.stderr, b.stderr)
