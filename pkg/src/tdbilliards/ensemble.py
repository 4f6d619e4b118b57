"""Monte-Carlo memory-loss and correlation-decay experiments.

Estimates of integrals against evolved densities use fixed-size particle
blocks with a fixed pairwise-tree reduction, so results are bitwise
independent of how the stepping kernel is threaded.  Standard errors come
from bootstrap resampling over blocks (deterministic, seeded).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .densities import get_observable, sample_density, uniform_density
from .errors import NoCollisionWithinHorizon

BLOCK = 4096
N_BOOT = 200


def tree_sum(values):
    """Fixed-order pairwise-tree reduction (order independent of threads)."""
    vals = np.asarray(values, dtype=np.float64).copy()
    n = vals.shape[0]
    while n > 1:
        half = n // 2
        vals[:half] = vals[:half] + vals[half : 2 * half]
        if n % 2:
            vals[half] = vals[2 * half]
            n = half + 1
        else:
            n = half
    return float(vals[0])


def _block_sums(values):
    """Per-block tree sums and block sizes (last block may be short)."""
    n = values.shape[0]
    nb = (n + BLOCK - 1) // BLOCK
    sums = np.empty(nb)
    sizes = np.empty(nb)
    for b in range(nb):
        chunk = values[b * BLOCK : (b + 1) * BLOCK]
        sums[b] = tree_sum(chunk)
        sizes[b] = chunk.shape[0]
    return sums, sizes


class EnsembleTracker:
    """Evolves a particle ensemble, recording block sums of f per step."""

    def __init__(self, di, r, phi, f, perims):
        self.di = np.asarray(di, dtype=np.int64)
        self.r = np.asarray(r, dtype=np.float64)
        self.phi = np.asarray(phi, dtype=np.float64)
        self.f = f
        self.perims = perims
        self.n = self.di.shape[0]
        sums, self.block_sizes = _block_sums(f(self.di, self.r, self.phi, perims))
        self.block_sums = [sums]

    def step(self, source, target, beta, t_max):
        di, r, phi, _, _, _, _, status = kernels.step_batch(
            self.di, self.r, self.phi, source, target, beta, t_max
        )
        if status.any():
            raise NoCollisionWithinHorizon(
                f"{int((status != 0).sum())} particles lost"
            )
        self.di, self.r, self.phi = di, r, phi
        self.block_sums.append(
            _block_sums(self.f(di, r, phi, self.perims))[0]
        )

    def estimates(self):
        """Mean of f per recorded step, via the block tree."""
        return np.array([tree_sum(bs) / self.n for bs in self.block_sums])


@dataclass
class DecaySeries:
    n: np.ndarray
    estimate_mu1: np.ndarray
    estimate_mu2: np.ndarray
    delta: np.ndarray
    stderr: np.ndarray
    fit_c: float = math.nan
    fit_theta: float = math.nan
    fit_r2: float = math.nan
    fit_range: tuple = (0, 0)
    step_distances: list = field(default_factory=list)
    constants_validated: bool = True
    noise_floor_hit: bool = False


def _bootstrap_stderr(blocks1, sizes1, blocks2, sizes2, seed):
    """Bootstrap (over blocks) standard error of |mean1 - mean2| per step.

    Means are ratio estimators sum(block sums)/sum(block sizes) so unequal
    final blocks carry their correct weight.
    """
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xB007)))
    b1 = np.asarray(blocks1)  # (steps, nblocks)
    b2 = np.asarray(blocks2)
    nb = b1.shape[1]
    deltas = np.empty((N_BOOT, b1.shape[0]))
    for k in range(N_BOOT):
        idx1 = rng.integers(0, nb, size=nb)
        idx2 = rng.integers(0, nb, size=nb)
        m1 = b1[:, idx1].sum(axis=1) / sizes1[idx1].sum()
        m2 = b2[:, idx2].sum(axis=1) / sizes2[idx2].sum()
        deltas[k] = np.abs(m1 - m2)
    return deltas.std(axis=0, ddof=1)


def fit_decay(n, delta, stderr):
    """Weighted log-linear fit of delta over the significant range.

    The fit starts at the argmax of delta and keeps points with
    delta > 3 * stderr.  Returns (C, theta, r2, (lo, hi), floor_hit).
    """
    n = np.asarray(n, dtype=float)
    start = int(np.argmax(delta))
    mask = np.zeros(len(n), dtype=bool)
    floor_hit = False
    misses = 0
    for i in range(start, len(n)):
        if delta[i] > 3.0 * stderr[i] and delta[i] > 0:
            mask[i] = True
            misses = 0
        else:
            floor_hit = True
            misses += 1
            if misses >= 2:
                break
    sel = np.nonzero(mask)[0]
    if len(sel) < 3:
        return math.nan, math.nan, math.nan, (0, 0), floor_hit
    x = n[sel]
    y = np.log(delta[sel])
    w = (delta[sel] / stderr[sel]) ** 2
    W = np.sum(w)
    xm = np.sum(w * x) / W
    ym = np.sum(w * y) / W
    slope = np.sum(w * (x - xm) * (y - ym)) / np.sum(w * (x - xm) ** 2)
    intercept = ym - slope * xm
    pred = intercept + slope * x
    ss_res = np.sum(w * (y - pred) ** 2)
    ss_tot = np.sum(w * (y - ym) ** 2)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return (
        float(math.exp(intercept)),
        float(math.exp(slope)),
        float(r2),
        (int(sel[0]), int(sel[-1])),
        floor_hit,
    )


def memory_loss(
    mu1, mu2, f, scenario, n_max, n_particles, seed, estimator="coupled"
):
    """|int f o F_n dmu1 - int f o F_n dmu2| with bootstrap errors and fit.

    estimator="coupled" (default) evolves one ensemble drawn from the
    normalized cos(phi) measure and reweights it by the two densities:
    trajectory noise cancels in the difference, lowering the noise floor
    by orders of magnitude.  estimator="independent" evolves two
    rejection-sampled ensembles.
    """
    f = get_observable(f)
    config0 = scenario.config(0)
    perims = config0.perimeters
    if estimator == "coupled":
        return _memory_loss_coupled(
            mu1, mu2, f, scenario, n_max, n_particles, seed, config0, perims
        )
    s1 = sample_density(mu1, config0, n_particles, seed=_substream(seed, 1))
    s2 = sample_density(mu2, config0, n_particles, seed=_substream(seed, 2))
    t1 = EnsembleTracker(*s1, f, perims)
    t2 = EnsembleTracker(*s2, f, perims)
    for i in range(1, n_max + 1):
        src, tgt = scenario.config(i - 1), scenario.config(i)
        t1.step(src, tgt, scenario.beta, scenario.horizon.t)
        t2.step(src, tgt, scenario.beta, scenario.horizon.t)
    e1 = t1.estimates()
    e2 = t2.estimates()
    delta = np.abs(e1 - e2)
    stderr = _bootstrap_stderr(
        t1.block_sums, t1.block_sizes, t2.block_sums, t2.block_sizes, seed
    )
    c, theta, r2, rng_, floor_hit = fit_decay(np.arange(n_max + 1), delta, stderr)
    return DecaySeries(
        n=np.arange(n_max + 1),
        estimate_mu1=e1,
        estimate_mu2=e2,
        delta=delta,
        stderr=stderr,
        fit_c=c,
        fit_theta=theta,
        fit_r2=r2,
        fit_range=rng_,
        step_distances=scenario.step_distances(),
        constants_validated=f.validated,
        noise_floor_hit=floor_hit,
    )


def _memory_loss_coupled(
    mu1, mu2, f, scenario, n_max, n_particles, seed, config0, perims
):
    from .densities import uniform_density

    base = uniform_density(config0)
    di, r, phi = sample_density(base, config0, n_particles, seed=_substream(seed, 1))
    w1 = mu1(di, r, phi, perims) / base(di, r, phi, perims)
    w2 = mu2(di, r, phi, perims) / base(di, r, phi, perims)
    w1_blocks, sizes = _block_sums(w1)
    w2_blocks, _ = _block_sums(w2)
    w1_tot = tree_sum(w1_blocks)
    w2_tot = tree_sum(w2_blocks)

    fb1 = [_block_sums(w1 * f(di, r, phi, perims))[0]]
    fb2 = [_block_sums(w2 * f(di, r, phi, perims))[0]]
    for i in range(1, n_max + 1):
        src, tgt = scenario.config(i - 1), scenario.config(i)
        di, r, phi, _, _, _, _, status = kernels.step_batch(
            di, r, phi, src, tgt, scenario.beta, scenario.horizon.t
        )
        if status.any():
            raise NoCollisionWithinHorizon(
                f"{int((status != 0).sum())} particles lost at step {i}"
            )
        fv = f(di, r, phi, perims)
        fb1.append(_block_sums(w1 * fv)[0])
        fb2.append(_block_sums(w2 * fv)[0])
    e1 = np.array([tree_sum(b) / w1_tot for b in fb1])
    e2 = np.array([tree_sum(b) / w2_tot for b in fb2])
    delta = np.abs(e1 - e2)

    # coupled bootstrap: the same block resample drives both weightings
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xB007)))
    b1 = np.asarray(fb1)
    b2 = np.asarray(fb2)
    nb = b1.shape[1]
    boots = np.empty((N_BOOT, b1.shape[0]))
    for k in range(N_BOOT):
        idx = rng.integers(0, nb, size=nb)
        m1 = b1[:, idx].sum(axis=1) / w1_blocks[idx].sum()
        m2 = b2[:, idx].sum(axis=1) / w2_blocks[idx].sum()
        boots[k] = np.abs(m1 - m2)
    stderr = boots.std(axis=0, ddof=1)

    c, theta, r2, rng_, floor_hit = fit_decay(np.arange(n_max + 1), delta, stderr)
    return DecaySeries(
        n=np.arange(n_max + 1),
        estimate_mu1=e1,
        estimate_mu2=e2,
        delta=delta,
        stderr=stderr,
        fit_c=c,
        fit_theta=theta,
        fit_r2=r2,
        fit_range=rng_,
        step_distances=scenario.step_distances(),
        constants_validated=f.validated,
        noise_floor_hit=floor_hit,
    )


def _substream(seed, k):
    return int(np.random.SeedSequence([seed, k]).generate_state(1)[0])


@dataclass
class CorrelationSeries:
    n: np.ndarray
    estimate_mu1: np.ndarray     # int f o F^n dmu' (reweighted measure)
    estimate_mu2: np.ndarray     # int f o F^n dmu
    delta: np.ndarray            # C(n) via the reduction a*(mu' - mu)
    stderr: np.ndarray
    delta_direct: np.ndarray     # covariance estimator on the mu ensemble
    stderr_direct: np.ndarray
    a: float
    g_mean: float
    fit_c: float = math.nan
    fit_theta: float = math.nan
    fit_r2: float = math.nan
    fit_range: tuple = (0, 0)
    agree: bool = True


def correlation_decay(f, g, config, n_max, n_particles, seed, beta, horizon):
    """C(n) = int f o F^n g dmu - int f dmu int g dmu for the fixed map.

    Computed two ways: directly (covariance on a mu-ensemble with weights
    g) and via the normalized density (g + a)/a trick; the two estimators
    are cross-checked within their combined errors.
    """
    from .densities import SmoothDensity, normalized
    from .scenario import constant

    f = get_observable(f)
    g = get_observable(g)
    scen = constant(config, n_max, beta, horizon)
    perims = config.perimeters
    mu = uniform_density(config)

    # center g under mu by quadrature
    from .densities import normalization

    g_mean = normalization(
        SmoothDensity(
            lambda di, r, phi, p: g(di, r, phi, p) * mu(di, r, phi, p),
            math.inf,
        ),
        config,
    )
    a = 1.0 + g_mean - g.inf  # a = 1 - inf(g - g_mean)

    def mu_prime_ev(di, r, phi, p):
        return (g(di, r, phi, p) - g_mean + a) / a * mu(di, r, phi, p)

    mu_prime = SmoothDensity(
        mu_prime_ev, (g.sup + abs(g_mean) + a) / a * mu.sup_bound, name="mu_prime"
    )

    s_mu = sample_density(mu, config, n_particles, seed=_substream(seed, 3))
    s_mup = sample_density(mu_prime, config, n_particles, seed=_substream(seed, 4))

    t_mu = EnsembleTracker(*s_mu, f, perims)
    t_mup = EnsembleTracker(*s_mup, f, perims)
    # direct estimator: weights g(x_0) - g_mean on the mu ensemble
    g0 = g(*s_mu, perims) - g_mean
    g_blocks, g_sizes = _block_sums(g0)
    prod_blocks = [
        _block_sums(f(*s_mu, perims) * g0)[0]
    ]
    for i in range(1, n_max + 1):
        src, tgt = scen.config(i - 1), scen.config(i)
        t_mu.step(src, tgt, beta, horizon.t)
        t_mup.step(src, tgt, beta, horizon.t)
        prod_blocks.append(
            _block_sums(t_mu.f(t_mu.di, t_mu.r, t_mu.phi, perims) * g0)[0]
        )
    e_mu = t_mu.estimates()
    e_mup = t_mup.estimates()
    n_arr = np.arange(n_max + 1)
    c_reduced = a * (e_mup - e_mu)
    se_reduced = a * _bootstrap_stderr(
        t_mup.block_sums, t_mup.block_sizes, t_mu.block_sums, t_mu.block_sizes,
        seed,
    )
    # direct: mean(f_n * g0) - mean(f_n) * mean(g0)
    gm = tree_sum(g_blocks) / n_particles
    c_direct = np.array(
        [tree_sum(pb) / n_particles for pb in prod_blocks]
    ) - e_mu * gm
    se_direct = _bootstrap_corr(
        prod_blocks, t_mu.block_sums, g_blocks, g_sizes, seed
    )
    agree = bool(
        np.all(
            np.abs(np.abs(c_reduced) - np.abs(c_direct))
            <= 4.0 * np.hypot(se_reduced, se_direct) + 1e-12
        )
    )
    c, theta, r2, rng_, _ = fit_decay(n_arr, np.abs(c_reduced), se_reduced)
    return CorrelationSeries(
        n=n_arr,
        estimate_mu1=e_mup,
        estimate_mu2=e_mu,
        delta=c_reduced,
        stderr=se_reduced,
        delta_direct=c_direct,
        stderr_direct=se_direct,
        a=a,
        g_mean=g_mean,
        fit_c=c,
        fit_theta=theta,
        fit_r2=r2,
        fit_range=rng_,
        agree=agree,
    )


def _bootstrap_corr(prod_blocks, f_blocks, g_blocks, sizes, seed):
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xC044)))
    pb = np.asarray(prod_blocks)   # (steps, nb)
    fb = np.asarray(f_blocks)
    gb = np.asarray(g_blocks)
    nb = gb.shape[0]
    out = np.empty((N_BOOT, pb.shape[0]))
    for k in range(N_BOOT):
        idx = rng.integers(0, nb, size=nb)
        tot = sizes[idx].sum()
        out[k] = pb[:, idx].sum(axis=1) / tot - (
            fb[:, idx].sum(axis=1) / tot
        ) * (gb[idx].sum() / tot)
    return out.std(axis=0, ddof=1)
