"""Initial densities on phase space and the shipped observables.

Densities are taken with respect to the measure cos(phi) dr dphi on the
union of the boundary cylinders; evaluators are vectorized over
(disk index, r, phi) arrays.  The shipped observables carry declared
Hölder data so experiment fits can flag unvalidated constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EnvelopeTooTight


@dataclass(frozen=True)
class SmoothDensity:
    evaluator: callable          # (di, r, phi, perimeters) -> positive array
    sup_bound: float
    holder_constant_log: float = 0.0
    name: str = ""

    def __call__(self, di, r, phi, perimeters):
        return self.evaluator(di, r, phi, perimeters)


def normalization(density, config, n_r=512, n_phi=257):
    """Quadrature of rho cos(phi) dr dphi over every boundary cylinder."""
    total = 0.0
    phi = np.linspace(-math.pi / 2, math.pi / 2, n_phi)
    w_phi = np.cos(phi)
    perims = config.perimeters
    for i, L in enumerate(perims):
        r = np.linspace(0.0, L, n_r)
        rr, pp = np.meshgrid(r, phi, indexing="ij")
        di = np.full(rr.size, i, dtype=np.int64)
        vals = density(di, rr.ravel(), pp.ravel(), perims).reshape(rr.shape)
        total += np.trapezoid(
            np.trapezoid(vals * w_phi[None, :], phi, axis=1), r, axis=0
        )
    return float(total)


def normalized(density: SmoothDensity, config) -> SmoothDensity:
    z = normalization(density, config)
    ev = density.evaluator
    return SmoothDensity(
        evaluator=lambda di, r, phi, perims: ev(di, r, phi, perims) / z,
        sup_bound=density.sup_bound / z,
        holder_constant_log=density.holder_constant_log,
        name=density.name,
    )


def uniform_density(config) -> SmoothDensity:
    return normalized(
        SmoothDensity(lambda di, r, phi, perims: np.ones_like(r), 1.0, 0.0, "uniform"),
        config,
    )


def sine_density(config, amplitude=0.5) -> SmoothDensity:
    """1 + amplitude * sin(2 pi r / |Gamma_i|), normalized."""

    def ev(di, r, phi, perims):
        return 1.0 + amplitude * np.sin(2.0 * math.pi * r / perims[di])

    # |log rho| is smooth; declare its Lipschitz constant as Hölder data
    c = amplitude * 2.0 * math.pi / (1.0 - amplitude)
    return normalized(
        SmoothDensity(ev, 1.0 + amplitude, c, f"sine{amplitude}"), config
    )


def cos_tilt_density(config, amplitude=0.8) -> SmoothDensity:
    """1 + amplitude * cos(phi), normalized; shifts the phi-marginal."""

    def ev(di, r, phi, perims):
        return 1.0 + amplitude * np.cos(phi)

    c = amplitude / (1.0 - amplitude) if amplitude < 1 else amplitude * 2
    return normalized(
        SmoothDensity(ev, 1.0 + amplitude, c, f"cos_tilt{amplitude}"), config
    )


def disk_peak_density(config, disk=0, strength=4.0) -> SmoothDensity:
    """Mass concentrated smoothly on one disk."""

    def ev(di, r, phi, perims):
        return np.where(di == disk, strength, 1e-9)

    return normalized(SmoothDensity(ev, strength, 0.0, f"peak{disk}"), config)


def sample_density(density: SmoothDensity, config, n, seed, max_batches=4000):
    """Rejection sampling against the cos(phi) * sup_bound envelope.

    Deterministic for a given seed; raises EnvelopeTooTight when the
    acceptance rate drops below 1e-3.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    perims = config.perimeters
    probs = perims / perims.sum()
    out_d, out_r, out_p = [], [], []
    got = 0
    proposed = 0
    for _ in range(max_batches):
        m = max(4096, int(1.3 * (n - got)))
        di = rng.choice(len(perims), size=m, p=probs).astype(np.int64)
        r = rng.uniform(0.0, perims[di])
        phi = np.arcsin(rng.uniform(-1.0, 1.0, size=m))
        u = rng.uniform(0.0, 1.0, size=m)
        ratio = density(di, r, phi, perims) / density.sup_bound
        keep = u < ratio
        proposed += m
        got += int(keep.sum())
        out_d.append(di[keep])
        out_r.append(r[keep])
        out_p.append(phi[keep])
        if got >= n:
            break
        if proposed > 10_000 and got / proposed < 1e-3:
            raise EnvelopeTooTight(
                f"acceptance rate {got / proposed:.2e} for {density.name}"
            )
    if got < n:
        raise EnvelopeTooTight(f"only {got}/{n} samples accepted")
    di = np.concatenate(out_d)[:n]
    r = np.concatenate(out_r)[:n]
    phi = np.concatenate(out_p)[:n]
    return di, r, phi


@dataclass(frozen=True)
class Observable:
    name: str
    func: callable               # (di, r, phi, perimeters) -> array
    sup: float
    holder_exponent: float
    holder_constant: float
    inf: float
    validated: bool = True       # shipped observables have vetted constants

    def __call__(self, di, r, phi, perimeters):
        return self.func(di, r, phi, perimeters)


OBSERVABLES = {
    "cos_phi": Observable(
        "cos_phi", lambda di, r, phi, perims: np.cos(phi), 1.0, 1.0, 1.0, 0.0
    ),
    "sin_r": Observable(
        "sin_r",
        lambda di, r, phi, perims: np.sin(2.0 * math.pi * r / perims[di]),
        1.0,
        1.0,
        2.0 * math.pi,
        -1.0,
    ),
    "disk0": Observable(
        "disk0",
        lambda di, r, phi, perims: (di == 0).astype(float),
        1.0,
        1.0 / 6.0,
        0.0,
        0.0,
    ),
}


def get_observable(name) -> Observable:
    if callable(name):
        return Observable(getattr(name, "__name__", "custom"), name,
                          math.inf, 1.0, math.inf, -math.inf, validated=False)
    try:
        return OBSERVABLES[name]
    except KeyError:
        raise KeyError(f"unknown observable {name!r}; have {sorted(OBSERVABLES)}")
