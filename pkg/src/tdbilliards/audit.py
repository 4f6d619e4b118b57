"""Sampled audits of the tangent dynamics over a scene.

Checks the determinant identity det D_xF = cos phi / cos phi', the
invariance of the unstable (forward) and stable (inverse) cones, agreement
of the exact matrix with central finite differences of the map, the
empirical per-step expansion Lambda_hat, and the cos phi' * k^2 band over
the homogeneity strips.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from . import kernels
from .billiard import PhasePoint, billiard_step
from .geometry import tau_min
from .scenario import constant, drift
from .tangent import (
    ConeSpec,
    HomogeneityScheme,
    cone_image_slopes,
    dxf_from_step,
    homogeneity_index_array,
    stable_cone_image_slopes,
    unstable_jacobian,
)


def sample_phase_points(config, n, rng):
    """n points from the normalized measure cos(phi) dr dphi."""
    perims = config.perimeters
    probs = perims / perims.sum()
    di = rng.choice(len(perims), size=n, p=probs).astype(np.int64)
    r = rng.uniform(0.0, perims[di])
    phi = np.arcsin(rng.uniform(-1.0, 1.0, size=n))
    return di, r, phi


@dataclass
class TangentAuditReport:
    scene: str
    n_samples: int
    det_max_abs_err: float
    cone_violations: int
    fd_max_rel_err: float
    lambda_hat: float
    c_cos_low: float
    c_cos_high: float
    n_regular: int = 0
    min_expansion: float = 0.0

    def as_row(self):
        d = asdict(self)
        return {
            k: d[k]
            for k in (
                "scene",
                "n_samples",
                "det_max_abs_err",
                "cone_violations",
                "fd_max_rel_err",
                "lambda_hat",
                "c_cos_low",
                "c_cos_high",
            )
        }


def _pair_for(scene, pair, eps):
    if pair == "fixed":
        return scene.config, scene.config
    if pair == "drift":
        scen = drift(
            scene.config, 1, 0.9 * eps / math.sqrt(len(scene.config.disks)),
            scene.beta, scene.horizon,
        )
        return scen.config(0), scen.config(1)
    raise ValueError(pair)


def det_cone_audit(
    scene,
    n_samples=100_000,
    seed=0,
    pair="fixed",
    eps=1e-3,
    margin_floor=1e-12,
    scheme=HomogeneityScheme(),
):
    """Vectorized determinant + cone audit over sampled regular collisions.

    Returns a dict with det errors, cone violation count, expansion
    minimum and the cos-band data; misses and near-tangential images
    (margin below margin_floor) are excluded from the det/cone tallies.
    """
    source, target = _pair_for(scene, pair, eps)
    rng = np.random.default_rng(seed)
    di, r, phi = sample_phase_points(source, n_samples, rng)
    odi, orr, ophi, tau, _, cosv, margin, status = kernels.step_batch(
        di, r, phi, source, target, scene.beta, scene.horizon.t
    )
    ok = (status == 0) & (margin > margin_floor)
    kap_s = 1.0 / source.radii[di[ok]]
    kap_t = 1.0 / target.radii[odi[ok]]
    cin = np.cos(phi[ok])
    cout = cosv[ok]
    t = tau[ok]

    # matrix entries (common factor -1/cos phi')
    m11 = -(t * kap_s + cin) / cout
    m12 = -t / cout
    m21 = -(t * kap_s * kap_t + kap_s * cout + kap_t * cin) / cout
    m22 = -(t * kap_t + cout) / cout

    # determinant identity, checked in extended precision on the regular
    # set (margin > 1e-3, the same regularity threshold as the
    # finite-difference criterion): the cross terms cancel analytically
    # and double precision alone loses ~1e-9 near tangencies
    reg = margin[ok] > 1e-3
    ld = np.longdouble
    lt, lks, lkt = t[reg].astype(ld), kap_s[reg].astype(ld), kap_t[reg].astype(ld)
    lci, lco = cin[reg].astype(ld), cout[reg].astype(ld)
    l11 = -(lt * lks + lci) / lco
    l12 = -lt / lco
    l21 = -(lt * lks * lkt + lks * lco + lkt * lci) / lco
    l22 = -(lt * lkt + lco) / lco
    det = l11 * l22 - l12 * l21
    det_err = np.abs(det - lci / lco).astype(float)
    if det_err.size == 0:
        det_err = np.zeros(1)

    tbar = min(tau_min(source), tau_min(target))
    cone = ConeSpec.for_scene(source, tbar)
    violations = 0
    min_expansion = np.inf
    for s in (cone.slope_min, cone.slope_max):
        dr = m11 + m12 * s
        dphi = m21 + m22 * s
        slope_img = dphi / dr
        violations += int(
            np.sum((slope_img < cone.slope_min) | (slope_img > cone.slope_max))
        )
        j = np.hypot(dr, dphi) / math.hypot(1.0, s)
        min_expansion = min(min_expansion, float(j.min()) if len(j) else np.inf)
    # stable cone under the inverse matrix (exact inverse via det)
    i11, i12 = m22 / det, -m12 / det
    i21, i22 = -m21 / det, m11 / det
    for s in (cone.stable_slope_min, cone.stable_slope_max):
        dr = i11 + i12 * s
        dphi = i21 + i22 * s
        slope_img = dphi / dr
        violations += int(
            np.sum(
                (slope_img < cone.stable_slope_min)
                | (slope_img > cone.stable_slope_max)
            )
        )

    strips = homogeneity_index_array(ophi[ok], scheme)
    in_strip = (np.abs(strips) >= scheme.k0) & (np.abs(strips) < scheme.k_max)
    band = cout[in_strip] * strips[in_strip].astype(float) ** 2
    return {
        "n_regular": int(ok.sum()),
        "det_max_abs_err": float(det_err.max()),
        "cone_violations": violations,
        "min_expansion": min_expansion,
        "expansion_floor": 1.0 + cone.slope_min * tbar / 2.0,
        "c_cos_low": float(band.min()) if in_strip.any() else float("nan"),
        "c_cos_high": float(band.max()) if in_strip.any() else float("nan"),
    }


def fd_audit(scene, n_samples=100_000, seed=1, pair="fixed", eps=1e-3,
             h=1e-6, margin_min=1e-3):
    """Max relative error of dxf vs central finite differences of the map.

    Vectorized: the base batch and the four perturbed batches are stepped
    together; samples whose perturbed images change disk or whose margin
    falls below margin_min are excluded (they straddle a singularity).
    """
    source, target = _pair_for(scene, pair, eps)
    rng = np.random.default_rng(seed)
    di, r, phi = sample_phase_points(source, n_samples, rng)
    phi = np.clip(phi, -math.pi / 2 + 2 * h, math.pi / 2 - 2 * h)

    def step(rr, pp):
        return kernels.step_batch(
            di, rr, pp, source, target, scene.beta, scene.horizon.t
        )

    d0, r0, p0, tau0, _, cos0, margin0, st0 = step(r, phi)
    # near tangency the third derivative of the map grows like margin^-4,
    # so a fixed step cannot keep the central-difference truncation below
    # the tolerance; shrink h quadratically below margin 0.3
    hs = h * np.minimum(1.0, (np.maximum(margin0, 1e-6) / 0.3) ** 2)
    batches = [
        step(r + hs, phi), step(r - hs, phi),
        step(r, phi + hs), step(r, phi - hs),
    ]
    L = target.perimeters[np.where(d0 >= 0, d0, 0)]

    def unwrap(rr):
        dr = rr - r0
        return dr - L * np.round(dr / L)

    ok = (st0 == 0) & (margin0 > margin_min)
    for b in batches:
        # exclude samples whose perturbation crosses a singularity: image
        # jumps disk, grazes, or lands far away (a different branch on the
        # same disk, e.g. after an occlusion change)
        ok &= (b[7] == 0) & (b[0] == d0) & (b[6] > margin_min / 2)
        ok &= (np.abs(unwrap(b[1])) < 0.01) & (np.abs(b[2] - p0) < 0.01)

    fd11 = (unwrap(batches[0][1]) - unwrap(batches[1][1])) / (2 * hs)
    fd21 = (batches[0][2] - batches[1][2]) / (2 * hs)
    fd12 = (unwrap(batches[2][1]) - unwrap(batches[3][1])) / (2 * hs)
    fd22 = (batches[2][2] - batches[3][2]) / (2 * hs)

    kap_s = 1.0 / source.radii[di]
    kap_t = 1.0 / target.radii[np.where(d0 >= 0, d0, 0)]
    cin = np.cos(phi)
    with np.errstate(divide="ignore", invalid="ignore"):
        a11 = -(tau0 * kap_s + cin) / cos0
        a12 = -tau0 / cos0
        a21 = -(tau0 * kap_s * kap_t + kap_s * cos0 + kap_t * cin) / cos0
        a22 = -(tau0 * kap_t + cos0) / cos0

    err = np.maximum.reduce(
        [np.abs(fd11 - a11), np.abs(fd21 - a21),
         np.abs(fd12 - a12), np.abs(fd22 - a22)]
    )
    scale = np.maximum.reduce(
        [np.abs(a11), np.abs(a12), np.abs(a21), np.abs(a22)]
    )
    rel = np.where(ok, err / scale, 0.0)
    return {"fd_max_rel_err": float(rel.max()), "fd_tested": int(ok.sum())}


def lambda_hat_estimate(scene, n_orbits=12, n_steps=400, seed=2, burn=5):
    """Empirical per-step unstable expansion: exp(mean log J) over orbits."""
    rng = np.random.default_rng(seed)
    cfg = scene.config
    tbar = tau_min(cfg)
    cone = ConeSpec.for_scene(cfg, tbar)
    slope0 = 0.5 * (cone.slope_min + cone.slope_max)
    total = 0.0
    count = 0
    made = 0
    while made < n_orbits:
        di, r, phi = sample_phase_points(cfg, 1, rng)
        x = PhasePoint(int(di[0]), float(r[0]), float(phi[0]))
        v = np.array([1.0, slope0])
        steps = 0
        try:
            for m in range(n_steps):
                rec = billiard_step(x, cfg, cfg, scene.beta, t_max=scene.horizon.t)
                A = dxf_from_step(x, rec, cfg, cfg)
                w = A @ v
                j = math.hypot(*w) / math.hypot(*v)
                if m >= burn:
                    total += math.log(j)
                    count += 1
                v = w / math.hypot(*w)
                x = rec.image
                steps += 1
        except Exception:
            if steps < burn + 10:
                continue
        made += 1
    return math.exp(total / count)


def tangent_audit(scene, scene_name, n_samples=100_000, seed=0, pair="fixed",
                  eps=1e-3, fd_samples=300):
    base = det_cone_audit(scene, n_samples=n_samples, seed=seed, pair=pair, eps=eps)
    fd = fd_audit(scene, n_samples=fd_samples, seed=seed + 1, pair=pair, eps=eps)
    lam = lambda_hat_estimate(scene, seed=seed + 2)
    return TangentAuditReport(
        scene=scene_name,
        n_samples=n_samples,
        det_max_abs_err=base["det_max_abs_err"],
        cone_violations=base["cone_violations"],
        fd_max_rel_err=fd["fd_max_rel_err"],
        lambda_hat=lam,
        c_cos_low=base["c_cos_low"],
        c_cos_high=base["c_cos_high"],
        n_regular=base["n_regular"],
        min_expansion=base["min_expansion"],
    )
