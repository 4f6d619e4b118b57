"""Tangent map, invariant cones, homogeneity strips and separation time.

The derivative of the collision map in (dr, dphi) coordinates is

    D_xF = -(1/cos phi') [[tau k + cos phi,              tau           ],
                          [tau k k' + k cos phi'
                               + k' cos phi,             tau k' + cos phi']]

with k, k' the curvatures at the source and image points, satisfying
det D_xF = cos phi / cos phi'.  Unstable cone slopes live in
[kappa_min, kappa_max + 2/tau_bar_min] and are preserved by every
admissible step; the stable cone is the mirror image under phi -> -phi
and is preserved by inverses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .billiard import CollisionRecord, PhasePoint, billiard_step
from .errors import SingularCollision, VerticalImage

COS_TOL = 1e-12


def dxf(x: PhasePoint, record: CollisionRecord, source_kappa, target_kappa):
    """Exact one-step tangent matrix at a regular collision."""
    cos_in = math.cos(x.phi)
    cos_out = record.cos_phi_out
    if cos_out <= COS_TOL:
        raise SingularCollision(f"cos phi' = {cos_out:.3e} at {record.image}")
    tau = record.flight_time
    k = source_kappa
    kp = target_kappa
    s = -1.0 / cos_out
    return np.array(
        [
            [s * (tau * k + cos_in), s * tau],
            [
                s * (tau * k * kp + k * cos_out + kp * cos_in),
                s * (tau * kp + cos_out),
            ],
        ]
    )


def dxf_from_step(x, record, source, target):
    k = source.disks[x.disk_index].curvature
    kp = target.disks[record.image.disk_index].curvature
    return dxf(x, record, k, kp)


@dataclass(frozen=True)
class ConeSpec:
    slope_min: float
    slope_max: float

    @classmethod
    def for_scene(cls, config, tau_bar_min):
        kmin, kmax = config.curvature_bounds()
        return cls(kmin, kmax + 2.0 / tau_bar_min)

    @property
    def stable_slope_min(self):
        return -self.slope_max

    @property
    def stable_slope_max(self):
        return -self.slope_min

    def contains(self, slope):
        return self.slope_min <= slope <= self.slope_max

    def contains_stable(self, slope):
        return self.stable_slope_min <= slope <= self.stable_slope_max


def cone_image_slopes(m, cone: ConeSpec):
    """Slopes of the images of the cone edge vectors (1, smin), (1, smax)."""
    out = []
    for s in (cone.slope_min, cone.slope_max):
        dr = m[0, 0] + m[0, 1] * s
        dphi = m[1, 0] + m[1, 1] * s
        if dr == 0.0:
            raise VerticalImage(f"cone edge slope {s} maps to a vertical vector")
        out.append(dphi / dr)
    return tuple(out)


def stable_cone_image_slopes(m, cone: ConeSpec):
    """Image slopes of the stable cone edges under the inverse matrix."""
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    inv = np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / det
    out = []
    for s in (cone.stable_slope_min, cone.stable_slope_max):
        dr = inv[0, 0] + inv[0, 1] * s
        dphi = inv[1, 0] + inv[1, 1] * s
        if dr == 0.0:
            raise VerticalImage(f"stable edge slope {s} maps to a vertical vector")
        out.append(dphi / dr)
    return tuple(out)


def unstable_jacobian(m, v):
    """Euclidean expansion factor ||m v|| / ||v||."""
    w0 = m[0, 0] * v[0] + m[0, 1] * v[1]
    w1 = m[1, 0] * v[0] + m[1, 1] * v[1]
    return math.hypot(w0, w1) / math.hypot(v[0], v[1])


@dataclass(frozen=True)
class HomogeneityScheme:
    k0: int = 10
    k_max: int = 10_000

    def __post_init__(self):
        if self.k0 < 2:
            raise ValueError("k0 must be >= 2")


def homogeneity_index(phi, scheme: HomogeneityScheme = HomogeneityScheme()):
    """Signed strip index of phi: 0 for H_0, +-k for the strips at +-pi/2.

    Boundary points belong to the strip on the side away from +-pi/2
    (H_k contains phi = pi/2 - (k+1)^-2).  Indices are capped at k_max;
    capped points count as near-tangential.
    """
    g = math.pi / 2 - abs(phi)
    if g <= 0.0:
        k = scheme.k_max
    else:
        k = math.ceil(1.0 / math.sqrt(g)) - 1
        if k < scheme.k0:
            return 0
        k = min(k, scheme.k_max)
    return k if phi > 0 else -k


def homogeneity_index_array(phi, scheme: HomogeneityScheme = HomogeneityScheme()):
    phi = np.asarray(phi)
    g = np.pi / 2 - np.abs(phi)
    safe = np.maximum(g, 1e-300)
    k = np.ceil(1.0 / np.sqrt(safe)).astype(np.int64) - 1
    k = np.where(g <= 0.0, scheme.k_max, np.minimum(k, scheme.k_max))
    k = np.where(k < scheme.k0, 0, k)
    return np.where(phi > 0, k, -k)


def near_tangential_index(k, scheme: HomogeneityScheme = HomogeneityScheme()):
    return abs(int(k)) >= scheme.k_max


@dataclass(frozen=True)
class Saturated:
    """Separation did not occur within the inspected window."""

    n_max: int

    def __int__(self):
        return self.n_max


def separation_time(
    x: PhasePoint,
    y: PhasePoint,
    scenario,
    n_max: int,
    scheme: HomogeneityScheme = HomogeneityScheme(),
):
    """Smallest n < n_max with the F_n-images in different strips or disks.

    Two near-tangential points (capped strip index) always count as
    separated.  Returns Saturated(n_max) when the orbits never separate
    within the window.
    """
    for n in range(n_max):
        kx = homogeneity_index(x.phi, scheme)
        ky = homogeneity_index(y.phi, scheme)
        if x.disk_index != y.disk_index or kx != ky:
            return n
        if near_tangential_index(kx, scheme) and near_tangential_index(ky, scheme):
            return n
        rx = billiard_step(
            x, scenario.config(n), scenario.config(n + 1), scenario.beta,
            t_max=scenario.horizon.t,
        )
        ry = billiard_step(
            y, scenario.config(n), scenario.config(n + 1), scenario.beta,
            t_max=scenario.horizon.t,
        )
        x, y = rx.image, ry.image
    return Saturated(n_max)


def separation_profile(di, r, phi, scenario, n_max, scheme=HomogeneityScheme()):
    """Batched (disk, strip) labels along orbits: arrays of shape (n_max+1, N).

    Allows vectorized separation-time computation for many points; lost
    particles (no collision within the horizon) get disk label -1 from the
    step on.
    """
    from .billiard import evolve_batch

    di = np.asarray(di, dtype=np.int64)
    r = np.asarray(r, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    disks = np.empty((n_max + 1, di.shape[0]), dtype=np.int64)
    strips = np.empty((n_max + 1, di.shape[0]), dtype=np.int64)
    disks[0] = di
    strips[0] = homogeneity_index_array(phi, scheme)
    alive = np.ones(di.shape[0], dtype=bool)
    for n in range(1, n_max + 1):
        di2, r2, phi2, _, _, _, _, status = kernels.step_batch(
            di, r, phi,
            scenario.config(n - 1), scenario.config(n),
            scenario.beta, scenario.horizon.t,
        )
        alive = alive & (status == 0)
        disks[n] = np.where(alive, di2, -1)
        strips[n] = np.where(alive, homogeneity_index_array(phi2, scheme), 0)
        # lost particles keep their last valid state (labels stay -1)
        di = np.where(alive, di2, di)
        r = np.where(alive, r2, r)
        phi = np.where(alive, phi2, phi)
    return disks, strips


def pair_separation_times(labels_a, labels_b, n_max, scheme=HomogeneityScheme()):
    """First index where two label profiles differ; n_max when censored."""
    disks_a, strips_a = labels_a
    disks_b, strips_b = labels_b
    diff = (disks_a != disks_b) | (strips_a != strips_b)
    both_cap = (np.abs(strips_a) >= scheme.k_max) & (np.abs(strips_b) >= scheme.k_max)
    diff |= both_cap
    out = np.full(diff.shape[1], n_max, dtype=np.int64)
    sat = np.ones(diff.shape[1], dtype=bool)
    for n in range(diff.shape[0]):
        hit = sat & diff[n]
        out[hit] = n
        sat &= ~diff[n]
    return out, sat
