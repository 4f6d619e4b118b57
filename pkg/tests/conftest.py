import math

import numpy as np
import pytest

from tdbilliards.audit import lambda_hat_estimate
from tdbilliards.geometry import tau_min
from tdbilliards.scenario import constant
from tdbilliards.scenes import shipped_scene
from tdbilliards.tangent import ConeSpec


@pytest.fixture(scope="session")
def triple():
    return shipped_scene("finite_horizon_triple")


@pytest.fixture(scope="session")
def two_disks():
    return shipped_scene("finite_horizon_two_disks")


@pytest.fixture(scope="session")
def triple_fixed(triple):
    return constant(triple.config, 120, triple.beta, triple.horizon)


@pytest.fixture(scope="session")
def mid_slope(triple):
    cone = ConeSpec.for_scene(triple.config, tau_min(triple.config))
    return 0.5 * (cone.slope_min + cone.slope_max)


@pytest.fixture(scope="session")
def lambda_hat(triple):
    return lambda_hat_estimate(triple, n_orbits=6, n_steps=300, seed=2)


def brute_force_tau_min(config, block=2):
    """Independent oracle: minimize pairwise gap over lifted copies."""
    best = math.inf
    disks = config.disks
    for i, a in enumerate(disks):
        for j, b in enumerate(disks):
            for mx in range(-block, block + 1):
                for my in range(-block, block + 1):
                    if i == j and mx == 0 and my == 0:
                        continue
                    if j < i:
                        continue
                    d = math.hypot(
                        b.center[0] + mx - a.center[0],
                        b.center[1] + my - a.center[1],
                    )
                    best = min(best, d - a.radius - b.radius)
    return best


def ray_circle_entries(q, v, circles, t_lo, t_hi):
    """Oracle tracer: all outside-entries of a ray into given circles.

    Uses numpy.roots per circle, independent of the kernel's citardauq
    arithmetic.  circles: iterable of (cx, cy, R, tag).
    """
    hits = []
    for cx, cy, R, tag in circles:
        dx, dy = q[0] - cx, q[1] - cy
        coeffs = [1.0, 2.0 * (dx * v[0] + dy * v[1]), dx * dx + dy * dy - R * R]
        roots = np.roots(coeffs)
        roots = roots[np.abs(roots.imag) < 1e-12].real
        if len(roots) == 2:
            t = roots.min()  # entry root
            if t_lo < t < t_hi:
                hits.append((float(t), tag, (cx, cy, R)))
    hits.sort()
    return hits


def lattice_circles(config, block=4):
    out = []
    for i, d in enumerate(config.disks):
        for mx in range(-block, block + 1):
            for my in range(-block, block + 1):
                out.append((d.center[0] + mx, d.center[1] + my, d.radius, i))
    return out
