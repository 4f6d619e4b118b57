"""Backend selection and array-level wrappers for the collision kernels.

The compiled extension (`tdbilliards._kernels`, Cython + OpenMP) is used
when importable; otherwise the numpy reference kernels take over.  Set
TDB_BACKEND=python to force the fallback, TDB_THREADS to cap kernel
parallelism.  Within one backend, results are bitwise independent of the
thread count (per-index writes only).
"""

from __future__ import annotations

import math
import os
from functools import lru_cache

import numpy as np

from . import _pykernels
from .geometry import Configuration, lattice_offsets

_forced = os.environ.get("TDB_BACKEND", "").strip().lower()
if _forced in ("", "cython", "c"):
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"
        if _forced:
            raise
else:
    _impl = _pykernels
    BACKEND = "python"


def n_threads():
    env = os.environ.get("TDB_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


@lru_cache(maxsize=128)
def geometry_arrays(config: Configuration):
    """(cx, cy, R, marker) arrays for a configuration."""
    return (
        np.ascontiguousarray(config.centers[:, 0]),
        np.ascontiguousarray(config.centers[:, 1]),
        config.radii.copy(),
        config.markers.copy(),
    )


@lru_cache(maxsize=128)
def candidates(config: Configuration, t_max: float):
    """Unfolded circle candidates reachable from the unit cell within t_max.

    Deterministic order: disk-major, then lattice offset in row order.
    """
    cx, cy, rr, dd = [], [], [], []
    offsets = lattice_offsets(t_max)
    for i, d in enumerate(config.disks):
        for mx, my in offsets:
            x = d.center[0] + mx
            y = d.center[1] + my
            gx = max(0.0, abs(x - 0.5) - 0.5)
            gy = max(0.0, abs(y - 0.5) - 0.5)
            if math.hypot(gx, gy) <= t_max + d.radius:
                cx.append(x)
                cy.append(y)
                rr.append(d.radius)
                dd.append(i)
    return (
        np.asarray(cx),
        np.asarray(cy),
        np.asarray(rr),
        np.asarray(dd, dtype=np.int64),
    )


def step_batch(di, r, phi, source, target, beta, t_max, floor_override=None):
    """Vectorized collision step; see _pykernels.step_batch for the contract."""
    di = np.ascontiguousarray(di, dtype=np.int64)
    r = np.ascontiguousarray(r, dtype=np.float64)
    phi = np.ascontiguousarray(phi, dtype=np.float64)
    scx, scy, sR, smark = geometry_arrays(source)
    _, _, tR, tmark = geometry_arrays(target)
    ccx, ccy, cR, cdisk = candidates(target, t_max)
    if floor_override is not None:
        floor_override = np.ascontiguousarray(floor_override, dtype=np.float64)
    return _impl.step_batch(
        di,
        r,
        phi,
        scx,
        scy,
        sR,
        smark,
        tR,
        tmark,
        ccx,
        ccy,
        cR,
        cdisk,
        float(beta),
        float(t_max),
        floor_override,
        n_threads(),
    )


def trace_batch(qx, qy, vx, vy, config, floor, t_max):
    """First hit time and candidate index per ray; misses get (inf, -1)."""
    qx = np.ascontiguousarray(qx, dtype=np.float64)
    qy = np.ascontiguousarray(qy, dtype=np.float64)
    vx = np.ascontiguousarray(vx, dtype=np.float64)
    vy = np.ascontiguousarray(vy, dtype=np.float64)
    floor = np.array(np.broadcast_to(floor, qx.shape), dtype=np.float64)
    ccx, ccy, cR, cdisk = candidates(config, t_max)
    t, k = _impl.trace_batch(qx, qy, vx, vy, ccx, ccy, cR, floor, float(t_max), n_threads())
    t = np.where(k < 0, np.inf, t)
    return t, k, (ccx, ccy, cR, cdisk)


def horizon_scan(config, t_len, phi_min, n_base, n_dirs):
    """Grid sweep for the (t, phi)-horizon condition.

    Returns (ok, min_margin, base_x, base_y, direction_angle) where the
    base point and angle witness the worst sampled segment.
    """
    ccx, ccy, cR, _ = candidates(config, t_len)
    margins, diridx = _impl.horizon_margins(
        ccx, ccy, cR, float(t_len), math.sin(phi_min), int(n_base), int(n_dirs), n_threads()
    )
    i = int(np.argmin(margins))
    min_margin = float(margins[i])
    j = int(diridx[i])
    bx = ((i // n_base) + 0.5) / n_base
    by = ((i % n_base) + 0.5) / n_base
    ang = 2.0 * math.pi * j / n_dirs
    return bool(min_margin > 0.0), min_margin, bx, by, ang
