"""Pure-numpy reference kernels.

Semantics (candidate order, root selection, tie-breaking, floor rule)
match tdbilliards._kernels op for op; the compiled core is the fast path
and this module is the fallback selected at import time.  Collision times
use the citardauq form of the quadratic formula, which is stable for the
small (entry) root of grazing intersections.
"""

import math

import numpy as np

PI = math.pi
TWO_PI = 2.0 * math.pi


def step_batch(
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
    beta,
    t_max,
    floor_override,
    n_threads=1,
):
    """One collision step for a batch of phase points.

    Returns (disk', r', phi', tau, t_exit, cos_out, margin, status) with
    status 0 = ok, 1 = no collision within t_max.
    """
    di = np.asarray(di)
    R = sR[di]
    th = smark[di] - r / R
    qx = scx[di] + R * np.cos(th)
    qy = scy[di] + R * np.sin(th)
    psi = th - phi
    vx = np.cos(psi)
    vy = np.sin(psi)

    # exit time from the source disk's beta-buffer (the ray starts on the
    # disk boundary, strictly inside the buffer, so the positive root exists)
    Rb = R + beta
    dx = qx - scx[di]
    dy = qy - scy[di]
    b = 2.0 * (dx * vx + dy * vy)
    c = dx * dx + dy * dy - Rb * Rb
    disc = b * b - 4.0 * c
    t_exit = 2.0 * c / (-b - np.sqrt(disc))

    if floor_override is None:
        floor = t_exit
    else:
        floor = np.where(floor_override >= 0.0, floor_override, t_exit)

    best_t = np.full(di.shape, np.inf)
    best_k = np.full(di.shape, -1, dtype=np.int64)
    for k in range(ccx.shape[0]):
        dx = qx - ccx[k]
        dy = qy - ccy[k]
        c = dx * dx + dy * dy - cR[k] * cR[k]
        b = 2.0 * (dx * vx + dy * vy)
        disc = b * b - 4.0 * c
        valid = ~((c > 0.0) & (b >= 0.0)) & (disc > 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(
                valid, 2.0 * c / (-b + np.sqrt(np.where(valid, disc, 1.0))), -1.0
            )
        better = valid & (t > floor) & (t < best_t)
        best_t = np.where(better, t, best_t)
        best_k = np.where(better, k, best_k)

    status = ((best_k < 0) | (best_t > t_max)).astype(np.int8)
    ok = status == 0
    k = np.where(ok, best_k, 0)
    t = np.where(ok, best_t, 0.0)
    px = qx + t * vx
    py = qy + t * vy
    nx = (px - ccx[k]) / cR[k]
    ny = (py - ccy[k]) / cR[k]
    dot = vx * nx + vy * ny
    thp = np.arctan2(ny, nx)
    z = psi - thp - PI
    phip = z - TWO_PI * np.floor((z + PI) / TWO_PI)
    dk = cdisk[k]
    w = tmark[dk] - thp
    rp = (w - TWO_PI * np.floor(w / TWO_PI)) * tR[dk]
    return (
        np.where(ok, dk, -1).astype(np.int64),
        np.where(ok, rp, 0.0),
        np.where(ok, phip, 0.0),
        t,
        t_exit,
        np.where(ok, -dot, 0.0),
        np.where(ok, PI / 2 - np.abs(phip), 0.0),
        status,
    )


def trace_batch(qx, qy, vx, vy, ccx, ccy, cR, floor, t_max, n_threads=1):
    """First candidate-circle entry after `floor`, per ray.

    Returns (t, candidate index) with index -1 when no entry <= t_max.
    """
    qx = np.asarray(qx, dtype=float)
    best_t = np.full(qx.shape, np.inf)
    best_k = np.full(qx.shape, -1, dtype=np.int64)
    for k in range(ccx.shape[0]):
        dx = qx - ccx[k]
        dy = qy - ccy[k]
        c = dx * dx + dy * dy - cR[k] * cR[k]
        b = 2.0 * (dx * vx + dy * vy)
        disc = b * b - 4.0 * c
        valid = ~((c > 0.0) & (b >= 0.0)) & (disc > 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(
                valid, 2.0 * c / (-b + np.sqrt(np.where(valid, disc, 1.0))), -1.0
            )
        better = valid & (t > floor) & (t < best_t)
        best_t = np.where(better, t, best_t)
        best_k = np.where(better, k, best_k)
    miss = (best_k < 0) | (best_t > t_max)
    best_t = np.where(miss, np.inf, best_t)
    best_k = np.where(miss, -1, best_k)
    return best_t, best_k


def horizon_margins(ccx, ccy, cR, t_len, sin_phi, n_base, n_dirs, n_threads=1):
    """Per-base-point worst incidence margin over sampled directions.

    margin(base, dir) = max over in-segment outside-entries of
    (sin(incidence) - sin(phi)); -2 when the segment hits nothing.
    Returns (min margin per base, argmin direction per base).
    """
    coords = (np.arange(n_base) + 0.5) / n_base
    bx = np.repeat(coords, n_base)
    by = np.tile(coords, n_base)
    out_margin = np.full(n_base * n_base, np.inf)
    out_dir = np.zeros(n_base * n_base, dtype=np.int64)
    for j in range(n_dirs):
        ang = TWO_PI * j / n_dirs
        vx = math.cos(ang)
        vy = math.sin(ang)
        margin = np.full(bx.shape, -2.0)
        for k in range(ccx.shape[0]):
            dx = bx - ccx[k]
            dy = by - ccy[k]
            c = dx * dx + dy * dy - cR[k] * cR[k]
            b = 2.0 * (dx * vx + dy * vy)
            disc = b * b - 4.0 * c
            valid = ~((c > 0.0) & (b >= 0.0)) & (disc > 0.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                t = np.where(
                    valid, 2.0 * c / (-b + np.sqrt(np.where(valid, disc, 1.0))), -1.0
                )
            inseg = valid & (t > 0.0) & (t < t_len)
            nx = (bx + t * vx - ccx[k]) / cR[k]
            ny = (by + t * vy - ccy[k]) / cR[k]
            m = -(vx * nx + vy * ny) - sin_phi
            margin = np.where(inseg & (m > margin), m, margin)
        upd = margin < out_margin
        out_margin = np.where(upd, margin, out_margin)
        out_dir = np.where(upd, j, out_dir)
    return out_margin, out_dir
