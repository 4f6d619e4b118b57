# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled collision kernels; semantics mirror _pykernels exactly."""

import numpy as np

cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport atan2, cos, fabs, floor, sin, sqrt

cnp.import_array()

cdef double PI = 3.141592653589793
cdef double TWO_PI = 6.283185307179586


cdef inline double entry_root(double b, double c, double disc) noexcept nogil:
    # citardauq form: stable for the small root at grazing incidence
    return 2.0 * c / (-b + sqrt(disc))


def step_batch(
    cnp.int64_t[::1] di,
    double[::1] r,
    double[::1] phi,
    double[::1] scx,
    double[::1] scy,
    double[::1] sR,
    double[::1] smark,
    double[::1] tR,
    double[::1] tmark,
    double[::1] ccx,
    double[::1] ccy,
    double[::1] cR,
    cnp.int64_t[::1] cdisk,
    double beta,
    double t_max,
    floor_override,
    int n_threads=1,
):
    cdef Py_ssize_t n = di.shape[0]
    cdef Py_ssize_t n_cand = ccx.shape[0]
    out_di = np.empty(n, dtype=np.int64)
    out_r = np.empty(n, dtype=np.float64)
    out_phi = np.empty(n, dtype=np.float64)
    out_tau = np.empty(n, dtype=np.float64)
    out_texit = np.empty(n, dtype=np.float64)
    out_cos = np.empty(n, dtype=np.float64)
    out_margin = np.empty(n, dtype=np.float64)
    out_status = np.empty(n, dtype=np.int8)
    cdef cnp.int64_t[::1] odi = out_di
    cdef double[::1] orr = out_r
    cdef double[::1] ophi = out_phi
    cdef double[::1] otau = out_tau
    cdef double[::1] otexit = out_texit
    cdef double[::1] ocos = out_cos
    cdef double[::1] omargin = out_margin
    cdef cnp.int8_t[::1] ostatus = out_status

    cdef double[::1] fov
    cdef bint has_floor = floor_override is not None
    if has_floor:
        fov = floor_override
    else:
        fov = np.empty(0, dtype=np.float64)

    cdef Py_ssize_t i, k, d, dk, best_k
    cdef double R, th, qx, qy, psi, vx, vy, Rb, dx, dy, b, c, disc
    cdef double t_exit, flr, best_t, t, px, py, nx, ny, dot, thp, z, phip, w
    cdef int nt = n_threads if n_threads > 0 else 1

    with nogil:
        for i in prange(n, num_threads=nt, schedule="static"):
            d = di[i]
            R = sR[d]
            th = smark[d] - r[i] / R
            qx = scx[d] + R * cos(th)
            qy = scy[d] + R * sin(th)
            psi = th - phi[i]
            vx = cos(psi)
            vy = sin(psi)

            Rb = R + beta
            dx = qx - scx[d]
            dy = qy - scy[d]
            b = 2.0 * (dx * vx + dy * vy)
            c = dx * dx + dy * dy - Rb * Rb
            disc = b * b - 4.0 * c
            t_exit = 2.0 * c / (-b - sqrt(disc))
            otexit[i] = t_exit

            if has_floor and fov[i] >= 0.0:
                flr = fov[i]
            else:
                flr = t_exit

            best_t = 1e300
            best_k = -1
            for k in range(n_cand):
                dx = qx - ccx[k]
                dy = qy - ccy[k]
                c = dx * dx + dy * dy - cR[k] * cR[k]
                b = 2.0 * (dx * vx + dy * vy)
                if c > 0.0 and b >= 0.0:
                    continue
                disc = b * b - 4.0 * c
                if disc <= 0.0:
                    continue
                t = entry_root(b, c, disc)
                if t > flr and t < best_t:
                    best_t = t
                    best_k = k

            if best_k < 0 or best_t > t_max:
                ostatus[i] = 1
                odi[i] = -1
                orr[i] = 0.0
                ophi[i] = 0.0
                otau[i] = 0.0
                ocos[i] = 0.0
                omargin[i] = 0.0
            else:
                ostatus[i] = 0
                k = best_k
                t = best_t
                px = qx + t * vx
                py = qy + t * vy
                nx = (px - ccx[k]) / cR[k]
                ny = (py - ccy[k]) / cR[k]
                dot = vx * nx + vy * ny
                thp = atan2(ny, nx)
                z = psi - thp - PI
                phip = z - TWO_PI * floor((z + PI) / TWO_PI)
                dk = cdisk[k]
                w = tmark[dk] - thp
                odi[i] = dk
                orr[i] = (w - TWO_PI * floor(w / TWO_PI)) * tR[dk]
                ophi[i] = phip
                otau[i] = t
                ocos[i] = -dot
                omargin[i] = PI / 2 - fabs(phip)

    return out_di, out_r, out_phi, out_tau, out_texit, out_cos, out_margin, out_status


def trace_batch(
    double[::1] qx,
    double[::1] qy,
    double[::1] vx,
    double[::1] vy,
    double[::1] ccx,
    double[::1] ccy,
    double[::1] cR,
    double[::1] floor_arr,
    double t_max,
    int n_threads=1,
):
    cdef Py_ssize_t n = qx.shape[0]
    cdef Py_ssize_t n_cand = ccx.shape[0]
    out_t = np.empty(n, dtype=np.float64)
    out_k = np.empty(n, dtype=np.int64)
    cdef double[::1] ot = out_t
    cdef cnp.int64_t[::1] ok_ = out_k
    cdef Py_ssize_t i, k, best_k
    cdef double dx, dy, b, c, disc, t, best_t
    cdef int nt = n_threads if n_threads > 0 else 1
    with nogil:
        for i in prange(n, num_threads=nt, schedule="static"):
            best_t = 1e300
            best_k = -1
            for k in range(n_cand):
                dx = qx[i] - ccx[k]
                dy = qy[i] - ccy[k]
                c = dx * dx + dy * dy - cR[k] * cR[k]
                b = 2.0 * (dx * vx[i] + dy * vy[i])
                if c > 0.0 and b >= 0.0:
                    continue
                disc = b * b - 4.0 * c
                if disc <= 0.0:
                    continue
                t = entry_root(b, c, disc)
                if t > floor_arr[i] and t < best_t:
                    best_t = t
                    best_k = k
            if best_k < 0 or best_t > t_max:
                ot[i] = 1e300
                ok_[i] = -1
            else:
                ot[i] = best_t
                ok_[i] = best_k
    return out_t, out_k


def horizon_margins(
    double[::1] ccx,
    double[::1] ccy,
    double[::1] cR,
    double t_len,
    double sin_phi,
    int n_base,
    int n_dirs,
    int n_threads=1,
):
    cdef Py_ssize_t nb2 = <Py_ssize_t> n_base * n_base
    cdef Py_ssize_t n_cand = ccx.shape[0]
    out_margin = np.empty(nb2, dtype=np.float64)
    out_dir = np.empty(nb2, dtype=np.int64)
    cdef double[::1] om = out_margin
    cdef cnp.int64_t[::1] od = out_dir
    cdef Py_ssize_t i, j, k
    cdef double bx, by, ang, vx, vy, margin, dx, dy, b, c, disc, t, nx, ny, m
    cdef double worst, best_m
    cdef Py_ssize_t worst_j
    cdef int nt = n_threads if n_threads > 0 else 1
    with nogil:
        for i in prange(nb2, num_threads=nt, schedule="static"):
            bx = ((i // n_base) + 0.5) / n_base
            by = ((i % n_base) + 0.5) / n_base
            worst = 1e300
            worst_j = 0
            for j in range(n_dirs):
                ang = TWO_PI * j / n_dirs
                vx = cos(ang)
                vy = sin(ang)
                best_m = -2.0
                for k in range(n_cand):
                    dx = bx - ccx[k]
                    dy = by - ccy[k]
                    c = dx * dx + dy * dy - cR[k] * cR[k]
                    b = 2.0 * (dx * vx + dy * vy)
                    if c > 0.0 and b >= 0.0:
                        continue
                    disc = b * b - 4.0 * c
                    if disc <= 0.0:
                        continue
                    t = entry_root(b, c, disc)
                    if t <= 0.0 or t >= t_len:
                        continue
                    nx = (bx + t * vx - ccx[k]) / cR[k]
                    ny = (by + t * vy - ccy[k]) / cR[k]
                    m = -(vx * nx + vy * ny) - sin_phi
                    if m > best_m:
                        best_m = m
                if best_m < worst:
                    worst = best_m
                    worst_j = j
            om[i] = worst
            od[i] = worst_j
    return out_margin, out_dir
