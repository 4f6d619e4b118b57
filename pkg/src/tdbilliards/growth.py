"""Growth-Lemma statistics and the stable-manifold size proxy.

For a point x on an unstable curve W, r_{W,n}(x) is the distance from
F_n x to the boundary of the homogeneous component of F_n W containing it,
measured along the component.  For moderate n the n-step subdivision has
exponentially many components, so the full image polyline is never built;
instead, per sampled point the nearest cut on each side is located by
geometric expansion plus bisection on orbit labels (disk index and
homogeneity strip per step), and the image arc from the cut to the point
is integrated over a doubling chain of source offsets.  Arcs are capped:
values above the cap saturate, which is exact for threshold statistics
with epsilon below the cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .tangent import HomogeneityScheme, homogeneity_index_array

CUT_RES = 1e-12
CHAIN_DEPTH = 50


def _orbit_labels(curve, scenario, rs, n, scheme):
    """(disk, strip) profiles over steps 1..n for points r=rs on the curve.

    Shape (n, N); step 0 labels are constant along a homogeneous curve and
    carry no cut information.  Lost points get disk -1 from their step on.
    """
    rs = np.asarray(rs, dtype=float)
    phi = np.interp(rs, curve.r, curve.phi)
    di = np.full(rs.shape, curve.disk_index, dtype=np.int64)
    r = rs.copy()
    p = phi
    disks = np.empty((n, rs.shape[0]), dtype=np.int64)
    strips = np.empty((n, rs.shape[0]), dtype=np.int64)
    alive = np.ones(rs.shape[0], dtype=bool)
    for m in range(1, n + 1):
        di2, r2, p2, _, _, _, _, status = kernels.step_batch(
            di, r, p, scenario.config(m - 1), scenario.config(m),
            scenario.beta, scenario.horizon.t,
        )
        alive = alive & (status == 0)
        disks[m - 1] = np.where(alive, di2, -1)
        strips[m - 1] = np.where(alive, homogeneity_index_array(p2, scheme), 0)
        di = np.where(alive, di2, di)
        r = np.where(alive, r2, r)
        p = np.where(alive, p2, p)
    return disks, strips


def _orbit_images(curve, scenario, rs, n):
    """F_n images (disk, r, phi) of curve points r=rs."""
    rs = np.asarray(rs, dtype=float)
    p = np.interp(rs, curve.r, curve.phi)
    di = np.full(rs.shape, curve.disk_index, dtype=np.int64)
    r = rs.copy()
    for m in range(1, n + 1):
        di, r, p, _, _, _, _, status = kernels.step_batch(
            di, r, p, scenario.config(m - 1), scenario.config(m),
            scenario.beta, scenario.horizon.t,
        )
        if status.any():
            raise RuntimeError(f"lost point during image evaluation at step {m}")
    return di, r, p


class _LabelOracle:
    """Batch label evaluation with a base-profile comparison."""

    def __init__(self, curve, scenario, n, scheme):
        self.curve = curve
        self.scenario = scenario
        self.n = n
        self.scheme = scheme

    def profiles(self, rs):
        return _orbit_labels(self.curve, self.scenario, rs, self.n, self.scheme)

    def differs(self, rs, base_disks, base_strips, cols):
        """Per-entry: does label profile at rs differ from base column cols."""
        d, s = self.profiles(rs)
        return np.any(
            (d != base_disks[:, cols]) | (s != base_strips[:, cols]), axis=0
        )


def component_edges(
    curve, scenario, n, rs, scheme=HomogeneityScheme(), res=CUT_RES
):
    """Source offsets of the n-step component boundary around each point.

    Returns (left_off, right_off, left_is_end, right_is_end): offsets are
    positive distances in the r parameter from rs to the last same-label
    point found before the nearest detected cut (or to the curve end).
    """
    rs = np.asarray(rs, dtype=float)
    N = rs.shape[0]
    oracle = _LabelOracle(curve, scenario, n, scheme)
    base_disks, base_strips = oracle.profiles(rs)
    r_lo, r_hi = float(curve.r[0]), float(curve.r[-1])

    out = {}
    for side, sign, limit in (("left", -1.0, r_lo), ("right", 1.0, r_hi)):
        span = np.abs(limit - rs)
        lo = np.zeros(N)            # same-label offset
        hi = np.full(N, np.nan)     # differing-label offset (nan = none yet)
        js = np.zeros(N)            # expansion exponent
        at_end = span <= res
        active = ~at_end
        for _ in range(120):
            if not active.any():
                break
            cols = np.nonzero(active)[0]
            expanding = np.isnan(hi[cols])
            cand = np.empty(cols.shape[0])
            # expansion candidates: res * 2^j capped at the curve end
            exp_off = np.minimum(res * np.exp2(js[cols]), span[cols])
            cand[expanding] = exp_off[expanding]
            # bisection candidates
            cand[~expanding] = 0.5 * (lo[cols] + hi[cols])[~expanding]
            diff = oracle.differs(
                rs[cols] + sign * cand, base_disks, base_strips, cols
            )
            new_lo = np.where(diff, lo[cols], cand)
            new_hi = np.where(diff, cand, hi[cols])
            lo[cols] = new_lo
            hi[cols] = np.where(diff | ~expanding, new_hi, hi[cols])
            js[cols] += 1
            # expansion exhausted the curve without finding a cut
            hit_end = expanding & ~diff & (cand >= span[cols] - res)
            at_end[cols[hit_end]] = True
            done_bisect = ~np.isnan(hi[cols]) & (hi[cols] - lo[cols] <= res)
            deactivate = hit_end | done_bisect
            active[cols[deactivate]] = False
        lo[at_end] = span[at_end]
        out[side] = (lo, at_end)
    left_off, left_end = out["left"]
    right_off, right_end = out["right"]
    return left_off, right_off, left_end, right_end


def _edge_arc(curve, scenario, n, rs, offs, sign, cap, depth=CHAIN_DEPTH):
    """Image arclength from each point to its component edge on one side.

    Chord sum over a doubling chain of source offsets from the edge back
    to the point; accumulation stops at `cap`.
    """
    rs = np.asarray(rs, dtype=float)
    offs = np.asarray(offs, dtype=float)
    N = rs.shape[0]
    perims = scenario.config(n).perimeters
    arc = np.zeros(N)
    prev_r = None
    prev_d = None
    prev_p = None
    done = np.zeros(N, dtype=bool)
    # chain source positions edge -> point: rs + sign*off*(1 - 2^-k),
    # k = depth (next to the edge) down to k = 0 (the point itself)
    for k in range(depth, -1, -1):
        frac = 1.0 - 2.0 ** (-k) if k > 0 else 0.0
        pos = rs + sign * offs * frac
        d, r, p = _orbit_images(curve, scenario, pos, n)
        if prev_r is not None:
            dr = r - prev_r
            # unwrap across the arclength origin of the image disk
            L = perims[d]
            dr -= L * np.round(dr / L)
            seg = np.hypot(dr, p - prev_p)
            seg = np.where(d != prev_d, 0.0, seg)  # safety: cut slipped through
            arc = np.where(done, arc, arc + seg)
            done |= arc >= cap
        prev_r, prev_d, prev_p = r, d, p
        if done.all():
            break
    return np.minimum(arc, cap)


def r_w_n_bracket(
    curve,
    scenario,
    n,
    rs,
    cap=0.05,
    scheme=HomogeneityScheme(),
    res=CUT_RES,
):
    """r_{W,n} by source-side cut bracketing (oracle for small n).

    Component source widths shrink like Lambda^-n, so this variant is
    reliable only while they stay well above float resolution (n <= ~12
    for the shipped scenes); the recursive r_w_n has no such limit.
    """
    rs = np.asarray(rs, dtype=float)
    if n == 0:
        s = curve.arclength()
        pos = np.interp(rs, curve.r, s)
        return np.minimum(np.minimum(pos, s[-1] - pos), cap)
    left_off, right_off, _, _ = component_edges(
        curve, scenario, n, rs, scheme=scheme, res=res
    )
    arc_l = _edge_arc(curve, scenario, n, rs, left_off, -1.0, cap)
    arc_r = _edge_arc(curve, scenario, n, rs, right_off, +1.0, cap)
    return np.minimum(arc_l, arc_r)


def sample_arclength_params(curve, n_points):
    """r parameters of n_points equally spaced in arclength (cell centers)."""
    s = curve.arclength()
    targets = (np.arange(n_points) + 0.5) * (s[-1] / n_points)
    return np.interp(targets, s, curve.r)


@dataclass
class GrowthTable:
    n: int
    epsilons: np.ndarray
    measure: np.ndarray       # m_W{r_{W,n} < eps}
    curve_length: float
    n_points: int

    def affine_fit(self):
        """(slope, intercept, r2) of measure vs eps."""
        x, y = self.epsilons, self.measure
        A = np.column_stack([x, np.ones_like(x)])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        pred = A @ coef
        ss_res = float(np.sum((y - pred) ** 2))
        ss_tot = float(np.sum((y - np.mean(y)) ** 2))
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
        return float(coef[0]), float(coef[1]), r2


def growth_statistics(
    curve,
    scenario,
    n,
    epsilons,
    n_points=4000,
    scheme=HomogeneityScheme(),
):
    """Arclength measure of {x in W : r_{W,n}(x) < eps} for each eps.

    Points are sampled uniformly in arclength; the measure is
    |W| * fraction below threshold.
    """
    epsilons = np.asarray(sorted(epsilons), dtype=float)
    cap = 2.0 * float(epsilons[-1])
    rs = sample_arclength_params(curve, n_points)
    rv = r_w_n(curve, scenario, n, rs, cap=cap, scheme=scheme)
    L = curve.length
    measure = np.array([L * float(np.mean(rv < e)) for e in epsilons])
    return GrowthTable(n, epsilons, measure, L, n_points)


def r_w_n(curve, scenario, n, rs, cap=0.05, scheme=HomogeneityScheme()):
    """r_{W,n} per point via the one-step edge-distance recursion."""
    return r_w_n_series(curve, scenario, n, rs, cap=cap, scheme=scheme)[n]


def r_w_n_series(curve, scenario, n, rs, cap=0.05, scheme=HomogeneityScheme()):
    """r_{W,m} for all m = 0..n, shape (n+1, len(rs)).

    Along the orbit of each point the distances to its homogeneous
    component's two edges are expanded by the local curve Jacobian and
    clipped at every new strip-boundary or singularity crossing (both are
    phi-level crossings of the image curve).  Distances saturate at `cap`.
    The expansion uses the point-local Jacobian, so values of order cap
    carry the (bounded) distortion of the binding arc; threshold
    statistics at eps << cap are unaffected.
    """
    rs = np.asarray(rs, dtype=float)
    out = np.empty((n + 1, rs.shape[0]))
    s = curve.arclength()
    pos0 = np.interp(rs, curve.r, s)
    out[0] = np.minimum(np.minimum(pos0, s[-1] - pos0), cap)
    if n == 0:
        return out
    di = np.full(rs.shape, curve.disk_index, dtype=np.int64)
    r = rs.copy()
    phi = np.interp(rs, curve.r, curve.phi)
    slope = np.interp(rs, curve.r, curve.slopes())
    vr = np.ones_like(rs)
    vp = slope.copy()
    s_arc = curve.arclength()
    pos = np.interp(rs, curve.r, s_arc)
    d_lo = np.minimum(pos, cap)
    d_hi = np.minimum(s_arc[-1] - pos, cap)
    for m in range(1, n + 1):
        src_cfg = scenario.config(m - 1)
        tgt_cfg = scenario.config(m)
        di2, r2, phi2, tau, texit, cosv, _, status = kernels.step_batch(
            di, r, phi, src_cfg, tgt_cfg, scenario.beta, scenario.horizon.t
        )
        if status.any():
            raise RuntimeError(f"lost point during edge recursion at step {m}")
        kap = 1.0 / src_cfg.radii[di]
        kap2 = 1.0 / tgt_cfg.radii[di2]
        cin = np.cos(phi)
        # occlusion cuts: another candidate starts eclipsing the current
        # hit; clip the source-side distances before expanding
        slope_cur = vp / vr
        occ_lo, occ_hi = _occlusion_gaps(
            di, r, phi, slope_cur, src_cfg, tgt_cfg, tau, texit,
            scenario.horizon.t,
        )
        arc_cur = np.sqrt(1.0 + slope_cur * slope_cur)
        d_lo = np.minimum(d_lo, occ_lo * arc_cur)
        d_hi = np.minimum(d_hi, occ_hi * arc_cur)
        # tangent update (common -1/cos phi' factor kept explicit)
        wr = -((tau * kap + cin) * vr + tau * vp) / cosv
        wp = -(
            (tau * kap * kap2 + kap * cosv + kap2 * cin) * vr
            + (tau * kap2 + cosv) * vp
        ) / cosv
        jac = np.hypot(wr, wp) / np.hypot(vr, vp)
        # orientation flips every step: dr' has sign opposite to dr
        d_lo, d_hi = jac * d_hi, jac * d_lo
        slope2 = wp / wr
        up, dn = _strip_gaps(phi2, scheme)
        arc_factor = np.sqrt(1.0 + 1.0 / (slope2 * slope2))
        d_hi = np.minimum(d_hi, up * arc_factor)
        d_lo = np.minimum(d_lo, dn * arc_factor)
        d_lo = np.minimum(d_lo, cap)
        d_hi = np.minimum(d_hi, cap)
        norm = np.hypot(wr, wp)
        vr, vp = wr / norm, wp / norm
        di, r, phi = di2, r2, phi2
        out[m] = np.minimum(d_lo, d_hi)
    return out


def _occlusion_gaps(di, r, phi, slope, source, target, tau, texit, t_max):
    """Per-point r-distance to the nearest branch-change cut on each side.

    Moving along the curve, the first hit jumps where some other candidate
    circle becomes tangent to the ray ahead of the current hit.  For
    candidate k with downrange foot a_k and impact margin g_k = |b_k| - R_k,
    the signed impact parameter varies along the curve as
    db_k/dr = (kappa + slope) a_k + cos(phi), giving the first-order cut
    offset dr = -g_k / (sign(b_k) db_k/dr).
    """
    ccx, ccy, cR, _ = kernels.candidates(target, t_max)
    d = np.asarray(di)
    R = source.radii[d]
    mark = source.markers[d]
    cx = source.centers[:, 0][d]
    cy = source.centers[:, 1][d]
    theta = mark - r / R
    qx = cx + R * np.cos(theta)
    qy = cy + R * np.sin(theta)
    psi = theta - phi
    vx = np.cos(psi)
    vy = np.sin(psi)
    kap = 1.0 / R
    cin = np.cos(phi)
    lo = np.full(r.shape, np.inf)
    hi = np.full(r.shape, np.inf)
    for k in range(ccx.shape[0]):
        px = ccx[k] - qx
        py = ccy[k] - qy
        a = px * vx + py * vy
        b = -px * vy + py * vx
        g = np.abs(b) - cR[k]
        ahead = (a > texit) & (a < tau) & (g >= 0.0)
        dbdr = (kap + slope) * a + cin
        dgdr = np.sign(b) * dbdr
        with np.errstate(divide="ignore", invalid="ignore"):
            off = -g / dgdr
        plus = ahead & (off > 0.0) & np.isfinite(off)
        minus = ahead & (off < 0.0) & np.isfinite(off)
        hi = np.where(plus, np.minimum(hi, off), hi)
        lo = np.where(minus, np.minimum(lo, -off), lo)
    return lo, hi


def _strip_gaps(phi, scheme):
    """Phi-distance to the nearest strip boundary above and below."""
    k = homogeneity_index_array(phi, scheme)
    half = np.pi / 2
    k0 = scheme.k0
    up = np.empty_like(phi)
    dn = np.empty_like(phi)
    mid = k == 0
    up[mid] = (half - k0 ** (-2.0)) - phi[mid]
    dn[mid] = phi[mid] - (k0 ** (-2.0) - half)
    pos = k > 0
    kk = np.abs(k).astype(float)
    with np.errstate(divide="ignore"):
        b_in = half - kk ** (-2.0)          # boundary toward H_0
        b_out = half - (kk + 1.0) ** (-2.0)  # boundary toward the tangency
    up[pos] = b_out[pos] - phi[pos]
    dn[pos] = phi[pos] - b_in[pos]
    neg = k < 0
    up[neg] = -b_in[neg] - phi[neg]
    dn[neg] = phi[neg] + b_out[neg]
    return np.maximum(up, 0.0), np.maximum(dn, 0.0)


def stable_size_proxy(
    curve,
    scenario,
    N,
    c_norm,
    lambda_hat,
    rs=None,
    n_points=800,
    cap=0.5,
    scheme=HomogeneityScheme(),
):
    """u^s = c_norm * min_{0<=n<=N} Lambda^n r_{W,n} per sampled point."""
    if rs is None:
        rs = sample_arclength_params(curve, n_points)
    rs = np.asarray(rs, dtype=float)
    series = r_w_n_series(curve, scenario, N, rs, cap=cap, scheme=scheme)
    scales = lambda_hat ** np.arange(N + 1)
    best = np.min(scales[:, None] * series, axis=0)
    return c_norm * best, rs


def component_interval(
    curve, scenario, n, r0, scheme=HomogeneityScheme(), res=CUT_RES
):
    """Source interval of the n-step component containing the point r=r0."""
    left_off, right_off, _, _ = component_edges(
        curve, scenario, n, np.array([r0]), scheme=scheme, res=res
    )
    return float(r0 - left_off[0]), float(r0 + right_off[0])


def image_arc_uniform(curve, scenario, n, a, b, chunks=128):
    """Image arclength of F_n over the source interval [a, b], chord sums."""
    pos = np.linspace(a, b, chunks + 1)
    d, r, p = _orbit_images(curve, scenario, pos, n)
    perims = scenario.config(n).perimeters
    dr = np.diff(r)
    L = perims[d[:-1]]
    dr -= L * np.round(dr / L)
    return float(np.sum(np.hypot(dr, np.diff(p))))
