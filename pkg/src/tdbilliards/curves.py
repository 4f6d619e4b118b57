"""Measured unstable curves and their transport under configuration steps.

An unstable curve is a polyline phi = phi_W(r) on one disk with slopes
inside the unstable cone, contained in a single homogeneity strip.  A
measured curve carries log-density values (w.r.t. arclength) at the nodes.

push_curve maps the nodes one collision step, adaptively refining the
polyline until image chords are short and cut points (image jumping disk,
crossing a strip boundary, or a tangential branch change) are bracketed to
~1e-12 in the source parameter.  Densities transport by division with the
curve Jacobian; masses are assigned from the source-side integral so the
component masses partition the input mass exactly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NoCollisionWithinHorizon
from .tangent import (
    HomogeneityScheme,
    homogeneity_index,
    homogeneity_index_array,
)

_log = logging.getLogger(__name__)

H_MAX = 1e-3          # max image chord length before refinement
TAU_JUMP = 0.05       # flight-time jump marking a branch change
CUT_RES = 1e-12       # source-parameter resolution of cut points
ELL_MIN = 1e-10       # components shorter than this are dropped
MAX_DEPTH = 64


@dataclass(frozen=True)
class UnstableCurve:
    disk_index: int
    nodes: np.ndarray  # (n, 2) array of (r, phi), r strictly increasing

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 2 or nodes.shape[1] != 2 or nodes.shape[0] < 2:
            raise ValueError("curve needs at least two (r, phi) nodes")
        if not np.all(np.diff(nodes[:, 0]) > 0):
            raise ValueError("node r values must be strictly increasing")

    @property
    def r(self):
        return self.nodes[:, 0]

    @property
    def phi(self):
        return self.nodes[:, 1]

    @property
    def length(self):
        d = np.diff(self.nodes, axis=0)
        return float(np.sum(np.hypot(d[:, 0], d[:, 1])))

    def arclength(self):
        """Cumulative arclength at the nodes, starting at 0."""
        d = np.diff(self.nodes, axis=0)
        return np.concatenate([[0.0], np.cumsum(np.hypot(d[:, 0], d[:, 1]))])

    def slopes(self):
        """Node slopes d(phi)/dr by central differences."""
        r, p = self.r, self.phi
        s = np.empty_like(r)
        s[1:-1] = (p[2:] - p[:-2]) / (r[2:] - r[:-2])
        s[0] = (p[1] - p[0]) / (r[1] - r[0])
        s[-1] = (p[-1] - p[-2]) / (r[-1] - r[-2])
        return s

    def curvature_estimate(self, n_grid=33):
        """sup |phi''| from second differences on a uniform resample.

        Raw nodes can be 1e-12 apart near cut points, where second
        differences amplify interpolation noise; resampling bounds the
        grid spacing from below.
        """
        r, p = self.r, self.phi
        if len(r) < 3:
            return 0.0
        m = min(n_grid, len(r))
        if m < 3:
            return 0.0
        rg = np.linspace(r[0], r[-1], m)
        pg = np.interp(rg, r, p)
        h = rg[1] - rg[0]
        if h <= 1e-9:
            return 0.0
        return float(np.max(np.abs(np.diff(pg, 2))) / h**2)

    def homogeneity(self, scheme=HomogeneityScheme()):
        ks = homogeneity_index_array(self.phi, scheme)
        return int(ks[0]) if np.all(ks == ks[0]) else None


def line_curve(disk_index, r0, length_r, phi0, slope, n_nodes=33):
    """Straight unstable curve: r spans [r0, r0+length_r] at given slope."""
    r = np.linspace(r0, r0 + length_r, n_nodes)
    phi = phi0 + slope * (r - r0)
    return UnstableCurve(disk_index, np.column_stack([r, phi]))


@dataclass(frozen=True)
class MeasuredCurve:
    curve: UnstableCurve
    log_density: np.ndarray
    mass: float = None

    def __post_init__(self):
        ld = np.asarray(self.log_density, dtype=float)
        object.__setattr__(self, "log_density", ld)
        if ld.shape[0] != self.curve.nodes.shape[0]:
            raise ValueError("log_density must align with curve nodes")
        if self.mass is None:
            object.__setattr__(self, "mass", self.node_mass())

    def node_mass(self):
        """Trapezoid integral of the density over the node polyline."""
        s = self.curve.arclength()
        rho = np.exp(self.log_density)
        return float(np.trapezoid(rho, s))


def uniform_measured(curve, density=1.0):
    return MeasuredCurve(curve, np.full(len(curve.r), math.log(density)))


@dataclass
class CurveFamily:
    components: list  # (weight, MeasuredCurve) pairs

    @property
    def total_mass(self):
        return sum(w * mc.mass for w, mc in self.components)

    def z_value(self):
        return sum(w * mc.mass / mc.curve.length for w, mc in self.components)

    def long_curve_mass(self, c_p):
        """Mass carried by curves of length >= 1/(2 c_p)."""
        cut = 1.0 / (2.0 * c_p)
        return sum(
            w * mc.mass for w, mc in self.components if mc.curve.length >= cut
        )


def z_value(family: CurveFamily) -> float:
    return family.z_value()


def proper(family: CurveFamily, c_p: float) -> bool:
    return family.z_value() < c_p * family.total_mass


def push_family(family: CurveFamily, source, target, beta, *, t_max, **kw):
    comps = []
    for w, mc in family.components:
        for out in push_curve(mc, source, target, beta, t_max=t_max, **kw):
            comps.append((w, out))
    return CurveFamily(comps)


def family_orbit(family: CurveFamily, scenario, n, **kw):
    """Families after 1..n pushes (list of length n)."""
    out = []
    cur = family
    for m in range(n):
        cur = push_family(
            cur, scenario.config(m), scenario.config(m + 1), scenario.beta,
            t_max=scenario.horizon.t, **kw,
        )
        out.append(cur)
    return out


# transport ----------------------------------------------------------------


def _eval_nodes(disk_index, r, phi, source, target, beta, t_max):
    """Image data for source nodes; raises on a lost node."""
    n = len(r)
    di = np.full(n, disk_index, dtype=np.int64)
    odi, orr, ophi, tau, _, cosv, margin, status = kernels.step_batch(
        di, r, phi, source, target, beta, t_max
    )
    if status.any():
        bad = int(np.argmax(status != 0))
        raise NoCollisionWithinHorizon(
            f"curve node at r={r[bad]:.6f} lost (no collision within {t_max})",
            ray=(float(r[bad]), float(phi[bad])),
        )
    return odi, orr, ophi, tau, cosv, margin


def _labels(odi, ophi, scheme):
    strips = homogeneity_index_array(ophi, scheme)
    return np.stack([odi, strips], axis=1)


def push_curve(
    mc: MeasuredCurve,
    source,
    target,
    beta,
    *,
    t_max,
    scheme: HomogeneityScheme = HomogeneityScheme(),
    h_max: float = H_MAX,
    ell_min: float = ELL_MIN,
    return_maps: bool = False,
    stats_out: dict = None,
):
    """Transport a measured curve one collision step.

    Returns the list of homogeneous image components (MeasuredCurve),
    ordered by source position.  With return_maps=True each entry is
    (MeasuredCurve, src_r, jac) exposing the per-node source parameters
    and curve Jacobians.  A dict passed as stats_out receives the exact
    accounting of the source mass/length left outside the kept components
    (cut-bracket gaps and sub-ell_min drops, all at the 1e-12 cut scale).
    """
    curve = mc.curve
    src_r = np.array(curve.r)
    src_phi = np.array(curve.phi)
    phi_of_r = lambda r: np.interp(r, curve.r, curve.phi)

    odi, orr, ophi, tau, cosv, margin = _eval_nodes(
        curve.disk_index, src_r, src_phi, source, target, beta, t_max
    )
    lab = _labels(odi, ophi, scheme)

    # adaptive refinement: subdivide segments with long image chords,
    # label changes or flight-time jumps until smooth or bracketed
    perims = target.perimeters
    for _ in range(MAX_DEPTH):
        dr_img = np.abs(np.diff(orr))
        dr_img = np.minimum(dr_img, perims[odi[:-1]] - dr_img)
        chord = np.hypot(dr_img, np.diff(ophi))
        same = np.all(lab[1:] == lab[:-1], axis=1)
        tau_jump = np.abs(np.diff(tau)) > TAU_JUMP
        need = (chord > h_max) | ~same | tau_jump
        gap = np.diff(src_r)
        need &= gap > CUT_RES
        if not need.any():
            break
        idx = np.nonzero(need)[0]
        mid_r = (src_r[idx] + src_r[idx + 1]) / 2.0
        mid_phi = phi_of_r(mid_r)
        modi, morr, mophi, mtau, mcosv, mmargin = _eval_nodes(
            curve.disk_index, mid_r, mid_phi, source, target, beta, t_max
        )
        mlab = _labels(modi, mophi, scheme)
        # merge
        src_r = np.insert(src_r, idx + 1, mid_r)
        src_phi = np.insert(src_phi, idx + 1, mid_phi)
        orr = np.insert(orr, idx + 1, morr)
        ophi = np.insert(ophi, idx + 1, mophi)
        odi = np.insert(odi, idx + 1, modi)
        tau = np.insert(tau, idx + 1, mtau)
        cosv = np.insert(cosv, idx + 1, mcosv)
        lab = np.insert(lab, idx + 1, mlab, axis=0)

    # split into runs of constant label
    same = np.all(lab[1:] == lab[:-1], axis=1) & (np.abs(np.diff(tau)) <= TAU_JUMP)
    cut_after = np.nonzero(~same)[0]
    starts = np.concatenate([[0], cut_after + 1])
    ends = np.concatenate([cut_after, [len(src_r) - 1]])

    # source-side arclength and density
    src_arc = np.concatenate(
        [[0.0], np.cumsum(np.hypot(np.diff(src_r), np.diff(src_phi)))]
    )
    log_rho_src = np.interp(src_r, curve.r, mc.log_density)
    slope_src = np.interp(src_r, curve.r, curve.slopes())
    rho_src = np.exp(log_rho_src)
    total_mass = float(np.trapezoid(rho_src, src_arc))
    kept_mass = 0.0
    kept_length = 0.0

    out = []
    for a, b in zip(starts, ends):
        if b <= a:
            continue
        seg = slice(a, b + 1)
        rr = orr[seg].copy()
        # unwrap image r along the component (cuts keep pieces short)
        L = float(perims[odi[a]])
        dr = np.diff(rr)
        rr[1:] = rr[0] + np.cumsum(dr - L * np.round(dr / L))
        flip = rr[-1] < rr[0]
        # per-node curve Jacobian from the exact tangent map
        jac = _curve_jacobian(
            src_phi[seg], slope_src[seg], tau[seg], cosv[seg],
            source.disks[curve.disk_index].curvature,
            target.radii[odi[a]],
        )
        log_rho_new = log_rho_src[seg] - np.log(jac)
        nodes = np.column_stack([rr, ophi[seg]])
        s_r = src_r[seg]
        if flip:
            nodes = nodes[::-1]
            log_rho_new = log_rho_new[::-1]
            s_r = s_r[::-1]
        if nodes[-1, 0] - nodes[0, 0] <= 0 or not np.all(np.diff(nodes[:, 0]) > 0):
            keep = _monotone_filter(nodes[:, 0])
            nodes = nodes[keep]
            log_rho_new = log_rho_new[keep]
            s_r = s_r[keep]
            if len(nodes) < 2:
                continue
        new_curve = UnstableCurve(int(odi[a]), nodes)
        # mass from the source side: exact partition of the input mass
        seg_mass = float(np.trapezoid(rho_src[seg], src_arc[seg]))
        if new_curve.length < ell_min:
            _log.debug(
                "dropping component of image length %.3e (mass %.3e)",
                new_curve.length, seg_mass,
            )
            continue
        kept_mass += seg_mass
        kept_length += float(src_arc[b] - src_arc[a])
        new_mc = MeasuredCurve(new_curve, log_rho_new, mass=seg_mass)
        out.append((new_mc, s_r, jac if not flip else jac[::-1]))

    if stats_out is not None:
        stats_out.update(
            input_mass=total_mass,
            kept_mass=kept_mass,
            leftover_mass=total_mass - kept_mass,
            input_length=float(src_arc[-1]),
            kept_length=kept_length,
            leftover_length=float(src_arc[-1]) - kept_length,
        )
    out.sort(key=lambda item: item[1][0])
    if return_maps:
        return out
    return [item[0] for item in out]


def _monotone_filter(r):
    """Indices of a strictly increasing subsequence (greedy, keeps first)."""
    keep = [0]
    for i in range(1, len(r)):
        if r[i] > r[keep[-1]]:
            keep.append(i)
    return np.array(keep, dtype=int)


def _curve_jacobian(phi_in, slope, tau, cos_out, kappa, target_radius):
    """||D_xF (1, slope)|| / ||(1, slope)|| per node, from the exact matrix."""
    kp = 1.0 / target_radius
    cos_in = np.cos(phi_in)
    dr = (tau * kappa + cos_in) + tau * slope
    dphi = (tau * kappa * kp + kappa * cos_out + kp * cos_in) + (
        tau * kp + cos_out
    ) * slope
    return np.hypot(dr, dphi) / (cos_out * np.hypot(1.0, slope))


# reports -------------------------------------------------------------------


@dataclass
class CurvatureReport:
    kappa_before: float
    kappa_after: list
    c_hat: float = 0.0
    theta_hat: float = 0.0


def curvature_update_check(before: UnstableCurve, after_components):
    """Curvature estimates of the image components of a push."""
    kappas = [mc.curve.curvature_estimate() for mc in after_components]
    return CurvatureReport(before.curvature_estimate(), kappas)


def fit_curvature_recursion(pairs):
    """Fit kappa_out <= (C/2)(1 + theta * kappa_in) as an envelope.

    pairs: iterable of (kappa_in, kappa_out) from single pushes.  The
    slope comes from least squares, the offset from the envelope.
    """
    pairs = np.asarray(list(pairs), dtype=float)
    kin, kout = pairs[:, 0], pairs[:, 1]
    if np.ptp(kin) < 1e-3 * max(1.0, float(np.max(kout))):
        b = 0.0
    else:
        b = max(0.0, float(np.polyfit(kin, kout, 1)[0]))
    half_c = float(np.max(kout - b * kin))
    c_hat = 2.0 * half_c
    theta_hat = b / half_c if half_c > 0 else 0.0
    return c_hat, theta_hat


def branch_orbit(mc: MeasuredCurve, scenario, n, **kw):
    """Push n steps following the component containing the curve midpoint.

    Only one component's polyline is rebuilt per step, so long orbits stay
    tractable.  Returns the list of successive MeasuredCurve branches.
    """
    out = []
    cur = mc
    for m in range(n):
        comps = push_curve(
            cur, scenario.config(m), scenario.config(m + 1), scenario.beta,
            t_max=scenario.horizon.t, return_maps=True, **kw,
        )
        if not comps:
            raise NoCollisionWithinHorizon("branch vanished", step=m + 1)
        mid = 0.5 * (cur.curve.r[0] + cur.curve.r[-1])
        pick = None
        for new_mc, s_r, _ in comps:
            a, b = min(s_r[0], s_r[-1]), max(s_r[0], s_r[-1])
            if a <= mid <= b:
                pick = new_mc
                break
        if pick is None:
            pick = max(comps, key=lambda it: it[0].curve.length)[0]
        cur = pick
        out.append(cur)
    return out


def tangent_orbit_jacobians(x_disk, x_r, x_phi, slope, scenario, n):
    """Cumulative curve Jacobians J_W F_m(x) for m = 1..n along one orbit.

    The tangent vector (1, slope) is propagated by the exact one-step
    matrices; returns (cumulative products, per-step image points).
    """
    from .billiard import PhasePoint, billiard_step
    from .tangent import dxf_from_step

    v = np.array([1.0, float(slope)])
    x = PhasePoint(int(x_disk), float(x_r), float(x_phi))
    cum = []
    points = [x]
    total = 1.0
    for m in range(1, n + 1):
        src = scenario.config(m - 1)
        tgt = scenario.config(m)
        rec = billiard_step(x, src, tgt, scenario.beta, t_max=scenario.horizon.t)
        A = dxf_from_step(x, rec, src, tgt)
        w = A @ v
        total *= float(np.hypot(*w) / np.hypot(*v))
        v = w
        x = rec.image
        cum.append(total)
        points.append(x)
    return np.array(cum), points


@dataclass
class DistortionReport:
    n: int
    max_log_ratio: float
    branch_length: float
    branch_interval: tuple
    bound_constant: float  # max_log_ratio / |F_n W|^{1/3}


def distortion_check(mc: MeasuredCurve, scenario, n, n_probe=17):
    """Distortion of J_W F_n along the branch containing the curve midpoint.

    The branch is the n-step homogeneous component whose preimage contains
    the source midpoint; exact cumulative Jacobians are probed at interior
    points of that interval.
    """
    if n == 0:
        return DistortionReport(
            0, 0.0, mc.curve.length,
            (float(mc.curve.r[0]), float(mc.curve.r[-1])), 0.0,
        )
    from .growth import component_interval, image_arc_uniform

    mid = 0.5 * (mc.curve.r[0] + mc.curve.r[-1])
    a, b = component_interval(mc.curve, scenario, n, mid)
    xs = np.linspace(a, b, n_probe + 2)[1:-1]
    slope = np.interp(xs, mc.curve.r, mc.curve.slopes())
    phi = np.interp(xs, mc.curve.r, mc.curve.phi)
    logs = []
    for xr, xp, sl in zip(xs, phi, slope):
        cum, _ = tangent_orbit_jacobians(
            mc.curve.disk_index, xr, xp, sl, scenario, n
        )
        logs.append(math.log(cum[-1]))
    logs = np.array(logs)
    max_log_ratio = float(logs.max() - logs.min())
    blen = image_arc_uniform(mc.curve, scenario, n, a, b)
    bound = max_log_ratio / blen ** (1.0 / 3.0) if blen > 0 else 0.0
    return DistortionReport(n, max_log_ratio, blen, (float(a), float(b)), bound)


def regularity_constant(
    mc: MeasuredCurve,
    scenario,
    n_max,
    theta,
    n_pts=20,
    s_cap=24,
):
    """Envelope constants C_n with |d log rho_n| <= C_n theta^{s(x,y)}.

    The density is transported along the branch containing the curve
    midpoint; separation times of image pairs are measured under the
    remaining map sequence and censored at s_cap (censored pairs use
    s = s_cap, which overestimates the envelope, never under).  Returns
    the list [C_0, ..., C_n_max].
    """
    from .growth import component_interval
    from .tangent import pair_separation_times, separation_profile

    curve = mc.curve
    mid = 0.5 * (curve.r[0] + curve.r[-1])
    out = []
    for n in range(n_max + 1):
        if n == 0:
            a, b = float(curve.r[0]), float(curve.r[-1])
        else:
            a, b = component_interval(curve, scenario, n, mid)
        xs = np.linspace(a, b, n_pts + 2)[1:-1]
        phis = np.interp(xs, curve.r, curve.phi)
        slopes = np.interp(xs, curve.r, curve.slopes())
        log_rho0 = np.interp(xs, curve.r, mc.log_density)
        if n == 0:
            log_rho = log_rho0
            img = (
                np.full(xs.shape, curve.disk_index, dtype=np.int64),
                xs.copy(),
                phis.copy(),
            )
        else:
            logs = []
            img_d, img_r, img_p = [], [], []
            for xr, xp, sl in zip(xs, phis, slopes):
                cum, pts = tangent_orbit_jacobians(
                    curve.disk_index, xr, xp, sl, scenario, n
                )
                logs.append(math.log(cum[-1]))
                img_d.append(pts[-1].disk_index)
                img_r.append(pts[-1].r)
                img_p.append(pts[-1].phi)
            log_rho = log_rho0 - np.array(logs)
            img = (
                np.array(img_d, dtype=np.int64),
                np.array(img_r),
                np.array(img_p),
            )
        shifted = scenario.shifted(n)
        prof = separation_profile(img[0], img[1], img[2], shifted, s_cap)
        c_n = 0.0
        m = len(xs)
        for i in range(m):
            for j in range(i + 1, m):
                la = (prof[0][:, i : i + 1], prof[1][:, i : i + 1])
                lb = (prof[0][:, j : j + 1], prof[1][:, j : j + 1])
                s, _ = pair_separation_times(la, lb, s_cap)
                c_n = max(
                    c_n, abs(log_rho[i] - log_rho[j]) * theta ** (-float(s[0]))
                )
        out.append(c_n)
    return out
