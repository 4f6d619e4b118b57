"""Phase space, charts and the time-dependent collision map.

Phase points are (disk index, r, phi): r is the clockwise arclength from
the marked point, phi in [-pi/2, pi/2] the signed angle between the
outgoing velocity and the normal pointing into the free region.  With the
clockwise parametrization, the boundary point at arclength r sits at polar
angle theta = marker - r/R and the outgoing velocity is the unit vector of
angle theta - phi; positive phi tilts the velocity toward increasing r.
This orientation makes the unstable cone slopes positive and reproduces
the standard derivative matrix (see tangent.dxf).

The configuration changeover is realized by the time-floor rule: the image
collision is the first intersection with the *target* scatterers strictly
after the ray exits the source buffer zone.  For admissible pairs the
trajectory stays outside every buffer between the exit and the next
collision, so the result is independent of the actual swap instant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NoCollisionWithinHorizon, NotAdmissible
from .geometry import TWO_PI, Configuration, admissibility

TANGENTIAL_TOL = 1e-9


@dataclass(frozen=True)
class PhasePoint:
    disk_index: int
    r: float
    phi: float

    def __post_init__(self):
        if abs(self.phi) > math.pi / 2 + 1e-12:
            raise ValueError(f"phi out of range: {self.phi}")


@dataclass(frozen=True)
class CollisionRecord:
    image: PhasePoint
    flight_time: float
    cos_phi_out: float
    tangential_margin: float
    source_exit_time: float

    @property
    def near_tangential(self):
        return self.tangential_margin < TANGENTIAL_TOL


def chart_to_plane(x: PhasePoint, config: Configuration):
    """Boundary point and outgoing unit velocity of a phase point."""
    d = config.disks[x.disk_index]
    theta = d.marker_angle - (x.r % d.perimeter) / d.radius
    q = np.array(
        [
            d.center[0] + d.radius * math.cos(theta),
            d.center[1] + d.radius * math.sin(theta),
        ]
    )
    psi = theta - x.phi
    v = np.array([math.cos(psi), math.sin(psi)])
    return q, v


def plane_to_chart(q, v, disk_index, config: Configuration) -> PhasePoint:
    """Inverse chart; q may sit on any lattice copy of the disk."""
    d = config.disks[disk_index]
    dx = q[0] - d.center[0]
    dy = q[1] - d.center[1]
    dx -= round(dx)
    dy -= round(dy)
    theta = math.atan2(dy, dx)
    r = ((d.marker_angle - theta) % TWO_PI) * d.radius
    psi = math.atan2(v[1], v[0])
    phi = theta - psi
    phi -= TWO_PI * math.floor((phi + math.pi) / TWO_PI)
    return PhasePoint(disk_index, r, phi)


def trace_free_flight(q, v, config: Configuration, start_time_floor=0.0, t_max=4.0):
    """First boundary intersection of the ray at parameter > start_time_floor.

    Uses unfolding into lattice translates up to the horizon length t_max.
    Returns (hit point, disk index, time, incidence angle from tangent).
    """
    t, k, (ccx, ccy, cR, cdisk) = kernels.trace_batch(
        [q[0]], [q[1]], [v[0]], [v[1]], config, start_time_floor, t_max
    )
    if k[0] < 0:
        raise NoCollisionWithinHorizon(
            f"no scatterer within {t_max} along ray from {tuple(q)}",
            ray=(tuple(q), tuple(v)),
        )
    ki = int(k[0])
    ti = float(t[0])
    p = np.array([q[0] + ti * v[0], q[1] + ti * v[1]])
    nx = (p[0] - ccx[ki]) / cR[ki]
    ny = (p[1] - ccy[ki]) / cR[ki]
    incidence = math.asin(min(1.0, max(-1.0, -(v[0] * nx + v[1] * ny))))
    return p, int(cdisk[ki]), ti, incidence


def billiard_step(
    x: PhasePoint,
    source: Configuration,
    target: Configuration,
    beta: float,
    *,
    t_max: float,
    swap_floor=None,
    check=False,
    horizon_spec=None,
) -> CollisionRecord:
    """One collision of the map F_{target,source}.

    swap_floor overrides the buffer-exit time floor; any value in the
    admissible changeover window gives a bitwise-identical result.  With
    check=True the pair is validated first (NotAdmissible on failure,
    needs horizon_spec).
    """
    if check:
        rep = admissibility(source, target, beta, horizon_spec)
        if not rep.admissible:
            raise NotAdmissible(
                f"pair not admissible (worst disk {rep.worst_disk}, "
                f"slack {rep.worst_slack:.3e})"
            )
    floor = None
    if swap_floor is not None:
        floor = np.array([float(swap_floor)])
    di, r, phi, tau, texit, cosv, margin, status = kernels.step_batch(
        np.array([x.disk_index], dtype=np.int64),
        np.array([x.r]),
        np.array([x.phi]),
        source,
        target,
        beta,
        t_max,
        floor,
    )
    if status[0] != 0:
        q, v = chart_to_plane(x, source)
        raise NoCollisionWithinHorizon(
            f"no collision within {t_max} from {x}", ray=(tuple(q), tuple(v))
        )
    return CollisionRecord(
        image=PhasePoint(int(di[0]), float(r[0]), float(phi[0])),
        flight_time=float(tau[0]),
        cos_phi_out=float(cosv[0]),
        tangential_margin=float(margin[0]),
        source_exit_time=float(texit[0]),
    )


def evolve_sequence(x: PhasePoint, scenario, n: int):
    """Collision history F_1, ..., F_n applied to x; n=0 gives []."""
    records = []
    for i in range(1, n + 1):
        try:
            rec = billiard_step(
                x,
                scenario.config(i - 1),
                scenario.config(i),
                scenario.beta,
                t_max=scenario.horizon.t,
            )
        except NoCollisionWithinHorizon as exc:
            exc.step = i
            raise
        records.append(rec)
        x = rec.image
    return records


def evolve_batch(di, r, phi, scenario, n, collect=None):
    """Batch evolution; returns final arrays or per-step collected values.

    collect, if given, is called as collect(step, di, r, phi, tau, status)
    after every step.  Raises on the first miss with the failing step.
    """
    di = np.asarray(di, dtype=np.int64)
    r = np.asarray(r, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    for i in range(1, n + 1):
        di2, r2, phi2, tau, _, _, _, status = kernels.step_batch(
            di, r, phi, scenario.config(i - 1), scenario.config(i),
            scenario.beta, scenario.horizon.t,
        )
        if status.any():
            bad = int(np.argmax(status != 0))
            raise NoCollisionWithinHorizon(
                f"particle {bad} lost at step {i}", step=i
            )
        di, r, phi = di2, r2, phi2
        if collect is not None:
            collect(i, di, r, phi, tau, status)
    return di, r, phi
