"""Scatterer configurations on the unit 2-torus.

Scatterers are disks under rigid motion: each carries a center, a radius
and a marked boundary point (marker_angle) fixing the arclength origin of
the clockwise boundary parametrization.  This module computes the
geometric gate quantities for the time-dependent dynamics: the minimal
free path tau_min, the buffer escape time, the uniform finite-horizon
check and pair admissibility.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    MismatchedScattererCount,
    OverlappingScatterers,
    SceneParseError,
)

TWO_PI = 2.0 * math.pi


def wrap_unit(x):
    """Reduce a coordinate to [0, 1)."""
    return x - math.floor(x)


def torus_delta(a, b):
    """Signed shortest displacement b - a on the unit circle, in [-1/2, 1/2)."""
    d = b - a
    return d - math.floor(d + 0.5)


@dataclass(frozen=True)
class Disk:
    """One scatterer: center in [0,1)^2, radius, marked-point angle."""

    center: tuple[float, float]
    radius: float
    marker_angle: float = 0.0

    def __post_init__(self):
        if not self.radius > 0.0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        cx, cy = self.center
        object.__setattr__(self, "center", (wrap_unit(cx), wrap_unit(cy)))
        object.__setattr__(self, "marker_angle", self.marker_angle % TWO_PI)

    @property
    def perimeter(self):
        return TWO_PI * self.radius

    @property
    def curvature(self):
        return 1.0 / self.radius


@dataclass(frozen=True)
class Configuration:
    """An ordered placement of disks on the torus."""

    disks: tuple[Disk, ...]
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "disks", tuple(self.disks))
        if not self.disks:
            raise ValueError("configuration needs at least one disk")
        # disjointness is equivalent to tau_min > 0; computing it raises
        # OverlappingScatterers when any lifted pair overlaps
        tau_min(self)

    @property
    def radii(self):
        return np.array([d.radius for d in self.disks])

    @property
    def centers(self):
        return np.array([d.center for d in self.disks])

    @property
    def markers(self):
        return np.array([d.marker_angle for d in self.disks])

    @property
    def perimeters(self):
        return np.array([d.perimeter for d in self.disks])

    def curvature_bounds(self):
        r = self.radii
        return 1.0 / r.max(), 1.0 / r.min()

    def translated(self, shift):
        sx, sy = shift
        return Configuration(
            tuple(
                Disk((d.center[0] + sx, d.center[1] + sy), d.radius, d.marker_angle)
                for d in self.disks
            ),
            label=self.label,
        )


@dataclass(frozen=True)
class HorizonSpec:
    """Uniform finite-horizon parameters: segment length t, minimum angle phi."""

    t: float
    phi: float

    def __post_init__(self):
        if not self.t > 0.0:
            raise ValueError("horizon length must be positive")
        if not 0.0 < self.phi < math.pi / 2:
            raise ValueError("horizon angle must lie in (0, pi/2)")


@dataclass(frozen=True)
class AdmissibilityReport:
    tau_min: float
    beta: float
    escape_time: float
    admissible: bool
    flight_bounds: tuple[float, float]
    containment_ok: bool = True
    worst_disk: int = -1
    worst_slack: float = float("inf")


def lattice_offsets(reach):
    """Integer offsets (dx, dy) with |dx|,|dy| <= ceil(reach)+1, fixed order."""
    L = int(math.ceil(reach)) + 1
    return [(mx, my) for my in range(-L, L + 1) for mx in range(-L, L + 1)]


def tau_min(config: Configuration) -> float:
    """Shortest free segment between lifted scatterer copies.

    For disks this is the minimum over all pairs (including a disk with
    its own lattice translates) of center distance minus summed radii.
    """
    disks = config.disks
    offsets = lattice_offsets(1.0)
    best = math.inf
    for i, a in enumerate(disks):
        for j, b in enumerate(disks):
            if j < i:
                continue
            for mx, my in offsets:
                if i == j and mx == 0 and my == 0:
                    continue
                dx = b.center[0] + mx - a.center[0]
                dy = b.center[1] + my - a.center[1]
                gap = math.hypot(dx, dy) - a.radius - b.radius
                if gap < best:
                    best = gap
    if best <= 0.0:
        raise OverlappingScatterers(
            f"lifted scatterer copies overlap (worst gap {best:.3e})"
        )
    return best


def escape_time(config: Configuration, beta: float) -> float:
    """Longest straight segment inside any buffer annulus B_{i,beta} \\ B_i.

    For a disk of radius R the maximizing chord grazes the inner circle:
    length sqrt((R+beta)^2 - R^2).
    """
    if beta <= 0.0:
        return 0.0
    best = 0.0
    for d in config.disks:
        best = max(best, math.sqrt((d.radius + beta) ** 2 - d.radius**2))
    return best


def horizon_check(config, spec: HorizonSpec, resolution=1.0 / 256.0):
    """Sampled semidecision of the (t, phi)-horizon condition.

    Directed segments of length spec.t are sampled on a grid of base
    points (spacing `resolution`) times directions (twice as many).  A
    True verdict means no violation was found at this resolution; False
    comes with a witness segment (base point, direction angle).

    Returns (ok, witness, min_margin) where margin is
    sin(incidence) - sin(phi) minimized over sampled segments.
    """
    from . import kernels

    if spec.phi >= math.pi / 2:
        return False, ((0.0, 0.0), 0.0), -1.0
    n_base = max(2, int(math.ceil(1.0 / resolution)))
    n_dirs = 2 * n_base
    ok, min_margin, bx, by, ang = kernels.horizon_scan(
        config, spec.t, spec.phi, n_base, n_dirs
    )
    witness = None if ok else ((bx, by), ang)
    return ok, witness, min_margin


def admissibility(
    source: Configuration, target: Configuration, beta: float, spec: HorizonSpec
) -> AdmissibilityReport:
    """Check that (source, target) is an admissible pair for this beta.

    Admissible iff every target disk sits inside the beta-neighborhood of
    its source counterpart and the buffer inequality
    escape_time < tau_min - beta holds.
    """
    if len(source.disks) != len(target.disks):
        raise MismatchedScattererCount(
            f"{len(source.disks)} vs {len(target.disks)} disks"
        )
    tmin = tau_min(source)
    tesc = escape_time(source, beta)
    buffer_ok = tesc < tmin - beta
    containment_ok = True
    worst_disk = -1
    worst_slack = math.inf
    for i, (a, b) in enumerate(zip(source.disks, target.disks)):
        dx = torus_delta(a.center[0], b.center[0])
        dy = torus_delta(a.center[1], b.center[1])
        # B'_i inside B_{i,beta}: center shift + target radius <= R_i + beta
        slack = (a.radius + beta) - (math.hypot(dx, dy) + b.radius)
        if slack < worst_slack:
            worst_slack = slack
            worst_disk = i
        if slack < 0.0:
            containment_ok = False
    return AdmissibilityReport(
        tau_min=tmin,
        beta=beta,
        escape_time=tesc,
        admissible=bool(buffer_ok and containment_ok),
        flight_bounds=(tmin / 2.0, spec.t),
        containment_ok=containment_ok,
        worst_disk=worst_disk,
        worst_slack=worst_slack,
    )


def config_distance(a: Configuration, b: Configuration) -> float:
    """Euclidean metric on configuration space (T^2 x S^1)^s."""
    if len(a.disks) != len(b.disks):
        raise MismatchedScattererCount(f"{len(a.disks)} vs {len(b.disks)} disks")
    acc = 0.0
    for da, db in zip(a.disks, b.disks):
        acc += torus_delta(da.center[0], db.center[0]) ** 2
        acc += torus_delta(da.center[1], db.center[1]) ** 2
        dm = abs(da.marker_angle - db.marker_angle) % TWO_PI
        acc += min(dm, TWO_PI - dm) ** 2
    return math.sqrt(acc)


# scene files -------------------------------------------------------------


@dataclass(frozen=True)
class Scene:
    config: Configuration
    horizon: HorizonSpec
    beta: float
    name: str = ""
    path: str = ""


def scene_from_dict(data, name="", path=""):
    try:
        disks = tuple(
            Disk(tuple(d["center"]), d["radius"], d.get("marker_angle", 0.0))
            for d in data["disks"]
        )
        config = Configuration(disks, label=data.get("label", name))
        horizon = HorizonSpec(data["horizon"]["t"], data["horizon"]["phi"])
        beta = float(data["beta"])
    except OverlappingScatterers:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneParseError(f"bad scene data: {exc}") from exc
    if beta <= 0.0:
        raise SceneParseError("beta must be positive")
    return Scene(config, horizon, beta, name=name, path=path)


def load_scene(path) -> Scene:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SceneParseError(f"cannot parse scene {path}: {exc}") from exc
    name = data.get("label", str(path))
    return scene_from_dict(data, name=name, path=str(path))


def dump_scene(scene: Scene, path):
    data = {
        "label": scene.name,
        "disks": [
            {
                "center": list(d.center),
                "radius": d.radius,
                "marker_angle": d.marker_angle,
            }
            for d in scene.config.disks
        ],
        "horizon": {"t": scene.horizon.t, "phi": scene.horizon.phi},
        "beta": scene.beta,
    }
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")
