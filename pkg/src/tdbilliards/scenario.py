"""Finite configuration sequences (K_0, ..., K_N) and their generators.

A ScenarioSequence is immutable and shareable across threads.  Indexing
past the end repeats the final configuration, matching the convention of
augmenting finite sequences when forward orbits are needed beyond N.

Generators: `constant` (fixed map iteration), `drift` (centers translate
along fixed unit vectors at a constant speed per step) and `orbit`
(centers rotate rigidly about fixed pivots, markers co-rotating).
Radius changes are variable geometry and are not generated here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import NotAdmissible
from .geometry import (
    Configuration,
    Disk,
    HorizonSpec,
    admissibility,
    config_distance,
)


@dataclass(frozen=True)
class ScenarioSequence:
    configs: tuple[Configuration, ...]
    beta: float
    horizon: HorizonSpec
    kind: str = "custom"

    def __post_init__(self):
        if not self.configs:
            raise ValueError("scenario needs at least one configuration")

    @property
    def n_steps(self):
        return len(self.configs) - 1

    def config(self, i: int) -> Configuration:
        if i < 0:
            raise IndexError(i)
        return self.configs[min(i, len(self.configs) - 1)]

    def step_distances(self):
        return [
            config_distance(a, b) for a, b in zip(self.configs, self.configs[1:])
        ]

    def shifted(self, k: int):
        """View starting at step k (config(i) = original config(i + k))."""
        if k <= 0:
            return self
        tail = self.configs[k:] if k < len(self.configs) else self.configs[-1:]
        return ScenarioSequence(tail, self.beta, self.horizon, kind=self.kind)

    def validate(self):
        """Admissibility report per step; raises NotAdmissible with the index."""
        reports = []
        for i in range(len(self.configs) - 1):
            rep = admissibility(
                self.configs[i], self.configs[i + 1], self.beta, self.horizon
            )
            reports.append(rep)
            if not rep.admissible:
                raise NotAdmissible(
                    f"step {i + 1} not admissible "
                    f"(worst disk {rep.worst_disk}, slack {rep.worst_slack:.3e})"
                )
        return reports


def constant(config, n_steps, beta, horizon):
    return ScenarioSequence((config,) * (n_steps + 1), beta, horizon, kind="fixed")


def _default_directions(n):
    # fixed, incommensurate spread so no two disks drift in parallel
    return [
        (math.cos(2 * math.pi * i / n + math.pi / 7),
         math.sin(2 * math.pi * i / n + math.pi / 7))
        for i in range(n)
    ]


def drift(config, n_steps, speed, beta, horizon, directions=None):
    """Every disk translates by speed * direction each step."""
    s = len(config.disks)
    if directions is None:
        directions = _default_directions(s)
    configs = [config]
    cur = config
    for _ in range(n_steps):
        cur = Configuration(
            tuple(
                Disk(
                    (d.center[0] + speed * ux, d.center[1] + speed * uy),
                    d.radius,
                    d.marker_angle,
                )
                for d, (ux, uy) in zip(cur.disks, directions)
            ),
            label=config.label,
        )
        configs.append(cur)
    return ScenarioSequence(tuple(configs), beta, horizon, kind="drift")


def orbit(config, n_steps, omega, beta, horizon, pivots=None, pivot_offset=0.05):
    """Disks rotate rigidly by omega per step about per-disk pivots."""
    if pivots is None:
        pivots = [
            (d.center[0] + pivot_offset, d.center[1]) for d in config.disks
        ]
    configs = [config]
    for k in range(1, n_steps + 1):
        ang = omega * k
        ca, sa = math.cos(ang), math.sin(ang)
        disks = []
        for d0, (px, py) in zip(config.disks, pivots):
            dx = d0.center[0] - px
            dy = d0.center[1] - py
            disks.append(
                Disk(
                    (px + ca * dx - sa * dy, py + sa * dx + ca * dy),
                    d0.radius,
                    d0.marker_angle + ang,
                )
            )
        configs.append(Configuration(tuple(disks), label=config.label))
    return ScenarioSequence(tuple(configs), beta, horizon, kind="orbit")


def from_spec(scene, kind, n_steps, eps=0.0, speed=None):
    """Build a scenario from a scene per the CLI vocabulary.

    For drift/orbit the per-disk motion is scaled so the per-step
    configuration distance stays below eps; an explicit speed overrides
    the scaling (scenarios violating eps can then be constructed).
    """
    s = len(scene.config.disks)
    if kind == "fixed":
        return constant(scene.config, n_steps, scene.beta, scene.horizon)
    if eps <= 0.0 and speed is None:
        raise ValueError("drift/orbit scenarios need eps > 0")
    if kind == "drift":
        if speed is None:
            speed = 0.9 * eps / math.sqrt(s)
        return drift(scene.config, n_steps, speed, scene.beta, scene.horizon)
    if kind == "orbit":
        # per-disk step distance ~ sqrt((pivot_dist*omega)^2 + omega^2)
        off = 0.05
        omega = 0.9 * eps / math.sqrt(s * (off**2 + 1.0))
        return orbit(
            scene.config, n_steps, omega, scene.beta, scene.horizon,
            pivot_offset=off,
        )
    raise ValueError(f"unknown scenario kind {kind!r}")
