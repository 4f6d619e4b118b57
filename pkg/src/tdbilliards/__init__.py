"""Dispersing billiards with slowly moving scatterers on the 2-torus."""

__version__ = "0.1.0"

from .billiard import CollisionRecord, PhasePoint, billiard_step, evolve_sequence
from .geometry import (
    AdmissibilityReport,
    Configuration,
    Disk,
    HorizonSpec,
    Scene,
    admissibility,
    config_distance,
    escape_time,
    horizon_check,
    load_scene,
    tau_min,
)
from .scenario import ScenarioSequence

__all__ = [
    "AdmissibilityReport",
    "CollisionRecord",
    "Configuration",
    "Disk",
    "HorizonSpec",
    "PhasePoint",
    "Scene",
    "ScenarioSequence",
    "admissibility",
    "billiard_step",
    "config_distance",
    "escape_time",
    "evolve_sequence",
    "horizon_check",
    "load_scene",
    "tau_min",
]
