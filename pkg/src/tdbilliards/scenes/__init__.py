"""Access to the scene files shipped with the package."""

from importlib.resources import files

from ..geometry import load_scene

SHIPPED = ("finite_horizon_two_disks", "finite_horizon_triple")


def shipped_scene_path(name):
    if name not in SHIPPED:
        raise KeyError(f"unknown shipped scene {name!r}; have {SHIPPED}")
    return str(files("tdbilliards.scenes").joinpath(f"{name}.json"))


def shipped_scene(name):
    return load_scene(shipped_scene_path(name))
