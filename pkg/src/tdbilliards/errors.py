"""Exception types shared across the package.

CLI exit codes: 0 ok, 1 usage, 2 geometry, 3 admissibility, 4 horizon,
5 runtime/numeric.
"""


class TdbError(Exception):
    """Base class; `exit_code` drives the CLI."""

    exit_code = 5


class SceneParseError(TdbError):
    exit_code = 2


class OverlappingScatterers(TdbError):
    exit_code = 2


class MismatchedScattererCount(TdbError):
    exit_code = 2


class NotAdmissible(TdbError):
    exit_code = 3


class NoCollisionWithinHorizon(TdbError):
    """Raised when a ray finds no scatterer within the horizon length.

    Attributes carry the offending ray; `step` is filled in by sequence
    evolution so callers can identify the failing iterate.
    """

    exit_code = 4

    def __init__(self, msg, ray=None, step=None):
        super().__init__(msg)
        self.ray = ray
        self.step = step


class SingularCollision(TdbError):
    exit_code = 5


class VerticalImage(TdbError):
    exit_code = 5


class EnvelopeTooTight(TdbError):
    exit_code = 5


class ParameterDomain(TdbError):
    exit_code = 5
