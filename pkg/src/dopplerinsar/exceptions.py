"""Exception types raised across the package."""


class GeometryError(ValueError):
    """Degenerate geometry: zero range, non-unit vectors, times outside a pass."""


class NotFoundError(LookupError):
    """A requested root, peak or intersection does not exist."""


class AmbiguityError(RuntimeError):
    """An interferometric phase could not be unwrapped reliably."""


class ConfigError(ValueError):
    """Invalid run configuration.

    The ``path`` attribute names the offending config key (dotted form).
    """

    def __init__(self, message, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class StageDependencyError(FileNotFoundError):
    """A pipeline stage was run before the stage producing its inputs."""


class AliasingWarning(UserWarning):
    """Scene Doppler falls outside the sampled scale-factor axis."""
