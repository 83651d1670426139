"""Exception types shared across the package."""


class CapacityError(Exception):
    """A requested system size or dimension exceeds a hard capacity cap."""


class SpaceMismatchError(ValueError):
    """A state vector and an operator refer to different Hilbert spaces."""


class ConvergenceError(RuntimeError):
    """The propagator could not reach the requested accuracy."""


class ConfigError(ValueError):
    """A run configuration is invalid."""
