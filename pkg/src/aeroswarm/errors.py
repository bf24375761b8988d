"""Exception types shared across the planner."""


class ConfigurationError(ValueError):
    """Raised for invalid parameters or inconsistent inputs."""


class NoPath(RuntimeError):
    """Raised by grid searches when the goal cannot be reached."""


class InvalidSeed(ValueError):
    """Raised when a polyhedron seed voxel is not free."""


class DegenerateGeometry(ValueError):
    """Raised when two agent positions coincide and no separating plane exists."""
