"""Exception hierarchy shared by all modules."""


class BlindMtsError(ValueError):
    """Base class for every error raised by this package."""


class GeometryError(BlindMtsError):
    """An endpoint lies outside the region a panel can serve (e.g. behind it)."""


class DegenerateGeometryError(GeometryError):
    """Coincident points or zero-length links."""


class ConfigurationError(BlindMtsError):
    pass


class DimensionError(BlindMtsError):
    pass


class InsufficientSamplingError(BlindMtsError):
    """A conditional-mean bin received no samples."""

    def __init__(self, panel, u, v, k):
        self.panel, self.u, self.v, self.k = panel, u, v, k
        super().__init__(
            f"no samples with panel={panel} atom=({u},{v}) at level k={k}; "
            "increase the number of samples"
        )


class UnsupportedPanelError(BlindMtsError):
    pass


class DegenerateTriangulationError(BlindMtsError):
    pass


class ScheduleTooLargeError(BlindMtsError):
    pass
