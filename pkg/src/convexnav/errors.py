"""Exception types raised across the navigation stack."""


class ConvexNavError(Exception):
    """Base class for all package errors."""


class StartOutsideRegion(ConvexNavError):
    """A query point that must lie strictly inside a region does not."""


class NonPositiveStep(ConvexNavError, ValueError):
    pass


class PlacementFailed(ConvexNavError):
    """Scenario generation could not place an entity after the sample budget."""


class DimensionMismatch(ConvexNavError, ValueError):
    pass


class NonFiniteLoss(ConvexNavError, FloatingPointError):
    pass


class ConfigError(ConvexNavError, KeyError):
    """Config file is missing a required key or has a malformed value."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "config error"


class ConfigMismatch(ConvexNavError):
    """A checkpoint does not fit the configuration it is evaluated with."""


class MissingEpisode(ConvexNavError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "missing episode"


class WallClockBudgetExceeded(ConvexNavError):
    pass
