"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


class CapabilityError(RuntimeError):
    """Requested computation exceeds a hard size cap (e.g. dense oracle)."""


class InsufficientDataError(ValueError):
    """Not enough usable points for a fit or estimate."""
