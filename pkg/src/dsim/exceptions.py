"""Exception types shared across the package."""


class DsimError(Exception):
    """Base class for all errors raised by dsim."""


class DegenerateLabelingError(DsimError):
    """Dressed-state labels cannot be assigned by continuity.

    Raised when two eigenvalues coincide (within 1e-9) or when the overlap
    with the reference states is too ambiguous to track.
    """


class BracketError(DsimError):
    """A root bracket does not contain a sign change."""


class ResolutionError(DsimError, ValueError):
    """The requested step bound cannot resolve an oscillating drive term."""


class CoverageError(DsimError, ValueError):
    """A noise trajectory does not cover the full sequence duration."""


class VanishingMatrixElementError(DsimError):
    """A gate calibration was requested where the drive matrix element vanishes."""


class DegenerateDataError(DsimError, ValueError):
    """Input data carries no usable structure for the requested fit."""


class AmbiguousFrequencyError(DsimError):
    """Two spectral peaks of comparable power prevent frequency seeding."""


class ConfigError(DsimError):
    """A configuration file or option set failed validation."""
