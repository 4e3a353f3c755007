"""Exception types shared across the package."""


class HomspecError(Exception):
    """Base class for all package-specific errors."""


class OutOfModelRange(HomspecError):
    """Input lies outside the validity window of an empirical model."""


class GridTooNarrow(HomspecError):
    """Wavelength grid does not cover enough of the requested spectrum."""


class GridMismatch(HomspecError):
    """Operation requires identical wavelength grids on both axes."""


class NonRealAmplitude(HomspecError):
    """Operation requires a real-valued joint spectral amplitude."""


class InconsistentMarginals(HomspecError):
    """Supplied port spectra are inconsistent with the coincidence map."""


class EmptyBatch(HomspecError):
    """Estimator called on a batch with no frames."""


class DegenerateMap(HomspecError):
    """Fit input map carries no signal (all zero)."""


class DataFormatError(HomspecError):
    """A data file is malformed (bad magic, version, or out-of-range fields)."""


class ConfigError(HomspecError):
    """Experiment configuration is malformed or inconsistent."""
