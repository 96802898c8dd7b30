"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4.
"""


class TbScreenError(Exception):
    """Base class for all package errors."""


class ConfigError(TbScreenError):
    """Invalid or inconsistent run configuration."""


class DataError(TbScreenError):
    """Problem with input data: manifests, annotations, audio files."""


class NumericError(TbScreenError):
    """Numerical failure: divergence, degenerate inputs."""


class DegenerateFrameError(NumericError):
    """A frame statistic is undefined (e.g. zero-variance frame)."""
