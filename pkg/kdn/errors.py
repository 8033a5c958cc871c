"""
Exception hierarchy shared by the library and the CLI.
"""


class KdnError(Exception):
    """Base class for every error raised by kdn."""


class ConfigError(KdnError):
    pass


# Data

class DataError(KdnError):
    pass


class ParseError(DataError):
    pass


class EmptyClass(DataError):
    pass


class TooFewSamples(DataError):
    pass


class SingleClass(DataError):
    pass


class WrongClassCount(DataError):
    pass


# Numerics

class NumericError(KdnError):
    pass


class NonFiniteInput(NumericError, ValueError):
    pass


class SizeMismatch(NumericError, ValueError):
    pass


class DimMismatch(NumericError, ValueError):
    pass


class MissingW(NumericError, ValueError):
    pass


class EigenFailure(NumericError):
    pass


class DegenerateKernel(NumericError):
    pass


# Artifacts

class ArtifactError(KdnError):
    pass


class ManifestVersionMismatch(ArtifactError):
    pass


class ChecksumMismatch(ArtifactError):
    pass


class ReportVersionMismatch(ArtifactError):
    pass


class IoError(ArtifactError):
    """A file or directory could not be read or written."""
