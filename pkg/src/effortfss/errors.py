"""Exception hierarchy shared across the package."""


class Error(Exception):
    """Base class for all package errors."""


class DataError(Error):
    """Invalid or unusable input data (CSV parsing, preprocessing, schema)."""


class ComputeError(Error):
    """A numerical procedure failed (singular system, divergence, cycling)."""
