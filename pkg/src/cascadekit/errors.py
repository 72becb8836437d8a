"""Exception types shared across the package.

The CLI maps these onto process exit codes: validation problems exit 2,
infeasible selections exit 3, file I/O failures exit 4.
"""

from __future__ import annotations


class CascadeKitError(Exception):
    """Base class for package errors."""


class ValidationError(CascadeKitError):
    """Malformed input, out-of-range value, or inconsistent artifact."""


class SelectionInfeasible(CascadeKitError):
    """No frontier point satisfies the requested constraints."""

    def __init__(self, message: str, *, min_accuracy=None, min_throughput_fps=None):
        super().__init__(message)
        self.min_accuracy = min_accuracy
        self.min_throughput_fps = min_throughput_fps


class ArtifactIOError(CascadeKitError):
    """Reading or writing an on-disk artifact failed."""
