"""Exception hierarchy shared across the package."""

from __future__ import annotations


class PantError(Exception):
    """Base class for all errors raised by pant360."""


class ValidationError(PantError):
    """One or more input constraints are violated.

    Collects every violated rule so CLI misuse is diagnosable in one pass.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class RawFormatError(PantError):
    """Base class for raw tensor file parse errors."""


class BadMagicError(RawFormatError):
    pass


class TruncatedPayloadError(RawFormatError):
    pass


class DimensionOverflowError(RawFormatError):
    pass


class CoverageError(PantError):
    """A latent cell was covered by no window (schedule bug)."""


class InjectionError(PantError):
    """An injected control payload is missing or has the wrong shape."""

    def __init__(self, site, message):
        self.site = site
        super().__init__(f"site {site!r}: {message}")


class StageError(PantError):
    """Wraps an error raised inside a named pipeline stage."""

    def __init__(self, stage, cause):
        self.stage = stage
        super().__init__(f"stage {stage!r}: {cause}")
