"""Exception hierarchy shared by all pipeline stages.

Every error raised by the toolkit derives from :class:`FearkitError` and
carries the name of the stage that produced it, so the CLI can surface
failures as one machine-parsable line.
"""

from __future__ import annotations


class FearkitError(Exception):
    """Base class for all toolkit errors."""

    module = "fearkit"


class ManifestError(FearkitError):
    module = "core"


class ParseError(FearkitError):
    """Raised by ingest parsers; carries the offending row number."""

    module = "ingest"

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class AlignmentError(FearkitError):
    module = "align"


class UnrecoverableJointError(AlignmentError):
    """A joint was never observed in any frame, so it cannot be filled."""

    def __init__(self, joint: int):
        super().__init__(f"joint {joint} has no observed value in any frame")
        self.joint = joint


class EmptyOverlapError(AlignmentError):
    """The modality streams share no common time span."""


class FeatureError(FearkitError):
    module = "audio-features"


class PcaError(FearkitError):
    module = "skeleton-features"


class FusionError(FearkitError):
    module = "label-fusion"


class DatasetError(FearkitError):
    module = "dataset"


class NetError(FearkitError):
    module = "net"


class TrainingDivergedError(NetError):
    """Training produced a non-finite loss; partial history is attached."""

    def __init__(self, message: str, history=None, batch_index: int | None = None):
        super().__init__(message)
        self.history = history or []
        self.batch_index = batch_index


class MetricsError(FearkitError):
    module = "metrics"


class ServiceError(FearkitError):
    module = "annotation-service"

    def __init__(self, message: str, status: int = 400, code: str = "bad_request"):
        super().__init__(message)
        self.status = status
        self.code = code


class CliError(FearkitError):
    module = "cli"
