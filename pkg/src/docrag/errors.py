"""Exception hierarchy.

The three top-level families map onto CLI exit codes: ``InputError`` (1),
``ConfigError`` (2) and ``ServiceError`` (3).
"""

from __future__ import annotations


class DocragError(Exception):
    """Base class for every error raised by this package."""


class InputError(DocragError):
    """An input document or data file could not be read."""


class NotZip(InputError):
    """The bytes handed to the docx reader are not a zip archive."""


class MissingDocumentPart(InputError):
    """The archive has no main document part."""


class MalformedXml(InputError):
    def __init__(self, part: str, position: tuple[int, int] | None, detail: str = ""):
        self.part = part
        self.position = position
        where = f" at line {position[0]}, column {position[1]}" if position else ""
        super().__init__(f"malformed XML in {part}{where}{': ' + detail if detail else ''}")


class SchemaViolation(InputError):
    def __init__(self, field: str, detail: str = ""):
        self.field = field
        super().__init__(f"schema violation at {field or '<root>'}: {detail}")


class IndexFileError(InputError):
    """A persisted index file is unreadable."""


class BadMagic(IndexFileError):
    pass


class UnsupportedVersion(IndexFileError):
    pass


class TruncatedFile(IndexFileError):
    pass


class ChecksumMismatch(IndexFileError):
    pass


class DimensionMismatch(DocragError, ValueError):
    def __init__(self, got: int, want: int):
        self.got = got
        self.want = want
        super().__init__(f"vector dimension {got} does not match expected {want}")


class ConfigError(DocragError, ValueError):
    """Configuration is invalid: bad value, unknown key or violated invariant."""


class ServiceError(DocragError):
    """A remote service (vision, embedding, vector database) failed."""


class TransportError(ServiceError):
    def __init__(self, message: str, status: int | None = None):
        self.status = status
        super().__init__(message)


class VisionUnavailable(ServiceError):
    pass
