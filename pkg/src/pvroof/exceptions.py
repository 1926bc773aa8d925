"""Exception hierarchy shared by all pvroof modules."""


class PVRoofError(Exception):
    """Base class for every error raised by pvroof."""


class ParseError(PVRoofError, ValueError):
    """Malformed input document.

    ``offset`` is a byte offset (JSON inputs) and ``line`` a 1-based line
    number (text grids, CSV); either may be ``None``.
    """

    def __init__(self, message, *, offset=None, line=None):
        where = []
        if offset is not None:
            where.append(f"byte offset {offset}")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.offset = offset
        self.line = line


class DegenerateGeometryError(PVRoofError, ValueError):
    def __init__(self, message="degenerate geometry"):
        super().__init__(message)


class NoCoverageError(PVRoofError):
    def __init__(self, message="no DSM coverage"):
        super().__init__(message)


class RankDeficientError(PVRoofError, ValueError):
    def __init__(self, message="rank-deficient samples"):
        super().__init__(message)


class NoLinesError(PVRoofError):
    def __init__(self, message="no lines detected"):
        super().__init__(message)


class ImplausibleTiltError(PVRoofError, ValueError):
    def __init__(self, tilt):
        super().__init__(f"implausible tilt: {tilt!r} degrees (must lie in [0, 85])")
        self.tilt = tilt


class ConfigError(PVRoofError, ValueError):
    """Inconsistent extraction configuration; ``field`` names the culprit."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class SchemaError(PVRoofError, ValueError):
    """Serialized LUT / model document does not match the expected schema."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
