"""
Exception Hierarchy
Every error raised on purpose by segcurate derives from SegCurateException
"""

from typing import Optional


class SegCurateException(Exception):
    """Base segcurate exception"""
    exit_code: int = 1


class ConfigurationException(SegCurateException):
    """Invalid settings or run configuration"""
    exit_code = 2


class DatasetException(SegCurateException):
    """Base dataset exception"""
    exit_code = 3


class DatasetIOException(DatasetException):
    """Dataset file could not be read or written"""
    pass


class DatasetFormatException(DatasetException):
    """A record violates the dataset schema"""

    def __init__(self, message: str, path: Optional[str] = None,
                 line: Optional[int] = None, field: Optional[str] = None):
        self.path = path
        self.line = line
        self.field = field
        location = ":".join(str(part) for part in (path, line) if part is not None)
        prefix = f"{location}: " if location else ""
        suffix = f" (field '{field}')" if field else ""
        super().__init__(f"{prefix}{message}{suffix}")


class MixedActionKindException(DatasetFormatException):
    """A demonstration mixes absolute and relative actions"""
    pass


class ShapeMismatchException(DatasetException):
    """Raster or tensor shape does not match the encoder architecture"""
    pass


class SelectionException(DatasetException):
    """Labeled reference set cannot support voting"""
    pass


class StageException(SegCurateException):
    """A pipeline stage failed; carries the stage name"""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)
        super().__init__(f"stage '{stage}' failed: {cause}")


def handle_validation_error(error: Exception, path: Optional[str] = None,
                            line: Optional[int] = None) -> DatasetFormatException:
    """Convert a pydantic ValidationError into a DatasetFormatException naming the first bad field"""
    errors = getattr(error, "errors", None)
    if callable(errors):
        details = errors()
        if details:
            first = details[0]
            field = ".".join(str(part) for part in first.get("loc", ()))
            return DatasetFormatException(first.get("msg", str(error)), path, line, field or None)
    return DatasetFormatException(str(error), path, line)
