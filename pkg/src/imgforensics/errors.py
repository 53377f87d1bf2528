"""Exception types.  Every failure the toolkit reports is one of these."""


class ForensicsError(Exception):
    pass


# JPEG structure and codec

class JpegError(ForensicsError):
    pass


class MissingSOI(JpegError):
    pass


class TruncatedSegment(JpegError):
    pass


class MalformedSegment(JpegError):
    """Bytes where a marker was expected, or a length field below 2."""


class NoDqtFound(JpegError):
    pass


class MalformedDqt(JpegError):
    pass


class ZeroQuantValue(MalformedDqt):
    pass


class UnsupportedCoding(JpegError):
    """Progressive, arithmetic, lossless or otherwise non-baseline coding."""


class CorruptEntropyData(JpegError):
    pass


class DimensionOverflow(JpegError):
    pass


# Exif / TIFF

class ExifError(ForensicsError):
    pass


class BadPreamble(ExifError):
    pass


class BadTiffHeader(ExifError):
    pass


class OffsetOutOfBounds(ExifError):
    pass


# filename signatures

class InvalidPattern(ForensicsError):
    pass


# reference database

class RefDbError(ForensicsError):
    pass


class UnparseableImage(RefDbError):
    pass


class SchemaVersionMismatch(RefDbError):
    pass


class MalformedSnapshot(RefDbError):
    pass


# pixel analyses

class AnalysisError(ForensicsError):
    pass


class WindowTooLarge(AnalysisError):
    pass


class DegenerateCovariance(AnalysisError):
    pass


class DimensionMismatch(AnalysisError):
    pass


# scanner / pipeline

class RootNotFound(ForensicsError):
    pass


class FileUnreadable(ForensicsError):
    pass


class InvalidProfile(ForensicsError):
    pass
