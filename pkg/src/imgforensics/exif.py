"""Exif (APP1) parsing: IFD0 editor tags, IFD1 thumbnail and its DQT."""

import struct
from dataclasses import dataclass, field

from .errors import BadPreamble, BadTiffHeader, JpegError, OffsetOutOfBounds
from .segments import extract_dqt, parse_segments

EXIF_PREAMBLE = b"Exif\x00\x00"

TAG_SOFTWARE = 0x0131
TAG_DATETIME = 0x0132
TAG_ARTIST = 0x013B
TAG_EXIF_IFD = 0x8769
TAG_GPS_IFD = 0x8825
TAG_JPEG_OFFSET = 0x0201
TAG_JPEG_LENGTH = 0x0202

TAG_NAMES = {
    TAG_SOFTWARE: "Software",
    TAG_DATETIME: "DateTime",
    TAG_ARTIST: "Artist",
    TAG_EXIF_IFD: "ExifIFDPointer",
    TAG_GPS_IFD: "GPSInfoIFDPointer",
    TAG_JPEG_OFFSET: "JPEGInterchangeFormat",
    TAG_JPEG_LENGTH: "JPEGInterchangeFormatLength",
    0x010F: "Make",
    0x0110: "Model",
    0x0112: "Orientation",
    0x0103: "Compression",
}

# type id -> (name, size in bytes of one element)
TIFF_TYPES = {
    1: ("BYTE", 1), 2: ("ASCII", 1), 3: ("SHORT", 2), 4: ("LONG", 4),
    5: ("RATIONAL", 8), 6: ("SBYTE", 1), 7: ("UNDEFINED", 1), 8: ("SSHORT", 2),
    9: ("SLONG", 4), 10: ("SRATIONAL", 8), 11: ("FLOAT", 4), 12: ("DOUBLE", 8),
}

_NUMERIC = {3: "H", 4: "I", 8: "h", 9: "i", 11: "f", 12: "d"}


@dataclass(frozen=True)
class TagValue:
    type_id: int
    count: int
    value: object  # str for ASCII, tuple for numeric types, bytes otherwise

    @property
    def type_name(self):
        return TIFF_TYPES.get(self.type_id, ("UNKNOWN", 0))[0]


@dataclass
class ExifRecord:
    byte_order: str  # "little" ("II") or "big" ("MM")
    tags: dict = field(default_factory=dict)  # IFD0
    ifd1_tags: dict = field(default_factory=dict)
    thumbnail: bytes | None = None
    thumbnail_offset: int | None = None  # relative to the TIFF header
    sub_ifd_offsets: dict = field(default_factory=dict)  # pointer tag -> offset, not walked
    diagnostics: list = field(default_factory=list)

    def text(self, tag):
        tv = self.tags.get(tag)
        return tv.value if tv is not None and isinstance(tv.value, str) else None

    @property
    def software(self):
        return self.text(TAG_SOFTWARE)

    @property
    def artist(self):
        return self.text(TAG_ARTIST)

    @property
    def datetime(self):
        return self.text(TAG_DATETIME)


@dataclass(frozen=True)
class EditorExifSignature:
    software: str | None = None
    artist: str | None = None


def _decode_ascii(raw):
    nul = raw.find(b"\x00")
    if nul >= 0:
        raw = raw[:nul]
    return raw.decode("utf-8", errors="replace")


class _Tiff:
    def __init__(self, buf):
        self.buf = buf
        if len(buf) < 8:
            raise BadTiffHeader("TIFF header shorter than 8 bytes")
        order = buf[:2]
        if order == b"II":
            self.endian = "<"
        elif order == b"MM":
            self.endian = ">"
        else:
            raise BadTiffHeader(f"unknown byte order mark {order!r}")
        magic, self.ifd0 = struct.unpack(self.endian + "HI", buf[2:8])
        if magic != 42:
            raise BadTiffHeader(f"TIFF magic is {magic}, expected 42")

    def check(self, offset, size, what):
        if offset < 0 or offset + size > len(self.buf):
            raise OffsetOutOfBounds(
                f"{what} spans {offset}..{offset + size}, payload has {len(self.buf)} bytes")

    def read_ifd(self, offset, what):
        """Return ({tag: TagValue}, next_ifd_offset, diagnostics)."""
        e = self.endian
        self.check(offset, 2, what)
        (count,) = struct.unpack_from(e + "H", self.buf, offset)
        self.check(offset + 2, 12 * count + 4, what)
        tags = {}
        diags = []
        for i in range(count):
            pos = offset + 2 + 12 * i
            tag, type_id, n = struct.unpack_from(e + "HHI", self.buf, pos)
            if type_id not in TIFF_TYPES:
                diags.append(f"{what}: tag 0x{tag:04X} has unknown type {type_id}, skipped")
                continue
            size = TIFF_TYPES[type_id][1] * n
            if size <= 4:
                raw = self.buf[pos + 8:pos + 8 + size]
            else:
                (voff,) = struct.unpack_from(e + "I", self.buf, pos + 8)
                self.check(voff, size, f"{what} tag 0x{tag:04X} value")
                raw = self.buf[voff:voff + size]
            tags[tag] = TagValue(type_id, n, self._convert(type_id, n, raw))
        (next_ifd,) = struct.unpack_from(e + "I", self.buf, offset + 2 + 12 * count)
        return tags, next_ifd, diags

    def _convert(self, type_id, n, raw):
        e = self.endian
        if type_id == 2:
            return _decode_ascii(raw)
        if type_id in _NUMERIC:
            return struct.unpack(e + _NUMERIC[type_id] * n, raw)
        if type_id in (5, 10):
            fmt = "II" if type_id == 5 else "ii"
            flat = struct.unpack(e + fmt * n, raw)
            return tuple(zip(flat[::2], flat[1::2]))
        return bytes(raw)


def parse_exif(app1_payload):
    """Parse an APP1 payload that starts with the Exif preamble."""
    payload = bytes(app1_payload)
    if not payload.startswith(EXIF_PREAMBLE):
        raise BadPreamble("APP1 payload does not start with 'Exif\\0\\0'")
    tiff = _Tiff(payload[len(EXIF_PREAMBLE):])
    rec = ExifRecord(byte_order="little" if tiff.endian == "<" else "big")
    rec.tags, ifd1, diags = tiff.read_ifd(tiff.ifd0, "IFD0")
    rec.diagnostics.extend(diags)
    for pointer in (TAG_EXIF_IFD, TAG_GPS_IFD):
        tv = rec.tags.get(pointer)
        if tv is not None and isinstance(tv.value, tuple) and tv.value:
            offset = tv.value[0]
            tiff.check(offset, 2, TAG_NAMES[pointer])
            rec.sub_ifd_offsets[pointer] = offset
    if ifd1:
        if ifd1 == tiff.ifd0:
            rec.diagnostics.append("IFD1 link points back at IFD0, ignored")
        else:
            rec.ifd1_tags, _, diags = tiff.read_ifd(ifd1, "IFD1")
            rec.diagnostics.extend(diags)
            off = rec.ifd1_tags.get(TAG_JPEG_OFFSET)
            length = rec.ifd1_tags.get(TAG_JPEG_LENGTH)
            if off is not None and length is not None:
                if not (isinstance(off.value, tuple) and isinstance(length.value, tuple)
                        and off.value and length.value):
                    rec.diagnostics.append("thumbnail pointer tags are not numeric")
                else:
                    start, size = off.value[0], length.value[0]
                    tiff.check(start, size, "thumbnail")
                    rec.thumbnail_offset = start
                    rec.thumbnail = tiff.buf[start:start + size]
    return rec


def extract_editor_signature(rec):
    """Software/Artist verbatim, or None when neither tag is present."""
    if rec.software is None and rec.artist is None:
        return None
    return EditorExifSignature(rec.software, rec.artist)


def extract_thumbnail_dqt(rec, diagnostics=None):
    """QuantTableSet of the embedded thumbnail, or None.

    Failures never raise; a message is appended to ``diagnostics`` (or the
    record's own diagnostics) instead.
    """
    if rec.thumbnail is None:
        return None
    sink = rec.diagnostics if diagnostics is None else diagnostics
    try:
        qts = extract_dqt(parse_segments(rec.thumbnail), source="thumbnail")
    except JpegError as exc:
        sink.append(f"thumbnail is not a usable JPEG: {type(exc).__name__}: {exc}")
        return None
    return qts
