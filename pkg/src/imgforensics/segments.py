"""Lossless structural parsing of JPEG byte streams.

Walks the marker/segment layout without touching entropy-coded data, and
extracts quantization tables plus their canonical MD5 fingerprint.
"""

import enum
import hashlib
import struct
from dataclasses import dataclass, field

from .errors import (MalformedDqt, MalformedSegment, MissingSOI, NoDqtFound,
                     TruncatedSegment, ZeroQuantValue)
from .tables import ZIGZAG

SOI = 0xFFD8
EOI = 0xFFD9
SOS = 0xFFDA
DQT = 0xFFDB
DRI = 0xFFDD
DHT = 0xFFC4
SOF0 = 0xFFC0
SOF2 = 0xFFC2
COM = 0xFFFE
APP0 = 0xFFE0
APP1 = 0xFFE1
RST0 = 0xFFD0
TEM = 0xFF01
DAC = 0xFFCC

JPEG_MAGIC = b"\xff\xd8\xff"


class MarkerKind(enum.Enum):
    SOI = "SOI"
    APP = "APP"
    DQT = "DQT"
    SOF0 = "SOF0"
    SOF2 = "SOF2"
    DHT = "DHT"
    SOS = "SOS"
    DRI = "DRI"
    RST = "RST"
    COM = "COM"
    EOI = "EOI"
    OTHER = "OTHER"


_FIXED_KINDS = {
    SOI: MarkerKind.SOI,
    DQT: MarkerKind.DQT,
    SOF0: MarkerKind.SOF0,
    SOF2: MarkerKind.SOF2,
    DHT: MarkerKind.DHT,
    SOS: MarkerKind.SOS,
    DRI: MarkerKind.DRI,
    COM: MarkerKind.COM,
    EOI: MarkerKind.EOI,
}


@dataclass(frozen=True)
class Marker:
    code: int

    def __post_init__(self):
        if self.code >> 8 != 0xFF or (self.code & 0xFF) in (0x00, 0xFF):
            raise ValueError(f"not a JPEG marker: 0x{self.code:04X}")

    @property
    def kind(self):
        if self.code in _FIXED_KINDS:
            return _FIXED_KINDS[self.code]
        if APP0 <= self.code <= 0xFFEF:
            return MarkerKind.APP
        if RST0 <= self.code <= 0xFFD7:
            return MarkerKind.RST
        return MarkerKind.OTHER

    @property
    def index(self):
        """n for APPn / RSTn, else None."""
        kind = self.kind
        if kind is MarkerKind.APP:
            return self.code - APP0
        if kind is MarkerKind.RST:
            return self.code - RST0
        return None

    @property
    def standalone(self):
        return self.code in (SOI, EOI, TEM) or RST0 <= self.code <= 0xFFD7

    @property
    def name(self):
        kind = self.kind
        if kind in (MarkerKind.APP, MarkerKind.RST):
            return f"{kind.value}{self.index}"
        if kind is not MarkerKind.OTHER:
            return kind.value
        low = self.code & 0xFF
        if 0xC0 <= low <= 0xCF and low not in (0xC4, 0xC8, 0xCC):
            return f"SOF{low - 0xC0}"
        return f"0x{self.code:04X}"


@dataclass(frozen=True)
class Segment:
    marker: Marker
    offset: int
    payload: bytes = b""
    entropy_data: bytes | None = None
    fill: int = 0  # 0xFF fill bytes before the marker

    @property
    def kind(self):
        return self.marker.kind

    @property
    def declared_length(self):
        return None if self.marker.standalone else len(self.payload) + 2

    def to_bytes(self):
        out = b"\xff" * self.fill + struct.pack(">H", self.marker.code)
        if not self.marker.standalone:
            out += struct.pack(">H", len(self.payload) + 2) + self.payload
        if self.entropy_data is not None:
            out += self.entropy_data
        return out


@dataclass(frozen=True)
class FrameComponent:
    component_id: int
    h: int
    v: int
    table_id: int


@dataclass(frozen=True)
class FrameHeader:
    marker: Marker
    precision: int
    height: int
    width: int
    components: tuple


@dataclass
class JpegSegmentList:
    segments: list
    missing_eoi: bool = False
    trailer_offset: int | None = None
    trailer: bytes = b""
    warnings: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.segments)

    def __len__(self):
        return len(self.segments)

    def kinds(self):
        return [s.kind for s in self.segments]

    def names(self):
        return [s.marker.name for s in self.segments]

    def of_kind(self, kind):
        return [s for s in self.segments if s.kind is kind]

    def app_payloads(self, n):
        return [s.payload for s in self.segments
                if s.kind is MarkerKind.APP and s.marker.index == n]

    def exif_payload(self):
        for payload in self.app_payloads(1):
            if payload.startswith(b"Exif\x00"):
                return payload
        return None

    def frame(self):
        """First SOFn header, or None."""
        for seg in self.segments:
            low = seg.marker.code & 0xFF
            if seg.marker.code >> 8 == 0xFF and 0xC0 <= low <= 0xCF and low not in (0xC4, 0xC8, 0xCC):
                return parse_frame_header(seg)
        return None

    @property
    def coding(self):
        """'baseline', 'extended', 'progressive', 'lossless', 'hierarchical',
        'arithmetic' or 'unknown' (no frame header)."""
        codes = {s.marker.code for s in self.segments}
        if DAC in codes or any(0xFFC9 <= c <= 0xFFCF and c != 0xFFCC for c in codes):
            return "arithmetic"
        for code, name in ((SOF0, "baseline"), (0xFFC1, "extended"), (SOF2, "progressive"),
                           (0xFFC3, "lossless")):
            if code in codes:
                return name
        if any(c in codes for c in (0xFFC5, 0xFFC6, 0xFFC7)):
            return "hierarchical"
        return "unknown"

    def to_bytes(self):
        return b"".join(s.to_bytes() for s in self.segments) + self.trailer


def _entropy_end(data, pos):
    """Offset of the first real marker at or after pos (len(data) if none)."""
    n = len(data)
    while True:
        idx = data.find(b"\xff", pos)
        if idx < 0 or idx + 1 >= n:
            return n
        nxt = data[idx + 1]
        if nxt == 0x00 or 0xD0 <= nxt <= 0xD7:
            pos = idx + 2
            continue
        return idx


def parse_segments(data):
    """Split a JPEG stream into its segments.

    Entropy-coded data after SOS (stuffed bytes and RST markers included) is
    attached verbatim to the SOS segment.  Bytes after EOI become the trailer.
    A stream that ends without EOI still parses, with ``missing_eoi`` set.
    """
    data = bytes(data)
    n = len(data)
    if n < 2 or data[0] != 0xFF or data[1] != 0xD8:
        raise MissingSOI("stream does not start with FFD8")
    result = JpegSegmentList(segments=[Segment(Marker(SOI), 0)])
    pos = 2
    while pos < n:
        start = pos
        if data[pos] != 0xFF:
            raise MalformedSegment(f"expected a marker at offset {pos}, found 0x{data[pos]:02X}")
        while pos + 1 < n and data[pos + 1] == 0xFF:
            pos += 1
        if pos + 1 >= n:
            result.warnings.append(f"stream ends inside a marker at offset {start}")
            result.trailer_offset = start
            result.trailer = data[start:]
            result.missing_eoi = True
            return result
        low = data[pos + 1]
        if low == 0x00:
            raise MalformedSegment(f"stuffed byte outside entropy data at offset {pos}")
        marker = Marker(0xFF00 | low)
        offset = pos
        fill = pos - start
        pos += 2
        if marker.standalone:
            result.segments.append(Segment(marker, offset, fill=fill))
            if marker.code == EOI:
                if pos < n:
                    result.trailer_offset = pos
                    result.trailer = data[pos:]
                return result
            continue
        if pos + 2 > n:
            raise TruncatedSegment(f"{marker.name} at offset {offset} has no length field")
        length = (data[pos] << 8) | data[pos + 1]
        if length < 2:
            raise MalformedSegment(f"{marker.name} at offset {offset} declares length {length}")
        if pos + length > n:
            raise TruncatedSegment(
                f"{marker.name} at offset {offset} declares {length} bytes, {n - pos} remain")
        payload = data[pos + 2:pos + length]
        pos += length
        entropy = None
        if marker.code == SOS:
            end = _entropy_end(data, pos)
            entropy = data[pos:end]
            pos = end
        result.segments.append(Segment(marker, offset, payload, entropy, fill))
    result.missing_eoi = True
    result.warnings.append("stream ends without EOI")
    return result


def parse_frame_header(segment):
    p = segment.payload
    if len(p) < 6:
        raise MalformedSegment(f"{segment.marker.name} payload too short")
    precision, height, width, ncomp = struct.unpack(">BHHB", p[:6])
    if len(p) < 6 + 3 * ncomp:
        raise MalformedSegment(f"{segment.marker.name} lists {ncomp} components, payload too short")
    comps = []
    for i in range(ncomp):
        cid, hv, tq = p[6 + 3 * i:9 + 3 * i]
        comps.append(FrameComponent(cid, hv >> 4, hv & 15, tq))
    return FrameHeader(segment.marker, precision, height, width, tuple(comps))


# -- quantization tables -----------------------------------------------------

@dataclass(frozen=True)
class QuantTable:
    table_id: int
    precision: int  # bits per value: 8 or 16
    values_zigzag: tuple

    @property
    def values_natural(self):
        natural = [0] * 64
        for k, idx in enumerate(ZIGZAG):
            natural[idx] = self.values_zigzag[k]
        return tuple(natural)

    def rows(self):
        nat = self.values_natural
        return [list(nat[r * 8:r * 8 + 8]) for r in range(8)]


@dataclass(frozen=True)
class QuantTableSet:
    tables: dict
    source: str = "main"  # or "thumbnail"

    def __len__(self):
        return len(self.tables)

    def ids(self):
        return sorted(self.tables)


def parse_dqt_payload(payload):
    """Table records of one DQT payload, in order of appearance."""
    out = []
    pos = 0
    while pos < len(payload):
        pq, tq = payload[pos] >> 4, payload[pos] & 15
        if pq > 1 or tq > 3:
            raise MalformedDqt(f"bad precision/id byte 0x{payload[pos]:02X}")
        width = 2 if pq else 1
        end = pos + 1 + 64 * width
        if end > len(payload):
            raise MalformedDqt(f"table record at {pos} needs {1 + 64 * width} bytes, "
                               f"{len(payload) - pos} remain")
        body = payload[pos + 1:end]
        if width == 1:
            values = tuple(body)
        else:
            values = struct.unpack(">64H", body)
        if min(values) == 0:
            raise ZeroQuantValue(f"table {tq} contains a zero divisor")
        out.append(QuantTable(tq, 16 if pq else 8, values))
        pos = end
    return out


def extract_dqt(segments, source="main"):
    """All quantization tables of a parsed stream; a redefined id replaces the earlier one."""
    tables = {}
    found = False
    for seg in segments:
        if seg.kind is MarkerKind.DQT:
            found = True
            for table in parse_dqt_payload(seg.payload):
                tables[table.table_id] = table
    if not found:
        raise NoDqtFound("stream has no DQT segment")
    return QuantTableSet(tables, source)


def canonical_dqt_bytes(qts):
    out = bytearray()
    for tid in sorted(qts.tables):
        table = qts.tables[tid]
        out.append(tid)
        if table.precision == 16:
            out += struct.pack(">64H", *table.values_zigzag)
        else:
            out += bytes(table.values_zigzag)
    return bytes(out)


def dqt_fingerprint(qts):
    """Lowercase hex MD5 over the id-sorted, zigzag-order table serialization."""
    if not qts.tables:
        raise ValueError("empty quantization table set")
    return hashlib.md5(canonical_dqt_bytes(qts)).hexdigest()


def sniff_format(head):
    if head.startswith(JPEG_MAGIC):
        return "JPEG"
    if head.startswith(b"\x89PNG\r\n\x1a\n"):
        return "PNG"
    return None
