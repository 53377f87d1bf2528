"""Stage-1 metadata evidence: Exif signature, DQT fingerprint, filename matches."""

from dataclasses import dataclass, field

from .errors import ExifError, JpegError
from .exif import extract_editor_signature, extract_thumbnail_dqt, parse_exif
from .filename_sig import default_matcher, match_filename
from .refdb import LookupResult, lookup
from .segments import dqt_fingerprint, extract_dqt, parse_segments, sniff_format


@dataclass
class Stage1Evidence:
    filename: str
    format: str | None = None
    coding: str | None = None
    segments: object = None  # JpegSegmentList when the structure parsed
    exif_signature: object = None  # EditorExifSignature
    exif_datetime: str | None = None
    dqt: object = None  # QuantTableSet
    dqt_fingerprint: str | None = None
    thumbnail_fingerprint: str | None = None
    filename_matches: list = field(default_factory=list)
    lookup: LookupResult = field(default_factory=LookupResult)
    diagnostics: list = field(default_factory=list)

    def to_dict(self):
        sig = self.exif_signature
        return {
            "format": self.format,
            "coding": self.coding,
            "exif": None if sig is None else {"software": sig.software, "artist": sig.artist},
            "exif_datetime": self.exif_datetime,
            "dqt_fingerprint": self.dqt_fingerprint,
            "dqt_tables": None if self.dqt is None else {
                str(tid): list(t.values_natural) for tid, t in sorted(self.dqt.tables.items())},
            "thumbnail_dqt_fingerprint": self.thumbnail_fingerprint,
            "filename_matches": [
                {"editor": m.editor_name, "pattern": m.pattern_name, "strength": m.strength,
                 "signature": m.signature,
                 "datetime": m.extracted_datetime.isoformat() if m.extracted_datetime else None,
                 "original_name": m.extracted_original_name}
                for m in self.filename_matches],
            "candidates": [c.to_dict() for c in self.lookup.candidates],
            "diagnostics": list(self.diagnostics),
        }


def _err(where, exc):
    return f"{where}: {type(exc).__name__}: {exc}"


def collect_stage1(data, filename, db=None, matcher=None):
    """Parse whatever metadata the bytes carry; never raises on bad content."""
    ev = Stage1Evidence(filename)
    ev.format = sniff_format(bytes(data[:8]))
    try:
        ev.filename_matches = match_filename(filename, matcher or default_matcher())
    except ValueError as exc:
        ev.diagnostics.append(_err("filename", exc))
    if ev.format == "JPEG":
        _jpeg(ev, data)
    elif ev.format is None:
        ev.diagnostics.append("content is neither JPEG nor PNG; filename evidence only")
    if db is not None:
        ev.lookup = lookup(ev.exif_signature, ev.dqt_fingerprint, ev.filename_matches, db)
    return ev


def _jpeg(ev, data):
    try:
        segs = parse_segments(data)
    except JpegError as exc:
        ev.diagnostics.append(_err("segments", exc))
        return
    ev.segments = segs
    ev.coding = segs.coding
    ev.diagnostics.extend(segs.warnings)
    payload = segs.exif_payload()
    if payload is not None:
        try:
            rec = parse_exif(payload)
        except ExifError as exc:
            ev.diagnostics.append(_err("exif", exc))
        else:
            ev.exif_signature = extract_editor_signature(rec)
            ev.exif_datetime = rec.datetime
            ev.diagnostics.extend(f"exif: {d}" for d in rec.diagnostics)
            thumb = extract_thumbnail_dqt(rec, ev.diagnostics)
            if thumb is not None and thumb.tables:
                # reported for the examiner, not looked up
                ev.thumbnail_fingerprint = dqt_fingerprint(thumb)
    try:
        ev.dqt = extract_dqt(segs)
        ev.dqt_fingerprint = dqt_fingerprint(ev.dqt)
    except JpegError as exc:
        ev.diagnostics.append(_err("dqt", exc))
