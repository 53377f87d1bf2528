"""Reference DB: editors, their Exif/DQT evidence and filename signatures.

Storage is a single sqlite file.  The interchange format is a JSON-lines
snapshot (see docs/formats.md): a header line, then one record per row.
"""

import hashlib
import json
import os
import re
import sqlite3
import threading
import urllib.parse
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .errors import (ExifError, JpegError, MalformedSnapshot, SchemaVersionMismatch,
                     UnparseableImage)
from .exif import extract_editor_signature, parse_exif
from .filename_sig import default_matcher, match_filename
from .segments import dqt_fingerprint, extract_dqt, parse_segments, sniff_format

SNAPSHOT_FORMAT = "imgforensics-refdb"
SCHEMA_VERSION = 1

_FP_RE = re.compile(r"^[0-9a-f]{32}$")

_SCHEMA = """
CREATE TABLE IF NOT EXISTS image_editors (
    editor_id INTEGER PRIMARY KEY,
    name TEXT NOT NULL,
    version TEXT NOT NULL,
    UNIQUE (name, version)
);
CREATE TABLE IF NOT EXISTS parsed_exif_dqt (
    entry_id INTEGER PRIMARY KEY,
    editor_id INTEGER NOT NULL REFERENCES image_editors (editor_id),
    exif_software TEXT,
    exif_artist TEXT,
    dqt_fingerprint TEXT,
    sample_count INTEGER NOT NULL CHECK (sample_count >= 1),
    first_seen TEXT NOT NULL,
    last_seen TEXT NOT NULL,
    CHECK (exif_software IS NOT NULL OR exif_artist IS NOT NULL OR dqt_fingerprint IS NOT NULL)
);
CREATE TABLE IF NOT EXISTS editor_signature (
    signature_id INTEGER PRIMARY KEY,
    editor_id INTEGER NOT NULL REFERENCES image_editors (editor_id),
    filename_signature TEXT NOT NULL CHECK (length(filename_signature) > 0),
    pattern_name TEXT NOT NULL,
    UNIQUE (editor_id, filename_signature, pattern_name)
);
CREATE INDEX IF NOT EXISTS ix_dqt ON parsed_exif_dqt (dqt_fingerprint);
CREATE INDEX IF NOT EXISTS ix_software ON parsed_exif_dqt (exif_software);
CREATE INDEX IF NOT EXISTS ix_artist ON parsed_exif_dqt (exif_artist);
"""

TABLE_ORDER = ("image_editors", "parsed_exif_dqt", "editor_signature")
_COLUMNS = {
    "image_editors": ("editor_id", "name", "version"),
    "parsed_exif_dqt": ("entry_id", "editor_id", "exif_software", "exif_artist",
                        "dqt_fingerprint", "sample_count", "first_seen", "last_seen"),
    "editor_signature": ("signature_id", "editor_id", "filename_signature", "pattern_name"),
}

# candidate ordering: lower rank first
_RANK = {("exif", None): 0, ("filename", "signature"): 1, ("dqt", False): 2,
         ("dqt", True): 3, ("filename", "structural"): 4}


@dataclass(frozen=True)
class ImageEditor:
    editor_id: int
    name: str
    version: str


@dataclass(frozen=True)
class ExifDqtEntry:
    entry_id: int
    editor_id: int
    exif_software: str | None
    exif_artist: str | None
    dqt_fingerprint: str | None
    sample_count: int
    first_seen: str
    last_seen: str


@dataclass(frozen=True)
class EditorSignatureEntry:
    signature_id: int
    editor_id: int
    filename_signature: str
    pattern_name: str


@dataclass(frozen=True)
class Candidate:
    editor_name: str
    editor_version: str
    evidence: str  # "exif", "dqt" or "filename"
    sample_count: int
    shared: bool = False
    strength: str | None = None  # filename evidence only
    detail: str = ""

    @property
    def rank(self):
        if self.evidence == "exif":
            return _RANK[("exif", None)]
        if self.evidence == "dqt":
            return _RANK[("dqt", self.shared)]
        return _RANK[("filename", self.strength)]

    def to_dict(self):
        return {"editor": self.editor_name, "version": self.editor_version,
                "evidence": self.evidence, "sample_count": self.sample_count,
                "shared": self.shared, "strength": self.strength, "detail": self.detail}

    @classmethod
    def from_dict(cls, d):
        return cls(d["editor"], d["version"], d["evidence"], d["sample_count"],
                   d["shared"], d["strength"], d["detail"])


@dataclass
class LookupResult:
    candidates: list = field(default_factory=list)

    def __bool__(self):
        return bool(self.candidates)

    def editors(self):
        seen = []
        for c in self.candidates:
            if c.editor_name not in seen:
                seen.append(c.editor_name)
        return seen


@dataclass
class IngestionRecord:
    editor_id: int
    exif_dqt_entry_id: int | None
    signature_ids: list
    exif_software: str | None = None
    exif_artist: str | None = None
    dqt_fingerprint: str | None = None
    diagnostics: list = field(default_factory=list)


def parse_label(label):
    """'Name@Version' -> (name, version); a tuple passes through."""
    if isinstance(label, tuple):
        return label
    name, _, version = label.partition("@")
    if not name:
        raise ValueError(f"label {label!r} has no editor name")
    return name, version


def _now():
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


class ReferenceDb:
    """Single-writer, multi-reader store; every call holds an internal lock."""

    def __init__(self, path=":memory:", readonly=False):
        self.path = str(path)
        self.readonly = readonly
        if readonly:
            uri = "file:" + urllib.parse.quote(os.path.abspath(self.path)) + "?mode=ro"
            self._conn = sqlite3.connect(uri, uri=True, check_same_thread=False)
        else:
            self._conn = sqlite3.connect(self.path, check_same_thread=False)
            self._conn.executescript(_SCHEMA)
        self._conn.execute("PRAGMA foreign_keys = ON")
        self._lock = threading.RLock()

    def close(self):
        self._conn.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- rows ----------------------------------------------------------------

    def _select(self, table, cls):
        cols = _COLUMNS[table]
        with self._lock:
            rows = self._conn.execute(f"SELECT {', '.join(cols)} FROM {table} ORDER BY {cols[0]}").fetchall()
        return [cls(*r) for r in rows]

    def editors(self):
        return self._select("image_editors", ImageEditor)

    def exif_dqt_entries(self):
        return self._select("parsed_exif_dqt", ExifDqtEntry)

    def signature_entries(self):
        return self._select("editor_signature", EditorSignatureEntry)

    def rows(self):
        """All rows of all tables, for equality checks."""
        return {"image_editors": self.editors(), "parsed_exif_dqt": self.exif_dqt_entries(),
                "editor_signature": self.signature_entries()}

    def ensure_editor(self, name, version=""):
        with self._lock, self._conn:
            row = self._conn.execute(
                "SELECT editor_id FROM image_editors WHERE name = ? AND version = ?",
                (name, version)).fetchone()
            if row:
                return row[0]
            return self._conn.execute(
                "INSERT INTO image_editors (name, version) VALUES (?, ?)", (name, version)).lastrowid

    def upsert_exif_dqt(self, editor_id, software, artist, fingerprint, when=None):
        if software is None and artist is None and fingerprint is None:
            raise ValueError("an Exif/DQT entry needs at least one of software, artist, fingerprint")
        if fingerprint is not None and not _FP_RE.match(fingerprint):
            raise ValueError(f"not a lowercase MD5 hex digest: {fingerprint!r}")
        when = when or _now()
        with self._lock, self._conn:
            row = self._conn.execute(
                "SELECT entry_id FROM parsed_exif_dqt WHERE editor_id = ? AND exif_software IS ? "
                "AND exif_artist IS ? AND dqt_fingerprint IS ?",
                (editor_id, software, artist, fingerprint)).fetchone()
            if row:
                self._conn.execute(
                    "UPDATE parsed_exif_dqt SET sample_count = sample_count + 1, last_seen = ? "
                    "WHERE entry_id = ?", (when, row[0]))
                return row[0]
            return self._conn.execute(
                "INSERT INTO parsed_exif_dqt (editor_id, exif_software, exif_artist, dqt_fingerprint, "
                "sample_count, first_seen, last_seen) VALUES (?, ?, ?, ?, 1, ?, ?)",
                (editor_id, software, artist, fingerprint, when, when)).lastrowid

    def add_signature(self, editor_id, signature, pattern_name):
        if not signature:
            raise ValueError("filename signature must be non-empty")
        with self._lock, self._conn:
            row = self._conn.execute(
                "SELECT signature_id FROM editor_signature WHERE editor_id = ? "
                "AND filename_signature = ? AND pattern_name = ?",
                (editor_id, signature, pattern_name)).fetchone()
            if row:
                return row[0]
            return self._conn.execute(
                "INSERT INTO editor_signature (editor_id, filename_signature, pattern_name) "
                "VALUES (?, ?, ?)", (editor_id, signature, pattern_name)).lastrowid

    # -- ingestion / lookup --------------------------------------------------

    def ingest(self, data, filename, label, matcher=None, when=None):
        return ingest_labeled_image(data, filename, label, self, matcher=matcher, when=when)

    def lookup(self, exif_sig=None, dqt_fp=None, filename_matches=()):
        return lookup(exif_sig, dqt_fp, filename_matches, self)

    # -- snapshots -----------------------------------------------------------

    def export_snapshot(self):
        return export_db(self)

    def digest(self):
        """Short content hash of the snapshot, for report provenance."""
        return hashlib.sha256(self.export_snapshot().encode("utf-8")).hexdigest()[:16]


def ingest_labeled_image(image, filename, label, db, matcher=None, when=None):
    """Parse one labeled sample and upsert its evidence rows."""
    name, version = parse_label(label)
    fmt = sniff_format(bytes(image[:8]))
    if fmt is None:
        raise UnparseableImage(f"{filename}: neither a JPEG nor a PNG signature")
    with db._lock:
        editor_id = db.ensure_editor(name, version)
        rec = IngestionRecord(editor_id, None, [])
        if fmt == "JPEG":
            _jpeg_evidence(image, rec)
            if rec.exif_software or rec.exif_artist or rec.dqt_fingerprint:
                rec.exif_dqt_entry_id = db.upsert_exif_dqt(
                    editor_id, rec.exif_software, rec.exif_artist, rec.dqt_fingerprint, when)
        for m in match_filename(filename, matcher or default_matcher()):
            if m.editor_name == name:
                rec.signature_ids.append(db.add_signature(editor_id, m.signature, m.pattern_name))
    return rec


def _jpeg_evidence(data, rec):
    try:
        segs = parse_segments(data)
    except JpegError as exc:
        rec.diagnostics.append(f"segments: {type(exc).__name__}: {exc}")
        return
    payload = segs.exif_payload()
    if payload is not None:
        try:
            sig = extract_editor_signature(parse_exif(payload))
        except ExifError as exc:
            rec.diagnostics.append(f"exif: {type(exc).__name__}: {exc}")
        else:
            if sig is not None:
                rec.exif_software, rec.exif_artist = sig.software, sig.artist
    try:
        rec.dqt_fingerprint = dqt_fingerprint(extract_dqt(segs))
    except JpegError as exc:
        rec.diagnostics.append(f"dqt: {type(exc).__name__}: {exc}")


def lookup(exif_sig, dqt_fp, filename_matches, db):
    """Union of Exif, DQT and filename candidates, strongest evidence first."""
    found = {}

    def add(editor_id, name, version, evidence, count, shared=False, strength=None, detail=""):
        key = (editor_id, evidence, strength)
        prev = found.get(key)
        if prev is not None:
            count += prev.sample_count
            detail = prev.detail
        found[key] = Candidate(name, version, evidence, count, shared, strength, detail)

    conn = db._conn
    with db._lock:
        if exif_sig is not None and (exif_sig.software is not None or exif_sig.artist is not None):
            rows = conn.execute(
                "SELECT e.editor_id, e.name, e.version, p.exif_software, p.exif_artist, p.sample_count "
                "FROM parsed_exif_dqt p JOIN image_editors e USING (editor_id) "
                "WHERE (p.exif_software IS NOT NULL AND p.exif_software = ?) "
                "OR (p.exif_artist IS NOT NULL AND p.exif_artist = ?) ORDER BY p.entry_id",
                (exif_sig.software, exif_sig.artist)).fetchall()
            for eid, name, version, sw, artist, count in rows:
                bits = []
                if sw is not None and sw == exif_sig.software:
                    bits.append(f"Software={sw}")
                if artist is not None and artist == exif_sig.artist:
                    bits.append(f"Artist={artist}")
                add(eid, name, version, "exif", count, detail=", ".join(bits))
        if dqt_fp is not None:
            rows = conn.execute(
                "SELECT e.editor_id, e.name, e.version, p.sample_count "
                "FROM parsed_exif_dqt p JOIN image_editors e USING (editor_id) "
                "WHERE p.dqt_fingerprint = ? ORDER BY p.entry_id", (dqt_fp,)).fetchall()
            shared = len({r[1] for r in rows}) > 1
            for eid, name, version, count in rows:
                add(eid, name, version, "dqt", count, shared=shared, detail=f"DQT md5 {dqt_fp}")
        for m in filename_matches:
            rows = conn.execute(
                "SELECT e.editor_id, e.name, e.version, "
                "(SELECT COUNT(*) FROM editor_signature s WHERE s.editor_id = e.editor_id "
                " AND s.pattern_name = ?) FROM image_editors e WHERE e.name = ? ORDER BY e.editor_id",
                (m.pattern_name, m.editor_name)).fetchall()
            for eid, name, version, count in rows:
                add(eid, name, version, "filename", count, strength=m.strength,
                    detail=f"filename pattern {m.pattern_name} ({m.signature})")
    cands = sorted(found.values(),
                   key=lambda c: (c.rank, -c.sample_count, c.editor_name, c.editor_version))
    return LookupResult(cands)


def export_db(db):
    """Serialize every row as a JSON-lines snapshot (header line first)."""
    lines = [json.dumps({"format": SNAPSHOT_FORMAT, "schema_version": SCHEMA_VERSION},
                        sort_keys=True)]
    rows = db.rows()
    for table in TABLE_ORDER:
        for row in rows[table]:
            rec = {"table": table}
            rec.update({col: getattr(row, col) for col in _COLUMNS[table]})
            lines.append(json.dumps(rec, sort_keys=True, ensure_ascii=False))
    return "\n".join(lines) + "\n"


def import_db(snapshot, path=":memory:"):
    """Rebuild a database from a snapshot produced by export_db."""
    lines = [ln for ln in snapshot.splitlines() if ln.strip()]
    if not lines:
        raise MalformedSnapshot("snapshot is empty")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise MalformedSnapshot(f"header is not JSON: {exc}") from None
    if not isinstance(header, dict) or header.get("format") != SNAPSHOT_FORMAT:
        raise MalformedSnapshot("missing snapshot header")
    if header.get("schema_version") != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"snapshot schema {header.get('schema_version')!r}, this build reads {SCHEMA_VERSION}")
    db = ReferenceDb(path)
    try:
        with db._conn:
            for lineno, line in enumerate(lines[1:], start=2):
                try:
                    rec = json.loads(line)
                    table = rec.pop("table")
                    cols = _COLUMNS[table]
                    if set(rec) != set(cols):
                        raise KeyError(f"columns {sorted(rec)}")
                    fp = rec.get("dqt_fingerprint")
                    if fp is not None and not _FP_RE.match(fp):
                        raise ValueError(f"bad fingerprint {fp!r}")
                    db._conn.execute(
                        f"INSERT INTO {table} ({', '.join(cols)}) VALUES ({', '.join('?' * len(cols))})",
                        [rec[c] for c in cols])
                except (json.JSONDecodeError, KeyError, TypeError, AttributeError, ValueError,
                        sqlite3.IntegrityError) as exc:
                    raise MalformedSnapshot(f"line {lineno}: {exc}") from None
    except MalformedSnapshot:
        db.close()
        raise
    return db
