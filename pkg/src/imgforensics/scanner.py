"""Artifact scanner over a mounted Android extraction (a plain directory tree).

Per-app knowledge (packages, probe paths, artifact rules, log grammars) is
data in ``data/profiles.json``.  The scanner only reads: files are opened
read-only, with O_NOATIME where the platform allows, and symlinks are never
followed.
"""

import json
import os
import posixpath
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from importlib import resources

from .errors import InvalidProfile, RootNotFound
from .evidence import collect_stage1
from .segments import sniff_format

ARTIFACT_KINDS = ("EditedImage", "Mask", "OriginalImage", "EditLog", "Cache")
MATRIX_COLUMNS = {
    "edited_image": "EditedImage",
    "manipulated_region": "Mask",
    "original_image": "OriginalImage",
    "edit_logs": "EditLog",
    "image_caching": "Cache",
}
NOT_EVALUATED = ("account_info", "installation_time", "recent_usage_time")
CONTENT_RULES = ("jpeg-signature", "png-signature", "image", "any")
MAX_READ = 64 * 1024 * 1024
_EPOCH = datetime(1970, 1, 1)
_PLACEHOLDER = re.compile(r"\{([^}]*)\}")


@dataclass(frozen=True)
class ArtifactRule:
    kind: str
    path: str  # glob template
    content: str
    confidence: str = "normal"  # or "low"


@dataclass(frozen=True)
class LogGrammar:
    name: str
    pattern: re.Pattern
    timestamps: dict  # group name -> strptime format or "epoch_ms"


@dataclass(frozen=True)
class PackageProfile:
    package_name: str
    editor_name: str
    probe_paths: tuple
    artifact_rules: tuple
    cache_paths: tuple

    def expand(self, template):
        return template.replace("{package_name}", self.package_name)


@dataclass(frozen=True)
class ProfileSet:
    profiles: tuple
    log_grammars: dict


@dataclass
class ArtifactFinding:
    package_name: str
    artifact_kind: str
    path: str  # relative to the extraction root, "/"-separated
    detected_format: str  # JPEG, PNG, text, unknown
    recovered_extension: str | None = None
    timestamps: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    fields: dict = field(default_factory=dict)
    confidence: str = "normal"
    supports: bool = True  # counts toward the matrix cell

    def sort_key(self):
        return (self.package_name, self.path, self.artifact_kind, self.fields.get("line", 0))

    def to_dict(self):
        return {"package": self.package_name, "kind": self.artifact_kind, "path": self.path,
                "format": self.detected_format, "recovered_extension": self.recovered_extension,
                "timestamps": dict(self.timestamps), "notes": list(self.notes),
                "fields": dict(self.fields), "confidence": self.confidence,
                "supports": self.supports}


@dataclass
class PackageHit:
    profile: PackageProfile
    locations: list  # probe paths that exist


@dataclass
class ExtractionReport:
    root: str
    packages: list = field(default_factory=list)  # PackageHit
    matrix: dict = field(default_factory=dict)  # package -> column -> cell value
    findings: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)

    def present(self, package, column):
        return self.matrix[package][column].startswith("present")

    def to_dict(self):
        return {
            "root": self.root,
            "packages": [{"package": h.profile.package_name, "editor": h.profile.editor_name,
                          "locations": list(h.locations)} for h in self.packages],
            "matrix": self.matrix,
            "findings": [f.to_dict() for f in self.findings],
            "diagnostics": list(self.diagnostics),
        }


# -- profiles ------------------------------------------------------------------------

def _check_template(template, where):
    bad = [p for p in _PLACEHOLDER.findall(template) if p != "package_name"]
    if bad or template.startswith("/") or ".." in template.split("/"):
        raise InvalidProfile(f"{where}: bad path template {template!r}")
    return template


def profiles_from_doc(doc):
    if not isinstance(doc, dict) or doc.get("version") != 1:
        raise InvalidProfile("profile file must be {'version': 1, ...}")
    grammars = {}
    for name, g in (doc.get("log_grammars") or {}).items():
        try:
            grammars[name] = LogGrammar(name, re.compile(g["pattern"]), dict(g.get("timestamps", {})))
        except (KeyError, TypeError, re.error) as exc:
            raise InvalidProfile(f"log grammar {name!r}: {exc}") from None
    probes = tuple(doc.get("default_probe_paths", ()))
    caches = tuple(doc.get("default_cache_paths", ()))
    profiles = []
    for raw in doc.get("profiles", ()):
        try:
            pkg, editor = raw["package_name"], raw["editor_name"]
            rules = []
            for r in raw.get("artifact_rules", ()):
                rule = ArtifactRule(r["kind"], r["path"], r["content"], r.get("confidence", "normal"))
                if rule.kind not in ARTIFACT_KINDS:
                    raise InvalidProfile(f"{pkg}: unknown artifact kind {rule.kind!r}")
                if rule.content.startswith("log:"):
                    if rule.content[4:] not in grammars:
                        raise InvalidProfile(f"{pkg}: unknown log grammar {rule.content[4:]!r}")
                elif rule.content not in CONTENT_RULES:
                    raise InvalidProfile(f"{pkg}: unknown content rule {rule.content!r}")
                _check_template(rule.path, pkg)
                rules.append(rule)
        except (KeyError, TypeError) as exc:
            raise InvalidProfile(f"profile entry missing field {exc}") from None
        if not pkg:
            raise InvalidProfile("package_name must be non-empty")
        profiles.append(PackageProfile(
            pkg, editor,
            tuple(_check_template(t, pkg) for t in probes + tuple(raw.get("extra_probe_paths", ()))),
            tuple(rules),
            tuple(_check_template(t, pkg) for t in caches + tuple(raw.get("cache_paths", ())))))
    return ProfileSet(tuple(profiles), grammars)


def load_profiles(path=None):
    if path is None:
        text = resources.files("imgforensics").joinpath("data/profiles.json").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return profiles_from_doc(json.loads(text))


_builtin = None


def builtin_profiles():
    global _builtin
    if _builtin is None:
        _builtin = load_profiles()
    return _builtin


# -- filesystem helpers ------------------------------------------------------------------

def glob_to_regex(pattern):
    """Path glob: ``*`` and ``?`` stay within one component, ``**`` spans any depth."""
    parts = pattern.split("/")
    out = []
    for i, part in enumerate(parts):
        last = i == len(parts) - 1
        if part == "**":
            out.append("(?:[^/]+/)*[^/]+" if last else "(?:[^/]+/)*")
            continue
        seg = "".join("[^/]*" if ch == "*" else "[^/]" if ch == "?" else re.escape(ch) for ch in part)
        out.append(seg if last else seg + "/")
    return re.compile("^" + "".join(out) + "$")


def _static_prefix(pattern):
    prefix = []
    for part in pattern.split("/")[:-1]:
        if any(ch in part for ch in "*?["):
            break
        prefix.append(part)
    return "/".join(prefix)


def _abs(root, rel):
    return os.path.join(root, *rel.split("/")) if rel else root


def _is_real_dir(path):
    return os.path.isdir(path) and not os.path.islink(path)


def _walk_files(root, start_rel, diagnostics):
    """Relative paths of regular files under start_rel; symlinks are reported, not followed."""
    start = _abs(root, start_rel)
    if not _is_real_dir(start):
        return []
    found = []
    for dirpath, dirnames, filenames in os.walk(start, followlinks=False):
        rel_dir = os.path.relpath(dirpath, root).replace(os.sep, "/")
        prefix = "" if rel_dir == "." else rel_dir + "/"
        for d in list(dirnames):
            if os.path.islink(os.path.join(dirpath, d)):
                diagnostics.append(f"{prefix}{d}: symlinked directory not followed")
                dirnames.remove(d)
        dirnames.sort()
        for name in sorted(filenames):
            full = os.path.join(dirpath, name)
            if os.path.islink(full):
                diagnostics.append(f"{prefix}{name}: symlink not followed")
            elif os.path.isfile(full):
                found.append(prefix + name)
    return found


def _read(path, limit=MAX_READ):
    flags = os.O_RDONLY | getattr(os, "O_BINARY", 0)
    noatime = getattr(os, "O_NOATIME", 0)
    try:
        fd = os.open(path, flags | noatime | getattr(os, "O_NOFOLLOW", 0))
    except PermissionError:
        # O_NOATIME needs file ownership; fall back to a plain read-only open
        fd = os.open(path, flags | getattr(os, "O_NOFOLLOW", 0))
    with os.fdopen(fd, "rb") as fh:
        return fh.read(limit)


def _timestamps(path):
    st = os.lstat(path)
    iso = lambda t: datetime.fromtimestamp(t, timezone.utc).isoformat()  # noqa: E731
    return {"modified": iso(st.st_mtime), "status_changed": iso(st.st_ctime), "size": st.st_size}


def sniff_content(data):
    fmt = sniff_format(data[:8])
    if fmt is not None:
        return fmt
    head = data[:512]
    if not head:
        return "unknown"
    if b"\x00" in head:
        return "unknown"
    try:
        head.decode("utf-8")
    except UnicodeDecodeError as exc:
        # a multi-byte character cut at the 512-byte boundary is still text
        if exc.start < len(head) - 3:
            return "unknown"
    return "text"


def _recovered_extension(rel, fmt):
    ext = posixpath.splitext(rel)[1].lower()
    if fmt == "JPEG" and ext not in (".jpg", ".jpeg"):
        return ".jpg"
    if fmt == "PNG" and ext != ".png":
        return ".png"
    return None


def _content_ok(rule, fmt):
    return {"jpeg-signature": fmt == "JPEG", "png-signature": fmt == "PNG",
            "image": fmt in ("JPEG", "PNG"), "any": True}[rule]


def _stage1_notes(finding, data, db, matcher):
    ev = collect_stage1(data, posixpath.basename(finding.path), db, matcher)
    sig = ev.exif_signature
    if sig is not None:
        finding.notes.append(f"Exif Software={sig.software!r} Artist={sig.artist!r}")
    if ev.dqt_fingerprint:
        finding.notes.append(f"DQT md5 {ev.dqt_fingerprint}")
    finding.fields["exif_software"] = None if sig is None else sig.software
    finding.fields["exif_artist"] = None if sig is None else sig.artist
    finding.fields["dqt_fingerprint"] = ev.dqt_fingerprint
    if db is not None:
        cands = ev.lookup.candidates
        finding.fields["stage1_candidates"] = [c.to_dict() for c in cands]
        if cands:
            finding.notes.append("Reference DB candidates: " + ", ".join(
                f"{c.editor_name} {c.editor_version} ({c.evidence})" for c in cands))
        else:
            finding.notes.append("Reference DB: no candidates")


# -- operations ---------------------------------------------------------------------------

def _check_root(root):
    root = os.fspath(root)
    if not os.path.isdir(root):
        raise RootNotFound(f"extraction root {root!r} is not a directory")
    return root


def detect_packages(root, profiles=None):
    """Profiles whose private data or external storage directory exists."""
    root = _check_root(root)
    profiles = profiles or builtin_profiles()
    hits = []
    for prof in profiles.profiles:
        locations = [prof.expand(t) for t in prof.probe_paths if _is_real_dir(_abs(root, prof.expand(t)))]
        if locations:
            hits.append(PackageHit(prof, locations))
    return hits


def carve_cache(root, profile, db=None, matcher=None, diagnostics=None):
    """Signature-sniff ``*.0`` and extensionless files in the profile's cache dirs."""
    root = os.fspath(root)
    diagnostics = [] if diagnostics is None else diagnostics
    out = []
    for template in profile.cache_paths:
        rel_dir = profile.expand(template)
        path = _abs(root, rel_dir)
        if not _is_real_dir(path):
            continue
        for name in sorted(os.listdir(path)):
            full = os.path.join(path, name)
            rel = f"{rel_dir}/{name}"
            if os.path.islink(full):
                diagnostics.append(f"{rel}: symlink not followed")
                continue
            if not os.path.isfile(full) or not (name.endswith(".0") or "." not in name):
                continue
            try:
                data = _read(full)
            except OSError as exc:
                diagnostics.append(f"{rel}: unreadable: {exc}")
                continue
            fmt = sniff_content(data)
            image = fmt in ("JPEG", "PNG")
            f = ArtifactFinding(profile.package_name, "Cache", rel, fmt,
                                _recovered_extension(rel, fmt) if image else None,
                                _timestamps(full), supports=image)
            if image:
                f.notes.append(f"carved {fmt} cache entry")
                _stage1_notes(f, data, db, matcher)
            else:
                f.notes.append("non-image cache file")
            out.append(f)
    return out


def recover_artifacts(root, profile, db=None, matcher=None, diagnostics=None):
    """Apply the profile's image rules (edited, mask, original)."""
    root = os.fspath(root)
    diagnostics = [] if diagnostics is None else diagnostics
    out = []
    for rule in profile.artifact_rules:
        if rule.content.startswith("log:"):
            continue
        template = profile.expand(rule.path)
        rx = glob_to_regex(template)
        for rel in _walk_files(root, _static_prefix(template), diagnostics):
            if not rx.match(rel):
                continue
            full = _abs(root, rel)
            try:
                data = _read(full)
            except OSError as exc:
                diagnostics.append(f"{rel}: unreadable: {exc}")
                continue
            fmt = sniff_content(data)
            if not _content_ok(rule.content, fmt):
                diagnostics.append(f"{rel}: matches a {rule.kind} path but content is {fmt}")
                continue
            f = ArtifactFinding(profile.package_name, rule.kind, rel, fmt,
                                _recovered_extension(rel, fmt), _timestamps(full),
                                confidence=rule.confidence)
            if rule.confidence == "low":
                f.notes.append("low-confidence location; verify manually")
            if fmt in ("JPEG", "PNG"):
                _stage1_notes(f, data, db, matcher)
            out.append(f)
    return out


def _parse_time(value, fmt):
    if fmt == "epoch_ms":
        return _EPOCH + timedelta(milliseconds=int(value))
    return datetime.strptime(value, fmt)


def parse_edit_logs(root, profile, profiles=None, diagnostics=None):
    """One EditLog finding per record that matches the profile's grammar."""
    root = os.fspath(root)
    grammars = (profiles or builtin_profiles()).log_grammars
    diagnostics = [] if diagnostics is None else diagnostics
    out = []
    for rule in profile.artifact_rules:
        if not rule.content.startswith("log:"):
            continue
        grammar = grammars[rule.content[4:]]
        template = profile.expand(rule.path)
        rx = glob_to_regex(template)
        for rel in _walk_files(root, _static_prefix(template), diagnostics):
            if not rx.match(rel):
                continue
            full = _abs(root, rel)
            try:
                text = _read(full).decode("utf-8", errors="replace")
            except OSError as exc:
                diagnostics.append(f"{rel}: unreadable: {exc}")
                continue
            if not text.strip():
                diagnostics.append(f"{rel}: empty log")
                continue
            stamps = _timestamps(full)
            for lineno, line in enumerate(text.splitlines(), start=1):
                if not line.strip():
                    continue
                m = grammar.pattern.match(line)
                if not m:
                    diagnostics.append(f"{rel}:{lineno}: line does not match grammar {grammar.name}")
                    continue
                fields = {k: v for k, v in m.groupdict().items() if v is not None}
                try:
                    for key, fmt in grammar.timestamps.items():
                        if key in fields:
                            fields[key] = _parse_time(fields[key], fmt).isoformat()
                except (ValueError, OverflowError) as exc:
                    diagnostics.append(f"{rel}:{lineno}: bad timestamp: {exc}")
                    continue
                for key in [k for k in fields if k.endswith("_path")]:
                    fields.setdefault(key[:-5] + "_filename", posixpath.basename(fields[key]))
                fields["line"] = lineno
                fields["grammar"] = grammar.name
                notes = [f"{k}={fields[k]}" for k in ("original_filename", "edited_filename",
                                                      "start_time", "save_time") if k in fields]
                out.append(ArtifactFinding(profile.package_name, "EditLog", rel, "text", None,
                                           stamps, notes, fields, rule.confidence))
    return out


def _matrix_row(findings):
    row = {}
    for col, kind in MATRIX_COLUMNS.items():
        support = [f for f in findings if f.artifact_kind == kind and f.supports]
        if not support:
            row[col] = "absent"
        elif all(f.confidence == "low" for f in support):
            row[col] = "present-low-confidence"
        else:
            row[col] = "present"
    for col in NOT_EVALUATED:
        row[col] = "not evaluated"
    return row


def _scan_package(root, hit, db, matcher, profiles):
    diags = []
    found = carve_cache(root, hit.profile, db, matcher, diags)
    found += recover_artifacts(root, hit.profile, db, matcher, diags)
    found += parse_edit_logs(root, hit.profile, profiles, diags)
    return found, diags


def build_extraction_report(root, db=None, profiles=None, matcher=None, max_workers=1):
    """Detect, carve, recover and parse logs for every profile; fill the matrix."""
    root = _check_root(root)
    profiles = profiles or builtin_profiles()
    report = ExtractionReport(root)
    report.packages = detect_packages(root, profiles)
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            results = list(pool.map(lambda h: _scan_package(root, h, db, matcher, profiles),
                                    report.packages))
    else:
        results = [_scan_package(root, h, db, matcher, profiles) for h in report.packages]
    for hit, (found, diags) in zip(report.packages, results):
        report.findings.extend(found)
        report.diagnostics.extend(diags)
        report.matrix[hit.profile.package_name] = _matrix_row(found)
    report.findings.sort(key=ArtifactFinding.sort_key)
    report.diagnostics = sorted(set(report.diagnostics))
    return report
