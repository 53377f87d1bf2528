"""Editor identification from image filenames.

A pattern is a token grammar (literals, datetime fields, original filename,
random number) followed by an extension set.  Patterns are data: the
built-in set lives in ``data/filename_patterns.json`` and can be replaced
with any file in the same format.

Datetime format codes: %Y year, %m month, %d day, %H hour, %M minute,
%S second, %L milliseconds (3 digits), %Q Unix epoch in milliseconds
(13 digits).  Any other character is matched literally.
"""

import json
import re
from dataclasses import dataclass
from datetime import datetime, timedelta
from importlib import resources

from .errors import InvalidPattern

_FIELD_RE = {
    "Y": r"\d{4}", "m": r"\d{2}", "d": r"\d{2}", "H": r"\d{2}",
    "M": r"\d{2}", "S": r"\d{2}", "L": r"\d{3}", "Q": r"\d{13}",
}
_EPOCH = datetime(1970, 1, 1)

TOKEN_KINDS = ("literal", "datetime", "original_name", "random_number")


@dataclass(frozen=True)
class Token:
    kind: str
    value: object = None  # literal text, or tuple of datetime formats


@dataclass(frozen=True)
class FilenamePattern:
    name: str
    editor_name: str
    grammar: tuple
    extensions: tuple
    signature_token: str | None = None

    def template(self):
        parts = []
        for tok in self.grammar:
            if tok.kind == "literal":
                parts.append(tok.value)
            elif tok.kind == "datetime":
                parts.append("{" + "|".join(tok.value) + "}")
            elif tok.kind == "original_name":
                parts.append("{original}")
            else:
                parts.append("{number}")
        return "".join(parts) + ".(" + "|".join(self.extensions) + ")"

    def to_dict(self):
        tokens = []
        for tok in self.grammar:
            if tok.kind == "literal":
                tokens.append({"literal": tok.value})
            elif tok.kind == "datetime":
                tokens.append({"datetime": list(tok.value)})
            else:
                tokens.append({tok.kind: True})
        return {"name": self.name, "editor": self.editor_name, "tokens": tokens,
                "signature_token": self.signature_token, "extensions": list(self.extensions)}


@dataclass(frozen=True)
class FilenameMatch:
    editor_name: str
    pattern_name: str
    strength: str  # "signature" or "structural"
    signature: str  # the signature token, or the pattern template for structural hits
    extracted_datetime: datetime | None = None
    extracted_original_name: str | None = None


def _format_regex(fmt, slot):
    out = []
    fields = []
    i = 0
    while i < len(fmt):
        ch = fmt[i]
        if ch == "%":
            if i + 1 >= len(fmt) or fmt[i + 1] not in _FIELD_RE:
                raise InvalidPattern(f"bad datetime code in {fmt!r}")
            code = fmt[i + 1]
            if code in fields:
                raise InvalidPattern(f"datetime code %{code} repeated in {fmt!r}")
            fields.append(code)
            out.append(f"(?P<dt{slot}_{code}>{_FIELD_RE[code]})")
            i += 2
        else:
            out.append(re.escape(ch))
            i += 1
    if "Q" in fields and len(fields) > 1:
        raise InvalidPattern(f"%Q cannot be combined with other fields in {fmt!r}")
    if not fields:
        raise InvalidPattern(f"datetime format {fmt!r} has no fields")
    return "".join(out), fields


def _parse_datetime(groups, slot, fields):
    get = lambda code: int(groups[f"dt{slot}_{code}"])  # noqa: E731
    if "Q" in fields:
        return _EPOCH + timedelta(milliseconds=get("Q"))
    return datetime(
        get("Y") if "Y" in fields else 1970,
        get("m") if "m" in fields else 1,
        get("d") if "d" in fields else 1,
        get("H") if "H" in fields else 0,
        get("M") if "M" in fields else 0,
        get("S") if "S" in fields else 0,
        get("L") * 1000 if "L" in fields else 0,
    )


def _token_from_def(raw):
    if isinstance(raw, Token):
        return raw
    if not isinstance(raw, dict) or len(raw) != 1:
        raise InvalidPattern(f"token must be a one-key mapping, got {raw!r}")
    ((kind, value),) = raw.items()
    if kind not in TOKEN_KINDS:
        raise InvalidPattern(f"unknown token kind {kind!r}")
    if kind == "literal":
        if not isinstance(value, str) or not value:
            raise InvalidPattern("literal token needs a non-empty string")
        return Token("literal", value)
    if kind == "datetime":
        formats = (value,) if isinstance(value, str) else tuple(value or ())
        if not formats:
            raise InvalidPattern("datetime token needs at least one format")
        return Token("datetime", formats)
    return Token(kind)


def pattern_from_def(d):
    if isinstance(d, FilenamePattern):
        return d
    try:
        editor = d["editor"]
        tokens = d["tokens"]
        extensions = d["extensions"]
    except (KeyError, TypeError) as exc:
        raise InvalidPattern(f"pattern definition missing field {exc}") from None
    grammar = tuple(_token_from_def(t) for t in tokens or ())
    name = d.get("name") or editor
    return FilenamePattern(name, editor, grammar, tuple(extensions or ()), d.get("signature_token"))


class FilenameMatcher:
    """Compiled, immutable set of patterns; tried in definition order."""

    def __init__(self, patterns):
        self.patterns = tuple(patterns)
        self._compiled = [(p, self._compile(p)) for p in self.patterns]

    @staticmethod
    def _compile(pattern):
        if not pattern.grammar:
            raise InvalidPattern(f"pattern {pattern.name!r} has an empty grammar")
        if not pattern.extensions:
            raise InvalidPattern(f"pattern {pattern.name!r} has no extensions")
        if pattern.signature_token is not None and not any(
                t.kind == "literal" and pattern.signature_token in t.value for t in pattern.grammar):
            raise InvalidPattern(
                f"signature token {pattern.signature_token!r} does not occur in a literal of {pattern.name!r}")
        # one regex per combination of datetime-format alternatives
        variants = [("", [])]
        for slot, tok in enumerate(pattern.grammar):
            if tok.kind == "literal":
                variants = [(rx + re.escape(tok.value), f) for rx, f in variants]
            elif tok.kind == "original_name":
                variants = [(rx + "(?P<orig>.+?)", f) for rx, f in variants]
            elif tok.kind == "random_number":
                variants = [(rx + r"\d+", f) for rx, f in variants]
            elif tok.kind == "datetime":
                expanded = []
                for fmt in tok.value:
                    frx, fields = _format_regex(fmt, slot)
                    expanded += [(rx + frx, f + [(slot, fields)]) for rx, f in variants]
                variants = expanded
            else:
                raise InvalidPattern(f"unknown token kind {tok.kind!r}")
        if sum(t.kind == "original_name" for t in pattern.grammar) > 1:
            raise InvalidPattern(f"pattern {pattern.name!r} has more than one original-name token")
        ext = "(?:" + "|".join(re.escape(e) for e in pattern.extensions) + ")"
        return [(re.compile("^" + rx + r"\." + ext + "$"), f) for rx, f in variants]

    def match(self, name):
        out = []
        for pattern, variants in self._compiled:
            for rx, dt_fields in variants:
                m = rx.match(name)
                if not m:
                    continue
                groups = m.groupdict()
                stamp = None
                try:
                    for slot, fields in dt_fields:
                        stamp = _parse_datetime(groups, slot, fields)
                except (ValueError, OverflowError):
                    continue
                strong = pattern.signature_token is not None
                out.append(FilenameMatch(
                    editor_name=pattern.editor_name,
                    pattern_name=pattern.name,
                    strength="signature" if strong else "structural",
                    signature=pattern.signature_token if strong else pattern.template(),
                    extracted_datetime=stamp,
                    extracted_original_name=groups.get("orig"),
                ))
                break
        return out


def compile_patterns(defs):
    return FilenameMatcher([pattern_from_def(d) for d in defs])


def match_filename(name, matcher):
    """All candidate editors for a bare filename (no directory part)."""
    if "/" in name or "\\" in name:
        raise ValueError(f"expected a bare filename, got {name!r}")
    return matcher.match(name)


def load_pattern_file(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return _defs_from_doc(doc)


def _defs_from_doc(doc):
    if not isinstance(doc, dict) or doc.get("version") != 1 or not isinstance(doc.get("patterns"), list):
        raise InvalidPattern("pattern file must be {'version': 1, 'patterns': [...]}")
    return doc["patterns"]


def builtin_pattern_defs():
    text = resources.files("imgforensics").joinpath("data/filename_patterns.json").read_text("utf-8")
    return _defs_from_doc(json.loads(text))


_default = None


def default_matcher():
    global _default
    if _default is None:
        _default = compile_patterns(builtin_pattern_defs())
    return _default


def format_datetime(fmt, when):
    """Render ``when`` with a pattern format string (inverse of matching)."""
    out = []
    i = 0
    while i < len(fmt):
        if fmt[i] == "%":
            code = fmt[i + 1]
            if code == "Q":
                ms = (when - _EPOCH) // timedelta(milliseconds=1)
                out.append(f"{ms:013d}")
            elif code == "L":
                out.append(f"{when.microsecond // 1000:03d}")
            else:
                out.append(when.strftime("%" + code))
            i += 2
        else:
            out.append(fmt[i])
            i += 1
    return "".join(out)


def instantiate(pattern, when, fmt_index=0, original_name="photo", number=1, extension=None):
    """Build a filename that ``pattern`` should match."""
    parts = []
    for tok in pattern.grammar:
        if tok.kind == "literal":
            parts.append(tok.value)
        elif tok.kind == "datetime":
            parts.append(format_datetime(tok.value[fmt_index], when))
        elif tok.kind == "original_name":
            parts.append(original_name)
        else:
            parts.append(str(number))
    return "".join(parts) + "." + (extension or pattern.extensions[0])
