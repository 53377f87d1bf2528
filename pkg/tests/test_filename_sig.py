import json
from datetime import datetime

import pytest
from hypothesis import given, strategies as st

from imgforensics.errors import InvalidPattern
from imgforensics.filename_sig import (compile_patterns, default_matcher, format_datetime,
                                       instantiate, load_pattern_file, match_filename,
                                       pattern_from_def)

M = default_matcher()


def editors(name):
    return {m.editor_name for m in match_filename(name, M)}


def by_pattern(name):
    return {m.pattern_name: m for m in match_filename(name, M)}


def test_eleven_editors_covered():
    assert len({p.editor_name for p in M.patterns}) == 11


@pytest.mark.parametrize("name,editor,when", [
    ("PSX_20230401_123456.jpg", "Photoshop Express", datetime(2023, 4, 1, 12, 34, 56)),
    ("PSFix_20230401_123456.jpeg", "Adobe Photoshop Fix", datetime(2023, 4, 1, 12, 34, 56)),
    ("MTXX_MH20230401_123456789.jpg", "Meitu", datetime(2023, 4, 1, 12, 34, 56, 789000)),
    ("MTXX_formula20230401_123456.jpg", "Meitu", datetime(2023, 4, 1, 12, 34, 56)),
    ("WipeOut04_01_2023_123456.jpg", "Remove Unwanted Object", datetime(2023, 4, 1, 12, 34, 56)),
    ("BackgroundEraser_20230401_103456.jpg", "Background Eraser (Inshot)",
     datetime(2023, 4, 1, 10, 34, 56)),
    ("ei_1680345296123-removebg-preview.png", "removebg", datetime(2023, 4, 1, 10, 34, 56, 123000)),
    ("photostudio_20230401.jpg", "Photo Studio", datetime(2023, 4, 1)),
])
def test_signature_examples(name, editor, when):
    hits = [m for m in match_filename(name, M) if m.editor_name == editor]
    assert len(hits) == 1
    assert hits[0].strength == "signature"
    assert hits[0].extracted_datetime == when


def test_snapseed_original_name():
    hit = by_pattern("IMG_1234_edited.jpeg")["snapseed_export"]
    assert hit.extracted_original_name == "IMG_1234"
    assert hit.strength == "structural"
    hit = by_pattern("IMG_1234-2.jpeg")["snapseed_save"]
    assert hit.extracted_original_name == "IMG_1234"


def test_epoch_name_is_ambiguous():
    found = editors("1680345296123.png")
    assert found == {"SnapEdit", "Background Eraser (handy)"}
    assert all(m.strength == "structural" for m in match_filename("1680345296123.png", M))


def test_extension_must_match():
    assert "Photoshop Express" not in editors("PSX_20230401_123456.png")
    assert editors("PSX_20230401_123456.JPG.txt") == set()


def test_invalid_date_is_no_match():
    assert "Photoshop Express" not in editors("PSX_20231345_123456.jpg")


def test_bare_filename_required():
    with pytest.raises(ValueError):
        match_filename("dir/PSX_20230401_123456.jpg", M)


def test_no_match():
    assert match_filename("holiday.jpg", M) == []


def test_structural_signature_is_template():
    hit = by_pattern("20230401_123456.jpg")["samsung_photo_editor"]
    assert hit.signature == "{%Y%m%d_%H%M%S}.(jpg)"


@pytest.mark.parametrize("bad", [
    {"editor": "x", "tokens": [], "extensions": ["jpg"]},
    {"editor": "x", "tokens": [{"literal": "a"}], "extensions": []},
    {"editor": "x", "tokens": [{"datetime": ["%Z"]}], "extensions": ["jpg"]},
    {"editor": "x", "tokens": [{"datetime": ["%Q%Y"]}], "extensions": ["jpg"]},
    {"editor": "x", "tokens": [{"datetime": ["%Y%Y"]}], "extensions": ["jpg"]},
    {"editor": "x", "tokens": [{"literal": "A_"}], "signature_token": "B", "extensions": ["jpg"]},
    {"editor": "x", "tokens": [{"original_name": True}, {"original_name": True}], "extensions": ["jpg"]},
    {"editor": "x", "tokens": [{"bogus": 1}], "extensions": ["jpg"]},
    {"tokens": [{"literal": "a"}], "extensions": ["jpg"]},
])
def test_invalid_patterns(bad):
    with pytest.raises(InvalidPattern):
        compile_patterns([bad])


def test_custom_pattern_file(tmp_path):
    path = tmp_path / "patterns.json"
    path.write_text(json.dumps({"version": 1, "patterns": [
        {"name": "acme", "editor": "Acme Edit", "tokens": [{"literal": "ACME-"}, {"datetime": "%Y.%m.%d"}],
         "signature_token": "ACME", "extensions": ["jpg"]}]}))
    matcher = compile_patterns(load_pattern_file(path))
    (hit,) = match_filename("ACME-2022.12.31.jpg", matcher)
    assert hit.editor_name == "Acme Edit" and hit.extracted_datetime == datetime(2022, 12, 31)
    path.write_text(json.dumps({"patterns": []}))
    with pytest.raises(InvalidPattern):
        load_pattern_file(path)


def test_to_dict_roundtrip():
    for p in M.patterns:
        assert pattern_from_def(p.to_dict()) == p


def test_format_datetime_epoch_ms():
    assert format_datetime("%Q", datetime(2023, 4, 1, 10, 34, 56, 123000)) == "1680345296123"


stamps = st.datetimes(min_value=datetime(2001, 9, 10), max_value=datetime(2099, 12, 31))


@given(st.sampled_from(M.patterns), stamps, st.data())
def test_instantiate_then_match(pattern, when, data):
    dt = [t.value for t in pattern.grammar if t.kind == "datetime"]
    fmt_index = data.draw(st.integers(0, len(dt[0]) - 1)) if dt else 0
    fmt = dt[0][fmt_index] if dt else None
    if fmt is not None and "%L" not in fmt and "%Q" not in fmt:
        when = when.replace(microsecond=0)
    else:
        when = when.replace(microsecond=when.microsecond // 1000 * 1000)
    name = instantiate(pattern, when, fmt_index, original_name="IMG_0001", number=7)
    hit = by_pattern(name)[pattern.name]
    if fmt is None:
        assert hit.extracted_original_name == "IMG_0001"
    elif "%H" in fmt or "%Q" in fmt:
        assert hit.extracted_datetime == when
    else:
        assert hit.extracted_datetime.date() == when.date()
