import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from imgforensics.errors import (JpegError, MalformedDqt, MalformedSegment, MissingSOI, NoDqtFound,
                                 TruncatedSegment, ZeroQuantValue)
from imgforensics.segments import (Marker, MarkerKind, canonical_dqt_bytes, dqt_fingerprint,
                                   extract_dqt, parse_segments, sniff_format)
from imgforensics.synth import make_jpeg, smooth_gradient
from imgforensics.tables import UNZIGZAG, ZIGZAG, natural_to_zigzag, zigzag_to_natural

SOI, EOI = b"\xff\xd8", b"\xff\xd9"


def seg(code, payload):
    return struct.pack(">HH", code, len(payload) + 2) + payload


def test_smallest_stream():
    segs = parse_segments(SOI + EOI)
    assert segs.kinds() == [MarkerKind.SOI, MarkerKind.EOI]
    assert all(s.payload == b"" for s in segs)
    assert not segs.missing_eoi


def test_encoder_segment_order():
    data = make_jpeg(smooth_gradient(16, 24), 75)
    assert parse_segments(data).names() == ["SOI", "APP0", "DQT", "SOF0", "DHT", "SOS", "EOI"]


def test_truncated_payload():
    with pytest.raises(TruncatedSegment):
        parse_segments(SOI + b"\xff\xdb\x00\x04\x00")


def test_missing_soi():
    with pytest.raises(MissingSOI):
        parse_segments(b"\x89PNG\r\n\x1a\n")
    with pytest.raises(MissingSOI):
        parse_segments(b"")


def test_missing_eoi_is_a_warning():
    data = make_jpeg(smooth_gradient(16, 16), 75)
    segs = parse_segments(data[:-2])
    assert segs.missing_eoi
    assert segs.warnings
    assert segs.kinds()[-1] is MarkerKind.SOS


def test_trailer_after_eoi():
    data = make_jpeg(smooth_gradient(16, 16), 75)
    segs = parse_segments(data + b"EDITOR-DATA")
    assert segs.trailer == b"EDITOR-DATA"
    assert segs.trailer_offset == len(data)
    assert segs.to_bytes() == data + b"EDITOR-DATA"


def test_entropy_keeps_stuffing_and_restarts():
    from imgforensics.codec import EncodeParams, encode
    from imgforensics.image import PixelImage
    rng = np.random.default_rng(1)
    img = PixelImage.from_array(rng.uniform(0, 255, (32, 32, 3)))
    data = encode(img, EncodeParams(95, "4:4:4", restart_interval=1))
    segs = parse_segments(data)
    sos = segs.of_kind(MarkerKind.SOS)[0]
    assert b"\xff\x00" in sos.entropy_data
    assert b"\xff\xd0" in sos.entropy_data
    assert segs.to_bytes() == data


def test_fill_bytes_roundtrip():
    data = SOI + b"\xff\xff\xff" + seg(0xFFFE, b"hi") + EOI
    segs = parse_segments(data)
    assert segs.names() == ["SOI", "COM", "EOI"]
    assert segs.to_bytes() == data


def test_offsets_increase():
    data = make_jpeg(smooth_gradient(16, 16), 75, exif={"software": "x"})
    offsets = [s.offset for s in parse_segments(data)]
    assert offsets == sorted(offsets) and len(set(offsets)) == len(offsets)
    for s in parse_segments(data):
        assert data[s.offset:s.offset + 2] == struct.pack(">H", s.marker.code)


def test_bad_declared_length():
    with pytest.raises(MalformedSegment):
        parse_segments(SOI + b"\xff\xfe\x00\x01" + EOI)


def test_marker_validation_and_names():
    with pytest.raises(ValueError):
        Marker(0xFF00)
    with pytest.raises(ValueError):
        Marker(0xFEDB)
    assert Marker(0xFFE1).name == "APP1" and Marker(0xFFE1).index == 1
    assert Marker(0xFFD3).name == "RST3" and Marker(0xFFD3).standalone
    assert Marker(0xFFC9).kind is MarkerKind.OTHER and Marker(0xFFC9).name == "SOF9"


def test_arithmetic_coding_detected():
    data = SOI + seg(0xFFC9, bytes([8, 0, 8, 0, 8, 1, 1, 0x11, 0])) + EOI
    assert parse_segments(data).coding == "arithmetic"


# -- DQT ------------------------------------------------------------------------

def test_all_ones_table():
    qts = extract_dqt(parse_segments(SOI + seg(0xFFDB, b"\x00" + b"\x01" * 64) + EOI))
    assert qts.ids() == [0]
    assert qts.tables[0].precision == 8
    assert set(qts.tables[0].values_natural) == {1}
    assert dqt_fingerprint(qts) == oracles.ALL_ONES_MD5
    assert canonical_dqt_bytes(qts) == b"\x00" + b"\x01" * 64


def test_two_tables_in_one_payload():
    payload = b"\x00" + bytes(range(1, 65)) + b"\x01" + bytes(range(2, 66))
    qts = extract_dqt(parse_segments(SOI + seg(0xFFDB, payload) + EOI))
    assert qts.ids() == [0, 1]
    assert qts.tables[0].values_zigzag == tuple(range(1, 65))


def test_last_definition_wins():
    data = SOI + seg(0xFFDB, b"\x00" + b"\x02" * 64) + seg(0xFFDB, b"\x00" + b"\x05" * 64) + EOI
    assert set(extract_dqt(parse_segments(data)).tables[0].values_zigzag) == {5}


def test_dqt_errors():
    with pytest.raises(NoDqtFound):
        extract_dqt(parse_segments(SOI + EOI))
    with pytest.raises(MalformedDqt):
        extract_dqt(parse_segments(SOI + seg(0xFFDB, b"\x00" + b"\x01" * 63) + EOI))
    with pytest.raises(MalformedDqt):
        extract_dqt(parse_segments(SOI + seg(0xFFDB, b"\x24" + b"\x01" * 64) + EOI))
    with pytest.raises(ZeroQuantValue):
        extract_dqt(parse_segments(SOI + seg(0xFFDB, b"\x00" + b"\x00" + b"\x01" * 63) + EOI))


def test_sixteen_bit_table_fingerprint():
    values = list(range(300, 364))
    body = b"\x10" + struct.pack(">64H", *values)
    qts = extract_dqt(parse_segments(SOI + seg(0xFFDB, body) + EOI))
    assert qts.tables[0].precision == 16
    natural = [list(r) for r in qts.tables[0].rows()]
    assert dqt_fingerprint(qts) == oracles.dqt_md5({0: natural}, sixteen_bit={0})


def test_sixteen_bit_small_values_stay_two_bytes():
    body = b"\x10" + struct.pack(">64H", *([3] * 64))
    qts = extract_dqt(parse_segments(SOI + seg(0xFFDB, body) + EOI))
    assert len(canonical_dqt_bytes(qts)) == 1 + 128
    assert dqt_fingerprint(qts) == oracles.dqt_md5({0: [[3] * 8] * 8}, sixteen_bit={0})


def test_zigzag_matches_diagonal_walk():
    walk = [r * 8 + c for r, c in oracles.zigzag_order()]
    assert list(ZIGZAG) == walk
    assert list(UNZIGZAG) == list(np.argsort(walk))


@given(st.lists(st.integers(1, 255), min_size=64, max_size=64))
def test_zigzag_involution(values):
    assert list(natural_to_zigzag(zigzag_to_natural(values))) == values
    assert list(zigzag_to_natural(natural_to_zigzag(values))) == values


@given(st.lists(st.integers(1, 255), min_size=64, max_size=64), st.integers(0, 63), st.integers(1, 254))
def test_fingerprint_sensitive_to_one_value(values, index, delta):
    body = bytes(values)
    other = bytearray(body)
    other[index] = (other[index] - 1 + delta) % 255 + 1
    fp = lambda b: dqt_fingerprint(extract_dqt(parse_segments(SOI + seg(0xFFDB, b"\x00" + b) + EOI)))  # noqa: E731
    assert (fp(body) == fp(bytes(other))) == (body == bytes(other))


def test_sniff_format():
    assert sniff_format(b"\xff\xd8\xff\xe0") == "JPEG"
    assert sniff_format(b"\x89PNG\r\n\x1a\n") == "PNG"
    assert sniff_format(b"GIF89a") is None


@given(st.binary(max_size=300))
def test_random_bytes_never_crash(data):
    try:
        segs = parse_segments(SOI + data)
    except JpegError:
        return
    assert segs.to_bytes() == SOI + data
