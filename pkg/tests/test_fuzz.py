"""Property-based robustness: mutated JPEGs through the whole pipeline.

The acceptance suite runs a fixed 10,000-input corpus against the parsers;
here hypothesis searches for inputs that make the higher layers raise.
"""

import numpy as np
from hypothesis import given, settings, strategies as st

from imgforensics.codec import EncodeParams, decode, encode
from imgforensics.errors import ForensicsError, UnparseableImage
from imgforensics.exif import parse_exif
from imgforensics.image import PixelImage
from imgforensics.pipeline import VERDICTS, AnalyzeOptions, analyze_bytes
from imgforensics.refdb import ReferenceDb
from imgforensics.segments import parse_segments
from imgforensics.synth import build_exif_payload, insert_app1, smooth_gradient, texture

SEEDS = [
    encode(PixelImage.from_array(smooth_gradient(16, 24, 1)), EncodeParams(85, "4:2:0")),
    encode(PixelImage.from_array(texture(np.random.default_rng(2), 24, 16)),
           EncodeParams(70, "4:4:4", restart_interval=1)),
    insert_app1(encode(PixelImage.from_array(smooth_gradient(8, 8, 3)[:, :, 0]), EncodeParams(90)),
                build_exif_payload("Snapseed 2.0", "x", byte_order="big")),
]

edits = st.lists(st.tuples(st.integers(0, 10_000), st.integers(0, 255)), max_size=8)


@st.composite
def mutated(draw):
    data = bytearray(draw(st.sampled_from(SEEDS)))
    for pos, value in draw(edits):
        data[pos % len(data)] = value
    cut = draw(st.one_of(st.none(), st.integers(2, len(data))))
    return bytes(data[:cut])


FAST = AnalyzeOptions(median_window=3)


@settings(max_examples=150)
@given(mutated())
def test_pipeline_is_total(data):
    v = analyze_bytes(data, "PSX_20230401_123456.jpg", options=FAST)
    assert v.verdict in VERDICTS
    assert v.stage2["status"] in ("completed", "skipped")


@settings(max_examples=150)
@given(mutated())
def test_ingest_is_total(data):
    db = ReferenceDb()
    try:
        rec = db.ingest(data, "a_edited.jpeg", "Snapseed@2.19")
    except UnparseableImage:
        return
    assert rec.dqt_fingerprint is not None or rec.diagnostics


@settings(max_examples=100)
@given(st.binary(max_size=400))
def test_arbitrary_bytes_only_typed_errors(data):
    for fn, prefix in ((parse_segments, b"\xff\xd8"), (parse_exif, b"Exif\x00\x00"), (decode, b"\xff\xd8")):
        try:
            fn(prefix + data)
        except ForensicsError:
            pass
