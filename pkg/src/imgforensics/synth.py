"""Deterministic synthetic fixtures: images, Exif blocks, corpora, extraction trees.

Everything here is seeded; the same arguments always produce the same bytes.
"""

import json
import os
import struct
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from .codec import EncodeParams, decode, encode
from .exif import (EXIF_PREAMBLE, TAG_ARTIST, TAG_DATETIME, TAG_JPEG_LENGTH, TAG_JPEG_OFFSET,
                   TAG_SOFTWARE)
from .filename_sig import default_matcher, instantiate
from .image import PixelImage
from .png import encode_png
from .segments import SOF0, SOF2, parse_segments

TAG_MAKE = 0x010F
TAG_MODEL = 0x0110
TAG_COMPRESSION = 0x0103


# -- Exif writer (test-only) -----------------------------------------------------

def _ascii(text):
    return text.encode("utf-8") + b"\x00"


def _ifd(entries, base, endian, next_ifd=0):
    """Serialize one IFD placed at ``base``; returns (ifd bytes, data area bytes)."""
    entries = sorted(entries)
    data_start = base + 2 + 12 * len(entries) + 4
    head = struct.pack(endian + "H", len(entries))
    data = b""
    for tag, type_id, count, raw in entries:
        if len(raw) <= 4:
            field_bytes = raw.ljust(4, b"\x00")
        else:
            field_bytes = struct.pack(endian + "I", data_start + len(data))
            data += raw + (b"\x00" if len(raw) % 2 else b"")
        head += struct.pack(endian + "HHI", tag, type_id, count) + field_bytes
    head += struct.pack(endian + "I", next_ifd)
    return head, data


def build_exif_payload(software=None, artist=None, datetime_text=None, byte_order="little",
                       thumbnail=None, make=None, model=None):
    """APP1 payload (preamble included) with the given IFD0 text tags.

    ``thumbnail`` (JPEG bytes) goes into IFD1 via the JPEGInterchangeFormat pair.
    """
    endian = "<" if byte_order == "little" else ">"
    entries = []
    for tag, text in ((TAG_SOFTWARE, software), (TAG_ARTIST, artist), (TAG_DATETIME, datetime_text),
                      (TAG_MAKE, make), (TAG_MODEL, model)):
        if text is not None:
            raw = _ascii(text)
            entries.append((tag, 2, len(raw), raw))
    header = (b"II" if endian == "<" else b"MM") + struct.pack(endian + "HI", 42, 8)
    ifd0, data0 = _ifd(entries, 8, endian)
    if thumbnail is None:
        return EXIF_PREAMBLE + header + ifd0 + data0
    # sizes do not depend on the link value, so lay out once and re-emit
    ifd1_at = 8 + len(ifd0) + len(data0)
    thumb_at = ifd1_at + 2 + 12 * 3 + 4
    ifd0, data0 = _ifd(entries, 8, endian, ifd1_at)
    short = lambda v: struct.pack(endian + "H", v)  # noqa: E731
    long_ = lambda v: struct.pack(endian + "I", v)  # noqa: E731
    ifd1, data1 = _ifd([(TAG_COMPRESSION, 3, 1, short(6)),
                        (TAG_JPEG_OFFSET, 4, 1, long_(thumb_at)),
                        (TAG_JPEG_LENGTH, 4, 1, long_(len(thumbnail)))], ifd1_at, endian)
    assert not data1
    return EXIF_PREAMBLE + header + ifd0 + data0 + ifd1 + bytes(thumbnail)


def insert_app1(jpeg, payload):
    """Insert an APP1 segment after SOI (and after a leading APP0, if any)."""
    if len(payload) + 2 > 0xFFFF:
        raise ValueError("APP1 payload too large for one segment")
    pos = 2
    if jpeg[2:4] == b"\xff\xe0":
        pos = 4 + ((jpeg[4] << 8) | jpeg[5])
    return jpeg[:pos] + b"\xff\xe1" + struct.pack(">H", len(payload) + 2) + payload + jpeg[pos:]


def make_progressive(jpeg):
    """Relabel the SOF0 marker as SOF2 (the payload stays baseline)."""
    for seg in parse_segments(jpeg):
        if seg.marker.code == SOF0:
            off = seg.offset
            return jpeg[:off] + struct.pack(">H", SOF2) + jpeg[off + 2:]
    raise ValueError("no SOF0 segment to relabel")


# -- images ---------------------------------------------------------------------------

def _blur(a, passes):
    # repeated [1 2 1]/4 along both axes, replicated borders
    for _ in range(passes):
        for axis in (0, 1):
            p = np.pad(a, [(1, 1) if i == axis else (0, 0) for i in range(a.ndim)], mode="edge")
            lo = np.take(p, range(0, a.shape[axis]), axis=axis)
            mid = np.take(p, range(1, a.shape[axis] + 1), axis=axis)
            hi = np.take(p, range(2, a.shape[axis] + 2), axis=axis)
            a = (lo + 2 * mid + hi) / 4
    return a


def texture(rng, height, width, passes=2, amplitude=40.0):
    """Stationary band-limited RGB noise around mid-gray, float array."""
    t = _blur(rng.normal(0.0, 1.0, (height, width, 3)), passes)
    t = t / t.std() * amplitude + 128.0
    return np.clip(t, 0, 255)


def smooth_gradient(height, width, seed=0):
    """Slowly varying RGB ramps; survives recompression with little error."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    sx, sy = rng.uniform(0.3, 1.2, 3), rng.uniform(0.3, 1.2, 3)
    off = rng.uniform(20, 60, 3)
    arr = np.stack([off[c] + sx[c] * xx + sy[c] * yy for c in range(3)], axis=-1)
    return np.clip(arr, 0, 255)


def make_jpeg(pixels, quality=90, subsampling="4:2:0", exif=None):
    """Encode an array; ``exif`` is a kwargs dict for build_exif_payload."""
    data = encode(PixelImage.from_array(pixels), EncodeParams(quality, subsampling))
    if exif:
        data = insert_app1(data, build_exif_payload(**exif))
    return data


def make_png(pixels):
    return encode_png(np.clip(np.rint(pixels), 0, 255).astype(np.uint8))


# -- splice suite ---------------------------------------------------------------------

@dataclass
class SpliceFixture:
    name: str
    spliced: PixelImage
    control: PixelImage  # same base, no paste
    mask: np.ndarray  # True where the paste landed


def splice_suite(count=5, size=96, base_quality=70):
    """Never-compressed texture pasted (block-aligned) into a q70 round-tripped base."""
    boxes = [(32, 64, 24, 72), (8, 40, 8, 56), (48, 88, 40, 88), (16, 80, 32, 64), (40, 72, 0, 48),
             (0, 32, 48, 96), (56, 96, 8, 40)]
    out = []
    for i in range(count):
        rng = np.random.default_rng(1000 + i)
        base = texture(rng, size, size)
        control = decode(encode(PixelImage.from_array(base), EncodeParams(base_quality, "4:4:4")))
        patch = texture(rng, size, size)
        r0, r1, c0, c1 = boxes[i % len(boxes)]
        mask = np.zeros((size, size), dtype=bool)
        mask[r0:r1, c0:c1] = True
        arr = control.to_array().astype(np.float64)
        arr[mask] = patch[mask]
        out.append(SpliceFixture(f"splice_{i}", PixelImage.from_array(arr), control, mask))
    return out


# -- labeled corpus ------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticEditor:
    name: str
    version: str
    quality: int
    subsampling: str
    software: str | None
    artist: str | None
    pattern: str  # filename pattern name

    @property
    def label(self):
        return f"{self.name}@{self.version}"


SYNTHETIC_EDITORS = (
    SyntheticEditor("Snapseed", "2.19", 95, "4:4:4", "Snapseed 2.0", None, "snapseed_export"),
    SyntheticEditor("Meitu", "9.7.5.5", 95, "4:2:0", "Meitu 9755", "Meitu", "meitu_save"),
    SyntheticEditor("Remove Unwanted Object", "1.3.8", 92, "4:2:0", "AdvaSoft TouchRetouch", None,
                    "remove_unwanted_object"),
    SyntheticEditor("Photoshop Express", "8.8.17", 85, "4:2:0",
                    "Adobe Photoshop Express (Android)", None, "photoshop_express"),
    SyntheticEditor("Adobe Photoshop Fix", "1.1.0", 95, "4:2:0", None, None, "photoshop_fix"),
    SyntheticEditor("Background Eraser (Inshot)", "2.122.33", 80, "4:2:0", None, None,
                    "background_eraser_inshot"),
)


@dataclass(frozen=True)
class LabeledSample:
    filename: str
    data: bytes
    label: str
    editor: SyntheticEditor


def _pattern(name):
    for p in default_matcher().patterns:
        if p.name == name:
            return p
    raise KeyError(name)


def random_datetime(rng, start=datetime(2019, 1, 1), span_days=2000):
    return start + timedelta(seconds=int(rng.integers(0, span_days * 86400)))


def editor_sample(editor, rng, index, size=(48, 64)):
    when = random_datetime(rng)
    pixels = smooth_gradient(*size, seed=int(rng.integers(1 << 30)))
    exif = None
    if editor.software or editor.artist:
        exif = {"software": editor.software, "artist": editor.artist,
                "datetime_text": when.strftime("%Y:%m:%d %H:%M:%S"),
                "byte_order": "little" if index % 2 else "big"}
    data = make_jpeg(pixels, editor.quality, editor.subsampling, exif)
    filename = instantiate(_pattern(editor.pattern), when, original_name=f"img{index:03d}",
                           number=index + 1, extension="jpeg" if "jpeg" in _pattern(editor.pattern).extensions else "jpg")
    return LabeledSample(filename, data, editor.label, editor)


def labeled_corpus(per_editor=5, seed=7, editors=SYNTHETIC_EDITORS):
    rng = np.random.default_rng(seed)
    return [editor_sample(e, rng, i) for e in editors for i in range(per_editor)]


# -- pipeline fixtures -----------------------------------------------------------------

def psx_fixture():
    """Photoshop Express style export: signature filename, Exif Software, q85 tables."""
    pixels = smooth_gradient(64, 96, seed=11)
    data = make_jpeg(pixels, 85, "4:2:0", {"software": "Adobe Photoshop Express (Android)",
                                           "datetime_text": "2023:04:01 12:34:56"})
    return "PSX_20230401_123456.jpg", data


def pristine_fixture():
    """Camera-style file: Make/Model only, a quality no corpus editor uses."""
    pixels = smooth_gradient(64, 96, seed=12)
    data = make_jpeg(pixels, 87, "4:2:0", {"make": "SynthCam", "model": "SC-1",
                                           "datetime_text": "2023:03:30 08:00:00"})
    return "IMG_0001.jpg", data


def progressive_snapseed_fixture():
    pixels = smooth_gradient(64, 96, seed=13)
    data = make_jpeg(pixels, 95, "4:4:4", {"software": "Snapseed 2.0"})
    return "DSC_0042.jpg", make_progressive(data)


# -- extraction tree ---------------------------------------------------------------------

def _write(root, rel, data):
    path = os.path.join(root, *rel.split("/"))
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(data if isinstance(data, bytes) else data.encode("utf-8"))
    return rel


def _epoch_ms(when):
    return (when - datetime(1970, 1, 1)) // timedelta(milliseconds=1)


MATRIX_COLUMNS = ("edited_image", "manipulated_region", "original_image", "edit_logs", "image_caching")


def build_extraction_tree(root):
    """Write a small synthetic Android extraction under ``root``; return its manifest.

    The manifest lists every finding the scanner should produce, the expected
    per-package matrix, and the log timestamps that must be recovered.
    """
    os.makedirs(root, exist_ok=True)
    findings = []
    packages = {}
    logs = []
    carved = {}

    def add(pkg, kind, rel, data, fmt, ext=None):
        _write(root, rel, data)
        findings.append({"package": pkg, "kind": kind, "path": rel, "format": fmt,
                         "recovered_extension": ext})

    def matrix(**present):
        return {col: bool(present.get(col)) for col in MATRIX_COLUMNS}

    # Meitu: edited + original in private external storage, save log, carved cache
    pkg = "com.mt.mtxx.mtxx"
    ext = f"storage/emulated/0/Android/data/{pkg}/files"
    add(pkg, "EditedImage", f"{ext}/save/MTXX_MH20230401_123456789.jpg",
        make_jpeg(smooth_gradient(32, 48, 21), 95, "4:2:0",
                  {"software": "Meitu 9755", "artist": "Meitu"}), "JPEG")
    add(pkg, "OriginalImage", f"{ext}/original/IMG_0001.jpg",
        make_jpeg(smooth_gradient(32, 48, 22), 87), "JPEG")
    start, save = datetime(2023, 4, 1, 12, 30, 1), datetime(2023, 4, 1, 12, 34, 56)
    line = (f"2023-04-01 12:34:56.789 I/MTSave: start={start:%Y-%m-%d %H:%M:%S} "
            f"saved={save:%Y-%m-%d %H:%M:%S} src=/storage/emulated/0/DCIM/Camera/IMG_0001.jpg "
            f"dst=/storage/emulated/0/Pictures/MTXX/MTXX_MH20230401_123456789.jpg\n")
    rel = f"data/data/{pkg}/files/log/save.log"
    add(pkg, "EditLog", rel, line, "text")
    logs.append({"package": pkg, "path": rel, "start_time": start.isoformat(),
                 "save_time": save.isoformat(), "original_filename": "IMG_0001.jpg",
                 "edited_filename": "MTXX_MH20230401_123456789.jpg"})
    cache = f"data/data/{pkg}/cache/image_manager_disk_cache"
    add(pkg, "Cache", f"{cache}/8213.0",
        make_jpeg(smooth_gradient(32, 48, 23), 95, "4:2:0",
                  {"software": "Meitu 9755", "artist": "Meitu"}), "JPEG", ".jpg")
    add(pkg, "Cache", f"{cache}/journal", "libcore.io.DiskLruCache\n1\n100\n2\n\nCLEAN 8213 1234\n", "text")
    carved[f"{cache}/8213.0"] = "Meitu"
    packages[pkg] = {"editor": "Meitu", "matrix": matrix(edited_image=True, original_image=True,
                                                         edit_logs=True, image_caching=True)}

    # SnapEdit: edited result, mask named by edit time
    pkg = "snapedit.app.remove"
    files = f"data/data/{pkg}/files"
    add(pkg, "EditedImage", f"{files}/result/1680345296123.png",
        make_png(smooth_gradient(24, 32, 31)), "PNG")
    mask = np.zeros((24, 32, 3))
    mask[6:18, 8:24] = 255
    add(pkg, "Mask", f"{files}/mask/20230401_103456.jpg", make_jpeg(mask, 90, "4:4:4"), "JPEG")
    packages[pkg] = {"editor": "SnapEdit", "matrix": matrix(edited_image=True, manipulated_region=True)}

    # Samsung Photo Editor: original kept for Revert
    pkg = "com.sec.android.mimage.photoretouching"
    _write(root, f"data/data/{pkg}/shared_prefs/prefs.xml", "<map />\n")
    add(pkg, "OriginalImage", "data/sec/photoeditor/0/storage/emulated/0/DCIM/Camera/IMG_0001.jpg",
        make_jpeg(smooth_gradient(32, 48, 41), 87), "JPEG")
    packages[pkg] = {"editor": "Samsung Photo Editor", "matrix": matrix(original_image=True)}

    # Background Eraser (Inshot): edit history with start/save times
    pkg = "photoeditor.cutout.backgrounderaser"
    rel = f"data/data/{pkg}/files/log/edit_history.txt"
    entries = [(datetime(2023, 4, 1, 10, 30, 1), datetime(2023, 4, 1, 10, 34, 56, 123000),
                "IMG_0002.jpg", "BackgroundEraser_20230401_103456.jpg"),
               (datetime(2023, 4, 2, 9, 0, 0), datetime(2023, 4, 2, 9, 5, 30),
                "IMG_0003.jpg", "BackgroundEraser_20230402_090530.jpg")]
    text = ""
    for s, v, src, dst in entries:
        text += (f'{{"startTime":{_epoch_ms(s)},"saveTime":{_epoch_ms(v)},"input":"{src}",'
                 f'"output":"{dst}","dir":"/storage/emulated/0/Pictures/BackgroundEraser"}}\n')
        logs.append({"package": pkg, "path": rel, "start_time": s.isoformat(),
                     "save_time": v.isoformat(), "original_filename": src, "edited_filename": dst})
    text += "truncated record {\"startTime\":16803\n"
    _write(root, rel, text)
    for _ in entries:
        findings.append({"package": pkg, "kind": "EditLog", "path": rel, "format": "text",
                         "recovered_extension": None})
    packages[pkg] = {"editor": "Background Eraser (Inshot)", "matrix": matrix(edit_logs=True)}

    # Snapseed: a carved cache entry whose Exif names the editor
    pkg = "com.niksoftware.snapseed"
    rel = f"data/data/{pkg}/cache/image_manager_disk_cache/5120.0"
    add(pkg, "Cache", rel, make_jpeg(smooth_gradient(32, 48, 51), 95, "4:4:4",
                                     {"software": "Snapseed 2.0"}), "JPEG", ".jpg")
    carved[rel] = "Snapseed"
    packages[pkg] = {"editor": "Snapseed", "matrix": matrix(image_caching=True)}

    # Photoshop Express: installed, nothing recoverable
    pkg = "com.adobe.psmobile"
    _write(root, f"data/data/{pkg}/shared_prefs/settings.xml", "<map />\n")
    packages[pkg] = {"editor": "Photoshop Express", "matrix": matrix()}

    findings.sort(key=lambda f: (f["package"], f["path"], f["kind"]))
    return {"version": 1, "packages": packages, "findings": findings, "log_records": logs,
            "carved_stage1": carved}


def write_manifest(manifest, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
