"""Baseline sequential JPEG codec.

Decoding covers Huffman-coded 8-bit frames with one or three components,
any integral sampling factors, restart intervals and multiple scans.
Encoding emits Annex-K tables scaled by quality, 4:4:4 or 4:2:0 chroma.
"""

import re
import struct
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (CorruptEntropyData, DimensionOverflow, MalformedSegment,
                     UnsupportedCoding)
from .image import PixelImage
from .segments import DHT, DQT, DRI, SOS, parse_dqt_payload, parse_segments
from .tables import (AC_CHROMINANCE_BITS, AC_CHROMINANCE_VALS, AC_LUMINANCE_BITS,
                     AC_LUMINANCE_VALS, DC_CHROMINANCE_BITS, DC_CHROMINANCE_VALS,
                     DC_LUMINANCE_BITS, DC_LUMINANCE_VALS, STD_CHROMINANCE_QT,
                     STD_LUMINANCE_QT, ZIGZAG, scaled_table)

DEFAULT_MAX_PIXELS = 64 * 1024 * 1024

_RST_SPLIT = re.compile(rb"\xff[\xd0-\xd7]")


@dataclass(frozen=True)
class EncodeParams:
    quality: int = 75
    subsampling: str = "4:2:0"  # or "4:4:4"
    restart_interval: int | None = None

    def __post_init__(self):
        if not 1 <= self.quality <= 100:
            raise ValueError(f"quality must be in 1..100, got {self.quality}")
        if self.subsampling not in ("4:4:4", "4:2:0"):
            raise ValueError(f"unsupported subsampling {self.subsampling!r}")
        if self.restart_interval is not None and not 0 < self.restart_interval < 65536:
            raise ValueError("restart interval must be in 1..65535")


# -- colour ------------------------------------------------------------------

def rgb_to_ycbcr(r, g, b):
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0
    cr = 0.5 * r - 0.418688 * g - 0.081312 * b + 128.0
    return y, cb, cr


def ycbcr_to_rgb(y, cb, cr):
    cb = cb - 128.0
    cr = cr - 128.0
    r = y + 1.402 * cr
    g = y - 0.344136 * cb - 0.714136 * cr
    b = y + 1.772 * cb
    return r, g, b


def _to_u8(x):
    return np.clip(np.rint(x), 0, 255).astype(np.uint8)


# -- Huffman tables ----------------------------------------------------------

@dataclass(frozen=True)
class HuffmanTable:
    bits: tuple  # 16 code-length counts
    values: tuple

    def decoder_arrays(self):
        """maxcode/valptr/mincode indexed by code length (1..16), padded values."""
        maxcode = np.full(18, -1, dtype=np.int64)
        valptr = np.zeros(18, dtype=np.int64)
        mincode = np.zeros(18, dtype=np.int64)
        code = 0
        k = 0
        for length in range(1, 17):
            count = self.bits[length - 1]
            valptr[length] = k
            mincode[length] = code
            code += count
            k += count
            if count:
                maxcode[length] = code - 1
            if code > (1 << length):
                raise MalformedSegment("Huffman code lengths overflow the code space")
            code <<= 1
        vals = np.zeros(256, dtype=np.int64)
        vals[:len(self.values)] = self.values
        return maxcode, valptr, mincode, vals

    def encoder_arrays(self):
        """Code and length for every symbol value."""
        ehufco = np.zeros(256, dtype=np.int64)
        ehufsi = np.zeros(256, dtype=np.int64)
        code = 0
        k = 0
        for length in range(1, 17):
            for _ in range(self.bits[length - 1]):
                sym = self.values[k]
                ehufco[sym] = code
                ehufsi[sym] = length
                code += 1
                k += 1
            code <<= 1
        return ehufco, ehufsi

    def segment_bytes(self, table_class, table_id):
        return bytes([(table_class << 4) | table_id]) + bytes(self.bits) + bytes(self.values)


STD_DC_LUMINANCE = HuffmanTable(DC_LUMINANCE_BITS, DC_LUMINANCE_VALS)
STD_AC_LUMINANCE = HuffmanTable(AC_LUMINANCE_BITS, AC_LUMINANCE_VALS)
STD_DC_CHROMINANCE = HuffmanTable(DC_CHROMINANCE_BITS, DC_CHROMINANCE_VALS)
STD_AC_CHROMINANCE = HuffmanTable(AC_CHROMINANCE_BITS, AC_CHROMINANCE_VALS)


def parse_dht_payload(payload):
    """[(class, id, HuffmanTable)] for every table in a DHT payload."""
    out = []
    pos = 0
    while pos < len(payload):
        if pos + 17 > len(payload):
            raise MalformedSegment("DHT record shorter than its 17-byte header")
        tc, th = payload[pos] >> 4, payload[pos] & 15
        if tc > 1 or th > 3:
            raise MalformedSegment(f"bad DHT class/id byte 0x{payload[pos]:02X}")
        bits = tuple(payload[pos + 1:pos + 17])
        total = sum(bits)
        if total > 256 or pos + 17 + total > len(payload):
            raise MalformedSegment("DHT symbol count exceeds the payload")
        values = tuple(payload[pos + 17:pos + 17 + total])
        out.append((tc, th, HuffmanTable(bits, values)))
        pos += 17 + total
    return out


# -- decode ------------------------------------------------------------------

def _unstuff(entropy):
    parts = [p.replace(b"\xff\x00", b"\xff") for p in _RST_SPLIT.split(entropy)]
    starts = []
    ends = []
    pos = 0
    for part in parts:
        starts.append(pos)
        pos += len(part)
        ends.append(pos)
    data = np.frombuffer(b"".join(parts), dtype=np.uint8) if pos else np.zeros(1, dtype=np.uint8)
    return data, np.array(starts, dtype=np.int64), np.array(ends, dtype=np.int64)


def _ceil_div(a, b):
    return -(-a // b)


def decode(data, max_pixels=DEFAULT_MAX_PIXELS):
    """Decode a baseline JPEG to an RGB (or Grayscale) PixelImage."""
    segs = parse_segments(data)
    if segs.coding not in ("baseline", "extended"):
        raise UnsupportedCoding(f"{segs.coding} JPEG coding is not decoded")
    frame = segs.frame()
    if frame.precision != 8:
        raise UnsupportedCoding(f"{frame.precision}-bit samples")
    ncomp = len(frame.components)
    if ncomp not in (1, 3):
        raise UnsupportedCoding(f"{ncomp}-component frames")
    width, height = frame.width, frame.height
    if width == 0 or height == 0:
        raise UnsupportedCoding("zero frame dimension (DNL-defined height)")
    if width * height > max_pixels:
        raise DimensionOverflow(f"{width}x{height} exceeds the {max_pixels}-pixel limit")
    comps = frame.components
    for comp in comps:
        if not (1 <= comp.h <= 4 and 1 <= comp.v <= 4):
            raise MalformedSegment(f"component {comp.component_id} has sampling {comp.h}x{comp.v}")
    hmax = max(c.h for c in comps)
    vmax = max(c.v for c in comps)
    for comp in comps:
        if hmax % comp.h or vmax % comp.v:
            raise UnsupportedCoding("non-integral chroma sampling ratio")
    mcux = _ceil_div(width, 8 * hmax)
    mcuy = _ceil_div(height, 8 * vmax)
    grid = [(mcuy * c.v, mcux * c.h) for c in comps]  # allocated blocks (rows, cols)
    offsets = np.cumsum([0] + [r * c for r, c in grid])
    index_of = {c.component_id: i for i, c in enumerate(comps)}
    if ncomp == 1:
        # a single-component frame is always coded non-interleaved
        grid_coded = [(_ceil_div(height, 8), _ceil_div(width, 8))]
    else:
        grid_coded = [(_ceil_div(_ceil_div(height * c.v, vmax), 8),
                       _ceil_div(_ceil_div(width * c.h, hmax), 8)) for c in comps]

    qtables = {}
    dc_tables = {}
    ac_tables = {}
    restart = 0
    coefs = None
    comp_qt = [None] * ncomp
    scanned = [False] * ncomp

    for seg in segs:
        code = seg.marker.code
        if code == DQT:
            for table in parse_dqt_payload(seg.payload):
                qtables[table.table_id] = np.array(table.values_natural, dtype=np.int32)
        elif code == DHT:
            for tc, th, table in parse_dht_payload(seg.payload):
                (ac_tables if tc else dc_tables)[th] = table
        elif code == DRI:
            if len(seg.payload) < 2:
                raise MalformedSegment("DRI payload too short")
            restart = struct.unpack(">H", seg.payload[:2])[0]
        elif code == SOS:
            scan_comps, tables = _scan_header(seg.payload, index_of, dc_tables, ac_tables)
            for ci in scan_comps:
                tq = comps[ci].table_id
                if tq not in qtables:
                    raise MalformedSegment(f"component {comps[ci].component_id} uses undefined DQT {tq}")
                comp_qt[ci] = qtables[tq]
                scanned[ci] = True
            if len(scan_comps) == 1:
                ci = scan_comps[0]
                rows, cols = grid_coded[ci]
                bw = grid[ci][1]
                by, bx = np.divmod(np.arange(rows * cols), cols)
                mcu_blocks = (offsets[ci] + by * bw + bx).reshape(-1, 1)
                mcu_comp = np.zeros(1, dtype=np.int64)
            else:
                mcu_blocks, mcu_comp = _interleaved_plan(scan_comps, comps, grid, offsets, mcux, mcuy)
            entropy, starts, ends = _unstuff(seg.entropy_data or b"")
            # every coded block needs at least a DC code and an EOB code
            if 2 * mcu_blocks.size > 8 * int(ends[-1]):
                raise CorruptEntropyData(
                    f"{mcu_blocks.size} blocks cannot fit in {int(ends[-1])} bytes of scan data")
            if coefs is None:
                coefs = np.zeros((int(offsets[-1]), 64), dtype=np.int32)
            dc = [t.decoder_arrays() for t in tables[0]]
            ac = [t.decoder_arrays() for t in tables[1]]
            status = kernels.decode_scan(
                entropy, starts, ends, mcu_blocks.astype(np.int64), mcu_comp.astype(np.int64),
                np.stack([d[0] for d in dc]), np.stack([d[1] for d in dc]),
                np.stack([d[2] for d in dc]), np.stack([d[3] for d in dc]),
                np.stack([a[0] for a in ac]), np.stack([a[1] for a in ac]),
                np.stack([a[2] for a in ac]), np.stack([a[3] for a in ac]),
                restart, ZIGZAG, coefs)
            if status != kernels.SCAN_OK:
                raise CorruptEntropyData(kernels.SCAN_MESSAGES[int(status)])
    if coefs is None or not all(scanned):
        raise CorruptEntropyData("frame components missing from the scan data")

    planes = []
    for ci, comp in enumerate(comps):
        rows, cols = grid[ci]
        block = coefs[offsets[ci]:offsets[ci + 1]] * comp_qt[ci]
        spatial = kernels.idct_blocks(block.reshape(-1, 8, 8)) + 128.0
        spatial = np.clip(np.rint(spatial), 0, 255)
        plane = spatial.reshape(rows, cols, 8, 8).transpose(0, 2, 1, 3).reshape(rows * 8, cols * 8)
        plane = np.repeat(np.repeat(plane, vmax // comp.v, axis=0), hmax // comp.h, axis=1)
        planes.append(plane[:height, :width])

    subsampling = _describe_sampling(comps)
    if ncomp == 1:
        return PixelImage(width, height, [planes[0].astype(np.uint8)], "Grayscale", subsampling)
    r, g, b = ycbcr_to_rgb(*planes)
    return PixelImage(width, height, [_to_u8(r), _to_u8(g), _to_u8(b)], "RGB", subsampling)


def _scan_header(payload, index_of, dc_tables, ac_tables):
    if len(payload) < 1:
        raise MalformedSegment("empty SOS payload")
    ns = payload[0]
    if ns < 1 or ns > 4 or len(payload) < 1 + 2 * ns + 3:
        raise MalformedSegment("SOS payload inconsistent with its component count")
    scan_comps = []
    dcs = []
    acs = []
    for i in range(ns):
        cid, sel = payload[1 + 2 * i], payload[2 + 2 * i]
        if cid not in index_of:
            raise MalformedSegment(f"scan references unknown component {cid}")
        td, ta = sel >> 4, sel & 15
        if td not in dc_tables or ta not in ac_tables:
            raise MalformedSegment(f"scan references undefined Huffman table {td}/{ta}")
        scan_comps.append(index_of[cid])
        dcs.append(dc_tables[td])
        acs.append(ac_tables[ta])
    ss, se, ahal = payload[1 + 2 * ns:4 + 2 * ns]
    if ss != 0 or se != 63 or ahal != 0:
        raise UnsupportedCoding("scan uses spectral selection or successive approximation")
    return scan_comps, (dcs, acs)


def _interleaved_plan(scan_comps, comps, grid, offsets, mcux, mcuy):
    per_mcu = []
    comp_of = []
    for si, ci in enumerate(scan_comps):
        c = comps[ci]
        for v in range(c.v):
            for h in range(c.h):
                per_mcu.append((ci, v, h))
                comp_of.append(si)
    my, mx = np.divmod(np.arange(mcux * mcuy), mcux)
    plan = np.empty((mcux * mcuy, len(per_mcu)), dtype=np.int64)
    for j, (ci, v, h) in enumerate(per_mcu):
        c = comps[ci]
        plan[:, j] = offsets[ci] + (my * c.v + v) * grid[ci][1] + mx * c.h + h
    return plan, np.array(comp_of, dtype=np.int64)


def _describe_sampling(comps):
    if len(comps) == 1:
        return "none"
    y, cb, cr = comps
    if cb.h != cr.h or cb.v != cr.v:
        return "none"
    ratio = (y.h // cb.h, y.v // cb.v)
    return {(1, 1): "4:4:4", (2, 2): "4:2:0", (2, 1): "4:2:2"}.get(ratio, "none")


# -- encode ------------------------------------------------------------------

def quant_tables_for(quality):
    """(luminance, chrominance) natural-order tables for a quality factor."""
    return scaled_table(STD_LUMINANCE_QT, quality), scaled_table(STD_CHROMINANCE_QT, quality)


def _blocks_of(plane):
    h, w = plane.shape
    return plane.reshape(h // 8, 8, w // 8, 8).transpose(0, 2, 1, 3).reshape(-1, 8, 8)


def _quantize(plane, qt):
    coefs = kernels.fdct_blocks(_blocks_of(plane - 128.0))
    q = np.rint(coefs / qt.reshape(8, 8)).astype(np.int64).reshape(-1, 64)
    q[:, 0] = np.clip(q[:, 0], -2047, 2047)
    q[:, 1:] = np.clip(q[:, 1:], -1023, 1023)
    return q[:, ZIGZAG]


def encode(img, params=None, max_pixels=DEFAULT_MAX_PIXELS):
    """Encode an RGB or Grayscale PixelImage as a baseline JFIF stream."""
    params = params or EncodeParams()
    if img.color_space not in ("RGB", "Grayscale"):
        raise ValueError(f"cannot encode {img.color_space} images")
    width, height = img.width, img.height
    if width < 1 or height < 1:
        raise ValueError("image must be at least 1x1")
    if width > 65535 or height > 65535 or width * height > max_pixels:
        raise DimensionOverflow(f"{width}x{height} exceeds encoder limits")
    gray = img.color_space == "Grayscale"
    sub = not gray and params.subsampling == "4:2:0"
    unit = 16 if sub else 8
    pad = ((0, _ceil_div(height, unit) * unit - height), (0, _ceil_div(width, unit) * unit - width))

    lum_qt, chr_qt = quant_tables_for(params.quality)
    if gray:
        y = np.pad(img.planes[0].astype(np.float64), pad, mode="edge")
        comp_blocks = [_quantize(y, lum_qt)]
    else:
        r, g, b = (np.pad(p.astype(np.float64), pad, mode="edge") for p in img.planes)
        y, cb, cr = rgb_to_ycbcr(r, g, b)
        if sub:
            cb = cb.reshape(cb.shape[0] // 2, 2, cb.shape[1] // 2, 2).mean(axis=(1, 3))
            cr = cr.reshape(cr.shape[0] // 2, 2, cr.shape[1] // 2, 2).mean(axis=(1, 3))
        comp_blocks = [_quantize(y, lum_qt), _quantize(cb, chr_qt), _quantize(cr, chr_qt)]

    mcu_rows = (height + pad[0][1]) // unit
    mcu_cols = (width + pad[1][1]) // unit
    if gray:
        order = np.arange(len(comp_blocks[0]))
        coefs = comp_blocks[0][order]
        block_comp = np.zeros(len(order), dtype=np.int64)
        per_mcu = 1
    elif sub:
        ycols = mcu_cols * 2
        my, mx = np.divmod(np.arange(mcu_rows * mcu_cols), mcu_cols)
        yidx = np.stack([(2 * my + dy) * ycols + 2 * mx + dx for dy in (0, 1) for dx in (0, 1)], axis=1)
        cidx = (my * mcu_cols + mx)[:, None]
        coefs = np.concatenate([comp_blocks[0][yidx], comp_blocks[1][cidx], comp_blocks[2][cidx]],
                               axis=1).reshape(-1, 64)
        block_comp = np.tile(np.array([0, 0, 0, 0, 1, 2], dtype=np.int64), mcu_rows * mcu_cols)
        per_mcu = 6
    else:
        coefs = np.stack(comp_blocks, axis=1).reshape(-1, 64)
        block_comp = np.tile(np.array([0, 1, 2], dtype=np.int64), mcu_rows * mcu_cols)
        per_mcu = 3

    dc_specs = [STD_DC_LUMINANCE] if gray else [STD_DC_LUMINANCE, STD_DC_CHROMINANCE, STD_DC_CHROMINANCE]
    ac_specs = [STD_AC_LUMINANCE] if gray else [STD_AC_LUMINANCE, STD_AC_CHROMINANCE, STD_AC_CHROMINANCE]
    dc = [t.encoder_arrays() for t in dc_specs]
    ac = [t.encoder_arrays() for t in ac_specs]
    restart = params.restart_interval or 0
    n_blocks = len(coefs)
    capacity = n_blocks * 134 + n_blocks // max(per_mcu, 1) + 8
    codes = np.zeros(capacity, dtype=np.int64)
    sizes = np.zeros(capacity, dtype=np.int64)
    n = kernels.symbolize(np.ascontiguousarray(coefs, dtype=np.int64), block_comp, per_mcu, restart,
                          np.stack([d[0] for d in dc]), np.stack([d[1] for d in dc]),
                          np.stack([a[0] for a in ac]), np.stack([a[1] for a in ac]),
                          codes, sizes)
    # an entry is at most 16 bits, i.e. 4 bytes once stuffed
    out = np.zeros(4 * n + 16, dtype=np.uint8)
    nbytes = kernels.pack_bits(codes, sizes, n, out)
    scan = out[:nbytes].tobytes()

    def segment(code, payload):
        return struct.pack(">HH", code, len(payload) + 2) + payload

    jfif = b"JFIF\x00\x01\x01\x00" + struct.pack(">HH", 1, 1) + b"\x00\x00"
    dqt = b"\x00" + bytes(lum_qt[ZIGZAG].astype(np.uint8))
    if not gray:
        dqt += b"\x01" + bytes(chr_qt[ZIGZAG].astype(np.uint8))
    if gray:
        sof = struct.pack(">BHHB", 8, height, width, 1) + bytes([1, 0x11, 0])
        dht = STD_DC_LUMINANCE.segment_bytes(0, 0) + STD_AC_LUMINANCE.segment_bytes(1, 0)
        sos = bytes([1, 1, 0x00, 0, 63, 0])
    else:
        ysamp = 0x22 if sub else 0x11
        sof = struct.pack(">BHHB", 8, height, width, 3) + bytes([1, ysamp, 0, 2, 0x11, 1, 3, 0x11, 1])
        dht = (STD_DC_LUMINANCE.segment_bytes(0, 0) + STD_AC_LUMINANCE.segment_bytes(1, 0)
               + STD_DC_CHROMINANCE.segment_bytes(0, 1) + STD_AC_CHROMINANCE.segment_bytes(1, 1))
        sos = bytes([3, 1, 0x00, 2, 0x11, 3, 0x11, 0, 63, 0])
    parts = [b"\xff\xd8", segment(0xFFE0, jfif), segment(DQT, dqt), segment(0xFFC0, sof),
             segment(DHT, dht)]
    if restart:
        parts.append(segment(DRI, struct.pack(">H", restart)))
    parts += [segment(SOS, sos), scan, b"\xff\xd9"]
    return b"".join(parts)
