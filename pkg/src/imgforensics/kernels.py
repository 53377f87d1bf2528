"""Hot inner loops: block DCT, Huffman entropy coding, separable median.

Every kernel has a loop form (compiled with numba when enabled) and, where
numpy can express it, a vectorized fallback.  The Huffman kernels have no
sensible vectorized form, so their fallback is the same loop run by CPython.
"""

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._accel import NUMBA_ENABLED, maybe_jit

# Status codes returned by decode_scan.
SCAN_OK = 0
SCAN_BAD_CODE = 1
SCAN_OUT_OF_DATA = 2
SCAN_COEF_OVERRUN = 3
SCAN_BAD_MAGNITUDE = 4

SCAN_MESSAGES = {
    SCAN_BAD_CODE: "invalid Huffman code",
    SCAN_OUT_OF_DATA: "entropy data exhausted before the last MCU",
    SCAN_COEF_OVERRUN: "run-length overruns the 64-coefficient block",
    SCAN_BAD_MAGNITUDE: "magnitude category out of range",
}


def dct_matrix():
    """8x8 orthonormal DCT-II basis, rows indexed by frequency."""
    c = np.empty((8, 8), dtype=np.float64)
    for u in range(8):
        cu = math.sqrt(0.5) if u == 0 else 1.0
        for x in range(8):
            c[u, x] = 0.5 * cu * math.cos((2 * x + 1) * u * math.pi / 16.0)
    return c


DCT_MATRIX = dct_matrix()


# -- block DCT ---------------------------------------------------------------

def _fdct_blocks_loop(blocks, c):
    n = blocks.shape[0]
    out = np.empty((n, 8, 8), dtype=np.float64)
    tmp = np.empty((8, 8), dtype=np.float64)
    for b in range(n):
        for u in range(8):
            for x in range(8):
                s = 0.0
                for y in range(8):
                    s += c[u, y] * blocks[b, y, x]
                tmp[u, x] = s
        for u in range(8):
            for v in range(8):
                s = 0.0
                for x in range(8):
                    s += tmp[u, x] * c[v, x]
                out[b, u, v] = s
    return out


def _idct_blocks_loop(coefs, c):
    n = coefs.shape[0]
    out = np.empty((n, 8, 8), dtype=np.float64)
    tmp = np.empty((8, 8), dtype=np.float64)
    for b in range(n):
        for y in range(8):
            for v in range(8):
                s = 0.0
                for u in range(8):
                    s += c[u, y] * coefs[b, u, v]
                tmp[y, v] = s
        for y in range(8):
            for x in range(8):
                s = 0.0
                for v in range(8):
                    s += tmp[y, v] * c[v, x]
                out[b, y, x] = s
    return out


def _fdct_blocks_np(blocks, c):
    return c @ blocks @ c.T


def _idct_blocks_np(coefs, c):
    return c.T @ coefs @ c


# -- separable median --------------------------------------------------------

def _median_rows_loop(plane, window):
    h, w = plane.shape
    r = window // 2
    out = np.empty((h, w), dtype=np.float64)
    buf = np.empty(window, dtype=np.float64)
    for i in range(h):
        for j in range(w):
            for k in range(window):
                jj = j + k - r
                if jj < 0:
                    jj = 0
                elif jj >= w:
                    jj = w - 1
                val = plane[i, jj]
                # insertion sort; windows are small
                m = k
                while m > 0 and buf[m - 1] > val:
                    buf[m] = buf[m - 1]
                    m -= 1
                buf[m] = val
            out[i, j] = buf[r]
    return out


def _median_rows_np(plane, window):
    r = window // 2
    padded = np.pad(plane, ((0, 0), (r, r)), mode="edge")
    return np.median(sliding_window_view(padded, window, axis=1), axis=-1)


# -- Huffman decode ----------------------------------------------------------

def _decode_scan_loop(data, seg_starts, seg_ends, mcu_blocks, mcu_comp,
                      dc_maxcode, dc_valptr, dc_mincode, dc_vals,
                      ac_maxcode, ac_valptr, ac_mincode, ac_vals,
                      restart_interval, zigzag, coefs):
    n_mcus = mcu_blocks.shape[0]
    per_mcu = mcu_blocks.shape[1]
    n_comp = dc_maxcode.shape[0]
    pred = np.zeros(n_comp, dtype=np.int64)
    seg = 0
    pos = seg_starts[0]
    end = seg_ends[0]
    bitbuf = 0
    bitcnt = 0
    for m in range(n_mcus):
        if restart_interval > 0 and m > 0 and m % restart_interval == 0:
            seg += 1
            if seg >= seg_starts.shape[0]:
                return SCAN_OUT_OF_DATA
            pos = seg_starts[seg]
            end = seg_ends[seg]
            bitcnt = 0
            for c in range(n_comp):
                pred[c] = 0
        for bi in range(per_mcu):
            blk = mcu_blocks[m, bi]
            c = mcu_comp[bi]
            k = 0
            while k < 64:
                is_dc = k == 0
                code = 0
                length = 0
                while True:
                    if bitcnt == 0:
                        if pos >= end:
                            return SCAN_OUT_OF_DATA
                        bitbuf = int(data[pos])
                        pos += 1
                        bitcnt = 8
                    bitcnt -= 1
                    code = (code << 1) | ((bitbuf >> bitcnt) & 1)
                    length += 1
                    if is_dc:
                        if code <= dc_maxcode[c, length]:
                            break
                    elif code <= ac_maxcode[c, length]:
                        break
                    if length >= 16:
                        return SCAN_BAD_CODE
                if is_dc:
                    vi = dc_valptr[c, length] + code - dc_mincode[c, length]
                    if vi < 0 or vi > 255:
                        return SCAN_BAD_CODE
                    size = dc_vals[c, vi]
                    run = 0
                    if size > 11:
                        return SCAN_BAD_MAGNITUDE
                else:
                    vi = ac_valptr[c, length] + code - ac_mincode[c, length]
                    if vi < 0 or vi > 255:
                        return SCAN_BAD_CODE
                    sym = ac_vals[c, vi]
                    run = sym >> 4
                    size = sym & 15
                    if size == 0 and run != 15:
                        break  # EOB
                    if size > 10:
                        return SCAN_BAD_MAGNITUDE
                bits = 0
                for _ in range(size):
                    if bitcnt == 0:
                        if pos >= end:
                            return SCAN_OUT_OF_DATA
                        bitbuf = int(data[pos])
                        pos += 1
                        bitcnt = 8
                    bitcnt -= 1
                    bits = (bits << 1) | ((bitbuf >> bitcnt) & 1)
                value = 0
                if size > 0:
                    value = bits
                    if bits < (1 << (size - 1)):
                        value = bits - (1 << size) + 1
                if is_dc:
                    pred[c] += value
                    coefs[blk, 0] = pred[c]
                    k = 1
                else:
                    k += run
                    if k > 63:
                        return SCAN_COEF_OVERRUN
                    coefs[blk, zigzag[k]] = value
                    k += 1
    return SCAN_OK


# -- Huffman encode ----------------------------------------------------------

def _bit_length(v):
    n = 0
    while v > 0:
        v >>= 1
        n += 1
    return n


def _symbolize_loop(coefs_zz, block_comp, blocks_per_mcu, restart_interval,
                    dc_code, dc_size, ac_code, ac_size, codes, sizes):
    """Turn quantized zigzag blocks into a (code, length) bit stream.

    A negative length marks a restart marker whose index is in ``codes``.
    Returns the number of entries written.
    """
    n_blocks = coefs_zz.shape[0]
    n_comp = dc_code.shape[0]
    pred = np.zeros(n_comp, dtype=np.int64)
    n = 0
    n_rst = 0
    for b in range(n_blocks):
        if restart_interval > 0 and b > 0 and b % (restart_interval * blocks_per_mcu) == 0:
            codes[n] = n_rst & 7
            sizes[n] = -1
            n += 1
            n_rst += 1
            for c in range(n_comp):
                pred[c] = 0
        c = block_comp[b]
        diff = coefs_zz[b, 0] - pred[c]
        pred[c] = coefs_zz[b, 0]
        mag = _bit_length(diff if diff >= 0 else -diff)
        codes[n] = dc_code[c, mag]
        sizes[n] = dc_size[c, mag]
        n += 1
        if mag > 0:
            codes[n] = diff if diff > 0 else diff + (1 << mag) - 1
            sizes[n] = mag
            n += 1
        run = 0
        for k in range(1, 64):
            v = coefs_zz[b, k]
            if v == 0:
                run += 1
                continue
            while run > 15:
                codes[n] = ac_code[c, 0xF0]
                sizes[n] = ac_size[c, 0xF0]
                n += 1
                run -= 16
            mag = _bit_length(v if v >= 0 else -v)
            sym = (run << 4) | mag
            codes[n] = ac_code[c, sym]
            sizes[n] = ac_size[c, sym]
            n += 1
            codes[n] = v if v > 0 else v + (1 << mag) - 1
            sizes[n] = mag
            n += 1
            run = 0
        if run > 0:
            codes[n] = ac_code[c, 0]
            sizes[n] = ac_size[c, 0]
            n += 1
    return n


def _pack_bits_loop(codes, sizes, n, out):
    """Pack the bit stream with 0xFF00 stuffing; pad with 1-bits at restarts."""
    pos = 0
    acc = 0
    nacc = 0
    for i in range(n + 1):
        if i == n or sizes[i] < 0:
            if nacc > 0:
                pad = 8 - nacc
                acc = (acc << pad) | ((1 << pad) - 1)
                nacc = 8
                b = acc & 0xFF
                out[pos] = b
                pos += 1
                if b == 0xFF:
                    out[pos] = 0
                    pos += 1
                acc = 0
                nacc = 0
            if i < n:
                out[pos] = 0xFF
                out[pos + 1] = 0xD0 + codes[i]
                pos += 2
            continue
        size = sizes[i]
        acc = (acc << size) | (codes[i] & ((1 << size) - 1))
        nacc += size
        while nacc >= 8:
            b = (acc >> (nacc - 8)) & 0xFF
            out[pos] = b
            pos += 1
            if b == 0xFF:
                out[pos] = 0
                pos += 1
            nacc -= 8
        acc &= (1 << nacc) - 1
    return pos


# -- implementation selection ------------------------------------------------

if NUMBA_ENABLED:
    _bit_length = maybe_jit(_bit_length)

    _fdct_impl = maybe_jit(_fdct_blocks_loop)
    _idct_impl = maybe_jit(_idct_blocks_loop)
    _median_impl = maybe_jit(_median_rows_loop)
else:
    _fdct_impl = _fdct_blocks_np
    _idct_impl = _idct_blocks_np
    _median_impl = _median_rows_np

decode_scan = maybe_jit(_decode_scan_loop)
symbolize = maybe_jit(_symbolize_loop)
pack_bits = maybe_jit(_pack_bits_loop)


def fdct_blocks(blocks):
    """Forward DCT of an (n, 8, 8) stack of level-shifted samples."""
    return _fdct_impl(np.ascontiguousarray(blocks, dtype=np.float64), DCT_MATRIX)


def idct_blocks(coefs):
    """Inverse DCT of an (n, 8, 8) stack of coefficients."""
    return _idct_impl(np.ascontiguousarray(coefs, dtype=np.float64), DCT_MATRIX)


def median_rows(plane, window):
    """Length-``window`` median along each row, borders replicated."""
    return _median_impl(np.ascontiguousarray(plane, dtype=np.float64), int(window))


def backend():
    return "numba" if NUMBA_ENABLED else "numpy"
