"""Independent reference implementations used only by the tests.

None of these import from imgforensics; they are written from the textbook
definitions so that agreement with the package means something.
"""

import hashlib
import math

import numpy as np

# -- DCT ---------------------------------------------------------------------

_C = [1 / math.sqrt(2)] + [1.0] * 7
# cos((2x+1) u pi / 16), built from the definition rather than a matrix factorization
_COS = np.array([[math.cos((2 * x + 1) * u * math.pi / 16) for x in range(8)] for u in range(8)])
_SCALE = np.array([[_C[u] * _C[v] / 4 for v in range(8)] for u in range(8)])


def fdct_definitional(block):
    """F(u,v) = 1/4 C(u) C(v) sum_x sum_y f(x,y) cos(..u..) cos(..v..); O(N^4) per block."""
    f = np.asarray(block, dtype=np.float64)
    out = np.empty((8, 8))
    for u in range(8):
        for v in range(8):
            acc = 0.0
            for x in range(8):
                row = _COS[u, x]
                for y in range(8):
                    acc += f[x, y] * row * _COS[v, y]
            out[u, v] = _SCALE[u, v] * acc
    return out


def fdct_definitional_batch(blocks):
    """Same quadruple sum, vectorized over a stack of blocks with einsum."""
    blocks = np.asarray(blocks, dtype=np.float64)
    return np.einsum("nxy,ux,vy->nuv", blocks, _COS, _COS) * _SCALE


def idct_definitional_batch(coefs):
    coefs = np.asarray(coefs, dtype=np.float64)
    return np.einsum("nuv,ux,vy->nxy", coefs * _SCALE, _COS, _COS)


def zigzag_order():
    """(row, col) visiting order of the JPEG zigzag, by walking anti-diagonals."""
    order = []
    for s in range(15):
        cells = [(r, s - r) for r in range(8) if 0 <= s - r < 8]
        order += cells if s % 2 else cells[::-1]
    return order


# -- median ------------------------------------------------------------------

def _median_1d(values, window):
    half = window // 2
    n = len(values)
    out = []
    for i in range(n):
        taken = sorted(values[min(max(j, 0), n - 1)] for j in range(i - half, i + half + 1))
        out.append(taken[half])
    return out


def separable_median_bruteforce(plane, window):
    """Rows then columns, each pixel's window sorted from scratch, edges replicated."""
    rows = [_median_1d(list(r), window) for r in np.asarray(plane, dtype=np.float64).tolist()]
    cols = [_median_1d(list(c), window) for c in zip(*rows)]
    return np.array([list(r) for r in zip(*cols)])


# -- 3x3 symmetric eigenproblem ---------------------------------------------

def _det3(m):
    return (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))


def _charpoly(a, lam):
    m = [[a[i][j] - (lam if i == j else 0.0) for j in range(3)] for i in range(3)]
    return _det3(m)


def _bisect(a, lo, hi):
    flo = _charpoly(a, lo)
    for _ in range(200):
        mid = (lo + hi) / 2
        if mid in (lo, hi):
            break
        fm = _charpoly(a, mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return (lo + hi) / 2


def _cross(p, q):
    return [p[1] * q[2] - p[2] * q[1], p[2] * q[0] - p[0] * q[2], p[0] * q[1] - p[1] * q[0]]


def symmetric_eigen3(a):
    """Eigenpairs of a symmetric 3x3 matrix with distinct eigenvalues.

    Roots of det(A - lambda I) are bracketed between the Gershgorin bounds
    and the cubic's critical points, then refined by bisection; each
    eigenvector is the largest cross product of two rows of A - lambda I.  Returns eigenvalues
    descending and unit eigenvectors (as columns) with the largest-magnitude
    entry positive.
    """
    a = [[float(a[i][j]) for j in range(3)] for i in range(3)]
    radius = max(sum(abs(a[i][j]) for j in range(3) if j != i) for i in range(3))
    lo = min(a[i][i] for i in range(3)) - radius - 1.0
    hi = max(a[i][i] for i in range(3)) + radius + 1.0
    # det(A - t I) = -t^3 + tr t^2 - m t + det; its critical points split the
    # Gershgorin interval into three monotone pieces, one root each
    tr = a[0][0] + a[1][1] + a[2][2]
    m = (a[0][0] * a[1][1] - a[0][1] * a[1][0] + a[0][0] * a[2][2] - a[0][2] * a[2][0]
         + a[1][1] * a[2][2] - a[1][2] * a[2][1])
    disc = tr * tr - 3 * m
    if disc <= 0:
        raise ValueError("eigenvalues are not separated")
    c1, c2 = (tr - math.sqrt(disc)) / 3, (tr + math.sqrt(disc)) / 3
    roots = [_bisect(a, lo, c1), _bisect(a, c1, c2), _bisect(a, c2, hi)]
    roots.sort(reverse=True)
    vecs = []
    for lam in roots:
        m = [[a[i][j] - (lam if i == j else 0.0) for j in range(3)] for i in range(3)]
        best = max((_cross(m[i], m[j]) for i, j in ((0, 1), (0, 2), (1, 2))),
                   key=lambda c: sum(t * t for t in c))
        norm = math.sqrt(sum(t * t for t in best))
        v = [t / norm for t in best]
        k = max(range(3), key=lambda i: abs(v[i]))
        if v[k] < 0:
            v = [-t for t in v]
        vecs.append(v)
    return np.array(roots), np.array(vecs).T


def population_covariance(rgb):
    """Plain-python two-pass covariance of an (N, 3) sample array."""
    rows = np.asarray(rgb, dtype=np.float64).reshape(-1, 3).tolist()
    n = len(rows)
    mean = [sum(r[c] for r in rows) / n for c in range(3)]
    return [[sum((r[i] - mean[i]) * (r[j] - mean[j]) for r in rows) / n for j in range(3)]
            for i in range(3)]


# -- DQT serialization ---------------------------------------------------------

def dqt_md5(tables, sixteen_bit=()):
    """MD5 over id byte + 64 zigzag-order values per table, ids ascending.

    ``tables`` maps id -> 8x8 natural-order nested list; ids in
    ``sixteen_bit`` are written as big-endian 16-bit values.
    """
    out = bytearray()
    for tid in sorted(tables):
        natural = tables[tid]
        wide = tid in sixteen_bit
        out.append(tid)
        for r, c in zigzag_order():
            v = natural[r][c]
            out += v.to_bytes(2, "big") if wide else bytes([v])
    return hashlib.md5(bytes(out)).hexdigest()


# Annex K, typed row by row in natural order
ANNEX_K_LUMINANCE = [
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
]
ANNEX_K_CHROMINANCE = [
    [17, 18, 24, 47, 99, 99, 99, 99],
    [18, 21, 26, 66, 99, 99, 99, 99],
    [24, 26, 56, 99, 99, 99, 99, 99],
    [47, 66, 99, 99, 99, 99, 99, 99],
] + [[99] * 8 for _ in range(4)]

# md5 of 0x00 followed by 64 x 0x01, from coreutils md5sum
ALL_ONES_MD5 = "bbd2dbcfe20b59e981e9a42cd1eb6ece"


def psnr(a, b, peak=255.0):
    mse = float(np.mean((np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)) ** 2))
    return float("inf") if mse == 0 else 10 * math.log10(peak * peak / mse)

# Annex-K quality-50 pair (ids 0 and 1) serialized by hand from the tables
# above and hashed with coreutils md5sum
ANNEX_K_Q50_MD5 = "c44701e8185306f5e6d09be16a2b0fbd"
