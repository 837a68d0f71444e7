"""Counter-based Gaussian stream: Threefry-2x32 (20 rounds) feeding a
128-layer ziggurat.

Stream assignment, with the 64-bit seed split into the key
``(seed & 0xffffffff, seed >> 32)``:

* normal ``n`` of path ``i`` starts from word ``n & 1`` of the block at
  counter ``(i, n >> 1)``: layer index from its low 7 bits, abscissa from
  its top 24 bits;
* if that word is rejected, retry ``j = 1, 2, ...`` uses the block at
  counter ``(i, n)`` under the key ``(k0 + j * 0x9E3779B9, k1 ^ 0x7F4A7C15)``.

Every normal is therefore a pure function of ``(seed, path, n)``, so results
do not depend on how paths are scheduled.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

_PARITY = np.uint32(0x1BD11BDA)
_GOLDEN = np.uint32(0x9E3779B9)
_RETRY_XOR = np.uint32(0x7F4A7C15)
_INV_2_32 = 1.0 / 4294967296.0
_INV_2_24 = 1.0 / 16777216.0


@nb.njit(error_model="numpy")
def _mix(x0, x1, r):
    x0 = np.uint32(x0 + x1)
    x1 = np.uint32((x1 << np.uint32(r)) | (x1 >> np.uint32(32 - r)))
    return x0, np.uint32(x1 ^ x0)


@nb.njit(error_model="numpy")
def _four_a(x0, x1):
    x0, x1 = _mix(x0, x1, 13)
    x0, x1 = _mix(x0, x1, 15)
    x0, x1 = _mix(x0, x1, 26)
    return _mix(x0, x1, 6)


@nb.njit(error_model="numpy")
def _four_b(x0, x1):
    x0, x1 = _mix(x0, x1, 17)
    x0, x1 = _mix(x0, x1, 29)
    x0, x1 = _mix(x0, x1, 16)
    return _mix(x0, x1, 24)


@nb.njit(cache=True, error_model="numpy")
def threefry2x32(k0, k1, c0, c1):
    """One Threefry-2x32-20 block; all arguments and outputs are uint32.

    Rotation constants 13 15 26 6 / 17 29 16 24, key injection every four
    rounds.
    """
    k0 = np.uint32(k0)
    k1 = np.uint32(k1)
    k2 = np.uint32(_PARITY ^ k0 ^ k1)
    x0 = np.uint32(np.uint32(c0) + k0)
    x1 = np.uint32(np.uint32(c1) + k1)
    x0, x1 = _four_a(x0, x1)
    x0, x1 = np.uint32(x0 + k1), np.uint32(x1 + k2 + np.uint32(1))
    x0, x1 = _four_b(x0, x1)
    x0, x1 = np.uint32(x0 + k2), np.uint32(x1 + k0 + np.uint32(2))
    x0, x1 = _four_a(x0, x1)
    x0, x1 = np.uint32(x0 + k0), np.uint32(x1 + k1 + np.uint32(3))
    x0, x1 = _four_b(x0, x1)
    x0, x1 = np.uint32(x0 + k1), np.uint32(x1 + k2 + np.uint32(4))
    x0, x1 = _four_a(x0, x1)
    return np.uint32(x0 + k2), np.uint32(x1 + k0 + np.uint32(5))


# ziggurat tables (128 layers, right-hand tail at R)
_C = 128
_R = 3.442619855899
_V = 9.91256303526217e-3


def _tables():
    f = lambda x: math.exp(-0.5 * x * x)  # noqa: E731
    X = np.zeros(_C + 1)
    X[0] = _V / f(_R)
    X[1] = _R
    for i in range(2, _C):
        X[i] = math.sqrt(-2.0 * math.log(_V / X[i - 1] + f(X[i - 1])))
    X[_C] = 0.0
    ratio = X[1:] / X[:-1]
    return X, ratio


ZIG_X, ZIG_RATIO = _tables()


@nb.njit(error_model="numpy")
def _unit(w):
    """Uniform in ``(0, 1]`` from a 32-bit word."""
    return (np.float64(w) + 1.0) * _INV_2_32


@nb.njit(error_model="numpy")
def _retry_block(k0, k1, path, n, j):
    return threefry2x32(np.uint32(k0 + j * _GOLDEN), np.uint32(k1 ^ _RETRY_XOR), path, n)


@nb.njit(cache=True, error_model="numpy")
def _zig_slow(k0, k1, path, n, i, u, X, ratio):
    """Rejection branch for a word that missed the layer's inner box."""
    j = np.uint32(1)
    while True:
        a, b = _retry_block(k0, k1, path, n, j)
        j += np.uint32(1)
        if i == 0:
            # tail beyond R, resampled until accepted
            while True:
                x = -math.log(_unit(a)) / _R
                y = -math.log(_unit(b))
                if 2.0 * y >= x * x:
                    return -(_R + x) if u < 0.0 else _R + x
                a, b = _retry_block(k0, k1, path, n, j)
                j += np.uint32(1)
        else:
            x = u * X[i]
            f0 = math.exp(-0.5 * (X[i] * X[i] - x * x))
            f1 = math.exp(-0.5 * (X[i + 1] * X[i + 1] - x * x))
            if f1 + _unit(b) * (f0 - f1) < 1.0:
                return x
        # fresh layer and abscissa
        a, b = _retry_block(k0, k1, path, n, j)
        j += np.uint32(1)
        i = a & np.uint32(127)
        u = 2.0 * (np.float64(a >> np.uint32(8)) * _INV_2_24) - 1.0
        if abs(u) < ratio[i]:
            return u * X[i]


@nb.njit(error_model="numpy")
def fill_words(k0, k1, path, first_block, n_blocks, w0, w1):
    """Threefry output words for ``n_blocks`` consecutive counters of ``path``."""
    for j in range(n_blocks):
        a, b = threefry2x32(k0, k1, path, np.uint32(first_block + j))
        w0[j] = a
        w1[j] = b


def split_seed(seed: int) -> tuple[int, int]:
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return seed & 0xFFFFFFFF, seed >> 32


@nb.njit(cache=True, error_model="numpy")
def _normals(k0, k1, path, n, X, ratio, out):
    nb_ = (n + 1) // 2
    w0 = np.empty(nb_, np.uint32)
    w1 = np.empty(nb_, np.uint32)
    fill_words(k0, k1, path, 0, nb_, w0, w1)
    for m in range(n):
        w = w0[m >> 1] if m % 2 == 0 else w1[m >> 1]
        # fast branch written out: a jitted call here costs several times
        # the arithmetic; montecarlo's kernel repeats the same three lines
        i = w & np.uint32(127)
        u = 2.0 * (np.float64(w >> np.uint32(8)) * _INV_2_24) - 1.0
        if abs(u) < ratio[i]:
            out[m] = u * X[i]
        else:
            out[m] = _zig_slow(k0, k1, path, np.uint32(m), i, u, X, ratio)


def path_normals(seed: int, path: int, n: int) -> np.ndarray:
    """First ``n`` normals of ``path``; used for testing and per-path replay."""
    if n > 2**32:
        raise ValueError("at most 2**32 normals per path")
    k0, k1 = split_seed(seed)
    out = np.empty(n)
    _normals(np.uint32(k0), np.uint32(k1), np.uint32(path), n, ZIG_X, ZIG_RATIO, out)
    return out
