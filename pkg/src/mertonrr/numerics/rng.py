"""Counter-based random streams (Philox4x32-10 + ziggurat normals).

Every 64-bit word is a pure function of ``(master_seed, stream, substream,
lane, word_index)``: the seed is the Philox key and the remaining values
form the 128-bit counter, two words per Philox block.  Nothing is shared
between streams, so any schedule of realizations over workers reproduces
the same numbers.

Draws consume words sequentially from a word index and return the next
index.  Bulk fills cache the second word of each block in a local
variable; results are identical to word-by-word evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint32(0x9E3779B9)
_W1 = np.uint32(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_SH32 = np.uint64(32)
_ONE = np.uint64(1)
_U53 = 1.0 / 9007199254740992.0

U32_MAX = 0xFFFFFFFF


@nb.njit(cache=True, inline="always")
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten rounds of Philox4x32 on a uint32 counter/key."""
    for _ in range(10):
        p0 = np.uint64(c0) * _M0
        p1 = np.uint64(c2) * _M1
        hi0 = np.uint32(p0 >> _SH32)
        lo0 = np.uint32(p0 & _MASK32)
        hi1 = np.uint32(p1 >> _SH32)
        lo1 = np.uint32(p1 & _MASK32)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = np.uint32(k0 + _W0)
        k1 = np.uint32(k1 + _W1)
    return c0, c1, c2, c3


@nb.njit(cache=True, inline="always")
def block_at(key, stream, sub, lane, blk):
    a, b, c, d = philox4x32(
        np.uint32(blk & _MASK32), np.uint32(sub), np.uint32(stream),
        np.uint32(np.uint64(lane) ^ ((blk >> _SH32) << np.uint64(16))),
        np.uint32(key & _MASK32), np.uint32(key >> _SH32),
    )
    return (np.uint64(a) << _SH32) | np.uint64(b), (np.uint64(c) << _SH32) | np.uint64(d)


@nb.njit(cache=True, inline="always")
def word_at(key, stream, sub, lane, w):
    lo, hi = block_at(key, stream, sub, lane, w >> _ONE)
    return hi if w & _ONE else lo


@nb.njit(cache=True, inline="always")
def _to_open_unit(word):
    return (np.float64(word >> np.uint64(11)) + 0.5) * _U53


@nb.njit(cache=True, inline="always")
def uniform_at(key, stream, sub, lane, w):
    """Uniform on (0, 1) from word ``w``; returns (u, w + 1)."""
    return _to_open_unit(word_at(key, stream, sub, lane, w)), w + _ONE


def _ziggurat_tables(n=256, r=3.6541528853610088):
    f = lambda x: math.exp(-0.5 * x * x)  # noqa: E731
    v = r * f(r) + math.sqrt(math.pi / 2.0) * math.erfc(r / math.sqrt(2.0))
    x = np.zeros(n + 1)
    x[0] = v / f(r)
    x[1] = r
    for i in range(2, n):
        x[i] = math.sqrt(-2.0 * math.log(v / x[i - 1] + f(x[i - 1])))
    x[n] = 0.0
    return x, x[1:] / x[:-1], r


_ZX, _ZRATIO, _ZR = _ziggurat_tables()
_ZMASK = np.uint64(0xFF)


@nb.njit(cache=True)
def _zig_slow(key, stream, sub, lane, w, word):
    """Wedge/tail branch of the ziggurat for a rejected first word.

    ``w`` is the index after ``word``; returns (x, next index), where x is
    NaN if the candidate was rejected and a fresh attempt is needed.
    """
    i = np.int64(word & _ZMASK)
    u = 2.0 * (np.float64(word >> np.uint64(11)) * _U53) - 1.0
    if i == 0:
        while True:
            u1, w = uniform_at(key, stream, sub, lane, w)
            u2, w = uniform_at(key, stream, sub, lane, w)
            x = math.log(u1) / _ZR
            y = math.log(u2)
            if -2.0 * y >= x * x:
                break
        return (x - _ZR if u < 0.0 else _ZR - x), w
    x = u * _ZX[i]
    f0 = math.exp(-0.5 * (_ZX[i] * _ZX[i] - x * x))
    f1 = math.exp(-0.5 * (_ZX[i + 1] * _ZX[i + 1] - x * x))
    v, w = uniform_at(key, stream, sub, lane, w)
    if f1 + v * (f0 - f1) < 1.0:
        return x, w
    return np.nan, w


@nb.njit(cache=True, inline="always")
def _zig_fast(word):
    i = np.int64(word & _ZMASK)
    u = 2.0 * (np.float64(word >> np.uint64(11)) * _U53) - 1.0
    if abs(u) < _ZRATIO[i]:
        return u * _ZX[i], True
    return 0.0, False


@nb.njit(cache=True)
def normal_at(key, stream, sub, lane, w):
    """Standard normal (Marsaglia-Tsang ziggurat, 256 layers); returns (z, next index)."""
    while True:
        word = word_at(key, stream, sub, lane, w)
        w += _ONE
        z, ok = _zig_fast(word)
        if ok:
            return z, w
        z, w = _zig_slow(key, stream, sub, lane, w, word)
        if not math.isnan(z):
            return z, w


@nb.njit(cache=True, nogil=True)
def fill_normals(key, stream, sub, lane, w, out):
    """Fill ``out`` with consecutive normals starting at word ``w``; returns next index."""
    n = out.shape[0]
    i = 0
    while i < n:
        if w & _ONE:
            # only reached at odd starts or after a slow-path draw
            z, w = normal_at(key, stream, sub, lane, w)
            out[i] = z
            i += 1
            continue
        lo, hi = block_at(key, stream, sub, lane, w >> _ONE)
        z, ok = _zig_fast(lo)
        if not ok:
            z, w = _zig_slow(key, stream, sub, lane, w + _ONE, lo)
            if not math.isnan(z):
                out[i] = z
                i += 1
            continue
        out[i] = z
        i += 1
        if i == n:
            return w + _ONE
        z, ok = _zig_fast(hi)
        if not ok:
            z, w = _zig_slow(key, stream, sub, lane, w + np.uint64(2), hi)
            if not math.isnan(z):
                out[i] = z
                i += 1
            continue
        out[i] = z
        i += 1
        w += np.uint64(2)
    return w


@nb.njit(cache=True)
def _fill_uniforms(key, stream, sub, lane, w, out):
    for i in range(out.shape[0]):
        out[i], w = uniform_at(key, stream, sub, lane, w)
    return w


@nb.njit(cache=True)
def poisson_at(key, stream, sub, lane, w, mean):
    """Poisson variate by sequential inversion, one uniform per chunk of mean <= 30."""
    total = 0
    remaining = mean
    while remaining > 0.0:
        m = min(remaining, 30.0)
        remaining -= m
        u, w = uniform_at(key, stream, sub, lane, w)
        p = math.exp(-m)
        s = p
        k = 0
        while u > s:
            k += 1
            p *= m / k
            if p == 0.0:
                break
            s += p
        total += k
    return total, w


@nb.njit(cache=True)
def _fill_poisson(key, stream, sub, lane, w, mean, out):
    for i in range(out.shape[0]):
        out[i], w = poisson_at(key, stream, sub, lane, w, mean)
    return w


@dataclass
class RngStream:
    """Position in one counter-based substream.

    ``counter`` is the index of the next 64-bit word.  Copy the object (or
    build a fresh one) to replay a sequence; concurrent tasks must each own
    their instance.
    """

    master_seed: int
    stream_index: int = 0
    substream_index: int = 0
    lane: int = 0
    counter: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must fit in 64 unsigned bits")
        for name in ("stream_index", "substream_index", "lane"):
            if not 0 <= getattr(self, name) <= U32_MAX:
                raise ValueError(f"{name} must fit in 32 unsigned bits")
        if self.counter < 0:
            raise ValueError("counter must be nonnegative")

    @property
    def coords(self):
        return (np.uint64(self.master_seed), np.uint64(self.stream_index),
                np.uint64(self.substream_index), np.uint64(self.lane))

    def spawn(self, substream_index: int, lane: int = 0) -> "RngStream":
        return RngStream(self.master_seed, self.stream_index, substream_index, lane)

    def copy(self) -> "RngStream":
        return RngStream(self.master_seed, self.stream_index, self.substream_index,
                         self.lane, self.counter)

    def normals(self, n: int) -> np.ndarray:
        out = np.empty(n)
        self.counter = int(fill_normals(*self.coords, np.uint64(self.counter), out))
        return out

    def uniforms(self, n: int) -> np.ndarray:
        out = np.empty(n)
        self.counter = int(_fill_uniforms(*self.coords, np.uint64(self.counter), out))
        return out

    def poissons(self, mean: float, n: int) -> np.ndarray:
        if not mean >= 0 or not math.isfinite(mean):
            raise ValueError("Poisson mean must be finite and nonnegative")
        out = np.empty(n, dtype=np.int64)
        self.counter = int(_fill_poisson(*self.coords, np.uint64(self.counter),
                                         float(mean), out))
        return out


def draw_standard_normal(stream: RngStream) -> float:
    return float(stream.normals(1)[0])


def draw_uniform(stream: RngStream) -> float:
    return float(stream.uniforms(1)[0])


def draw_poisson(stream: RngStream, mean: float) -> int:
    return int(stream.poissons(mean, 1)[0])
