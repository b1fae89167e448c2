"""Bitvectors with constant-time rank.

Two kinds are provided:

* ``PlainBitVector`` -- packed words plus a two-level rank directory
  (absolute counts every 512 bits, relative counts per 64-bit word).
* ``RrrBitVector`` -- blocks of ``b`` bits stored as a (class, offset) pair,
  where the class is the block popcount and the offset is the rank of the
  block among all ``b``-bit words of that popcount (combinatorial number
  system, colex order).  Every 32 blocks a superblock sample records the
  absolute rank and the bit position in the offset stream.

Bit ``i`` of a vector lives in block ``i // b`` at in-block position
``i % b``; in-block position ``p`` carries weight ``2**p``.
"""

import math
import struct
from bisect import bisect_right

import numpy as np

from .errors import ConfigurationError, IndexFormatError

__all__ = [
    "PlainBitVector",
    "RrrBitVector",
    "RRR_BLOCK_SIZES",
    "SUPERBLOCK_BLOCKS",
    "build_plain",
    "build_rrr",
    "rrr_overhead",
    "bits_entropy",
    "read_bitvector",
    "pack_uints",
    "unpack_uints",
    "bit_width",
]

RRR_BLOCK_SIZES = (15, 31, 63)
SUPERBLOCK_BLOCKS = 32
PLAIN_SAMPLE_BITS = 512

_WORDS_PER_SAMPLE = PLAIN_SAMPLE_BITS // 64
_CHUNK_BLOCKS = 1 << 15

# C(p, k) for 0 <= p < 64, 0 <= k <= 64; C(p, k) = 0 for k > p.
_BINOM = [[math.comb(p, k) for k in range(65)] for p in range(64)]
_BINOM_NP = np.array(_BINOM, dtype=np.uint64)


def rrr_overhead(b):
    """Per-bit cost of storing classes: lg(b + 1) / b."""
    return math.log2(b + 1) / b


def bits_entropy(ones, n):
    """Binary empirical entropy H0 of a vector with ``ones`` set bits out of ``n``."""
    if n == 0 or ones == 0 or ones == n:
        return 0.0
    p = ones / n
    return -(p * math.log2(p) + (1 - p) * math.log2(1 - p))


def _as_bits(bits):
    if isinstance(bits, str):
        return np.frombuffer(bits.encode("ascii"), dtype=np.uint8) == ord("1")
    return np.asarray(bits, dtype=bool).ravel()


def _pack_words(bits, min_words=0):
    """Pack a bool array little-endian into uint64 words (bit i -> word i>>6, bit i&63)."""
    nwords = max((len(bits) + 63) // 64, min_words)
    packed = np.packbits(bits, bitorder="little")
    buf = np.zeros(nwords * 8, dtype=np.uint8)
    buf[: len(packed)] = packed
    return buf.view("<u8")


def bit_width(max_value):
    """Bits needed to store every integer in [0, max_value]."""
    return max(1, int(max_value).bit_length())


def pack_uints(values, width):
    """Fixed-width little-endian bit packing of non-negative integers."""
    values = np.asarray(values, dtype=np.uint64)
    if width < 1 or width > 64:
        raise ValueError("width must be in [1, 64]")
    if len(values) and width < 64 and int(values.max()) >> width:
        raise ValueError(f"value does not fit in {width} bits")
    shifts = np.arange(width, dtype=np.uint64)
    bits = ((values[:, None] >> shifts) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bits.ravel(), bitorder="little").tobytes()


def unpack_uints(buf, count, width):
    """Inverse of ``pack_uints``; ``buf`` must hold at least count * width bits."""
    nbytes = (count * width + 7) // 8
    if len(buf) < nbytes:
        raise IndexFormatError("truncated packed integer array")
    bits = np.unpackbits(np.frombuffer(buf, dtype=np.uint8, count=nbytes),
                         bitorder="little", count=count * width)
    bits = bits.reshape(count, width).astype(np.uint64)
    return (bits << np.arange(width, dtype=np.uint64)).sum(axis=1, dtype=np.uint64)


_BYTE_TABLES = {}


def _byte_tables(b):
    """Decoding tables for b-bit blocks, one per byte of the block.

    Colex order compares subsets by their largest differing element, so the
    c-subsets that agree on byte k (positions 8k..8k+7) and have nothing
    set above it occupy one contiguous run of offsets.  ``tables[k][c]`` is
    (run starts ascending, byte patterns, popcounts) over all patterns that
    leave at most 8k ones for the lower bytes.
    """
    if b in _BYTE_TABLES:
        return _BYTE_TABLES[b]
    tables = []
    for base in range(0, b, 8):
        w = min(8, b - base)
        pats = np.arange(1 << w, dtype=np.int64)
        bits = (pats[:, None] >> np.arange(w)) & 1
        above = np.cumsum(bits[:, ::-1], axis=1)[:, ::-1] - bits   # ones strictly above each position
        count = bits.sum(axis=1)
        binom = _BINOM_NP[base : base + w]                             # rows: position, cols: k
        per_c = []
        for c in range(b + 1):
            ok = (count <= c) & (c - count <= base)
            t = np.clip(c - above, 0, 64)
            terms = np.where(bits == 1, binom[np.arange(w)[None, :], t], 0).astype(np.uint64)
            contrib = terms.sum(axis=1, dtype=np.uint64)[ok]
            order = np.argsort(contrib, kind="stable")
            per_c.append((contrib[order].tolist(), pats[ok][order].tolist(), count[ok][order].tolist()))
        tables.append(per_c)
    _BYTE_TABLES[b] = tables
    return tables


def _check_bounds(i, n, inclusive):
    limit = n if inclusive else n - 1
    if i < 0 or i > limit:
        raise IndexError(f"position {i} out of range for bitvector of length {n}")


class PlainBitVector:
    """Uncompressed bitvector with a two-level rank directory."""

    kind = "plain"
    block_size = 0

    def __init__(self, bits):
        bits = _as_bits(bits)
        self.length = n = len(bits)
        # one spare word so rank1(length) never reads past the end
        self._words_np = _pack_words(bits, min_words=(n >> 6) + 1)
        self._build_directory()

    def _build_directory(self):
        counts = np.bitwise_count(self._words_np).astype(np.int64)
        nwords = len(counts)
        before = np.concatenate(([0], np.cumsum(counts)[:-1]))
        samples = before[::_WORDS_PER_SAMPLE]
        sub = before - np.repeat(samples, _WORDS_PER_SAMPLE)[:nwords]
        self.ones = int(counts.sum())
        self._samples_np = samples
        self._sub_np = sub.astype(np.uint16)
        self._words = self._words_np.tolist()
        self._samples = samples.tolist()
        self._sub = self._sub_np.tolist()

    def __len__(self):
        return self.length

    def rank1(self, i):
        """Number of set bits in positions [0, i)."""
        if i < 0 or i > self.length:
            _check_bounds(i, self.length, True)
        w = i >> 6
        r = self._samples[w >> 3] + self._sub[w]
        rem = i & 63
        if rem:
            r += (self._words[w] & ((1 << rem) - 1)).bit_count()
        return r

    def rank0(self, i):
        return i - self.rank1(i)

    def access(self, i):
        if i < 0 or i >= self.length:
            _check_bounds(i, self.length, False)
        return (self._words[i >> 6] >> (i & 63)) & 1

    __getitem__ = access

    def access_rank(self, i):
        """(bit i, rank1(i)) in one pass."""
        return self.access(i), self.rank1(i)

    def to_numpy(self):
        raw = np.unpackbits(self._words_np.view(np.uint8), bitorder="little")
        return raw[: self.length].astype(bool)

    def size_breakdown(self):
        data = ((self.length + 63) // 64) * 64
        return {
            "header": 72,
            "bits": data,
            "rank_samples": len(self._samples) * 64,
            "sub_counts": len(self._sub) * 16,
        }

    def size_bits(self):
        return sum(self.size_breakdown().values())

    def to_bytes(self):
        nbytes = (self.length + 7) // 8
        payload = self._words_np.view(np.uint8)[:nbytes].tobytes()
        return struct.pack("<QB", self.length, 0) + payload

    @classmethod
    def _from_buffer(cls, buf, pos, length):
        nbytes = (length + 7) // 8
        raw = np.frombuffer(buf, dtype=np.uint8, count=nbytes, offset=pos)
        bits = np.unpackbits(raw, bitorder="little", count=length).astype(bool)
        return cls(bits), pos + nbytes


class RrrBitVector:
    """Compressed (class, offset) bitvector with superblock rank samples."""

    kind = "rrr"

    def __init__(self, bits, b=63):
        if b not in RRR_BLOCK_SIZES:
            raise ConfigurationError(f"unsupported RRR block size {b}; use one of {RRR_BLOCK_SIZES}")
        bits = _as_bits(bits)
        self.block_size = b
        self.length = n = len(bits)
        nb = (n + b - 1) // b
        padded = np.zeros(nb * b, dtype=bool)
        padded[:n] = bits
        blocks = padded.reshape(nb, b)

        classes = blocks.sum(axis=1, dtype=np.int64)
        widths_table = self.offset_widths(b)
        widths = widths_table[classes]
        offsets = np.empty(nb, dtype=np.uint64)
        cols = np.arange(b)
        for start in range(0, nb, _CHUNK_BLOCKS):
            chunk = blocks[start : start + _CHUNK_BLOCKS]
            ones_upto = np.cumsum(chunk, axis=1)
            terms = _BINOM_NP[cols, ones_upto] * chunk
            offsets[start : start + len(chunk)] = terms.sum(axis=1, dtype=np.uint64)

        self._classes_np = classes.astype(np.uint8)
        self._offset_bits = int(widths.sum())
        self._words_np = self._pack_offsets(offsets, widths)
        sb_idx = np.arange(0, nb, SUPERBLOCK_BLOCKS)
        rank_before = np.concatenate(([0], np.cumsum(classes)))
        pos_before = np.concatenate(([0], np.cumsum(widths)))
        self._sb_rank_np = rank_before[sb_idx].astype(np.int64)
        self._sb_pos_np = pos_before[sb_idx].astype(np.int64)
        self.ones = int(rank_before[-1])
        self._init_views()

    @staticmethod
    def class_width(b):
        return math.ceil(math.log2(b + 1))

    @staticmethod
    def offset_widths(b):
        """Bits needed for the offset of each class: ceil(lg C(b, c))."""
        return np.array([(math.comb(b, c) - 1).bit_length() for c in range(b + 1)], dtype=np.int64)

    @staticmethod
    def table_bits(b):
        """Size of the shared binomial table used to decode offsets (a per-b constant)."""
        return (b + 1) * (b + 1) * 64

    @staticmethod
    def _pack_offsets(offsets, widths):
        total = int(widths.sum())
        nwords = total // 64 + 2
        if total == 0:
            return np.zeros(nwords, dtype=np.uint64)
        shifts = np.arange(64, dtype=np.uint64)
        pieces = []
        for start in range(0, len(offsets), _CHUNK_BLOCKS):
            off = offsets[start : start + _CHUNK_BLOCKS]
            w = widths[start : start + _CHUNK_BLOCKS]
            mat = ((off[:, None] >> shifts) & np.uint64(1)).astype(bool)
            keep = np.arange(64)[None, :] < w[:, None]
            pieces.append(mat[keep])
        stream = np.concatenate(pieces)
        return _pack_words(stream, min_words=nwords)

    def _init_views(self):
        b = self.block_size
        self._cls = self._classes_np.tolist()
        self._words = self._words_np.tolist()
        self._sb_rank = self._sb_rank_np.tolist()
        self._sb_pos = self._sb_pos_np.tolist()
        self._ow = self.offset_widths(b).tolist()
        self._bytes = _byte_tables(b)

    def __len__(self):
        return self.length

    def _locate(self, blk):
        """Rank before block ``blk`` and the bit position of its offset."""
        sb = blk >> 5
        first = sb << 5
        rank = self._sb_rank[sb]
        pos = self._sb_pos[sb]
        if blk > first:
            run = self._cls[first:blk]
            rank += sum(run)
            pos += sum(map(self._ow.__getitem__, run))
        return rank, pos

    def _offset(self, pos, width):
        wi = pos >> 6
        sh = pos & 63
        v = self._words[wi] >> sh
        if sh + width > 64:
            v |= self._words[wi + 1] << (64 - sh)
        return v & ((1 << width) - 1)

    def _tail(self, o, c, r):
        """For a block (class c, offset o): ones at positions >= r and the bit at r.

        Decodes one byte of the block per table lookup, from the top byte
        down to the byte holding position r.
        """
        tables = self._bytes
        k = len(tables) - 1
        ones = 0
        while True:
            base = k << 3
            starts, patterns, counts = tables[k][c]
            i = bisect_right(starts, o) - 1
            h = patterns[i]
            if base <= r:
                h >>= r - base
                return ones + h.bit_count(), h & 1
            o -= starts[i]
            pc = counts[i]
            ones += pc
            c -= pc
            if c == 0:
                return ones, 0
            k -= 1

    def rank1(self, i):
        """Number of set bits in positions [0, i)."""
        if i < 0 or i > self.length:
            _check_bounds(i, self.length, True)
        b = self.block_size
        blk, r = divmod(i, b)
        cls = self._cls
        if r == 0 and blk == len(cls):
            return self.ones
        # everything below is _locate/_offset/_tail inlined; this is the hot path
        sb = blk >> 5
        first = sb << 5
        rank = self._sb_rank[sb]
        if blk > first:
            run = cls[first:blk]
            rank += sum(run)
        else:
            run = ()
        c = cls[blk]
        if r == 0 or c == 0:
            return rank
        if c == b:
            return rank + r
        ow = self._ow
        pos = self._sb_pos[sb] + sum(map(ow.__getitem__, run))
        width = ow[c]
        words = self._words
        wi = pos >> 6
        sh = pos & 63
        o = words[wi] >> sh
        if sh + width > 64:
            o |= words[wi + 1] << (64 - sh)
        o &= (1 << width) - 1
        tables = self._bytes
        k = len(tables) - 1
        while True:
            starts, patterns, counts = tables[k][c]
            j = bisect_right(starts, o) - 1
            base = k << 3
            if base <= r:
                return rank + c - (patterns[j] >> (r - base)).bit_count()
            o -= starts[j]
            c -= counts[j]
            if c == 0:
                return rank
            k -= 1

    def rank0(self, i):
        return i - self.rank1(i)

    def access_rank(self, i):
        """(bit i, rank1(i)) with a single block decode."""
        if i < 0 or i >= self.length:
            _check_bounds(i, self.length, False)
        b = self.block_size
        blk, r = divmod(i, b)
        rank, pos = self._locate(blk)
        c = self._cls[blk]
        if c == 0:
            return 0, rank
        if c == b:
            return 1, rank + r
        ones_hi, bit = self._tail(self._offset(pos, self._ow[c]), c, r)
        return bit, rank + c - ones_hi

    def access(self, i):
        return self.access_rank(i)[0]

    __getitem__ = access

    def block(self, j):
        """Decode block ``j`` to its b-bit integer value."""
        b = self.block_size
        c = self._cls[j]
        _, pos = self._locate(j)
        o = self._offset(pos, self._ow[c])
        word = 0
        for p in range(b - 1, -1, -1):
            if c == 0:
                break
            v = _BINOM[p][c]
            if o >= v:
                word |= 1 << p
                o -= v
                c -= 1
        return word

    def to_numpy(self):
        b = self.block_size
        nb = len(self._cls)
        words = np.array([self.block(j) for j in range(nb)], dtype=np.uint64)
        mat = (words[:, None] >> np.arange(b, dtype=np.uint64)) & np.uint64(1)
        return mat.astype(bool).ravel()[: self.length]

    def size_breakdown(self):
        """Bits per component; ``classes`` and ``offsets`` are the entropy-bound payload, the rest is auxiliary."""
        b = self.block_size
        nb = len(self._cls)
        return {
            "header": 72,
            "classes": nb * self.class_width(b),
            "offsets": self._offset_bits,
            "superblocks": len(self._sb_rank) * 128,
        }

    def size_bits(self):
        return sum(self.size_breakdown().values())

    def offset_rounding_bits(self):
        """Excess of stored offset bits over sum of lg C(b, c_j)."""
        b = self.block_size
        exact = sum(math.log2(math.comb(b, c)) for c in self._cls)
        return self._offset_bits - exact

    def to_bytes(self):
        b = self.block_size
        cw = self.class_width(b)
        cls = self._classes_np.astype(np.uint64)
        cls_bits = ((cls[:, None] >> np.arange(cw, dtype=np.uint64)) & np.uint64(1)).astype(bool).ravel()
        samples = np.empty((len(self._sb_rank_np), 2), dtype="<i8")
        samples[:, 0] = self._sb_rank_np
        samples[:, 1] = self._sb_pos_np
        off_bytes = (self._offset_bits + 7) // 8
        return b"".join(
            (
                struct.pack("<QB", self.length, b),
                np.packbits(cls_bits, bitorder="little").tobytes(),
                samples.tobytes(),
                self._words_np.view(np.uint8)[:off_bytes].tobytes(),
            )
        )

    @classmethod
    def _from_buffer(cls, buf, pos, length, b):
        if b not in RRR_BLOCK_SIZES:
            raise IndexFormatError(f"bad RRR block size {b}")
        self = cls.__new__(cls)
        self.block_size = b
        self.length = length
        nb = (length + b - 1) // b
        cw = cls.class_width(b)
        nbytes = (nb * cw + 7) // 8
        raw = np.frombuffer(buf, dtype=np.uint8, count=nbytes, offset=pos)
        pos += nbytes
        cbits = np.unpackbits(raw, bitorder="little", count=nb * cw).reshape(nb, cw)
        classes = (cbits.astype(np.int64) << np.arange(cw)).sum(axis=1)
        if nb and classes.max() > b:
            raise IndexFormatError("RRR class exceeds block size")
        nsb = (nb + SUPERBLOCK_BLOCKS - 1) // SUPERBLOCK_BLOCKS
        samples = np.frombuffer(buf, dtype="<i8", count=2 * nsb, offset=pos).reshape(nsb, 2)
        pos += 16 * nsb
        widths = cls.offset_widths(b)[classes]
        total = int(widths.sum())
        off_bytes = (total + 7) // 8
        raw = np.frombuffer(buf, dtype=np.uint8, count=off_bytes, offset=pos)
        pos += off_bytes
        words = np.zeros((total // 64 + 2) * 8, dtype=np.uint8)
        words[:off_bytes] = raw
        self._classes_np = classes.astype(np.uint8)
        self._offset_bits = total
        self._words_np = words.view("<u8")
        self._sb_rank_np = samples[:, 0].copy()
        self._sb_pos_np = samples[:, 1].copy()
        self.ones = int(classes.sum())
        self._init_views()
        return self, pos


def build_plain(bits):
    return PlainBitVector(bits)


def build_rrr(bits, b=63):
    return RrrBitVector(bits, b)


def read_bitvector(buf, pos=0):
    """Decode one serialized bitvector starting at ``pos``; returns (vector, next_pos)."""
    if len(buf) - pos < 9:
        raise IndexFormatError("truncated bitvector header")
    length, b = struct.unpack_from("<QB", buf, pos)
    pos += 9
    try:
        if b == 0:
            return PlainBitVector._from_buffer(buf, pos, length)
        return RrrBitVector._from_buffer(buf, pos, length, b)
    except ValueError as exc:
        if isinstance(exc, IndexFormatError):
            raise
        raise IndexFormatError(f"truncated bitvector payload: {exc}") from exc
