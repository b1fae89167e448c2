"""Huffman-shaped wavelet tree over plain or RRR bitvectors."""

import heapq
import itertools
import struct
from collections import Counter

import numpy as np

from . import instrument
from .errors import IndexFormatError
from .succinct import PlainBitVector, RrrBitVector, read_bitvector

__all__ = ["HuffmanCode", "HuffmanWaveletTree", "build_hwt"]


class HuffmanCode:
    """Prefix code built from symbol frequencies.

    Ties are broken by creation order (leaves are created in ascending symbol
    order, merged nodes after them), and the node popped first becomes the
    0-child.  The resulting code is therefore a pure function of the
    frequency table.
    """

    def __init__(self, freqs):
        freqs = {int(s): int(f) for s, f in freqs.items() if f > 0}
        if not freqs:
            raise ValueError("Huffman code needs at least one symbol with positive frequency")
        self.freqs = freqs
        order = itertools.count()
        heap = [(f, next(order), s) for s, f in sorted(freqs.items())]
        heapq.heapify(heap)
        while len(heap) > 1:
            f0, _, left = heapq.heappop(heap)
            f1, _, right = heapq.heappop(heap)
            heapq.heappush(heap, (f0 + f1, next(order), (left, right)))
        self.root = heap[0][2]
        self.codes = {}
        stack = [(self.root, 0, 0)]
        while stack:
            node, length, bits = stack.pop()
            if isinstance(node, tuple):
                stack.append((node[1], length + 1, (bits << 1) | 1))
                stack.append((node[0], length + 1, bits << 1))
            else:
                self.codes[node] = (length, bits)

    @classmethod
    def from_sequence(cls, seq):
        values, counts = np.unique(np.asarray(seq, dtype=np.int64), return_counts=True)
        return cls(dict(zip(values.tolist(), counts.tolist())))

    @classmethod
    def from_codes(cls, codes):
        """Rebuild from a {symbol: (length, bits)} table (deserialization)."""
        self = cls.__new__(cls)
        self.freqs = None
        self.codes = dict(codes)
        if len(codes) == 1:
            self.root = next(iter(codes))
            return self
        trie = {}
        for sym, (length, bits) in codes.items():
            if length == 0:
                raise IndexFormatError("zero-length code in a multi-symbol table")
            node = trie
            for d in range(length - 1, 0, -1):
                node = node.setdefault((bits >> d) & 1, {})
                if not isinstance(node, dict):
                    raise IndexFormatError("Huffman table is not prefix-free")
            if (bits & 1) in node:
                raise IndexFormatError("Huffman table is not prefix-free")
            node[bits & 1] = sym

        def to_tuple(node):
            if not isinstance(node, dict):
                return node
            if set(node) != {0, 1}:
                raise IndexFormatError("Huffman table does not describe a full binary tree")
            return (to_tuple(node[0]), to_tuple(node[1]))

        self.root = to_tuple(trie)
        return self

    def code_string(self, symbol):
        length, bits = self.codes[symbol]
        return format(bits, f"0{length}b") if length else ""

    def depth(self, symbol):
        return self.codes[symbol][0]

    def average_length(self, freqs=None):
        freqs = freqs or self.freqs
        total = sum(freqs.values())
        return sum(f * self.codes[s][0] for s, f in freqs.items()) / total


class HuffmanWaveletTree:
    """Wavelet tree whose shape is the Huffman tree of the stored sequence.

    ``kind`` selects the node bitvector: ``"rrr"`` (with ``block_size``) or
    ``"plain"``.
    """

    def __init__(self, seq, kind="rrr", block_size=63):
        seq = np.asarray(seq, dtype=np.int64)
        if seq.ndim != 1 or len(seq) == 0:
            raise ValueError("wavelet tree needs a non-empty 1-d sequence")
        if kind not in ("rrr", "plain"):
            raise ValueError(f"unknown bitvector kind {kind!r}")
        self.kind = kind
        self.block_size = block_size if kind == "rrr" else 0
        self.n = len(seq)
        self.code = HuffmanCode.from_sequence(seq)
        self.nodes = []
        self.children = []
        if isinstance(self.code.root, tuple):
            self._build(seq)
        self._init_paths()

    def _make_bv(self, bits):
        if self.kind == "rrr":
            return RrrBitVector(bits, self.block_size)
        return PlainBitVector(bits)

    def _build(self, seq):
        maxsym = max(self.code.codes)
        code_len = np.zeros(maxsym + 1, dtype=np.int64)
        code_bits = np.zeros(maxsym + 1, dtype=np.uint64)
        for s, (length, bits) in self.code.codes.items():
            code_len[s] = length
            code_bits[s] = bits
        # preorder; children patched once their index is known
        stack = [(self.code.root, seq, 0, None, 0)]
        while stack:
            node, sub, depth, parent, side = stack.pop()
            if not isinstance(node, tuple):
                self.children[parent][side] = ~node
                continue
            idx = len(self.nodes)
            if parent is not None:
                self.children[parent][side] = idx
            shift = (code_len[sub] - 1 - depth).astype(np.uint64)
            bits = ((code_bits[sub] >> shift) & np.uint64(1)).astype(bool)
            self.nodes.append(self._make_bv(bits))
            self.children.append([None, None])
            stack.append((node[1], sub[bits], depth + 1, idx, 1))
            stack.append((node[0], sub[~bits], depth + 1, idx, 0))

    def _init_paths(self):
        self._paths = {}
        for s, (length, bits) in self.code.codes.items():
            path = []
            node = 0
            for d in range(length - 1, -1, -1):
                bit = (bits >> d) & 1
                path.append((self.nodes[node], bit))
                node = self.children[node][bit]
            self._paths[s] = path
        self._single = None if self.nodes else next(iter(self.code.codes))

    # --- queries -----------------------------------------------------------

    @property
    def alphabet(self):
        return sorted(self.code.codes)

    def __len__(self):
        return self.n

    def __contains__(self, symbol):
        return symbol in self._paths

    def depth(self, symbol):
        """Code length of ``symbol`` (= bitvector ranks per ``rank`` call); None if absent."""
        path = self._paths.get(symbol)
        return None if path is None else len(path)

    def access(self, i):
        """Symbol at position ``i``."""
        if i < 0 or i >= self.n:
            raise IndexError(f"position {i} out of range for sequence of length {self.n}")
        ops = instrument.current()
        if ops is not None:
            ops.wt_accesses += 1
        if self._single is not None:
            return self._single
        node = 0
        nodes, children = self.nodes, self.children
        steps = 0
        while True:
            bit, r1 = nodes[node].access_rank(i)
            steps += 1
            i = r1 if bit else i - r1
            node = children[node][bit]
            if node < 0:
                if ops is not None:
                    ops.bit_accesses += steps
                return ~node

    __getitem__ = access

    def rank(self, symbol, i):
        """Occurrences of ``symbol`` in positions [0, i).

        Symbols absent from the tree answer 0 without descending; use
        ``symbol in tree`` to tell an absent symbol from a zero count.
        """
        if i < 0 or i > self.n:
            raise IndexError(f"position {i} out of range for sequence of length {self.n}")
        path = self._paths.get(symbol)
        ops = instrument.current()
        if ops is not None:
            ops.wt_ranks += 1
        if path is None:
            return 0
        if ops is not None:
            ops.bit_ranks += len(path)
        for bv, bit in path:
            r1 = bv.rank1(i)
            i = r1 if bit else i - r1
        return i

    def to_numpy(self):
        return np.array([self.access(i) for i in range(self.n)], dtype=np.int64)

    # --- size and serialization ------------------------------------------

    def bitvector_lengths(self):
        return [len(bv) for bv in self.nodes]

    def code_table_bits(self):
        return 32 + len(self.code.codes) * (32 + 8 + 64)

    def size_breakdown(self):
        """Bits per component summed over all node bitvectors, plus the code table."""
        total = Counter()
        for bv in self.nodes:
            total.update(bv.size_breakdown())
        out = dict(total)
        out["code_table"] = self.code_table_bits()
        return out

    def size_bits(self):
        return sum(self.size_breakdown().values())

    def to_bytes(self):
        parts = [struct.pack("<QBBI", self.n, 1 if self.kind == "rrr" else 0,
                             self.block_size, len(self.code.codes))]
        for s in sorted(self.code.codes):
            length, bits = self.code.codes[s]
            parts.append(struct.pack("<IBQ", s, length, bits))
        parts.extend(bv.to_bytes() for bv in self.nodes)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, buf, pos=0):
        try:
            n, is_rrr, b, count = struct.unpack_from("<QBBI", buf, pos)
            pos += 14
            codes = {}
            for _ in range(count):
                s, length, bits = struct.unpack_from("<IBQ", buf, pos)
                pos += 13
                if length > 64:
                    raise IndexFormatError("Huffman code longer than 64 bits")
                codes[s] = (length, bits)
        except struct.error as exc:
            raise IndexFormatError(f"truncated wavelet tree header: {exc}") from exc
        if not codes:
            raise IndexFormatError("empty Huffman table")
        self = cls.__new__(cls)
        self.kind = "rrr" if is_rrr else "plain"
        self.block_size = b
        self.n = n
        self.code = HuffmanCode.from_codes(codes)
        self.nodes = []
        self.children = []
        stack = [(self.code.root, None, 0)]
        while stack:
            node, parent, side = stack.pop()
            if not isinstance(node, tuple):
                if parent is not None:
                    self.children[parent][side] = ~node
                continue
            idx = len(self.nodes)
            if parent is not None:
                self.children[parent][side] = idx
            bv, pos = read_bitvector(buf, pos)
            self.nodes.append(bv)
            self.children.append([None, None])
            stack.append((node[1], idx, 1))
            stack.append((node[0], idx, 0))
        if self.nodes and len(self.nodes[0]) != n:
            raise IndexFormatError("root bitvector length does not match sequence length")
        self._init_paths()
        return self, pos


def build_hwt(seq, kind="rrr", block_size=63):
    return HuffmanWaveletTree(seq, kind, block_size)
