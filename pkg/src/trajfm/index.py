"""The labeled FM-index over trajectory strings, and the unlabeled baseline.

``SntIndex`` stores only the labeled BWT (in a Huffman-shaped wavelet tree)
and the ET-graph.  Ranks over the raw BWT are recovered with PseudoRank:
inside the context block of ``w'``,

    rank_w(T_bwt, j) = rank_eta(labels, j) - Z[w', w],   eta = phi(w | w')

which is all backward search and LF-mapping need.

Paths handed to the public API are in travel order (edge ids); the text
stores trajectories reversed, so the search pattern is the reversed path.
"""

import math
import struct
import time
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import instrument
from .errors import IndexFormatError, InvalidQueryError
from .labeling import (
    EtGraph,
    LabelStrategy,
    apply_mel,
    assign_mel,
    assign_rml,
    build_et_graph,
    compute_corrections,
    label_bwt,
)
from .text import EDGE_BASE, END, TrajectoryString, build_bwt, build_trajectory_string, h0
from .wavelet import HuffmanWaveletTree

__all__ = [
    "SuffixRange",
    "SntIndex",
    "BaselineFmIndex",
    "build_index",
    "build_baseline",
    "pseudo_rank",
    "suffix_range",
    "extract",
    "baseline_search",
    "count_occurrences",
    "load_index",
]

MAGIC = b"SNTX"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<QIIQBBBQ")   # n, sigma, sigma', N, b, strategy, flags, seed

FLAG_BASELINE = 1
FLAG_DEBUG = 2
FLAG_PLAIN = 4

_STRATEGY_TAGS = {"bigram": 0, "random": 1, "mel": 2, None: 255}
_TAG_STRATEGY = {v: k for k, v in _STRATEGY_TAGS.items()}


@dataclass(frozen=True)
class SuffixRange:
    """Half-open range [sp, ep) of sorted rotations."""

    sp: int
    ep: int

    @property
    def count(self):
        return self.ep - self.sp

    def __iter__(self):
        return iter(range(self.sp, self.ep))


def _path_to_pattern(path, num_edges):
    """Validate a travel-order path and turn it into the reversed symbol pattern."""
    try:
        edges = [int(e) for e in path]
    except (TypeError, ValueError):
        raise InvalidQueryError("path must be a sequence of integer edge ids") from None
    if not edges:
        raise InvalidQueryError("empty query path")
    for e in edges:
        if e < 0 or e >= num_edges:
            raise InvalidQueryError(f"edge id {e} outside the indexed alphabet [0, {num_edges})")
    return [e + EDGE_BASE for e in reversed(edges)]


class _IndexBase:
    """Shared plumbing: metadata, path validation, serialization framing."""

    backend = None

    def __init__(self, wt, graph, n, num_trajectories, strategy=None, text=None, sa=None):
        self.wt = wt
        self.graph = graph
        self.n = int(n)
        self.num_trajectories = int(num_trajectories)
        self.strategy = strategy
        self.text = text       # debug oracle only
        self.sa = sa           # debug oracle only
        self.build_times = {}
        self._c = graph._c

    @property
    def sigma(self):
        return self.graph.sigma

    @property
    def num_edges(self):
        return self.sigma - EDGE_BASE

    @property
    def block_size(self):
        return self.wt.block_size

    @property
    def has_oracle(self):
        return self.text is not None

    def count(self, path):
        rng = self.suffix_range(path)
        return 0 if rng is None else rng.count

    def symbol_counts(self):
        return np.diff(self.graph.c)

    def h0_text(self):
        """H0 of T (equal to H0 of its BWT), from the C array."""
        counts = self.symbol_counts()
        counts = counts[counts > 0].astype(np.float64)
        return float(np.sum(counts * np.log2(self.n / counts)) / self.n)

    def bits_per_symbol(self):
        return self.size_bits() / self.n

    def size_bits(self):
        return sum(self.size_breakdown().values())

    def extract_path(self, j, length):
        """Travel-order edges read backwards from row ``j``, stopping at a sentinel."""
        out = []
        for w in self._walk(j, length):
            if w < EDGE_BASE:
                break
            out.append(w - EDGE_BASE)
        return out

    def extract(self, j, length):
        """T[i - length, i) for i = SA[j], cyclically; raw symbols including sentinels."""
        if length < 0:
            raise ValueError("extraction length must be non-negative")
        out = [0] * length
        for k, w in enumerate(self._walk(j, length), start=1):
            out[length - k] = w
        return out

    def locate_text_start(self):
        """Row of the rotation starting at T[0] (its BWT symbol is the terminator).

        Binary search for the single position where rank of the terminator
        steps from 0 to 1.
        """
        lo, hi, rank_end = self._terminator_rows()
        hi -= 1
        while lo < hi:
            mid = (lo + hi) // 2
            if rank_end(mid + 1) >= 1:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def reconstruct(self):
        """The whole trajectory string, read backwards from the terminator row."""
        return self.extract(self.locate_text_start(), self.n)

    # --- serialization ---------------------------------------------------

    def _flags(self):
        flags = FLAG_BASELINE if self.backend == "baseline" else 0
        if self.has_oracle:
            flags |= FLAG_DEBUG
        if self.wt.kind == "plain":
            flags |= FLAG_PLAIN
        return flags

    def to_bytes(self):
        strat = self.strategy
        name = None if strat is None else strat.name
        seed = 0 if strat is None else strat.seed
        sigma_label = len(self.wt.code.codes)
        body = [
            MAGIC,
            struct.pack("<H", FORMAT_VERSION),
            _HEADER.pack(self.n, self.sigma, sigma_label, self.num_trajectories,
                         self.block_size, _STRATEGY_TAGS[name], self._flags(), seed),
            self.graph.to_bytes(),
            self.wt.to_bytes(),
        ]
        if self.has_oracle:
            body.append(np.asarray(self.text, dtype="<i8").tobytes())
            body.append(np.asarray(self.sa, dtype="<i8").tobytes())
        payload = b"".join(body)
        return payload + struct.pack("<I", zlib.crc32(payload))

    def save(self, path):
        Path(path).write_bytes(self.to_bytes())
        return Path(path)


class SntIndex(_IndexBase):
    """Labeled BWT in a Huffman-shaped wavelet tree plus the ET-graph."""

    backend = "snt"

    @classmethod
    def build(cls, trajectories, strategy=None, kind="rrr", block_size=63,
              num_edges=None, debug=False):
        """Build from travel-order trajectories (lists of edge ids) or a TrajectoryString."""
        strategy = _coerce_strategy(strategy)
        times = {}
        clock = time.perf_counter()

        def lap(name):
            nonlocal clock
            now = time.perf_counter()
            times[name] = now - clock
            clock = now

        t = _as_text(trajectories, num_edges)
        lap("trajectory_string")
        bwt = build_bwt(t, keep_sa=True)
        lap("suffix_sort")
        graph = build_et_graph(t)
        if strategy.name == "mel":
            graph = apply_mel(graph, assign_mel(t, graph))
        else:
            graph = assign_rml(graph, strategy)
        lap("et_graph")
        labeled = label_bwt(bwt, graph)
        lap("labeling")
        graph = compute_corrections(bwt, labeled, graph)
        lap("corrections")
        wt = HuffmanWaveletTree(labeled.labels, kind, block_size)
        lap("wavelet_tree")
        idx = cls(wt, graph, len(t), t.num_trajectories, strategy,
                  text=t.symbols if debug else None, sa=bwt.sa if debug else None)
        idx.build_times = times
        idx.build_info = {
            "h0_bwt": h0(bwt.bwt),
            "h0_labeled": labeled.h0(),
        }
        return idx

    @property
    def sigma_label(self):
        return max(self.wt.code.codes)

    @property
    def delta(self):
        return self.graph.delta

    @property
    def d_bar(self):
        return self.graph.d_bar

    def h0_labeled(self):
        counts = np.array([self.wt.rank(s, self.n) for s in self.wt.alphabet], dtype=np.float64)
        return float(np.sum(counts * np.log2(self.n / counts)) / self.n)

    def pseudo_rank(self, j, w, wp):
        """rank_w(T_bwt, j) from the labeled BWT; None outside its domain.

        Valid when ``wp -> w`` is an ET-graph edge and C[wp] <= j <= C[wp + 1].
        """
        c = self._c
        if not (0 <= wp < self.sigma) or not (c[wp] <= j <= c[wp + 1]):
            return None
        slot = self.graph.edge_slot(w, wp)
        if slot is None:
            return None
        return self._pseudo_rank_slot(j, slot, wp)

    def _pseudo_rank_slot(self, j, slot, wp):
        ops = instrument.current()
        if ops is not None:
            ops.pseudo_ranks += 1
        eta = self.graph._lab[slot]
        return self.wt.rank(eta, j) - self.graph._z[slot]

    def search_pattern(self, pattern):
        """Backward search for a symbol pattern given in text order (labeled variant)."""
        c = self._c
        graph = self.graph
        m = len(pattern)
        w = pattern[m - 1]
        sp, ep = c[w], c[w + 1]
        if sp >= ep:
            return None
        for i in range(m - 2, -1, -1):
            wp = w
            w = pattern[i]
            slot = graph.edge_slot(w, wp)
            if slot is None:
                return None
            # both ends stay inside the context block of wp
            assert c[wp] <= sp <= c[wp + 1] and c[wp] <= ep <= c[wp + 1]
            sp = c[w] + self._pseudo_rank_slot(sp, slot, wp)
            ep = c[w] + self._pseudo_rank_slot(ep, slot, wp)
            if sp >= ep:
                return None
        return SuffixRange(sp, ep)

    def suffix_range(self, path):
        """Range of rotations matching a travel-order path of edge ids, or None."""
        return self.search_pattern(_path_to_pattern(path, self.num_edges))

    def _walk(self, j, length):
        if not 0 <= j < self.n:
            raise IndexError(f"row {j} out of range [0, {self.n})")
        graph = self.graph
        c = self._c
        wp = graph.context_of(j)
        for _ in range(length):
            w = graph.decode(self.wt.access(j), wp)
            yield w
            j = c[w] + self.pseudo_rank(j, w, wp)
            wp = w

    def _terminator_rows(self):
        src = self.graph.sources()
        hits = np.flatnonzero(self.graph.targets == END)
        if len(hits) != 1:
            raise IndexFormatError("terminator must have exactly one predecessor context")
        wp = int(src[hits[0]])
        return self._c[wp], self._c[wp + 1], lambda j: self.pseudo_rank(j, END, wp)

    def size_breakdown(self):
        out = {f"wt_{k}": v for k, v in self.wt.size_breakdown().items()}
        out.update({f"graph_{k}": v for k, v in self.graph.size_breakdown().items()})
        return out

    def stats(self):
        sizes = self.size_breakdown()
        wt_bits = sum(v for k, v in sizes.items() if k.startswith("wt_"))
        return {
            "backend": self.backend,
            "n": self.n,
            "sigma": self.sigma,
            "sigma_label": self.sigma_label,
            "delta": self.delta,
            "road_delta": self.graph.road_delta(),
            "d_bar": self.d_bar,
            "num_trajectories": self.num_trajectories,
            "block_size": self.block_size,
            "strategy": self.strategy.name if self.strategy else None,
            "h0_bwt": self.h0_text(),
            "h0_labeled": self.h0_labeled(),
            "size_bits": self.size_bits(),
            "wavelet_bits": wt_bits,
            "graph_bits": self.size_bits() - wt_bits,
            "bits_per_symbol": self.bits_per_symbol(),
            "build_times": dict(self.build_times),
        }


class BaselineFmIndex(_IndexBase):
    """Plain FM-index: the raw BWT in a Huffman-shaped wavelet tree plus C."""

    backend = "baseline"

    @classmethod
    def build(cls, trajectories, kind="rrr", block_size=63, num_edges=None, debug=False):
        times = {}
        t0 = time.perf_counter()
        t = _as_text(trajectories, num_edges)
        bwt = build_bwt(t, keep_sa=True)
        t1 = time.perf_counter()
        wt = HuffmanWaveletTree(bwt.bwt, kind, block_size)
        t2 = time.perf_counter()
        times["suffix_sort"] = t1 - t0
        times["wavelet_tree"] = t2 - t1
        sigma = t.sigma
        graph = EtGraph(sigma, np.zeros(sigma + 1, dtype=np.int64), np.zeros(0, dtype=np.int64),
                        None, bwt.c, z=np.zeros(0, dtype=np.int64))
        idx = cls(wt, graph, len(t), t.num_trajectories, None,
                  text=t.symbols if debug else None, sa=bwt.sa if debug else None)
        idx.build_times = times
        return idx

    def rank(self, w, j):
        return self.wt.rank(w, j)

    def search_pattern(self, pattern):
        """Classical backward search over T_bwt for a pattern in text order."""
        c = self._c
        for w in pattern:
            if not 0 <= w < self.sigma:
                return None
        m = len(pattern)
        w = pattern[m - 1]
        sp, ep = c[w], c[w + 1]
        if sp >= ep:
            return None
        for i in range(m - 2, -1, -1):
            w = pattern[i]
            sp = c[w] + self.wt.rank(w, sp)
            ep = c[w] + self.wt.rank(w, ep)
            if sp >= ep:
                return None
        return SuffixRange(sp, ep)

    def suffix_range(self, path):
        return self.search_pattern(_path_to_pattern(path, self.num_edges))

    def _walk(self, j, length):
        if not 0 <= j < self.n:
            raise IndexError(f"row {j} out of range [0, {self.n})")
        c = self._c
        for _ in range(length):
            w = self.wt.access(j)
            yield w
            j = c[w] + self.wt.rank(w, j)

    def _terminator_rows(self):
        return 0, self.n, lambda j: self.wt.rank(END, j)

    def size_breakdown(self):
        out = {f"wt_{k}": v for k, v in self.wt.size_breakdown().items()}
        graph = self.graph.size_breakdown()
        out["c_array"] = graph["vertex_c"]
        out["c_header"] = graph["header"]
        return out

    def stats(self):
        sizes = self.size_breakdown()
        return {
            "backend": self.backend,
            "n": self.n,
            "sigma": self.sigma,
            "num_trajectories": self.num_trajectories,
            "block_size": self.block_size,
            "h0_bwt": self.h0_text(),
            "size_bits": self.size_bits(),
            "wavelet_bits": sum(v for k, v in sizes.items() if k.startswith("wt_")),
            "bits_per_symbol": self.bits_per_symbol(),
            "build_times": dict(self.build_times),
        }


def _coerce_strategy(strategy):
    if strategy is None:
        return LabelStrategy()
    if isinstance(strategy, str):
        return LabelStrategy(strategy)
    return strategy


def _as_text(trajectories, num_edges):
    if isinstance(trajectories, TrajectoryString):
        return trajectories
    return build_trajectory_string(trajectories, num_edges)


def from_bytes(buf):
    """Deserialize either backend; validates magic, version and CRC32."""
    buf = bytes(buf)
    if len(buf) < 6 + _HEADER.size + 4 or buf[:4] != MAGIC:
        raise IndexFormatError("not an index file (bad magic)")
    payload, (crc,) = buf[:-4], struct.unpack("<I", buf[-4:])
    if zlib.crc32(payload) != crc:
        raise IndexFormatError("CRC32 mismatch: index file is corrupted")
    (version,) = struct.unpack_from("<H", buf, 4)
    if version != FORMAT_VERSION:
        raise IndexFormatError(f"unsupported index format version {version}")
    n, sigma, _sigma_label, num_traj, _b, tag, flags, seed = _HEADER.unpack_from(buf, 6)
    pos = 6 + _HEADER.size
    graph, pos = EtGraph.from_bytes(payload, pos, n)
    if graph.sigma != sigma:
        raise IndexFormatError("graph alphabet does not match header")
    wt, pos = HuffmanWaveletTree.from_bytes(payload, pos)
    if wt.n != n:
        raise IndexFormatError("wavelet tree length does not match header")
    text = sa = None
    if flags & FLAG_DEBUG:
        text = np.frombuffer(payload, dtype="<i8", count=n, offset=pos).astype(np.int64)
        pos += 8 * n
        sa = np.frombuffer(payload, dtype="<i8", count=n, offset=pos).astype(np.int64)
        pos += 8 * n
    if pos != len(payload):
        raise IndexFormatError("trailing bytes after index payload")
    if tag not in _TAG_STRATEGY:
        raise IndexFormatError(f"unknown strategy tag {tag}")
    name = _TAG_STRATEGY[tag]
    if flags & FLAG_BASELINE:
        return BaselineFmIndex(wt, graph, n, num_traj, None, text, sa)
    strategy = LabelStrategy(name, seed) if name else None
    return SntIndex(wt, graph, n, num_traj, strategy, text, sa)


def load_index(path):
    return from_bytes(Path(path).read_bytes())


# --- functional surface ----------------------------------------------------

def build_index(trajectories, strategy=None, kind="rrr", block_size=63, num_edges=None, debug=False):
    return SntIndex.build(trajectories, strategy, kind, block_size, num_edges, debug)


def build_baseline(trajectories, kind="rrr", block_size=63, num_edges=None, debug=False):
    return BaselineFmIndex.build(trajectories, kind, block_size, num_edges, debug)


def pseudo_rank(idx, j, w, wp):
    return idx.pseudo_rank(j, w, wp)


def suffix_range(idx, path):
    return idx.suffix_range(path)


def extract(idx, j, length):
    return idx.extract(j, length)


def baseline_search(idx, pattern):
    """Backward search on the raw BWT; ``pattern`` is in text order (encoded symbols)."""
    return idx.search_pattern(list(pattern))


def count_occurrences(idx, path):
    return idx.count(path)


def expected_rank_cost(idx):
    """Average code length of the stored sequence (bitvector ranks per symbol rank)."""
    code = idx.wt.code
    total = 0.0
    for s in code.codes:
        total += idx.wt.rank(s, idx.n) * code.codes[s][0]
    return total / idx.n if idx.n else math.nan
