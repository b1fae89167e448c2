"""ET-graph, relative movement labels, labeled BWT and correction terms.

The graph has an edge ``(w', w)`` whenever ``w`` immediately precedes ``w'``
in the trajectory string (cyclically, so the pair ``# -> T[0]`` is present).
Since trajectories are stored reversed, ``w' -> w`` is the travel order.
Out-lists are kept in CSR form; the 1-based position of a target inside the
out-list of ``w'`` *is* its label ``phi(w | w')``.
"""

import struct
from bisect import bisect_left
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ConsistencyError, IndexFormatError
from .succinct import bit_width, pack_uints, unpack_uints
from .text import EDGE_BASE, BwtText, TrajectoryString, c_array, h0

__all__ = [
    "LabelStrategy",
    "EtGraph",
    "LabeledBwt",
    "build_et_graph",
    "assign_rml",
    "label_bwt",
    "compute_corrections",
    "assign_mel",
    "mel_label_bwt",
    "apply_mel",
    "label_counts",
    "mixture_entropy",
]


@dataclass(frozen=True)
class LabelStrategy:
    """``bigram``: most frequent successor gets label 1 (ties by symbol id).
    ``random``: a seeded shuffle of each out-list.
    ``mel``: one context-free label per symbol (comparison baseline)."""

    name: str = "bigram"
    seed: int = 0

    def __post_init__(self):
        if self.name not in ("bigram", "random", "mel"):
            raise ConfigurationError(f"unknown labeling strategy {self.name!r}")

    @classmethod
    def bigram(cls):
        return cls("bigram")

    @classmethod
    def random(cls, seed=0):
        return cls("random", seed)

    @classmethod
    def mel(cls):
        return cls("mel")


class EtGraph:
    """Empirical transition graph with per-edge labels, counts and corrections."""

    def __init__(self, sigma, offsets, targets, counts, c, z=None, labeled=False, label_values=None):
        self.sigma = int(sigma)
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.targets = np.asarray(targets, dtype=np.int64)
        self.counts = None if counts is None else np.asarray(counts, dtype=np.int64)
        self.c = np.asarray(c, dtype=np.int64)
        self.z = None if z is None else np.asarray(z, dtype=np.int64)
        self.labeled = labeled
        self._off = self.offsets.tolist()
        self._tgt = self.targets.tolist()
        self._z = None if z is None else self.z.tolist()
        self._c = self.c.tolist()
        # explicit per-edge labels (sorted within each out-list); None = positional
        self.label_values = None if label_values is None else np.asarray(label_values, dtype=np.int64)
        self._lab = self.positions().tolist()

    # --- structure ---------------------------------------------------------

    @property
    def num_edges(self):
        return len(self.targets)

    def out_degrees(self):
        return np.diff(self.offsets)

    def out(self, wp):
        """Out-list of ``wp`` in label order."""
        return self._tgt[self._off[wp] : self._off[wp + 1]]

    def out_degree(self, wp):
        return self._off[wp + 1] - self._off[wp]

    @property
    def delta(self):
        """Maximum out-degree over all vertices (the label alphabet bound)."""
        deg = self.out_degrees()
        return int(deg.max()) if len(deg) else 0

    @property
    def d_bar(self):
        """Average out-degree over vertices that have successors."""
        deg = self.out_degrees()
        active = deg[deg > 0]
        return float(active.mean()) if len(active) else 0.0

    def road_delta(self):
        """Maximum number of edge-symbol successors of an edge symbol (sentinels excluded)."""
        src = np.repeat(np.arange(self.sigma), self.out_degrees())
        mask = (src >= EDGE_BASE) & (self.targets >= EDGE_BASE)
        if not mask.any():
            return 0
        return int(np.bincount(src[mask], minlength=self.sigma).max())

    def sources(self):
        return np.repeat(np.arange(self.sigma, dtype=np.int64), self.out_degrees())

    def positions(self):
        """Label of every edge in CSR order (by default its 1-based out-list position)."""
        if self.label_values is not None:
            return self.label_values
        return np.arange(self.num_edges, dtype=np.int64) - np.repeat(self.offsets[:-1], self.out_degrees()) + 1

    def edge_slot(self, w, wp):
        """CSR index of edge (wp, w) by linear scan of the out-list, or None."""
        tgt = self._tgt
        for k in range(self._off[wp], self._off[wp + 1]):
            if tgt[k] == w:
                return k
        return None

    def label(self, w, wp):
        """phi(w | wp), or None when wp -> w was never observed."""
        k = self.edge_slot(w, wp)
        return None if k is None else self._lab[k]

    def decode(self, eta, wp):
        """Inverse of ``label``: the successor of ``wp`` carrying label ``eta``."""
        lo, hi = self._off[wp], self._off[wp + 1]
        if self.label_values is None:
            if eta < 1 or lo + eta > hi:
                raise KeyError(f"label {eta} not used by vertex {wp}")
            return self._tgt[lo + eta - 1]
        k = bisect_left(self._lab, eta, lo, hi)
        if k == hi or self._lab[k] != eta:
            raise KeyError(f"label {eta} not used by vertex {wp}")
        return self._tgt[k]

    def correction(self, wp, w):
        k = self.edge_slot(w, wp)
        if k is None:
            raise KeyError(f"no edge {wp} -> {w}")
        return self._z[k]

    def context_of(self, j):
        """Vertex w' with C[w'] <= j < C[w' + 1] (binary search over C)."""
        c = self._c
        lo, hi = 0, self.sigma - 1
        while lo < hi:
            mid = (lo + hi + 1) >> 1
            if c[mid] <= j:
                lo = mid
            else:
                hi = mid - 1
        return lo

    # --- size and serialization -------------------------------------------
    # Layout: <IQBBBBB> (sigma, edge count, five field widths), then four
    # bit-packed arrays: C[0..sigma), out-degrees, targets, zigzag(Z), and
    # explicit labels when present (label width 0 means positional labels).

    def _widths(self):
        deg = self.out_degrees()
        zz = _zigzag(self.z) if self.z is not None else np.zeros(0, dtype=np.uint64)
        return (
            bit_width(self.c[-1]),
            bit_width(deg.max() if len(deg) else 0),
            bit_width(self.sigma - 1),
            bit_width(zz.max() if len(zz) else 0),
            0 if self.label_values is None else bit_width(self.label_values.max() if self.num_edges else 0),
        )

    def size_breakdown(self):
        """Bits of the serialized form, by field."""
        w_c, w_deg, w_tgt, w_z, w_lab = self._widths()
        packed = lambda count, width: 8 * ((count * width + 7) // 8)
        out = {
            "vertex_c": packed(self.sigma, w_c),
            "vertex_degree": packed(self.sigma, w_deg),
            "edge_target": packed(self.num_edges, w_tgt),
            "edge_z": packed(self.num_edges, w_z),
            "header": 8 * _GRAPH_HEADER.size,
        }
        if w_lab:
            out["edge_label"] = packed(self.num_edges, w_lab)
        return out

    def size_bits(self):
        return sum(self.size_breakdown().values())

    def to_bytes(self):
        if self.z is None:
            raise ConsistencyError("correction terms must be computed before serialization")
        w_c, w_deg, w_tgt, w_z, w_lab = self._widths()
        parts = [
            _GRAPH_HEADER.pack(self.sigma, self.num_edges, w_c, w_deg, w_tgt, w_z, w_lab),
            pack_uints(self.c[:-1], w_c),
            pack_uints(self.out_degrees(), w_deg),
            pack_uints(self.targets, w_tgt),
            pack_uints(_zigzag(self.z), w_z),
        ]
        if w_lab:
            parts.append(pack_uints(self.label_values, w_lab))
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, buf, pos, n):
        """Read the graph section; ``n`` (text length) supplies C[sigma]."""
        try:
            sigma, m, w_c, w_deg, w_tgt, w_z, w_lab = _GRAPH_HEADER.unpack_from(buf, pos)
        except struct.error as exc:
            raise IndexFormatError(f"truncated ET-graph header: {exc}") from exc
        if not all(1 <= w <= 64 for w in (w_c, w_deg, w_tgt, w_z)) or w_lab > 64:
            raise IndexFormatError("invalid ET-graph field width")
        pos += _GRAPH_HEADER.size
        arrays = []
        fields = [(sigma, w_c), (sigma, w_deg), (m, w_tgt), (m, w_z)]
        if w_lab:
            fields.append((m, w_lab))
        for count, width in fields:
            nbytes = (count * width + 7) // 8
            if pos + nbytes > len(buf):
                raise IndexFormatError("truncated ET-graph section")
            arrays.append(unpack_uints(buf[pos : pos + nbytes], count, width).astype(np.int64))
            pos += nbytes
        c_head, deg, targets, zz = arrays[:4]
        labels = arrays[4] if w_lab else None
        c = np.append(c_head, n)
        if np.any(np.diff(c) < 0):
            raise IndexFormatError("C array is not non-decreasing")
        if int(deg.sum()) != m:
            raise IndexFormatError("out-degrees do not add up to the edge count")
        if m and targets.max() >= sigma:
            raise IndexFormatError("edge target outside the alphabet")
        offsets = np.concatenate(([0], np.cumsum(deg)))
        z = (zz.astype(np.uint64) >> np.uint64(1)).astype(np.int64) ^ -(zz & 1)
        return cls(sigma, offsets, targets, None, c, z=z, labeled=True, label_values=labels), pos


_GRAPH_HEADER = struct.Struct("<IQBBBBB")


def _zigzag(z):
    z = np.asarray(z, dtype=np.int64)
    return ((z << 1) ^ (z >> 63)).astype(np.uint64)


@dataclass(frozen=True)
class LabeledBwt:
    labels: np.ndarray

    def __len__(self):
        return len(self.labels)

    @property
    def sigma_label(self):
        """Label alphabet size (largest label in use)."""
        return int(self.labels.max())

    def h0(self):
        return h0(self.labels)


def _symbols_and_sigma(t):
    if isinstance(t, TrajectoryString):
        return t.symbols, t.sigma
    sym = np.asarray(t, dtype=np.int64)
    return sym, int(sym.max()) + 1


def build_et_graph(t):
    """ET-graph of a trajectory string with exact (cyclic) bigram counts; unlabeled."""
    sym, sigma = _symbols_and_sigma(t)
    succ = np.roll(sym, -1)                 # w' follows w in T
    keys, counts = np.unique(succ * sigma + sym, return_counts=True)
    src = keys // sigma
    tgt = keys % sigma
    offsets = np.concatenate(([0], np.cumsum(np.bincount(src, minlength=sigma))))
    return EtGraph(sigma, offsets, tgt, counts, c_array(sym, sigma))


def assign_rml(g, strategy=LabelStrategy()):
    """Reorder every out-list so that list position equals the label."""
    if isinstance(strategy, str):
        strategy = LabelStrategy(strategy)
    if strategy.name == "mel":
        raise ConfigurationError("context-free labels come from assign_mel / apply_mel")
    if g.counts is None:
        raise ConsistencyError("bigram counts are required to assign labels")
    src = g.sources()
    if strategy.name == "bigram":
        order = np.lexsort((g.targets, -g.counts, src))
    else:
        rng = np.random.default_rng(strategy.seed)
        order = np.lexsort((rng.random(g.num_edges), src))
    return EtGraph(g.sigma, g.offsets, g.targets[order], g.counts[order], g.c, labeled=True)


def _edge_lookup(g, ctx, sym):
    """CSR slot of edge (ctx[j], sym[j]) for each j; raises if any edge is missing."""
    sigma = g.sigma
    edge_keys = g.sources() * sigma + g.targets
    order = np.argsort(edge_keys)
    sorted_keys = edge_keys[order]
    want = ctx * sigma + sym
    pos = np.searchsorted(sorted_keys, want)
    pos = np.minimum(pos, len(sorted_keys) - 1)
    if not np.array_equal(sorted_keys[pos], want):
        raise ConsistencyError("BWT contains a transition missing from the ET-graph")
    return order[pos]


def label_bwt(bwt, g):
    """Replace every BWT symbol by its label relative to its context block."""
    if not g.labeled:
        raise ConsistencyError("labels must be assigned before labeling the BWT")
    slots = _edge_lookup(g, bwt.contexts(), bwt.bwt)
    return LabeledBwt(g.positions()[slots])


def _rank_at(seq, queries_sym, queries_pos):
    """rank_{queries_sym[k]}(seq, queries_pos[k]) for all k, vectorized."""
    n = len(seq)
    order = np.argsort(seq, kind="stable")
    keys = seq[order] * (n + 1) + order
    first = np.searchsorted(keys, queries_sym * (n + 1))
    return np.searchsorted(keys, queries_sym * (n + 1) + queries_pos) - first


def compute_corrections(bwt, labeled, g):
    """Z for every edge: rank_eta(labels, C[w']) - rank_w(bwt, C[w'])."""
    src = g.sources()
    boundary = g.c[src]
    sym_rank = _rank_at(np.asarray(bwt.bwt, dtype=np.int64), g.targets, boundary)
    lab_rank = _rank_at(np.asarray(labeled.labels, dtype=np.int64), g.positions(), boundary)
    return EtGraph(g.sigma, g.offsets, g.targets, g.counts, g.c, z=lab_rank - sym_rank,
                   labeled=True, label_values=g.label_values)


def label_counts(g):
    """Occurrences of each label in the labeled BWT, from bigram counts alone."""
    lab = g.positions()
    return np.bincount(lab, weights=g.counts, minlength=int(lab.max()) + 1 if len(lab) else 1)[1:]


def mixture_entropy(g):
    """Entropy of the mixture of per-context label distributions, weighted by context size."""
    counts = label_counts(g)
    counts = counts[counts > 0]
    p = counts / counts.sum()
    return float(-(p * np.log2(p)).sum())


def assign_mel(t, g):
    """Context-free labeling psi, injective on every out-list.

    Symbols are visited by decreasing frequency in ``t`` (ties by id) and each
    receives the smallest label not yet taken inside any out-list containing
    it.  This is an emulation-constraint baseline; returns an int array of
    length sigma (0 for symbols that never occur).
    """
    sym, sigma = _symbols_and_sigma(t)
    freq = np.bincount(sym, minlength=sigma)
    src = g.sources()
    by_target = np.argsort(g.targets, kind="stable")
    tgt_sorted = g.targets[by_target]
    starts = np.searchsorted(tgt_sorted, np.arange(sigma + 1))
    preds_of = src[by_target].tolist()
    starts = starts.tolist()
    # per-vertex "next free label" forests with path compression
    taken = [None] * sigma

    def next_free(v, x):
        table = taken[v]
        if table is None:
            return x
        root = x
        while root in table:
            root = table[root]
        while x != root:
            table[x], x = root, table[x]
        return root

    psi = np.zeros(sigma, dtype=np.int64)
    visit = np.lexsort((np.arange(sigma), -freq))
    for w in visit.tolist():
        if freq[w] == 0:
            continue
        preds = preds_of[starts[w] : starts[w + 1]]
        x = 1
        moved = True
        while moved:
            moved = False
            for v in preds:
                y = next_free(v, x)
                if y != x:
                    x, moved = y, True
        psi[w] = x
        for v in preds:
            if taken[v] is None:
                taken[v] = {}
            taken[v][x] = x + 1
    return psi


def apply_mel(g, psi):
    """Graph whose out-lists carry the context-free labels ``psi`` (sorted by label)."""
    if g.counts is None:
        raise ConsistencyError("bigram counts are required to assign labels")
    lab = np.asarray(psi, dtype=np.int64)[g.targets]
    order = np.lexsort((lab, g.sources()))
    return EtGraph(g.sigma, g.offsets, g.targets[order], g.counts[order], g.c,
                   labeled=True, label_values=lab[order])


def mel_label_bwt(bwt, psi):
    """Apply a context-free labeling symbol-wise."""
    return LabeledBwt(np.asarray(psi)[np.asarray(bwt.bwt if isinstance(bwt, BwtText) else bwt)])
