"""Trajectory strings, suffix arrays, BWT and empirical entropies.

Symbols are small non-negative integers: ``#`` is 0, ``$`` is 1 and road
edge ``e`` is ``e + 2``, so numeric order is the lexicographic order
``# < $ < edges``.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputFormatError

__all__ = [
    "END",
    "SEP",
    "EDGE_BASE",
    "TrajectoryString",
    "BwtText",
    "build_trajectory_string",
    "suffix_array",
    "build_bwt",
    "c_array",
    "inverse_bwt",
    "h0",
    "hk",
    "read_trajectories",
    "parse_trajectories",
    "write_trajectories",
    "symbol_name",
]

END = 0        # '#', terminates the text
SEP = 1        # '$', closes each reversed trajectory
EDGE_BASE = 2


def symbol_name(s, names=None):
    """Human-readable form of an encoded symbol (``names`` maps edge id -> label)."""
    if s == END:
        return "#"
    if s == SEP:
        return "$"
    e = s - EDGE_BASE
    return names[e] if names is not None else str(e)


@dataclass(frozen=True)
class TrajectoryString:
    """Reversed trajectories joined as ``T1r $ T2r $ ... TNr $ #``."""

    symbols: np.ndarray
    num_trajectories: int
    sigma: int            # alphabet size including both sentinels

    def __len__(self):
        return len(self.symbols)

    @property
    def num_edges(self):
        return self.sigma - EDGE_BASE

    def trajectories(self):
        """Split on ``$`` and undo the reversal; inverse of construction."""
        sym = self.symbols
        seps = np.flatnonzero(sym == SEP)
        out = []
        start = 0
        for s in seps.tolist():
            out.append((sym[start:s][::-1] - EDGE_BASE).tolist())
            start = s + 1
        return out


def build_trajectory_string(trajectories, num_edges=None):
    """Assemble the trajectory string.

    ``num_edges`` fixes the edge alphabet (ids must be below it); by default
    it is ``max id + 1`` so that sigma = max id + 3.
    """
    trajectories = list(trajectories)
    if not trajectories:
        raise ValueError("need at least one trajectory")
    parts = []
    top = -1
    for k, traj in enumerate(trajectories):
        arr = np.asarray(traj, dtype=np.int64)
        if arr.ndim != 1 or len(arr) == 0:
            raise ValueError(f"trajectory {k} is empty")
        if arr.min() < 0:
            raise ValueError(f"trajectory {k} has a negative edge id")
        top = max(top, int(arr.max()))
        parts.append(arr[::-1] + EDGE_BASE)
        parts.append(np.array([SEP], dtype=np.int64))
    parts.append(np.array([END], dtype=np.int64))
    if num_edges is None:
        num_edges = top + 1
    elif top >= num_edges:
        raise ValueError(f"edge id {top} outside alphabet of {num_edges} edges")
    return TrajectoryString(np.concatenate(parts), len(trajectories), num_edges + EDGE_BASE)


def suffix_array(t):
    """Suffix array of an integer sequence by prefix doubling.

    Intended for sequences ending in a unique minimal terminator, for which
    suffix order and rotation order coincide.
    """
    t = np.asarray(t, dtype=np.int64)
    n = len(t)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    _, rank = np.unique(t, return_inverse=True)
    rank = rank.astype(np.int64)
    k = 1
    while True:
        second = np.zeros(n, dtype=np.int64)
        second[: n - k] = rank[k:] + 1
        key = rank * (n + 1) + second
        sa = np.argsort(key)
        skey = key[sa]
        fresh = np.empty(n, dtype=np.int64)
        fresh[0] = 0
        np.not_equal(skey[1:], skey[:-1], out=fresh[1:], casting="unsafe")
        rank = np.empty(n, dtype=np.int64)
        rank[sa] = np.cumsum(fresh)
        if rank[sa[-1]] == n - 1 or k >= n:
            break
        k *= 2
    return sa


def c_array(seq, sigma):
    """C[w] = number of symbols smaller than w; length sigma + 1, C[sigma] = len(seq)."""
    counts = np.bincount(np.asarray(seq, dtype=np.int64), minlength=sigma)
    if len(counts) > sigma:
        raise ValueError("sequence contains a symbol >= sigma")
    return np.concatenate(([0], np.cumsum(counts))).astype(np.int64)


@dataclass(frozen=True)
class BwtText:
    bwt: np.ndarray
    c: np.ndarray
    sa: np.ndarray = None   # kept for oracles; never serialized by release indexes

    def __len__(self):
        return len(self.bwt)

    @property
    def sigma(self):
        return len(self.c) - 1

    def contexts(self):
        """First-column symbol of every sorted rotation (block structure of C)."""
        return np.repeat(np.arange(self.sigma, dtype=np.int64), np.diff(self.c))


def build_bwt(t, keep_sa=True):
    """BWT of a TrajectoryString (or of a raw symbol array with sigma inferred)."""
    if isinstance(t, TrajectoryString):
        sym, sigma = t.symbols, t.sigma
    else:
        sym = np.asarray(t, dtype=np.int64)
        sigma = int(sym.max()) + 1
    if len(sym) == 0 or sym[-1] != END or np.count_nonzero(sym == END) != 1:
        raise ValueError("text must end with a unique terminator")
    sa = suffix_array(sym)
    bwt = sym[sa - 1]        # sa - 1 == -1 wraps to the terminator, as rotations require
    return BwtText(bwt=bwt, c=c_array(sym, sigma), sa=sa if keep_sa else None)


def inverse_bwt(bwt, c):
    """Recover the text from its BWT by LF walking from the terminator row."""
    bwt = np.asarray(bwt, dtype=np.int64)
    n = len(bwt)
    # occurrence rank of each BWT position among equal symbols
    order = np.argsort(bwt, kind="stable")
    lf = np.empty(n, dtype=np.int64)
    lf[order] = np.arange(n)
    out = np.empty(n, dtype=np.int64)
    j = 0                    # row 0 is the rotation starting with the terminator
    out[n - 1] = END
    for k in range(n - 2, -1, -1):
        out[k] = bwt[j]
        j = lf[j]
    return out


def h0(seq):
    """Zeroth-order empirical entropy in bits per symbol."""
    seq = np.asarray(seq)
    if len(seq) == 0:
        raise ValueError("entropy of an empty sequence is undefined")
    _, counts = np.unique(seq, return_counts=True)
    return _entropy_of_counts(counts)


def _entropy_of_counts(counts):
    counts = np.asarray(counts, dtype=np.float64)
    counts = counts[counts > 0]
    n = counts.sum()
    return float(np.sum(counts * np.log2(n / counts)) / n)


def hk(t, k):
    """k-th order empirical entropy.

    The context of ``T[i]`` is the k symbols that follow it, taken cyclically
    (the same contexts the BWT sorts by).
    """
    sym = t.symbols if isinstance(t, TrajectoryString) else np.asarray(t, dtype=np.int64)
    n = len(sym)
    if k < 0:
        raise ValueError("order must be non-negative")
    if k >= n:
        raise ValueError(f"order {k} must be smaller than the text length {n}")
    if k == 0:
        return h0(sym)
    ctx = np.zeros(n, dtype=np.int64)
    for m in range(1, k + 1):
        nxt = np.roll(sym, -m)
        _, ctx = np.unique(ctx * (int(sym.max()) + 1) + nxt, return_inverse=True)
        ctx = ctx.astype(np.int64)
    width = int(sym.max()) + 1
    pair_keys, pair_counts = np.unique(ctx * width + sym, return_counts=True)
    ctx_counts = np.bincount(ctx)
    per_pair = pair_counts * np.log2(ctx_counts[pair_keys // width] / pair_counts)
    return float(per_pair.sum() / n)


def parse_trajectories(lines, road=None):
    """Parse the text format: one trajectory per line, whitespace-separated edge ids.

    Lines starting with ``#`` are comments; empty lines are errors.  When
    ``road`` (a mapping edge -> iterable of successor edges) is given, every
    consecutive pair must be connected in it.
    """
    out = []
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if line.lstrip().startswith("#"):
            continue
        if not text:
            raise InputFormatError("empty line", lineno)
        try:
            edges = [int(tok) for tok in text.split()]
        except ValueError:
            raise InputFormatError(f"non-integer edge id in {text!r}", lineno) from None
        if any(e < 0 for e in edges):
            raise InputFormatError("negative edge id", lineno)
        if road is not None:
            for a, b in zip(edges, edges[1:]):
                if b not in road.get(a, ()):
                    raise InputFormatError(f"edges {a} -> {b} are not connected", lineno)
        out.append(edges)
    if not out:
        raise InputFormatError("no trajectories in input")
    return out


def read_trajectories(path, road=None):
    with open(path, encoding="utf-8") as fh:
        return parse_trajectories(fh, road)


def write_trajectories(path, trajectories, header=None):
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for traj in trajectories:
            fh.write(" ".join(map(str, traj)))
            fh.write("\n")
    return path
