"""Synthetic road graphs and random-walk trajectories."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "Digraph",
    "RandomDigraph",
    "WalkConfig",
    "gen_poisson_digraph",
    "gen_grid_network",
    "gen_walks",
    "walks_for_text_length",
    "sample_query_paths",
]


@dataclass(frozen=True, eq=False)
class Digraph:
    """Edge-to-edge successor graph in CSR form (vertex = road segment)."""

    sigma: int
    offsets: np.ndarray
    targets: np.ndarray

    def out(self, v):
        return self.targets[self.offsets[v] : self.offsets[v + 1]].tolist()

    def out_degrees(self):
        return np.diff(self.offsets)

    def mean_out_degree(self):
        return float(self.out_degrees().mean())

    @property
    def num_arcs(self):
        return len(self.targets)

    def adjacency(self):
        """{v: set of successors}, the form accepted by trajectory validation."""
        return {v: set(self.out(v)) for v in range(self.sigma)}

    def arc_set(self):
        src = np.repeat(np.arange(self.sigma), self.out_degrees())
        return set(zip(src.tolist(), self.targets.tolist()))


@dataclass(frozen=True, eq=False)
class RandomDigraph(Digraph):
    d_bar: float = 0.0
    seed: int = 0


def gen_poisson_digraph(sigma, d_bar, seed=0):
    """Out-degrees ~ Poisson(d_bar) clamped to [1, sigma - 1]; no self-loops or duplicates."""
    if sigma < 2:
        raise ConfigurationError("a random digraph needs at least 2 vertices")
    if d_bar < 1:
        raise ConfigurationError("average out-degree must be at least 1")
    if d_bar >= sigma:
        raise ConfigurationError(f"average out-degree {d_bar} must be below sigma={sigma}")
    rng = np.random.default_rng(seed)
    deg = np.clip(rng.poisson(d_bar, sigma), 1, sigma - 1).astype(np.int64)
    src = np.repeat(np.arange(sigma, dtype=np.int64), deg)
    tgt = _draw_other(rng, src, sigma)
    # redraw duplicate (src, tgt) pairs until every out-list is a set
    while True:
        keys = src * sigma + tgt
        _, first = np.unique(keys, return_index=True)
        dup = np.ones(len(keys), dtype=bool)
        dup[first] = False
        if not dup.any():
            break
        tgt[dup] = _draw_other(rng, src[dup], sigma)
    offsets = np.concatenate(([0], np.cumsum(deg))).astype(np.int64)
    return RandomDigraph(sigma, offsets, tgt, float(d_bar), seed)


def _draw_other(rng, src, sigma):
    """Uniform target in [0, sigma) excluding the source itself."""
    t = rng.integers(0, sigma - 1, len(src))
    return t + (t >= src)


def gen_grid_network(rows, cols):
    """Directed segments of a rows x cols street grid; a segment's successors
    are the segments leaving its head intersection, U-turns excluded except
    at dead ends.

    Segment ids follow the sorted order of (tail, head) intersection pairs.
    """
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise ConfigurationError("grid needs at least two intersections")
    node = np.arange(rows * cols).reshape(rows, cols)
    pairs = []
    for a, b in ((node[:, :-1], node[:, 1:]), (node[:-1, :], node[1:, :])):
        pairs.append(np.stack([a.ravel(), b.ravel()], axis=1))
        pairs.append(np.stack([b.ravel(), a.ravel()], axis=1))
    seg = np.concatenate(pairs)
    seg = seg[np.lexsort((seg[:, 1], seg[:, 0]))]
    tails = seg[:, 0]
    starts = np.searchsorted(tails, np.arange(rows * cols + 1))
    offsets = [0]
    targets = []
    for s, (u, v) in enumerate(seg.tolist()):
        nxt = [k for k in range(starts[v], starts[v + 1]) if seg[k, 1] != u]
        if not nxt:
            # dead end: turning back is the only continuation
            nxt = list(range(starts[v], starts[v + 1]))
        targets.extend(nxt)
        offsets.append(len(targets))
    return Digraph(len(seg), np.asarray(offsets, dtype=np.int64), np.asarray(targets, dtype=np.int64))


@dataclass(frozen=True)
class WalkConfig:
    """``length`` is an int or an inclusive ``(lo, hi)`` range drawn uniformly.

    ``bias`` q weights the k-th out-edge of the current vertex by q**k, so
    q < 1 favours the first out-edges; q = 1 is uniform.
    """

    num_walks: int
    length: object = 20
    seed: int = 0
    bias: float = 1.0

    def __post_init__(self):
        if self.num_walks < 1:
            raise ConfigurationError("need at least one walk")
        lo, hi = self.length_range
        if lo < 1 or hi < lo:
            raise ConfigurationError(f"invalid walk length {self.length!r}")
        if not self.bias > 0:
            raise ConfigurationError("transition bias must be positive")

    @property
    def length_range(self):
        if isinstance(self.length, (tuple, list)):
            lo, hi = self.length
            return int(lo), int(hi)
        return int(self.length), int(self.length)


def gen_walks(g, cfg):
    """Random walks on ``g`` (all walks advance together, one numpy step per hop)."""
    deg = g.out_degrees()
    if np.any(deg == 0):
        raise ConfigurationError("graph has a vertex without successors; walks would dead-end")
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.length_range
    lengths = rng.integers(lo, hi + 1, cfg.num_walks)
    cur = rng.integers(0, g.sigma, cfg.num_walks)
    steps = np.empty((cfg.num_walks, hi), dtype=np.int64)
    steps[:, 0] = cur
    q = float(cfg.bias)
    for t in range(1, hi):
        d = deg[cur]
        u = rng.random(cfg.num_walks)
        if q == 1.0:
            k = (u * d).astype(np.int64)
        else:
            # inverse CDF of the geometric distribution truncated to d outcomes
            k = np.floor(np.log1p(-u * (1.0 - q ** d)) / np.log(q)).astype(np.int64)
        k = np.minimum(k, d - 1)
        cur = g.targets[g.offsets[cur] + k]
        steps[:, t] = cur
    return [row[:l].tolist() for row, l in zip(steps, lengths.tolist())]


def walks_for_text_length(g, text_length, walk_length=20, seed=0, bias=1.0):
    """Fixed-length walks whose trajectory string has about ``text_length`` symbols.

    Each walk contributes ``walk_length + 1`` symbols, plus one terminator.
    """
    num = max(1, round((text_length - 1) / (walk_length + 1)))
    return gen_walks(g, WalkConfig(num, walk_length, seed, bias))


def sample_query_paths(trajectories, count, length, seed=0):
    """``count`` random contiguous sub-paths of ``length`` edges taken from
    trajectories that are long enough (sampling with replacement)."""
    pool = [t for t in trajectories if len(t) >= length]
    if not pool:
        raise ConfigurationError(f"no trajectory has {length} or more edges")
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, len(pool), count)
    out = []
    for k in picks.tolist():
        traj = pool[k]
        start = int(rng.integers(0, len(traj) - length + 1))
        out.append(list(traj[start : start + length]))
    return out
