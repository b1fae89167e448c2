"""Brute-force reference implementations and instance generators for tests.

Nothing here uses the index structures: counts come from scanning the raw
text, ranks from prefix sums, suffix arrays from sorting rotations.
"""

from collections import Counter

import numpy as np

from trajfm.datagen import WalkConfig, gen_poisson_digraph, gen_walks
from trajfm.text import build_trajectory_string

# four trajectories of the running example, edges A..F = 0..5
RUNNING_TRAJECTORIES = [[0, 1, 4, 5], [0, 1, 2], [1, 2], [0, 3]]
NAMES = "ABCDEF"


def enc(letters):
    """'BA' -> encoded symbols (# = 0, $ = 1, A = 2, ...)."""
    table = {"#": 0, "$": 1}
    table.update({c: i + 2 for i, c in enumerate(NAMES)})
    return [table[c] for c in letters]


def dec(symbols):
    inv = {0: "#", 1: "$"}
    inv.update({i + 2: c for i, c in enumerate(NAMES)})
    return "".join(inv[s] for s in symbols)


def naive_sa(t):
    t = list(t)
    n = len(t)
    return sorted(range(n), key=lambda i: t[i:] + t[:i])


def naive_rank(seq, w, j):
    return int(np.count_nonzero(np.asarray(seq[:j]) == w))


def rotation_count(t, pattern):
    """Rotations of ``t`` starting with ``pattern`` (pattern in text order)."""
    t = np.asarray(t)
    n = len(t)
    m = len(pattern)
    idx = (np.arange(n)[:, None] + np.arange(m)[None, :]) % n
    return int(np.all(t[idx] == np.asarray(pattern)[None, :], axis=1).sum())


def rotation_range(t, pattern):
    """(sp, ep) of rotations prefixed by ``pattern`` via an explicit sorted list."""
    t = list(t)
    n = len(t)
    rots = sorted(t[i:] + t[:i] for i in range(n))
    m = len(pattern)
    hits = [k for k, r in enumerate(rots) if r[:m] == list(pattern)]
    if not hits:
        return None
    return hits[0], hits[-1] + 1


def substring_counts(t, max_len):
    """Counter of every substring of ``t`` of length 1..max_len (tuples)."""
    t = [int(x) for x in t]
    c = Counter()
    for m in range(1, max_len + 1):
        for i in range(len(t) - m + 1):
            c[tuple(t[i : i + m])] += 1
    return c


def random_instance(seed, max_sigma=256, max_n=5000):
    """A seeded random-walk instance: (trajectories, TrajectoryString)."""
    rng = np.random.default_rng(seed)
    num_edges = int(rng.integers(2, max_sigma - 1))
    d_bar = float(min(rng.uniform(1.0, 6.0), num_edges - 1)) if num_edges > 2 else 1.0
    g = gen_poisson_digraph(num_edges, d_bar, seed)
    hi = int(rng.integers(1, 40))
    lo = int(rng.integers(1, hi + 1))
    avg = (lo + hi) / 2 + 1
    budget = int(rng.integers(50, max_n))
    num_walks = max(1, int(budget / avg))
    bias = float(rng.choice([1.0, 0.7, 0.4]))
    walks = gen_walks(g, WalkConfig(num_walks, (lo, hi), seed + 7, bias))
    # keep the text within max_n symbols
    total = 1
    kept = []
    for w in walks:
        if total + len(w) + 1 > max_n:
            break
        kept.append(w)
        total += len(w) + 1
    kept = kept or [walks[0][: max_n - 2]]
    return kept, build_trajectory_string(kept, num_edges)


def entropy_of_counts(counts):
    counts = np.asarray(counts, dtype=np.float64)
    counts = counts[counts > 0]
    p = counts / counts.sum()
    return float(-(p * np.log2(p)).sum())
