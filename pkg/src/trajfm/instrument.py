"""Operation counters for work-bound measurements.

Queries never mutate the structures they read; counting is routed through a
context variable so concurrent readers each see their own tally::

    with counting() as ops:
        index.suffix_range(path)
    ops.bit_ranks, ops.pseudo_ranks
"""

from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, asdict

__all__ = ["OpCounter", "counting", "current"]


@dataclass
class OpCounter:
    bit_ranks: int = 0       # bitvector rank evaluations inside wavelet trees
    bit_accesses: int = 0    # bitvector reads during wavelet-tree access
    wt_ranks: int = 0        # symbol-rank calls on a wavelet tree
    wt_accesses: int = 0
    pseudo_ranks: int = 0

    def as_dict(self):
        return asdict(self)


_active: ContextVar = ContextVar("trajfm_counter", default=None)


# active counter or None; the hot paths test for None and skip
current = _active.get


@contextmanager
def counting():
    ops = OpCounter()
    token = _active.set(ops)
    try:
        yield ops
    finally:
        _active.reset(token)
