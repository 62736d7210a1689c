"""Construction 1: state-oblivious target regions for the uniform channel.

The output space ``[-a/2, 1+a/2+B]`` is cut into ``N_int`` intervals of width
``a+B``.  Interval ``i`` is written with the fixed stimulus ``(a+B)*i``, whose
output window ``[(a+B)i - a/2 + s, (a+B)i + a/2 + s]`` has width ``a``.  Each
of the ``kappa`` regions of an interval is a left piece in the first ``a`` of
the interval plus the piece one period ``a`` to its right, so any width-``a``
window inside the interval covers exactly ``a/kappa`` of every region.

Right pieces are clipped at the interval end ``(a+B)i + a/2 + B``; nothing
beyond it is reachable with this interval's stimulus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._numeric import ifloor, is_integral, piece_lookup
from .channel import (
    DEFAULT_MAX_WRITES,
    CellState,
    UniformChannelParams,
    WriteTrace,
    rewrite_batch,
    rewrite_until,
)
from .errors import InvalidParams, OutOfSupport


def _check(a, B, kappa):
    if not (a > 0 and 0 < B < a):
        raise InvalidParams(f"need 0 < B < a, got a={a}, B={B}")
    if int(kappa) != kappa or kappa < 2:
        raise InvalidParams(f"kappa must be an integer >= 2, got {kappa}")


def n_intervals(a: float, B: float) -> int:
    return ifloor((1 + a + B) / (a + B))


@dataclass(frozen=True)
class C1Layout:
    a: float
    B: float
    kappa: int
    n_intervals: int

    @property
    def channel(self) -> UniformChannelParams:
        return UniformChannelParams(self.a, self.B)

    @property
    def n_regions(self) -> int:
        return self.n_intervals * self.kappa

    @property
    def width(self) -> float:
        """Width of one piece, ``a/kappa``."""
        return self.a / self.kappa

    @property
    def regions(self) -> list:
        return [(i, t) for i in range(self.n_intervals) for t in range(1, self.kappa + 1)]

    def base(self, i: int) -> float:
        """Left end of interval ``i``."""
        return (self.a + self.B) * i - self.a / 2

    def stimulus(self, i: int) -> float:
        return (self.a + self.B) * i

    def pieces(self, region) -> list:
        """Half-open ``[lo, hi)`` pieces of region ``(i, t)``."""
        i, t = region
        lo = self.base(i) + (t - 1) * self.width
        out = [(lo, lo + self.width)]
        end = self.base(i) + self.a + self.B
        rlo = lo + self.a
        if rlo < end:
            out.append((rlo, min(rlo + self.width, end)))
        return out

    def region_id(self, region) -> int:
        i, t = region
        if not (0 <= i < self.n_intervals and 1 <= t <= self.kappa):
            raise InvalidParams(f"no region {region} in layout")
        return i * self.kappa + (t - 1)

    def region_of(self, rid: int):
        return divmod(int(rid), self.kappa)[0], int(rid) % self.kappa + 1

    @cached_property
    def _edges(self):
        pieces = sorted((lo, hi, self.region_id(r)) for r in self.regions for lo, hi in self.pieces(r))
        return tuple(np.array(col) for col in zip(*pieces))

    def decode_ids(self, y) -> np.ndarray:
        """Vectorised decode to flat region ids; -1 marks discarded space."""
        return piece_lookup(self._edges, y)


def build_c1_layout(a: float, B: float, kappa: int) -> C1Layout:
    _check(a, B, kappa)
    return C1Layout(a, B, int(kappa), n_intervals(a, B))


def c1_rate(a: float, B: float, kappa: int) -> float:
    """``log2(kappa * N_int)`` bits per cell."""
    _check(a, B, kappa)
    return math.log2(kappa * n_intervals(a, B))


def c1_rate_decomposition(a: float, B: float, kappa: int) -> tuple[float, float]:
    """Split the rate into no-state capacity minus the loss from the unknown state.

    Only defined when ``(1+a+B)/(a+B)`` is an integer.
    """
    _check(a, B, kappa)
    if not is_integral((1 + a + B) / (a + B)):
        raise InvalidParams("(1+a+B)/(a+B) is not an integer")
    capacity = math.log2(kappa * (1 + a) / a)
    loss = math.log2((1 + B / a) / (1 + B / (1 + a)))
    return capacity, loss


class _C1Strategy:
    def __init__(self, layout: C1Layout, region):
        self.x = layout.stimulus(region[0])
        self.pieces = layout.pieces(region)

    def stimulus(self, outputs):
        return self.x

    def done(self, outputs):
        y = outputs[-1]
        return any(lo <= y < hi for lo, hi in self.pieces)


def c1_encode_cell(
    layout: C1Layout, region, state: CellState, rng: np.random.Generator, max_writes: int = DEFAULT_MAX_WRITES
) -> WriteTrace:
    layout.region_id(region)
    return rewrite_until(layout.channel, state, _C1Strategy(layout, region), rng, max_writes)


def c1_decode_cell(layout: C1Layout, y: float):
    rid = int(layout.decode_ids(y))
    if rid < 0:
        raise OutOfSupport(f"y={y} lies in discarded output space")
    return layout.region_of(rid)


class C1BatchPolicy:
    def __init__(self, layout: C1Layout, region_ids):
        self.layout = layout
        self.targets = np.asarray(region_ids, dtype=np.int64)
        self.x = (layout.a + layout.B) * (self.targets // layout.kappa)

    def stimulus(self, idx):
        return self.x[idx]

    def observe(self, idx, y):
        return self.layout.decode_ids(y) == self.targets[idx]


def c1_encode_batch(layout: C1Layout, region_ids, states, rng, max_writes=DEFAULT_MAX_WRITES):
    """Encode many cells at once; returns ``(tau, final_y)``."""
    return rewrite_batch(layout.channel, states, C1BatchPolicy(layout, region_ids), rng, max_writes)
