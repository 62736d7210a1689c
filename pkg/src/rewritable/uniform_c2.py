"""Construction 2: interior/exterior target regions with state-adaptive switching.

The interior ``[-a/2+B, 1+a/2]`` is tiled by width-``D`` regions, each hit
with probability ``D/a`` per attempt whatever the state.  The exterior
``[-a/2, -a/2+B) U [1+a/2, 1+a/2+B)`` carries ``2m`` two-piece regions
``E_1..E_2m``.  Writing ``E_i`` (``i <= m``) starts with stimulus 1 aimed at
the right piece and falls back to stimulus 0 (left piece) once an output
below ``1 - a/2 + B(i - delta_i)/2m`` reveals a small state.  Regions
``i > m`` use the mirrored rule.

Flat region ids: interior region ``j`` is ``j``; exterior ``E_i`` is
``n_interior + i - 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from ._numeric import binary_entropy, iceil, ifloor, piece_lookup
from .channel import (
    DEFAULT_MAX_WRITES,
    CellState,
    UniformChannelParams,
    WriteTrace,
    rewrite_batch,
    rewrite_until,
)
from .errors import Infeasible, InvalidParams, NoRootBracket, OutOfSupport

# D = a - B is admitted: the interior access condition is s <= a - D, which
# still holds for every s in [0, B].
_D_SLACK = 1e-12


def _check_channel(a, B):
    if not (a > 0 and 0 < B < a):
        raise InvalidParams(f"need 0 < B < a, got a={a}, B={B}")


def _check_D(a, B, D):
    if not (0 < D <= (a - B) * (1 + _D_SLACK)):
        raise InvalidParams(f"interior width D={D} must lie in (0, a-B] = (0, {a - B}]")


def _check_m(m):
    if int(m) != m or m < 1:
        raise InvalidParams(f"m must be an integer >= 1, got {m}")


def interior_count(a: float, B: float, D: float) -> int:
    return ifloor((1 + a - B) / D)


@dataclass(frozen=True)
class C2Layout:
    a: float
    B: float
    D: float
    m: int

    def __post_init__(self):
        _check_channel(self.a, self.B)
        _check_D(self.a, self.B, self.D)
        _check_m(self.m)

    @property
    def channel(self) -> UniformChannelParams:
        return UniformChannelParams(self.a, self.B)

    @property
    def n_interior(self) -> int:
        return interior_count(self.a, self.B, self.D)

    @property
    def n_regions(self) -> int:
        return self.n_interior + 2 * self.m

    @property
    def interior_start(self) -> float:
        return -self.a / 2 + self.B

    @property
    def exterior_width(self) -> float:
        """Width ``B/2m`` of each exterior piece."""
        return self.B / (2 * self.m)

    @property
    def interior_regions(self) -> list:
        return [self.interior_bounds(j) for j in range(self.n_interior)]

    @property
    def exterior_regions(self) -> list:
        return [self.exterior_pieces(i) for i in range(1, 2 * self.m + 1)]

    def interior_bounds(self, j: int) -> tuple[float, float]:
        if not 0 <= j < self.n_interior:
            raise InvalidParams(f"no interior region {j}")
        lo = self.interior_start + j * self.D
        return lo, lo + self.D

    def interior_stimulus(self, j: int) -> float:
        lo, hi = self.interior_bounds(j)
        return max(hi - self.a / 2, 0.0)

    def exterior_pieces(self, i: int) -> tuple[tuple[float, float], tuple[float, float]]:
        if not 1 <= i <= 2 * self.m:
            raise InvalidParams(f"no exterior region E_{i} (m={self.m})")
        w = self.exterior_width
        left = (-self.a / 2 + (i - 1) * w, -self.a / 2 + i * w)
        right = (1 + self.a / 2 + (i - 1) * w, 1 + self.a / 2 + i * w)
        return left, right

    def exterior_id(self, i: int) -> int:
        return self.n_interior + i - 1

    def region_of(self, rid: int):
        rid = int(rid)
        if rid < self.n_interior:
            return ("interior", rid)
        return ("exterior", rid - self.n_interior + 1)

    @cached_property
    def _edges(self):
        pieces = [(lo, hi, j) for j, (lo, hi) in enumerate(self.interior_regions)]
        for i in range(1, 2 * self.m + 1):
            pieces += [(lo, hi, self.exterior_id(i)) for lo, hi in self.exterior_pieces(i)]
        pieces.sort()
        return tuple(np.array(col) for col in zip(*pieces))

    def decode_ids(self, y) -> np.ndarray:
        """Vectorised decode to flat ids; -1 marks unused output space.

        Uses the same piece edges as :meth:`interior_bounds` and
        :meth:`exterior_pieces`, so boundaries are exactly half-open.
        """
        return piece_lookup(self._edges, y)


def build_c2_layout(a: float, B: float, D: float, m: int) -> C2Layout:
    _check_m(m)
    return C2Layout(a, B, D, int(m))


@dataclass(frozen=True)
class SwitchingPolicy:
    """Switch thresholds ``delta_1..delta_m``; region ``E_{2m+1-i}`` reuses ``delta_i``."""

    deltas: tuple

    def __post_init__(self):
        for d in self.deltas:
            if not 0 <= d < 1:
                raise InvalidParams(f"delta must lie in [0, 1), got {d}")

    @property
    def m(self) -> int:
        return len(self.deltas)

    @classmethod
    def zero(cls, m: int) -> "SwitchingPolicy":
        return cls((0.0,) * m)

    @classmethod
    def optimal(cls, m: int) -> "SwitchingPolicy":
        return cls(tuple(solve_delta(i) for i in range(1, m + 1)))

    def delta_for(self, i: int) -> float:
        """Threshold parameter used when writing ``E_i``, ``1 <= i <= 2m``."""
        m = self.m
        return self.deltas[i - 1] if i <= m else self.deltas[2 * m - i]


def _as_policy(deltas, m) -> SwitchingPolicy:
    if isinstance(deltas, SwitchingPolicy):
        policy = deltas
    elif deltas is None or deltas == "optimal":
        policy = SwitchingPolicy.optimal(m)
    elif deltas == "zero":
        policy = SwitchingPolicy.zero(m)
    else:
        policy = SwitchingPolicy(tuple(float(d) for d in deltas))
    if policy.m != m:
        raise InvalidParams(f"need {m} deltas, got {policy.m}")
    return policy


@dataclass(frozen=True)
class C2SchemeParams:
    p: float
    D: float
    m: int
    deltas: tuple

    @property
    def policy(self) -> SwitchingPolicy:
        return SwitchingPolicy(self.deltas)


# -- delta optimisation ---------------------------------------------------


def delta_equation(i: int, delta: float) -> float:
    """Stationarity condition of the ``E_i`` write cost in ``delta``."""
    return 2 * (1 - delta) ** 2 + 3 * (i - 1) * (1 - delta) + (i - delta) * math.log(delta)


@lru_cache(maxsize=None)
def solve_delta(i: int, tolerance: float = 1e-12) -> float:
    """Optimal switching parameter for exterior region ``E_i``.

    The stationarity equation has a trivial root at 1; dividing by
    ``1 - delta`` removes it, leaving one sign change on (0, 1).
    """
    if int(i) != i or i < 1:
        raise InvalidParams(f"i must be a positive integer, got {i}")
    if not tolerance > 0:
        raise InvalidParams("tolerance must be positive")

    def g(d):
        return 2 * (1 - d) + 3 * (i - 1) + (i - d) * math.log(d) / (1 - d)

    lo, hi = 1e-9, 1 - 1e-9
    if g(lo) * g(hi) >= 0:
        raise NoRootBracket(f"no sign change for i={i} on [{lo}, {hi}]")
    root = brentq(g, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(delta_equation(i, root)) > tolerance:
        raise NoRootBracket(f"root for i={i} has residual {delta_equation(i, root):.3g}")
    return root


# -- closed-form write costs ----------------------------------------------


def _xlogx_ratio(delta):
    # delta/(1-delta) * ln(delta), continuous at delta = 0
    return 0.0 if delta == 0 else delta / (1 - delta) * math.log(delta)


def _check_region(m, i, delta, upto):
    _check_m(m)
    if int(i) != i or not 1 <= i <= upto:
        raise InvalidParams(f"region index i={i} outside 1..{upto}")
    if not 0 <= delta < 1:
        raise InvalidParams(f"delta must lie in [0, 1), got {delta}")


def expected_writes_exterior(a: float, B: float, m: int, i: int, delta_i: float) -> float:
    """Mean writes to hit ``E_i`` with the state averaged over ``[0, B]``.

    ``i`` may range over ``1..2m``; ``E_i`` and ``E_{2m+1-i}`` cost the same.
    """
    _check_channel(a, B)
    _check_region(m, i, delta_i, 2 * m)
    if i > m:
        i = 2 * m + 1 - i
    d = delta_i
    return (a / B) * (2 * m + 1 + math.log((i - d) / (1 - d) ** 2) + _xlogx_ratio(d))


def per_state_expected_writes(a: float, B: float, m: int, i: int, delta_i: float, b: float) -> float:
    """Mean writes to hit ``E_i`` given the state ``S = b``."""
    _check_channel(a, B)
    _check_region(m, i, delta_i, 2 * m)
    if not 0 <= b <= B:
        raise InvalidParams(f"state b={b} outside [0, {B}]")
    if i > m:
        i, b = 2 * m + 1 - i, B - b
    d = delta_i
    if b >= B * i / (2 * m):
        return 2 * m * a / B
    if b >= B * (i - d) / (2 * m):
        return 2 * m * a / (2 * m * b - (i - 1) * B)
    if b >= B * (i - 1) / (2 * m):
        return 2 * m * a / (B * (1 - d)) * (1 + ((i - d) * B - 2 * m * b) / (i * B - 2 * m * b))
    return 2 * m * a / ((i - d) * B - 2 * m * b) + 2 * m * a / B


def exterior_cost(a: float, B: float, m: int, deltas=None) -> float:
    """Mean writes for an exterior cell with ``E_1..E_2m`` equally likely."""
    policy = _as_policy(deltas, m)
    return sum(expected_writes_exterior(a, B, m, i, policy.deltas[i - 1]) for i in range(1, m + 1)) / m


def c2_rate(a: float, B: float, p: float, D: float, m: int) -> float:
    _check_channel(a, B)
    _check_D(a, B, D)
    _check_m(m)
    if not 0 <= p <= 1:
        raise InvalidParams(f"p must lie in [0, 1], got {p}")
    n = interior_count(a, B, D)
    return binary_entropy(p) + p * math.log2(n) + (1 - p) * math.log2(2 * m)


def c2_cost(a: float, B: float, p: float, D: float, m: int, deltas=None) -> float:
    """Average writes per cell; ``deltas`` defaults to the optimal switching policy."""
    _check_channel(a, B)
    _check_D(a, B, D)
    if not 0 <= p <= 1:
        raise InvalidParams(f"p must lie in [0, 1], got {p}")
    ext = exterior_cost(a, B, m, deltas)
    return p * a / D + (1 - p) * ext


# -- optimiser --------------------------------------------------------------


@dataclass(frozen=True)
class C2Optimum:
    rate: float
    cost: float
    params: C2SchemeParams
    n_interior: int


def optimize_c2(a: float, B: float, kappa: float, deltas: str = "optimal", m_max: int | None = None) -> C2Optimum:
    """Maximise the rate subject to mean writes <= ``kappa``.

    For a fixed count ``n`` of interior regions the widest admissible width
    ``D = min((1+a-B)/n, a-B)`` is the cheapest, so ``n`` is enumerated
    exactly; the cap ``D = a-B`` contributes one extra candidate.  For
    each ``(n, m)`` the cost is affine in ``p`` and the rate is concave in
    ``p`` with unconstrained peak ``n/(n+2m)``; the optimum ``p`` is that
    peak clipped to the feasible interval.
    """
    _check_channel(a, B)
    if not kappa >= 1:
        raise InvalidParams(f"kappa must be >= 1, got {kappa}")
    width = 1 + a - B
    n_min = max(1, iceil(width / (a - B)))
    n_max = max(n_min, iceil(4 * kappa * width / a)) + 16
    n = np.arange(n_min, n_max + 1, dtype=float)
    D = width / n
    n_cap = ifloor(width / (a - B))
    if 1 <= n_cap < n_min:
        n = np.concatenate(([float(n_cap)], n))
        D = np.concatenate(([a - B], D))
    interior = a / D
    if m_max is None:
        m_max = iceil(kappa * B / a) + 2

    best = None
    for m in range(1, m_max + 1):
        policy = _as_policy(deltas, m)
        ext = exterior_cost(a, B, m, policy)
        lo = np.zeros_like(n)
        hi = np.ones_like(n)
        ok = np.ones(n.shape, dtype=bool)
        cheap = interior <= kappa
        if ext > kappa:
            # need p >= (ext - kappa) / (ext - interior)
            lo = np.where(cheap, (ext - kappa) / np.where(cheap, ext - interior, 1.0), 1.0)
            ok &= cheap
        else:
            hi = np.where(cheap, 1.0, (kappa - ext) / np.where(cheap, 1.0, interior - ext))
        p = np.clip(n / (n + 2 * m), lo, hi)
        p = np.clip(p, 0.0, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            h = np.where((p > 0) & (p < 1), -p * np.log2(p) - (1 - p) * np.log2(1 - p), 0.0)
        rate = h + p * np.log2(n) + (1 - p) * math.log2(2 * m)
        cost = p * interior + (1 - p) * ext
        for k in np.flatnonzero(ok):
            key = (rate[k], -cost[k], p[k], D[k], m)
            if best is None or key > best[0]:
                best = (key, m, int(n[k]), policy)
    if best is None:
        raise Infeasible(f"no (p, D, m) meets kappa={kappa} for a={a}, B={B}")
    (rate, neg_cost, p, D_best, m), _, n_best, policy = best[0], *best[1:]
    params = C2SchemeParams(float(p), float(D_best), m, policy.deltas)
    return C2Optimum(float(rate), float(-neg_cost), params, n_best)


# -- encoding and decoding ------------------------------------------------


class _InteriorStrategy:
    def __init__(self, layout: C2Layout, j: int):
        self.x = layout.interior_stimulus(j)
        self.lo, self.hi = layout.interior_bounds(j)

    def stimulus(self, outputs):
        return self.x

    def done(self, outputs):
        return self.lo <= outputs[-1] < self.hi


class _ExteriorStrategy:
    """Switches stimulus once any output crosses the state-revealing threshold."""

    def __init__(self, layout: C2Layout, policy: SwitchingPolicy, i: int):
        a, B, m = layout.a, layout.B, layout.m
        self.pieces = layout.exterior_pieces(i)
        delta = policy.delta_for(i)
        if i <= m:
            self.first, self.second = 1.0, 0.0
            thr = 1 - a / 2 + B * (i - delta) / (2 * m)
            self.crossed = lambda y: y < thr
        else:
            self.first, self.second = 0.0, 1.0
            thr = a / 2 + B * (i - 1 + delta) / (2 * m)
            self.crossed = lambda y: y > thr

    def stimulus(self, outputs):
        return self.second if any(self.crossed(y) for y in outputs) else self.first

    def done(self, outputs):
        y = outputs[-1]
        return any(lo <= y < hi for lo, hi in self.pieces)


def c2_encode_interior(
    layout: C2Layout, j: int, state: CellState, rng: np.random.Generator, max_writes: int = DEFAULT_MAX_WRITES
) -> WriteTrace:
    """Write interior region ``j`` (the ``j``-th width-``D`` interval)."""
    return rewrite_until(layout.channel, state, _InteriorStrategy(layout, j), rng, max_writes)


def c2_encode_exterior(
    layout: C2Layout,
    policy: SwitchingPolicy,
    i: int,
    state: CellState,
    rng: np.random.Generator,
    max_writes: int = DEFAULT_MAX_WRITES,
) -> WriteTrace:
    if policy.m != layout.m:
        raise InvalidParams(f"policy has {policy.m} deltas, layout needs {layout.m}")
    return rewrite_until(layout.channel, state, _ExteriorStrategy(layout, policy, i), rng, max_writes)


def c2_decode_cell(layout: C2Layout, y: float):
    rid = int(layout.decode_ids(y))
    if rid < 0:
        raise OutOfSupport(f"y={y} lies outside every target region")
    return layout.region_of(rid)


class C2BatchPolicy:
    """Vectorised writer for a mix of interior and exterior cells.

    Interior cells are the degenerate case of the exterior rule: equal
    stimuli in both phases and a threshold that is never crossed.
    """

    def __init__(self, layout: C2Layout, policy: SwitchingPolicy, region_ids):
        a, B, m, n = layout.a, layout.B, layout.m, layout.n_interior
        rid = np.asarray(region_ids, dtype=np.int64)
        if rid.size and (rid.min() < 0 or rid.max() >= layout.n_regions):
            raise InvalidParams("region id outside layout")
        interior = rid < n
        i = np.where(interior, 1, rid - n + 1)
        lower = i <= m
        deltas = np.asarray(policy.deltas + (0.0,))
        d = np.where(lower, deltas[np.minimum(i, m) - 1], deltas[np.clip(2 * m - i, 0, m - 1)])

        j = np.where(interior, rid, 0)
        in_lo = layout.interior_start + j * layout.D
        in_x = np.maximum(in_lo + layout.D - a / 2, 0.0)

        self.first = np.where(interior, in_x, np.where(lower, 1.0, 0.0))
        self.second = np.where(interior, in_x, np.where(lower, 0.0, 1.0))
        self.thr_below = np.where(interior | ~lower, -np.inf, 1 - a / 2 + B * (i - d) / (2 * m))
        self.thr_above = np.where(interior | lower, np.inf, a / 2 + B * (i - 1 + d) / (2 * m))
        self.layout, self.targets = layout, rid
        self.switched = np.zeros(rid.shape, dtype=bool)

    def stimulus(self, idx):
        return np.where(self.switched[idx], self.second[idx], self.first[idx])

    def observe(self, idx, y):
        hit = self.layout.decode_ids(y) == self.targets[idx]
        crossed = (y < self.thr_below[idx]) | (y > self.thr_above[idx])
        self.switched[idx] |= crossed & ~hit
        return hit


def c2_encode_batch(layout: C2Layout, policy: SwitchingPolicy, region_ids, states, rng, max_writes=DEFAULT_MAX_WRITES):
    """Encode many cells at once; returns ``(tau, final_y)``."""
    return rewrite_batch(layout.channel, states, C2BatchPolicy(layout, policy, region_ids), rng, max_writes)
