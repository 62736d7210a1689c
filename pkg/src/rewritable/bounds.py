"""Reference rate formulas for the uniform channel."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ._numeric import envelope_at, iceil, is_integral, upper_concave_envelope
from .errors import BelowThreshold, InvalidParams
from .uniform_c1 import c1_rate, c1_rate_decomposition
from .uniform_c2 import c2_cost, c2_rate, optimize_c2


@dataclass(frozen=True)
class RateCostPoint:
    kappa: float
    rate: float
    scheme: str
    params: dict = field(default_factory=dict)


def kappa0(a: float) -> float:
    """Smallest cost for which the no-state capacity formula holds."""
    r = (1 + a) / a
    return iceil(r) / r


def fact1_capacity(a: float, kappa: float) -> float:
    """No-state capacity ``log2((1+a)/a * kappa)`` in bits per cell."""
    if not a > 0:
        raise InvalidParams(f"a must be positive, got {a}")
    k0 = kappa0(a)
    if kappa < k0 - 1e-12:
        raise BelowThreshold(f"kappa={kappa} below threshold {k0:.6g}")
    return math.log2((1 + a) / a * kappa)


def c1_loss_term(a: float, B: float) -> float:
    """Rate lost by Construction 1 to the unknown state, in bits.

    Only defined when ``(1+a+B)/(a+B)`` is an integer; there the C1 rate is
    exactly the no-state capacity minus this loss.
    """
    capacity, loss = c1_rate_decomposition(a, B, 2)
    if abs(capacity - loss - c1_rate(a, B, 2)) > 1e-12:
        raise ArithmeticError("C1 rate does not split into capacity minus loss")
    return loss


def c1_curve_point(a: float, B: float, kappa: float) -> RateCostPoint:
    """C1 rate at any real ``kappa >= 2`` by cost-sharing between integer layouts."""
    if not kappa >= 2:
        raise InvalidParams(f"Construction 1 needs kappa >= 2, got {kappa}")
    if is_integral(kappa):
        k = round(kappa)
        return RateCostPoint(float(kappa), c1_rate(a, B, k), "c1", {"kappa_lo": k, "kappa_hi": k, "weight": 0.0})
    ks = list(range(2, 2 * math.ceil(kappa) + 8))
    hull = upper_concave_envelope(ks, [c1_rate(a, B, k) for k in ks])
    rate, (i, j, w) = envelope_at(hull, kappa)
    return RateCostPoint(float(kappa), rate, "c1", {"kappa_lo": hull[i][0], "kappa_hi": hull[j][0], "weight": w})


def c2_curve_point(a: float, B: float, kappa: float) -> RateCostPoint:
    opt = optimize_c2(a, B, kappa)
    p = opt.params
    return RateCostPoint(
        float(kappa), opt.rate, "c2", {"p": p.p, "D": p.D, "m": p.m, "n_interior": opt.n_interior, "cost": opt.cost}
    )


def fact1_curve_point(a: float, kappa: float) -> RateCostPoint:
    return RateCostPoint(float(kappa), fact1_capacity(a, kappa), "fact1", {})


@dataclass(frozen=True)
class CorollaryPoint:
    gap: float
    rate: float
    cost: float
    p: float
    D: float
    m: int


def corollary_point(a: float, B: float, kappa: float) -> CorollaryPoint:
    """The explicit asymptotic choice ``D = a/kappa``, ``m ~ kappa*B/2a``, ``delta = 0``.

    That choice spends ``cost = kappa*(1+eps)`` writes; rescaling the budget
    gives ``R(kappa) = log2((1+a)/a * kappa/(1+eps))`` up to the floors, so the
    gap is ``fact1(kappa) - rate + log2(cost/kappa)``.
    """
    D = a / kappa
    if not D <= a - B:
        raise InvalidParams(f"kappa={kappa} too small: D=a/kappa must not exceed a-B")
    m = max(1, round(kappa * B / (2 * a)))
    p = (1 + a - B) / (1 + a)
    rate = c2_rate(a, B, p, D, m)
    cost = c2_cost(a, B, p, D, m, "zero")
    gap = fact1_capacity(a, kappa) - rate + math.log2(cost / kappa)
    return CorollaryPoint(gap, rate, cost, p, D, m)


def corollary_gap(a: float, B: float, kappa: float) -> float:
    return corollary_point(a, B, kappa).gap

