import math

import numpy as np

# Ratios such as (1+a-B)/(a-B) land a few ulps below an integer in floating
# point; floors and ceilings are taken with this slack.
_INT_SLACK = 1e-9


def ifloor(x: float) -> int:
    return math.floor(x + _INT_SLACK)


def iceil(x: float) -> int:
    return math.ceil(x - _INT_SLACK)


def is_integral(x: float) -> bool:
    return abs(x - round(x)) <= _INT_SLACK


def binary_entropy(p: float) -> float:
    """h(p) in bits, with h(0) = h(1) = 0."""
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def upper_concave_envelope(xs, ys):
    """Vertices of the upper concave hull of points sorted by ``x`` (monotone chain)."""
    hull = []
    for x, y in zip(xs, ys):
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # drop the middle point if it lies on or below the chord
            if (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1) >= 0:
                hull.pop()
            else:
                break
        hull.append((x, y))
    return hull


def envelope_at(hull, x):
    """Evaluate a hull from :func:`upper_concave_envelope` at ``x``.

    Returns ``(value, (i, j, w))`` where the value is ``(1-w)*hull[i] + w*hull[j]``.
    """
    if not hull[0][0] <= x <= hull[-1][0]:
        raise ValueError(f"{x} outside hull support [{hull[0][0]}, {hull[-1][0]}]")
    for k in range(len(hull)):
        if hull[k][0] == x:
            return hull[k][1], (k, k, 0.0)
        if hull[k][0] > x:
            (x1, y1), (x2, y2) = hull[k - 1], hull[k]
            w = (x - x1) / (x2 - x1)
            return (1 - w) * y1 + w * y2, (k - 1, k, w)
    raise AssertionError("unreachable")


def piece_lookup(edges, y):
    """Map ``y`` to the id of the half-open piece ``[lo, hi)`` holding it, else -1.

    ``edges`` is ``(lo, hi, ids)`` with disjoint pieces sorted by ``lo``.
    """
    lo, hi, ids = edges
    y = np.asarray(y, dtype=float)
    k = np.searchsorted(lo, y, side="right") - 1
    kc = np.clip(k, 0, None)
    inside = (k >= 0) & (y < hi[kc])
    return np.where(inside, ids[kc], -1).astype(np.int64)
