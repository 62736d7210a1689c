"""Estimate-then-code bound for the rewritable AWGN channel with hidden state.

``l`` probe writes give the MMSE state estimate; the remaining writes use a
dirty-paper (Costa) code against the known estimate plus a superposition
"comb" of ``k = floor(kappa - l)`` interleaved target regions, each hit with
probability ``1/k`` per attempt regardless of input and state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from ._numeric import envelope_at, ifloor, upper_concave_envelope
from .channel import DEFAULT_MAX_WRITES, AwgnChannelParams, rewrite_batch, sample_noise, sample_states
from .errors import InvalidParams


def effective_noise(N: float, sigma_s2: float, l: int) -> float:
    """Residual estimation error plus write noise after ``l`` probe writes."""
    return sigma_s2 * N / (l * sigma_s2 + N) + N


def estimate_variance(N: float, sigma_s2: float, l: int) -> float:
    """Second moment of the MMSE estimate, ``E[S_hat(l)^2]``."""
    return l * sigma_s2**2 / (l * sigma_s2 + N)


def costa_alpha(P: float, n_eff: float) -> float:
    return P / (P + n_eff)


@dataclass(frozen=True)
class EstimationResult:
    l: int
    s_hat: float
    sigma2_sl: float
    n_eff: float
    alpha: float


def mmse_gain(params: AwgnChannelParams, l: int) -> float:
    return params.sigma_s2 / (l * params.sigma_s2 + params.N)


def mmse_estimate(params: AwgnChannelParams, outputs, probe: float = 0.0) -> EstimationResult:
    """MMSE state estimate from probe outputs written with constant input ``probe``.

    With no outputs the estimate is 0 and the state counts fully as noise.
    """
    y = np.asarray(outputs, dtype=float)
    l = y.size
    s_hat = float(mmse_gain(params, l) * np.sum(y - probe)) if l else 0.0
    n_eff = effective_noise(params.N, params.sigma_s2, l)
    return EstimationResult(
        l=l,
        s_hat=s_hat,
        sigma2_sl=estimate_variance(params.N, params.sigma_s2, l),
        n_eff=n_eff,
        alpha=costa_alpha(params.P, n_eff),
    )


def single_write_rate(P: float, N: float, sigma_s2: float, l: int) -> float:
    """Dirty-paper rate (bits) of one write after ``l`` estimation writes."""
    if int(l) != l or l < 0:
        raise InvalidParams(f"l must be a nonnegative integer, got {l}")
    return 0.5 * math.log2(1 + P / effective_noise(N, sigma_s2, l))


def integer_point(P: float, N: float, sigma_s2: float, k: int) -> tuple[float, int]:
    """Best ``(rate, l)`` at integer cost ``k`` before convexification."""
    best = None
    for l in range(k):
        r = single_write_rate(P, N, sigma_s2, l) + math.log2(k - l)
        if best is None or r > best[0]:
            best = (r, l)
    return best


@dataclass(frozen=True)
class Prop1Result:
    kappa: float
    rate: float
    l: int
    # hull support: (k_lo, l_lo, k_hi, l_hi, weight on k_hi)
    mix: tuple


def prop1_bound(P: float, N: float, sigma_s2: float, kappa: float) -> Prop1Result:
    """Concave envelope over integer costs of the best estimate-then-code rate.

    ``l`` is the maximising estimation length at ``floor(kappa)``; ``mix``
    gives the cost-sharing pair realising the envelope at ``kappa``.
    """
    if not kappa >= 1:
        raise InvalidParams(f"kappa must be >= 1, got {kappa}")
    if not (P > 0 and N > 0 and sigma_s2 >= 0):
        raise InvalidParams("need P > 0, N > 0, sigma_s2 >= 0")
    k_max = 2 * math.ceil(kappa) + 8
    pts = [integer_point(P, N, sigma_s2, k) for k in range(1, k_max + 1)]
    hull = upper_concave_envelope(range(1, k_max + 1), [r for r, _ in pts])
    rate, (i, j, w) = envelope_at(hull, kappa)
    k_lo, k_hi = hull[i][0], hull[j][0]
    mix = (k_lo, pts[k_lo - 1][1], k_hi, pts[k_hi - 1][1], w)
    return Prop1Result(kappa, rate, pts[ifloor(kappa) - 1][1], mix)


# -- superposition comb ---------------------------------------------------


@dataclass(frozen=True)
class CombLayout:
    """Width-``delta`` teeth labelled ``1..k`` cyclically; tooth ``[0, delta)`` is label 1."""

    delta: float
    k: int

    def label(self, y):
        lab = np.floor(np.asarray(y, dtype=float) / self.delta).astype(np.int64) % self.k + 1
        return int(lab) if np.ndim(lab) == 0 else lab


def build_comb(delta: float, k: int) -> CombLayout:
    if not delta > 0:
        raise InvalidParams(f"tooth width must be positive, got {delta}")
    if int(k) != k or k < 1:
        raise InvalidParams(f"k must be a positive integer, got {k}")
    return CombLayout(float(delta), int(k))


def comb_label_probabilities(comb: CombLayout, mean: float, std: float, tail_sd: float = 12.0) -> np.ndarray:
    """Exact per-attempt label probabilities for an output ``N(mean, std^2)``."""
    lo = math.floor((mean - tail_sd * std) / comb.delta)
    hi = math.ceil((mean + tail_sd * std) / comb.delta)
    edges = np.arange(lo, hi + 1) * comb.delta
    mass = np.diff(ndtr((edges - mean) / std))
    labels = np.arange(lo, hi) % comb.k
    return np.bincount(labels, weights=mass, minlength=comb.k)


def comb_max_deviation(comb: CombLayout, mean: float, std: float) -> float:
    return float(np.max(np.abs(comb_label_probabilities(comb, mean, std) - 1 / comb.k)))


class _CombPolicy:
    def __init__(self, comb: CombLayout, x, targets):
        self.comb, self.x, self.targets = comb, x, targets
        self.first_label = np.zeros(len(x), dtype=np.int64)

    def stimulus(self, idx):
        return self.x[idx]

    def observe(self, idx, y):
        lab = self.comb.label(y)
        fresh = self.first_label[idx] == 0
        self.first_label[idx[fresh]] = lab[fresh]
        return lab == self.targets[idx]


@dataclass
class SuperpositionStats:
    trials: int
    l: int
    k: int
    total_writes: np.ndarray
    coding_writes: np.ndarray
    targets: np.ndarray
    decoded: np.ndarray
    first_labels: np.ndarray

    @property
    def mean_writes(self) -> float:
        return float(self.total_writes.mean())

    @property
    def mean_coding_writes(self) -> float:
        return float(self.coding_writes.mean())

    @property
    def label_counts(self) -> np.ndarray:
        """Labels seen on the first coding-phase write, indexed 0..k-1."""
        return np.bincount(self.first_labels - 1, minlength=self.k)

    @property
    def decode_errors(self) -> int:
        return int(np.sum(self.decoded != self.targets))


def simulate_superposition(
    params: AwgnChannelParams,
    l: int,
    kappa: float,
    delta: float,
    trials: int,
    rng: np.random.Generator,
    state: float | None = None,
    max_writes: int = DEFAULT_MAX_WRITES,
) -> SuperpositionStats:
    """Per-cell run of estimation followed by comb superposition writes.

    Each cell probes ``l`` times with input 0, forms the MMSE estimate, then
    repeats its Costa stimulus ``x = u - alpha * s_hat`` until the output's
    comb label equals a uniformly drawn target.  Across cells the stimulus
    is ``N(0, P)`` and independent of the estimate, so it is sampled as such.
    """
    if int(l) != l or l < 0:
        raise InvalidParams(f"l must be a nonnegative integer, got {l}")
    k = ifloor(kappa - l)
    if k < 1:
        raise InvalidParams(f"need kappa - l >= 1, got kappa={kappa}, l={l}")
    comb = build_comb(delta, k)
    if state is None:
        s = sample_states(params, rng, trials)
    else:
        s = np.full(trials, float(state))
    probes = s[:, None] + sample_noise(params, rng, (trials, l)) if l else np.zeros((trials, 0))
    n_eff = effective_noise(params.N, params.sigma_s2, l)
    s_hat = mmse_gain(params, l) * probes.sum(axis=1)
    alpha = costa_alpha(params.P, n_eff)
    u = rng.normal(0.0, math.sqrt(params.P), trials) + alpha * s_hat
    x = u - alpha * s_hat
    targets = rng.integers(1, k + 1, trials)
    policy = _CombPolicy(comb, x, targets)
    coding, final_y = rewrite_batch(params, s, policy, rng, max_writes)
    return SuperpositionStats(
        trials=trials,
        l=int(l),
        k=k,
        total_writes=coding + l,
        coding_writes=coding,
        targets=targets,
        decoded=comb.label(final_y),
        first_labels=policy.first_label,
    )


# -- Gaussian Gelfand-Pinsker rate ------------------------------------------


def gaussian_mi(var_x: float, var_y: float, cov_xy: float) -> float:
    """Mutual information (bits) of a bivariate Gaussian pair."""
    if var_x == 0 or var_y == 0:
        return 0.0
    det = var_x * var_y - cov_xy**2
    return 0.5 * math.log2(var_x * var_y / det)


def gaussian_gp_rate(P: float, N_eff: float, sigma2_known: float, check: bool = True) -> float:
    """``I(U;Y) - I(U;S_hat)`` for ``U = X + alpha*S_hat``, ``Y = X + S_hat + Z``.

    ``X ~ N(0,P)``, ``S_hat ~ N(0, sigma2_known)``, ``Z ~ N(0, N_eff)`` are
    independent and ``alpha = P/(P+N_eff)``.  With ``check`` set, the result
    is compared against ``0.5*log2(1 + P/N_eff)``.
    """
    if P < 0 or N_eff <= 0 or sigma2_known < 0:
        raise InvalidParams("need P >= 0, N_eff > 0, sigma2_known >= 0")
    alpha = costa_alpha(P, N_eff)
    var_u = P + alpha**2 * sigma2_known
    var_y = P + sigma2_known + N_eff
    i_uy = gaussian_mi(var_u, var_y, P + alpha * sigma2_known)
    i_us = gaussian_mi(var_u, sigma2_known, alpha * sigma2_known)
    rate = i_uy - i_us
    if check:
        expected = 0.5 * math.log2(1 + P / N_eff)
        if abs(rate - expected) > 1e-9:
            raise ArithmeticError(f"dirty-paper rate {rate!r} != {expected!r}")
    return rate


@dataclass(frozen=True)
class EstimationCheck:
    l: int
    mse: float
    mse_se: float
    cov: float
    cov_se: float


def estimation_mc(params: AwgnChannelParams, l: int, trials: int, rng: np.random.Generator) -> EstimationCheck:
    """Sample the estimation error ``S - S_hat(l)`` and its covariance with ``S_hat(l)``."""
    if int(l) != l or l < 1:
        raise InvalidParams(f"l must be a positive integer, got {l}")
    s = sample_states(params, rng, trials)
    y = s[:, None] + sample_noise(params, rng, (trials, l))
    s_hat = mmse_gain(params, l) * y.sum(axis=1)
    err = s - s_hat
    sq = err**2
    prod = err * s_hat
    root = math.sqrt(trials)
    return EstimationCheck(
        l=int(l),
        mse=float(sq.mean()),
        mse_se=float(sq.std(ddof=1) / root),
        cov=float(prod.mean()),
        cov_se=float(prod.std(ddof=1) / root),
    )
