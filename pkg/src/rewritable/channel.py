"""Hidden-state additive rewrite channel ``Y = X + W + S``.

The state ``S`` is drawn once per cell and stays fixed across write
attempts; every attempt draws fresh write noise ``W``.  Two channel laws are
supported:

* uniform: ``W ~ U[-a/2, a/2]``, ``S ~ U[0, B]``
* AWGN:    ``W ~ N(0, N)``,      ``S ~ N(0, sigma_s2)``

Randomness always comes from an injected :class:`numpy.random.Generator`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence, Union

import numpy as np

from .errors import InvalidParams, MaxWritesExceeded

DEFAULT_MAX_WRITES = 1_000_000


@dataclass(frozen=True)
class UniformChannelParams:
    """Uniform write noise of width ``a`` and uniform state on ``[0, B]``."""

    a: float
    B: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a > 0):
            raise InvalidParams(f"noise width a must be positive, got {self.a}")
        # B = 0 is the degenerate no-state channel; the codecs require B > 0.
        if not (math.isfinite(self.B) and self.B >= 0):
            raise InvalidParams(f"state width B must be nonnegative, got {self.B}")
        if self.B >= self.a:
            raise InvalidParams(f"state width B={self.B} must be below noise width a={self.a}")


@dataclass(frozen=True)
class AwgnChannelParams:
    N: float
    sigma_s2: float
    P: float = 1.0

    def __post_init__(self):
        if not self.N > 0:
            raise InvalidParams(f"noise variance N must be positive, got {self.N}")
        if not self.sigma_s2 >= 0:
            raise InvalidParams(f"state variance must be nonnegative, got {self.sigma_s2}")
        if not self.P > 0:
            raise InvalidParams(f"power P must be positive, got {self.P}")


ChannelParams = Union[UniformChannelParams, AwgnChannelParams]


@dataclass(frozen=True)
class CellState:
    s: float


@dataclass
class WriteTrace:
    stimuli: list = field(default_factory=list)
    outputs: list = field(default_factory=list)

    @property
    def tau(self) -> int:
        return len(self.outputs)

    @property
    def final_y(self) -> float:
        return self.outputs[-1]


class Strategy(Protocol):
    """Adaptive write strategy over the output history of one cell."""

    def stimulus(self, outputs: Sequence[float]) -> float: ...

    def done(self, outputs: Sequence[float]) -> bool: ...


def sample_states(params: ChannelParams, rng: np.random.Generator, size) -> np.ndarray:
    if isinstance(params, UniformChannelParams):
        return rng.uniform(0.0, params.B, size)
    return rng.normal(0.0, math.sqrt(params.sigma_s2), size)


def sample_noise(params: ChannelParams, rng: np.random.Generator, size) -> np.ndarray:
    if isinstance(params, UniformChannelParams):
        return rng.uniform(-params.a / 2, params.a / 2, size)
    return rng.normal(0.0, math.sqrt(params.N), size)


def sample_state(params: ChannelParams, rng: np.random.Generator) -> CellState:
    return CellState(float(sample_states(params, rng, None)))


def write_once(params: ChannelParams, state: CellState, x: float, rng: np.random.Generator) -> float:
    return float(x + sample_noise(params, rng, None) + state.s)


def rewrite_until(
    params: ChannelParams,
    state: CellState,
    strategy: Strategy,
    rng: np.random.Generator,
    max_writes: int = DEFAULT_MAX_WRITES,
) -> WriteTrace:
    """Apply stimuli chosen by ``strategy`` until its stop predicate holds.

    Raises :class:`MaxWritesExceeded` if the predicate never holds within
    ``max_writes`` attempts.
    """
    trace = WriteTrace()
    while trace.tau < max_writes:
        x = strategy.stimulus(trace.outputs)
        trace.stimuli.append(x)
        trace.outputs.append(write_once(params, state, x, rng))
        if strategy.done(trace.outputs):
            return trace
    raise MaxWritesExceeded(f"target not reached within {max_writes} writes (s={state.s:.6g})")


class BatchPolicy(Protocol):
    """Vectorised counterpart of :class:`Strategy`.

    Cells are addressed by index into the policy's own per-cell arrays.
    ``observe`` may update per-cell memory (e.g. a switch flag) and returns
    the mask of cells whose stop predicate now holds.
    """

    def stimulus(self, idx: np.ndarray) -> np.ndarray: ...

    def observe(self, idx: np.ndarray, y: np.ndarray) -> np.ndarray: ...


def rewrite_batch(
    params: ChannelParams,
    states: np.ndarray,
    policy: BatchPolicy,
    rng: np.random.Generator,
    max_writes: int = DEFAULT_MAX_WRITES,
) -> tuple[np.ndarray, np.ndarray]:
    """Run :func:`rewrite_until` semantics over many independent cells at once.

    Every round draws one fresh noise sample for each still-active cell.
    Returns ``(tau, final_y)`` arrays.
    """
    states = np.asarray(states, dtype=float)
    n = states.shape[0]
    tau = np.zeros(n, dtype=np.int64)
    final_y = np.full(n, np.nan)
    active = np.arange(n)
    rounds = 0
    while active.size:
        if rounds >= max_writes:
            raise MaxWritesExceeded(
                f"{active.size} cell(s) did not reach their target within {max_writes} writes",
                cells=active.tolist(),
            )
        x = policy.stimulus(active)
        y = x + sample_noise(params, rng, active.size) + states[active]
        tau[active] += 1
        hit = policy.observe(active, y)
        final_y[active[hit]] = y[hit]
        active = active[~hit]
        rounds += 1
    return tau, final_y
