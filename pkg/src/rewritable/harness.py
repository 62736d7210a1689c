"""Seeded, parallel Monte Carlo runner and numeric oracles.

Trials are cut into fixed-size blocks.  Block ``b`` draws from its own
Philox stream keyed by ``(seed, b)``, so the aggregate depends only on the
config and seed, never on how many workers processed the blocks.  Block
statistics are integer sums merged in block order.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from numpy.polynomial.legendre import leggauss

from .awgn import simulate_superposition
from .channel import DEFAULT_MAX_WRITES, AwgnChannelParams, UniformChannelParams, sample_states
from .errors import InvalidParams, MaxWritesExceeded
from .uniform_c1 import build_c1_layout, c1_encode_batch
from .uniform_c2 import _as_policy, build_c2_layout, c2_encode_batch, per_state_expected_writes

BLOCK_TRIALS = 1 << 16
SCHEMES = ("c1", "c2", "superposition")


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo experiment.

    ``params`` per scheme (optional keys in brackets):

    * ``c1``: kappa, [region, state, state_lo, state_hi]
    * ``c2``: p, D, m, [deltas, region, exterior, state, state_lo, state_hi]
    * ``superposition``: l, kappa, delta, [state]

    ``region`` is a flat region id; ``exterior`` pins C2 cells to ``E_i``.
    Without them regions are drawn as the rate analysis assumes.
    """

    scheme: str
    channel: UniformChannelParams | AwgnChannelParams
    params: Mapping = field(default_factory=dict)
    trials: int = 100_000
    seed: int = 0
    workers: int = 1
    max_writes: int = DEFAULT_MAX_WRITES

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise InvalidParams(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if self.trials < 1:
            raise InvalidParams("trials must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise InvalidParams("seed must be an unsigned 64-bit integer")
        if self.workers < 1:
            raise InvalidParams("workers must be >= 1")
        want = AwgnChannelParams if self.scheme == "superposition" else UniformChannelParams
        if not isinstance(self.channel, want):
            raise InvalidParams(f"scheme {self.scheme} needs {want.__name__}")


@dataclass
class BlockStats:
    trials: int
    tau_sum: int
    tau_sq_sum: int
    tau_max: int
    hits: np.ndarray
    decode_errors: int
    # superposition only
    coding_sum: int = 0
    coding_sq_sum: int = 0
    first_labels: np.ndarray | None = None

    def merge(self, other: "BlockStats") -> "BlockStats":
        return BlockStats(
            self.trials + other.trials,
            self.tau_sum + other.tau_sum,
            self.tau_sq_sum + other.tau_sq_sum,
            max(self.tau_max, other.tau_max),
            self.hits + other.hits,
            self.decode_errors + other.decode_errors,
            self.coding_sum + other.coding_sum,
            self.coding_sq_sum + other.coding_sq_sum,
            None if self.first_labels is None else self.first_labels + other.first_labels,
        )


def _mean_se(total: int, sq_total: int, n: int) -> tuple[float, float]:
    mean = total / n
    if n < 2:
        return mean, float("nan")
    var = (sq_total - total * total / n) / (n - 1)
    return mean, math.sqrt(max(var, 0.0) / n)


@dataclass
class ExperimentReport:
    scheme: str
    trials: int
    mean_writes: float
    stderr: float
    max_writes: int
    region_hits: np.ndarray
    decode_errors: int
    wall_time: float
    mean_coding_writes: float | None = None
    coding_stderr: float | None = None
    first_label_counts: np.ndarray | None = None

    @property
    def empirical_rate(self) -> float:
        """Entropy (bits) of the realised region distribution."""
        p = self.region_hits[self.region_hits > 0] / self.trials
        return float(-(p * np.log2(p)).sum()) + 0.0

    def rows(self) -> list[tuple[str, float, float | None]]:
        out = [
            ("trials", self.trials, None),
            ("mean_writes", self.mean_writes, self.stderr),
            ("max_writes", self.max_writes, None),
            ("decode_errors", self.decode_errors, None),
            ("empirical_rate_bits", self.empirical_rate, None),
        ]
        if self.mean_coding_writes is not None:
            out.append(("mean_coding_writes", self.mean_coding_writes, self.coding_stderr))
        if self.first_label_counts is not None:
            n = self.first_label_counts.sum()
            for j, c in enumerate(self.first_label_counts, start=1):
                f = c / n
                out.append((f"first_label_freq[{j}]", f, math.sqrt(f * (1 - f) / n)))
        for rid, c in enumerate(self.region_hits):
            out.append((f"hits[{rid}]", int(c), None))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "value", "stderr"])
        for name, value, se in self.rows():
            w.writerow([name, fmt(value), "" if se is None else fmt(se)])
        return buf.getvalue()

    def summary(self) -> str:
        lines = [
            f"scheme {self.scheme}: {self.trials} trials in {self.wall_time:.2f} s",
            f"  mean writes/cell  {self.mean_writes:.6g} +/- {self.stderr:.3g}",
            f"  max writes        {self.max_writes}",
            f"  decode errors     {self.decode_errors}",
            f"  empirical rate    {self.empirical_rate:.6g} bits/cell",
        ]
        if self.mean_coding_writes is not None:
            lines.append(f"  coding writes     {self.mean_coding_writes:.6g} +/- {self.coding_stderr:.3g}")
        return "\n".join(lines)


def fmt(value) -> str:
    """Locale-independent 6 significant figure formatting."""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".6g")


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def _states(cfg: ExperimentConfig, rng, n):
    prm = cfg.params
    if "state" in prm:
        return np.full(n, float(prm["state"]))
    if "state_lo" in prm or "state_hi" in prm:
        return rng.uniform(float(prm.get("state_lo", 0.0)), float(prm.get("state_hi", cfg.channel.B)), n)
    return sample_states(cfg.channel, rng, n)


def _run_block(cfg: ExperimentConfig, block: int) -> BlockStats:
    n = min(BLOCK_TRIALS, cfg.trials - block * BLOCK_TRIALS)
    rng = block_rng(cfg.seed, block)
    prm = cfg.params
    try:
        if cfg.scheme == "superposition":
            st = simulate_superposition(
                cfg.channel,
                int(prm["l"]),
                float(prm["kappa"]),
                float(prm["delta"]),
                n,
                rng,
                state=prm.get("state"),
                max_writes=cfg.max_writes,
            )
            tau = st.total_writes
            hits = np.bincount(st.decoded - 1, minlength=st.k)
            return BlockStats(
                n,
                int(tau.sum()),
                int((tau * tau).sum()),
                int(tau.max()),
                hits,
                st.decode_errors,
                int(st.coding_writes.sum()),
                int((st.coding_writes**2).sum()),
                st.label_counts,
            )
        ch = cfg.channel
        if cfg.scheme == "c1":
            layout = build_c1_layout(ch.a, ch.B, int(prm["kappa"]))
            if "region" in prm:
                regions = np.full(n, int(prm["region"]))
            else:
                regions = rng.integers(0, layout.n_regions, n)
            states = _states(cfg, rng, n)
            tau, y = c1_encode_batch(layout, regions, states, rng, cfg.max_writes)
        else:
            layout = build_c2_layout(ch.a, ch.B, float(prm["D"]), int(prm["m"]))
            policy = _as_policy(prm.get("deltas", "optimal"), layout.m)
            if "region" in prm:
                regions = np.full(n, int(prm["region"]))
            elif "exterior" in prm:
                regions = np.full(n, layout.exterior_id(int(prm["exterior"])))
            else:
                p = float(prm["p"])
                interior = rng.random(n) < p
                regions = np.where(
                    interior,
                    rng.integers(0, layout.n_interior, n),
                    layout.n_interior + rng.integers(0, 2 * layout.m, n),
                )
            states = _states(cfg, rng, n)
            tau, y = c2_encode_batch(layout, policy, regions, states, rng, cfg.max_writes)
    except MaxWritesExceeded as exc:
        trials = [block * BLOCK_TRIALS + c for c in exc.cells]
        raise MaxWritesExceeded(f"{exc} (trials {trials[:10]})", cells=trials) from None
    decoded = layout.decode_ids(y)
    return BlockStats(
        n,
        int(tau.sum()),
        int((tau * tau).sum()),
        int(tau.max()),
        np.bincount(decoded[decoded >= 0], minlength=layout.n_regions),
        int(np.sum(decoded != regions)),
    )


def _run_block_args(args):
    return _run_block(*args)


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    start = time.perf_counter()
    n_blocks = -(-config.trials // BLOCK_TRIALS)
    jobs = [(config, b) for b in range(n_blocks)]
    if config.workers == 1 or n_blocks == 1:
        blocks = [_run_block(*j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(config.workers, n_blocks)) as pool:
            blocks = list(pool.map(_run_block_args, jobs))
    total = blocks[0]
    for b in blocks[1:]:
        total = total.merge(b)
    mean, se = _mean_se(total.tau_sum, total.tau_sq_sum, total.trials)
    report = ExperimentReport(
        scheme=config.scheme,
        trials=total.trials,
        mean_writes=mean,
        stderr=se,
        max_writes=total.tau_max,
        region_hits=total.hits,
        decode_errors=total.decode_errors,
        wall_time=time.perf_counter() - start,
    )
    if config.scheme == "superposition":
        report.mean_coding_writes, report.coding_stderr = _mean_se(total.coding_sum, total.coding_sq_sum, total.trials)
        report.first_label_counts = total.first_labels
    return report


def oracle_expected_writes_numeric(
    a: float, B: float, m: int, i: int, delta: float, quadrature_points: int = 1000
) -> float:
    """Average the per-state write cost of ``E_i`` over ``S ~ U[0, B]`` numerically.

    Gauss-Legendre panels are split at the branch points of the piecewise
    cost so each panel integrates a smooth function.
    """
    if quadrature_points < 1000:
        raise InvalidParams("quadrature_points must be >= 1000")
    if not 1 <= i <= m:
        raise InvalidParams(f"i must lie in 1..{m}")
    cuts = sorted({0.0, B * (i - 1) / (2 * m), B * (i - delta) / (2 * m), B * i / (2 * m), B})
    panels = [(lo, hi) for lo, hi in zip(cuts, cuts[1:]) if hi > lo]
    nodes, weights = leggauss(quadrature_points // len(panels))
    total = 0.0
    for lo, hi in panels:
        half, mid = (hi - lo) / 2, (hi + lo) / 2
        # nodes are interior, so every evaluation stays inside one branch
        vals = [per_state_expected_writes(a, B, m, i, delta, mid + half * t) for t in nodes]
        total += half * float(np.dot(weights, vals))
    return total / B
