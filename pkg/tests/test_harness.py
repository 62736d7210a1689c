import math

import numpy as np
import pytest

from rewritable.channel import AwgnChannelParams, UniformChannelParams
from rewritable.errors import InvalidParams, MaxWritesExceeded
from rewritable.harness import (
    BLOCK_TRIALS,
    ExperimentConfig,
    block_rng,
    fmt,
    oracle_expected_writes_numeric,
    run_experiment,
)
from rewritable.uniform_c1 import build_c1_layout, c1_encode_batch
from rewritable.uniform_c2 import expected_writes_exterior, solve_delta

A, B = 1 / 3, 1 / 6
UNI = UniformChannelParams(A, B)


def test_c1_mean_band():
    rep = run_experiment(ExperimentConfig("c1", UNI, {"kappa": 5}, trials=10**6, seed=3, workers=4))
    assert 4.95 <= rep.mean_writes <= 5.05
    assert rep.decode_errors == 0
    assert rep.region_hits.sum() == rep.trials
    assert rep.empirical_rate == pytest.approx(math.log2(15), abs=1e-3)


def test_c2_exterior_only_anchor():
    cfg = ExperimentConfig("c2", UNI, {"p": 0.0, "D": 0.1, "m": 1, "deltas": "zero"}, trials=500_000, seed=4)
    rep = run_experiment(cfg)
    assert abs(rep.mean_writes / (3 * A / B) - 1) <= 0.01


def test_single_trial_matches_direct_encode():
    rep = run_experiment(ExperimentConfig("c1", UNI, {"kappa": 4}, trials=1, seed=11))
    rng = block_rng(11, 0)
    layout = build_c1_layout(A, B, 4)
    regions = rng.integers(0, layout.n_regions, 1)
    states = rng.uniform(0, B, 1)
    tau, _ = c1_encode_batch(layout, regions, states, rng)
    assert rep.trials == 1 and rep.mean_writes == tau[0] and rep.max_writes == tau[0]
    assert math.isnan(rep.stderr)


@pytest.mark.parametrize("scheme,channel,params", [
    ("c1", UNI, {"kappa": 3}),
    ("c2", UNI, {"p": 0.5, "D": 0.1, "m": 2}),
    ("superposition", AwgnChannelParams(1, 10, 100), {"l": 1, "kappa": 4, "delta": 1e-3}),
])
def test_worker_invariance(scheme, channel, params):
    trials = 3 * BLOCK_TRIALS + 17
    reps = [run_experiment(ExperimentConfig(scheme, channel, params, trials=trials, seed=99, workers=w)) for w in (1, 3)]
    assert reps[0].to_csv() == reps[1].to_csv()
    assert reps[0].trials == trials


def test_seed_changes_results():
    a = run_experiment(ExperimentConfig("c1", UNI, {"kappa": 3}, trials=5000, seed=1))
    b = run_experiment(ExperimentConfig("c1", UNI, {"kappa": 3}, trials=5000, seed=2))
    assert a.to_csv() != b.to_csv()


def test_stderr_honesty():
    # independent seeds land within 3 standard errors of the known mean
    inside = 0
    for seed in range(40):
        rep = run_experiment(ExperimentConfig("c1", UNI, {"kappa": 4}, trials=20_000, seed=seed))
        inside += abs(rep.mean_writes - 4) <= 3 * rep.stderr
    assert inside >= 39


def test_max_writes_reports_trial_indices():
    cfg = ExperimentConfig("c1", UNI, {"kappa": 50}, trials=BLOCK_TRIALS + 10, seed=5, max_writes=3)
    with pytest.raises(MaxWritesExceeded) as info:
        run_experiment(cfg)
    assert info.value.cells and all(0 <= c < BLOCK_TRIALS + 10 for c in info.value.cells)
    assert "trials" in str(info.value)


@pytest.mark.parametrize("kw", [
    {"scheme": "c3"},
    {"trials": 0},
    {"seed": -1},
    {"seed": 2**64},
    {"workers": 0},
    {"channel": AwgnChannelParams(1, 1)},
])
def test_config_validation(kw):
    base = dict(scheme="c1", channel=UNI, params={"kappa": 3})
    base.update(kw)
    with pytest.raises(InvalidParams):
        ExperimentConfig(**base)


def test_csv_format():
    rep = run_experiment(ExperimentConfig("c1", UNI, {"kappa": 3}, trials=1000, seed=0))
    lines = rep.to_csv().splitlines()
    assert lines[0] == "metric,value,stderr"
    assert lines[1] == "trials,1000,"
    assert "mean writes/cell" in rep.summary()
    assert fmt(1 / 3) == "0.333333" and fmt(12345678.9) == "1.23457e+07" and fmt(np.int64(7)) == "7"


# -- quadrature oracle ----------------------------------------------------


def test_oracle_anchor():
    assert oracle_expected_writes_numeric(A, B, 1, 1, 0.0) == pytest.approx(3 * A / B, abs=1e-8)


def test_oracle_vs_closed_form():
    d1 = 0.2032
    assert oracle_expected_writes_numeric(A, B, 1, 1, d1) == pytest.approx(
        expected_writes_exterior(A, B, 1, 1, d1), rel=1e-6
    )
    d3 = solve_delta(3)
    assert oracle_expected_writes_numeric(A, B, 4, 3, d3) == pytest.approx(
        expected_writes_exterior(A, B, 4, 3, d3), rel=1e-6
    )


def test_oracle_matches_both_sign_forms():
    # +delta/(1-delta) ln(delta) and -delta/(1-delta) ln(1/delta) are the two
    # written forms of the same term; both must equal the integral
    m, a, b = 3, 0.4, 0.25
    for i in range(1, m + 1):
        d = solve_delta(i)
        plus = (a / b) * (2 * m + 1 + math.log((i - d) / (1 - d) ** 2) + d / (1 - d) * math.log(d))
        alt = (a / b) * (2 * m + 1 + math.log((i - d) / (1 - d) ** 2) - d / (1 - d) * math.log(1 / d))
        quad = oracle_expected_writes_numeric(a, b, m, i, d)
        assert plus == pytest.approx(quad, rel=1e-9) and alt == pytest.approx(quad, rel=1e-9)


def test_oracle_rejects():
    with pytest.raises(InvalidParams):
        oracle_expected_writes_numeric(A, B, 1, 1, 0.0, quadrature_points=999)
    with pytest.raises(InvalidParams):
        oracle_expected_writes_numeric(A, B, 2, 3, 0.0)
