"""Acceptance criteria, each run at its stated tolerance.

Every test records a single PASS/FAIL line, repeated in the pytest terminal
summary under "acceptance criteria".
"""

import math
import time

import numpy as np

from rewritable.awgn import (
    build_comb,
    comb_max_deviation,
    effective_noise,
    estimation_mc,
    gaussian_gp_rate,
    prop1_bound,
    simulate_superposition,
)
from rewritable.bounds import c1_curve_point, fact1_capacity
from rewritable.channel import AwgnChannelParams, UniformChannelParams
from rewritable.cli import main
from rewritable.harness import ExperimentConfig, oracle_expected_writes_numeric, run_experiment
from rewritable.uniform_c1 import c1_rate, c1_rate_decomposition, n_intervals
from rewritable.uniform_c2 import expected_writes_exterior, optimize_c2, solve_delta

A, B = 1 / 3, 1 / 6
MC_EPISODES = 10**6
TABLE = (0.2032, 0.1038, 0.0858, 0.0782, 0.0740, 0.0713)


def test_criterion_01_delta_table(verdict):
    solve_delta.cache_clear()
    start = time.perf_counter()
    got = [solve_delta(i) for i in range(1, 7)]
    elapsed = time.perf_counter() - start
    err = max(abs(g - t) for g, t in zip(got, TABLE))
    ok = err <= 1e-4 and elapsed < 1.0
    verdict(1, ok, f"max |delta - table| = {err:.2e} (tol 1e-4), {elapsed * 1e3:.1f} ms (< 1 s)")


def test_criterion_02_write_cost_closed_forms(verdict):
    start = time.perf_counter()
    worst_rel, worst_z, failures = 0.0, 0.0, []
    for m in (1, 2, 4):
        for i in range(1, m + 1):
            for label, delta in (("zero", 0.0), ("optimal", solve_delta(i))):
                closed = expected_writes_exterior(A, B, m, i, delta)
                quad = oracle_expected_writes_numeric(A, B, m, i, delta)
                rel = abs(quad - closed) / closed
                cfg = ExperimentConfig(
                    "c2",
                    UniformChannelParams(A, B),
                    {"p": 0.0, "D": A - B, "m": m, "exterior": i, "deltas": label},
                    trials=MC_EPISODES,
                    seed=1000 * m + 10 * i + (label == "optimal"),
                    workers=4,
                )
                rep = run_experiment(cfg)
                z = (rep.mean_writes - closed) / rep.stderr
                worst_rel, worst_z = max(worst_rel, rel), max(worst_z, abs(z))
                if rel > 1e-6 or abs(z) > 3 or rep.decode_errors:
                    failures.append((m, i, label, rel, z))
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 120
    verdict(
        2,
        ok,
        f"14 cases: max quad rel err {worst_rel:.1e} (tol 1e-6), max |z| {worst_z:.2f} (band 3), "
        f"{elapsed:.1f} s (< 120 s){'; failures ' + repr(failures) if failures else ''}",
    )


def test_criterion_03_m1_anchors(verdict):
    ch = UniformChannelParams(A, B)
    base = {"p": 0.0, "D": A - B, "m": 1, "exterior": 1, "deltas": "zero"}
    cond = run_experiment(
        ExperimentConfig("c2", ch, {**base, "state_lo": 0.0, "state_hi": B / 2}, trials=MC_EPISODES, seed=31, workers=4)
    )
    uncond = run_experiment(ExperimentConfig("c2", ch, base, trials=MC_EPISODES, seed=32, workers=4))
    e_cond = abs(cond.mean_writes / (4 * A / B) - 1)
    e_uncond = abs(uncond.mean_writes / (3 * A / B) - 1)
    ok = e_cond <= 0.01 and e_uncond <= 0.01
    verdict(
        3,
        ok,
        f"s<B/2: {cond.mean_writes:.4f} vs 4a/B={4 * A / B:g} ({e_cond:.2%}); "
        f"unconditional: {uncond.mean_writes:.4f} vs 3a/B={3 * A / B:g} ({e_uncond:.2%}) (tol 1%)",
    )


def test_criterion_04_c1_cost_and_rate(verdict):
    ch = UniformChannelParams(A, B)
    parts, ok = [], True
    for kappa in (2, 5):
        cost = run_experiment(ExperimentConfig("c1", ch, {"kappa": kappa}, trials=MC_EPISODES, seed=40 + kappa, workers=4))
        trips = run_experiment(ExperimentConfig("c1", ch, {"kappa": kappa}, trials=10**5, seed=50 + kappa))
        rel = abs(cost.mean_writes / kappa - 1)
        rate = c1_rate(A, B, kappa)
        capacity, loss = c1_rate_decomposition(A, B, kappa)
        rate_ok = abs(rate - math.log2(n_intervals(A, B) * kappa)) < 1e-12 and abs(rate - (capacity - loss)) < 1e-12
        ok &= rel <= 0.01 and trips.decode_errors == 0 and cost.decode_errors == 0 and rate_ok
        parts.append(
            f"kappa={kappa}: writes {cost.mean_writes:.4f} ({rel:.2%}), "
            f"{trips.decode_errors} decode errors in 1e5, rate {rate:.6f} {'=' if rate_ok else '!='} capacity - loss"
        )
    verdict(4, ok, "; ".join(parts))


def test_criterion_05_c2_curve_shape(verdict):
    kappas = range(2, 13)
    c2 = [optimize_c2(A, B, k).rate for k in kappas]
    c1 = [c1_curve_point(A, B, k).rate for k in kappas]
    gap = [fact1_capacity(A, k) - r for k, r in zip(kappas, c2)]
    nondecreasing = all(y >= x - 1e-12 for x, y in zip(c2, c2[1:]))
    above_c1 = all(r2 > r1 for r1, r2 in zip(c1, c2))
    rises = [(k, g0, g1) for k, g0, g1 in zip(list(kappas)[1:], gap, gap[1:]) if g1 >= g0]
    gap_decreasing = not rises
    ok = nondecreasing and above_c1 and gap_decreasing
    rise_txt = ", ".join(f"kappa {k - 1}->{k}: {g0:.4f}->{g1:.4f}" for k, g0, g1 in rises)
    verdict(
        5,
        ok,
        f"nondecreasing={nondecreasing}, above C1={above_c1}, gap decreasing={gap_decreasing}"
        + (f" (gap rises at {rise_txt})" if rises else ""),
    )


def test_criterion_06_awgn_prop1(verdict):
    P, N = 100.0, 1.0
    want = {1: 0, **{k: 1 for k in range(2, 10)}, 10: 2}
    got = {k: prop1_bound(P, N, 10 * N, k).l for k in want}
    grid = np.arange(1.0, 16.0 + 1e-9, 0.25)
    dominates = all(prop1_bound(P, N, N, k).rate >= prop1_bound(P, N, 10 * N, k).rate - 1e-12 for k in grid)
    endpoint = prop1_bound(P, N, N, 1).rate
    end_err = abs(endpoint - 0.5 * math.log2(1 + 100 / 2))
    ok = got == want and dominates and end_err <= 1e-9
    verdict(
        6,
        ok,
        f"argmax l {'matches' if got == want else 'differs: ' + repr(got)}, "
        f"sigma_s2=N dominates on {len(grid)} kappas: {dominates}, endpoint {endpoint:.6f} (err {end_err:.1e})",
    )


def test_criterion_07_estimation_algebra(verdict):
    params = AwgnChannelParams(N=1.0, sigma_s2=10.0, P=100.0)
    parts, ok = [], True
    for l in (1, 2, 5):
        est = estimation_mc(params, l, MC_EPISODES, np.random.default_rng(70 + l))
        theory = effective_noise(params.N, params.sigma_s2, l) - params.N
        rel = abs(est.mse / theory - 1)
        z = est.cov / est.cov_se
        ok &= rel <= 0.01 and abs(z) <= 3
        parts.append(f"l={l}: mse rel err {rel:.2%}, cov z={z:+.2f}")
    verdict(7, ok, "; ".join(parts) + " (tol 1%, band 3)")


def test_criterion_08_superposition_comb(verdict):
    params = AwgnChannelParams(N=1.0, sigma_s2=10.0, P=100.0)
    k, l, kappa = 4, 1, 5.0
    delta = 1e-3 * math.sqrt(params.N)
    parts, ok = [], True
    for j, s in enumerate((-3.0, 0.0, 2.5)):
        st = simulate_superposition(params, l, kappa, delta, MC_EPISODES, np.random.default_rng(80 + j), state=s)
        freq = st.label_counts / st.trials
        z = np.max(np.abs(freq - 1 / k) / math.sqrt((1 / k) * (1 - 1 / k) / st.trials))
        rel = abs(st.mean_coding_writes / k - 1)
        ok &= st.k == k and z <= 3 and rel <= 0.01 and st.decode_errors == 0
        parts.append(f"s={s:+g}: max label |z| {z:.2f}, coding writes {st.mean_coding_writes:.4f} ({rel:.2%})")
    # exact label deviation for one output Gaussian, tooth widths sqrt(N)/2^h
    devs = [comb_max_deviation(build_comb(math.sqrt(params.N) / 2**h, k), 0.3, math.sqrt(params.N)) for h in range(4)]
    halves = all(d1 <= 0.5 * d0 for d0, d1 in zip(devs, devs[1:]))
    ok &= halves
    parts.append("deviation over 3 halvings " + ", ".join(f"{d:.1e}" for d in devs))
    verdict(8, ok, "; ".join(parts))


def test_criterion_09_gaussian_gp_identity(verdict):
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(1000):
        P, n_eff, s2 = 10 ** rng.uniform(-2, 3, 3)
        rate = gaussian_gp_rate(P, n_eff, s2, check=False)
        worst = max(worst, abs(rate - 0.5 * math.log2(1 + P / n_eff)))
    verdict(9, worst <= 1e-9, f"1000 draws, max |I(U;Y)-I(U;S_hat) - 0.5 log2(1+P/N_eff)| = {worst:.1e} (tol 1e-9)")


COMMANDS = {
    "delta-table": ["delta-table"],
    "curve-awgn": ["curve-awgn", "--kappa-max", "12", "--step", "0.5"],
    "curve-uniform": ["curve-uniform", "--scheme", "c2"],
    "simulate-c1": ["simulate", "--scheme", "c1", "--set", "a=1/3", "--set", "B=1/6", "--set", "kappa=5"],
    "simulate-c2": [
        "simulate", "--scheme", "c2", "--set", "a=1/3", "--set", "B=1/6",
        "--set", "p=0.6", "--set", "D=0.1", "--set", "m=2",
    ],
    "simulate-superposition": [
        "simulate", "--scheme", "superposition", "--set", "N=1", "--set", "sigma_s2=10", "--set", "P=100",
        "--set", "l=1", "--set", "kappa=5", "--set", "delta=0.001",
    ],
    "validate": ["validate"],
}
SEEDED = {"simulate-c1", "simulate-c2", "simulate-superposition", "validate"}


def test_criterion_10_determinism(verdict, tmp_path, capsys):
    mismatched = []
    for name, argv in COMMANDS.items():
        variants = [(1, 0), (1, 1), (4, 2), (8, 3)] if name in SEEDED else [(1, 0), (1, 1)]
        outputs = []
        for workers, run in variants:
            path = tmp_path / f"{name}-{workers}-{run}.csv"
            extra = ["--seed", "123", "--trials", "300000", "--workers", str(workers)] if name in SEEDED else []
            code = main(argv + extra + ["--csv", str(path)])
            assert code == 0, f"{name} exited {code}"
            outputs.append(path.read_bytes())
        if any(o != outputs[0] for o in outputs):
            mismatched.append(name)
    capsys.readouterr()
    verdict(
        10,
        not mismatched,
        f"{len(COMMANDS)} commands byte-identical across reruns and workers 1/4/8"
        + (f"; mismatched {mismatched}" if mismatched else ""),
    )
