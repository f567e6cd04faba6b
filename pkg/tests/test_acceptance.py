"""Acceptance suite: one test per criterion, one printed verdict line each.

Run with `pytest -s tests/test_acceptance.py` to see the per-criterion
lines. Tolerances are pinned here, not tuned at runtime; every expected
value is either computed by an independent oracle in oracles.py or is a
closed-form constant checked against an independent transcription.
"""

import math
import time

import numpy as np
import pytest

from monna.aggregation import nna
from monna.config import parse_text
from monna.network import exhaustive_property_check
from monna.node import theoretical_schedule
from monna.objectives import analytic_minimum, global_value
from monna.reduction import (
    DEFAULT_STRATEGIES,
    audit,
    bound_eleven_f,
    bound_five_f,
    gaussian_inputs,
    make_nna_phase,
)
from monna.trainer import resilience_check, run_single

from oracles import brute_force_nna, momentum_dsgd_reference


def verdict(tag, detail):
    print(f"\n[{tag}] PASS — {detail}")


# ---------------------------------------------------------------------------
# A1: NNA equals the independent sort-and-average oracle, bitwise.


def test_a1_nna_oracle_equivalence():
    start = time.time()
    rng = np.random.default_rng(20240817)
    instances = 0
    for n in range(2, 9):
        for f in range(0, 3):
            if n < 2 * f + 1:
                continue
            for _ in range(500):
                d = int(rng.integers(1, 6))
                self_vec = rng.standard_normal(d)
                received = [rng.standard_normal(d) for _ in range(n - f - 1)]
                got = nna(self_vec, received, f)
                want = brute_force_nna(self_vec, received, f)
                assert np.array_equal(got, want), (n, f, self_vec, received)
                instances += 1
    elapsed = time.time() - start
    assert elapsed < 5.0, f"A1 runtime {elapsed:.2f}s exceeds 5s"
    verdict("A1", f"{instances} instances bitwise-equal to oracle in {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# A2: with f=0 and homogeneous data the trajectory degenerates to
# momentum D-SGD, coordinate-wise within 1e-12 over T=500.


def test_a2_fault_free_degeneration():
    start = time.time()
    text = """
[system]
n = 8
f = 0
dim = 4

[objective]
sigma = 1.0
zeta = 0.0

[schedule]
gamma = 0.05
beta = 0.9
rounds = 1
iterations = 500

[attack]
kind = none

[run]
rule = nna
seeds = 11
"""
    cfg = parse_text(text)
    objs = cfg.build_objectives()
    from monna.objectives import NoiseModel

    reference = momentum_dsgd_reference(
        objs, NoiseModel(cfg.sigma, cfg.noise_dist), cfg.schedule.gamma,
        cfg.schedule.beta, cfg.iterations, cfg.theta0,
    )(11)
    result = run_single(cfg, 11, objs)
    gap = np.max(np.abs(result.theta_history - reference))
    assert gap <= 1e-12, f"max coordinate gap {gap}"
    elapsed = time.time() - start
    assert elapsed < 5.0, f"A2 runtime {elapsed:.2f}s exceeds 5s"
    verdict("A2", f"T=500 trajectory gap {gap:.2e} <= 1e-12 in {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# A3: audited mixing ratios stay strictly below the closed-form bounds in
# both fault regimes.


def test_a3_reduction_bounds():
    start = time.time()
    narrow_bound = bound_eleven_f(26, 2, 1)
    assert narrow_bound.alpha == pytest.approx(9.88 * 2 / 24)
    assert narrow_bound.lam == pytest.approx(0.75)
    phase = make_nna_phase(26, 2, 1, policy="faulty_first")
    narrow = audit(
        phase, gaussian_inputs(24, 5), DEFAULT_STRATEGIES, 1000, seed=101,
        rounds=1, regime="eleven_f",
    )
    assert not narrow.violation
    assert narrow.alpha_hat < narrow_bound.alpha, "contraction bound must hold strictly"
    assert narrow.lambda_hat < narrow_bound.lam, "centering bound must hold strictly"

    wide_bound, rounds = bound_five_f(16, 3, 1.0 / 3.0)
    assert wide_bound.alpha == pytest.approx(2 * 3 / 13)
    phase5 = make_nna_phase(16, 3, rounds, policy="faulty_first")
    wide = audit(
        phase5, gaussian_inputs(13, 5), DEFAULT_STRATEGIES, 1000, seed=202,
        rounds=rounds, regime="five_f",
    )
    assert not wide.violation
    assert wide.alpha_hat < wide_bound.alpha
    assert wide.lambda_hat < wide_bound.lam
    elapsed = time.time() - start
    assert elapsed < 60.0, f"A3 runtime {elapsed:.1f}s exceeds 60s"
    verdict(
        "A3",
        f"narrow: alpha {narrow.alpha_hat:.4f} < {narrow_bound.alpha:.4f}, "
        f"lambda {narrow.lambda_hat:.4f} < {narrow_bound.lam:.4f}; "
        f"wide (K={rounds}): alpha {wide.alpha_hat:.2e} < {wide_bound.alpha:.4f} "
        f"in {elapsed:.1f}s",
    )


# ---------------------------------------------------------------------------
# A4: seed-averaged model drift stays below the closed-form drift bound at
# every iteration under the theoretical schedule and sign-flip attack.


def test_a4_drift_bound():
    start = time.time()
    text = """
[system]
n = 26
f = 2
dim = 10
regime = eleven_f

[objective]
sigma = 1.0
zeta = 1.0

[schedule]
iterations = 1000

[attack]
kind = sf

[run]
rule = nna
seeds = 1..20
"""
    cfg = parse_text(text)
    objs = cfg.build_objectives()
    lip = max(o.lipschitz for o in objs)
    _, q_star = analytic_minimum(objs)
    gap = global_value(objs, cfg.theta0) - q_star
    sched, consts = theoretical_schedule(lip, cfg.iterations, cfg.sigma, 26, 2, gap)
    assert sched.gamma == pytest.approx(cfg.schedule.gamma, rel=1e-12)
    drift_cap = (
        1.1
        * consts.c1
        * sched.gamma**2
        * (cfg.sigma**2 * (1 - sched.beta) / (1 + sched.beta) + 3 * cfg.zeta**2)
    )
    drifts = []
    for seed in cfg.seeds:
        res = run_single(cfg, seed, objs)
        drifts.append([row.drift_theta for row in res.rows])
    averaged = np.mean(drifts, axis=0)
    worst = float(averaged.max())
    assert averaged.shape[0] == 1000
    assert worst <= drift_cap, f"drift {worst:.3e} exceeds cap {drift_cap:.3e}"
    elapsed = time.time() - start
    assert elapsed < 300.0, f"A4 runtime {elapsed:.1f}s exceeds 5min"
    verdict(
        "A4",
        f"max seed-averaged drift {worst:.3e} <= 1.1*E(alpha)*gamma^2*(...) = "
        f"{drift_cap:.3e} over 20 seeds, t<=1000, in {elapsed:.1f}s",
    )


# ---------------------------------------------------------------------------
# A5: resilience ordering on the standard synthetic config.

STANDARD = """
[system]
n = {n}
f = {f}
dim = 10

[objective]
sigma = 11.0
zeta = 0.5

[schedule]
gamma = 0.04
beta = {beta}
rounds = 1
iterations = 3000

[attack]
kind = {attack}

[run]
rule = {rule}
seeds = 1..5
"""


def _standard_epsilon(rule, beta, attack, n=16, f=3):
    cfg = parse_text(STANDARD.format(rule=rule, beta=beta, attack=attack, n=n, f=f))
    objs = cfg.build_objectives()
    results = [run_single(cfg, seed, objs) for seed in cfg.seeds]
    return resilience_check(results, float("inf")).epsilon_measured


def test_a5_resilience_ordering():
    start = time.time()
    clean = _standard_epsilon("mean", 0.99, "none", n=13, f=0)
    attacked = {
        attack: _standard_epsilon("nna", 0.99, attack)
        for attack in ("foe", "alie", "sf", "lf")
    }
    for attack, eps in attacked.items():
        assert eps <= 10.0 * clean, f"{attack}: {eps:.4f} > 10x clean {clean:.4f}"
    no_momentum_sf = _standard_epsilon("nna", 0.0, "sf")
    mean_sf = _standard_epsilon("mean", 0.99, "sf")
    assert no_momentum_sf >= 10.0 * attacked["sf"], (
        f"momentum-less NNA only {no_momentum_sf / attacked['sf']:.1f}x worse"
    )
    assert mean_sf >= 10.0 * attacked["sf"], (
        f"untrimmed mean only {mean_sf / attacked['sf']:.1f}x worse"
    )
    elapsed = time.time() - start
    assert elapsed < 600.0, f"A5 runtime {elapsed:.1f}s exceeds 10min"
    worst_vs_clean = max(eps / clean for eps in attacked.values())
    verdict(
        "A5",
        f"attacked/clean <= {worst_vs_clean:.2f}x (limit 10x); "
        f"no-momentum {no_momentum_sf / attacked['sf']:.1f}x and "
        f"mean {mean_sf / attacked['sf']:.1f}x worse under SF (limit >= 10x) "
        f"in {elapsed:.0f}s",
    )


# ---------------------------------------------------------------------------
# A6: with sigma=0 and f>0 the strongest attack leaves a positive floor
# that doubles when zeta^2 doubles.

FLOOR_CFG = """
[system]
n = 16
f = 3
dim = 10

[objective]
sigma = 0.0
zeta = {zeta}

[schedule]
gamma = 0.05
beta = 0.9
rounds = 1
iterations = 1500

[attack]
kind = {attack}

[run]
rule = nna
seeds = 1,2,3
"""


def _floor(attack, zeta):
    cfg = parse_text(FLOOR_CFG.format(attack=attack, zeta=zeta))
    objs = cfg.build_objectives()
    tails = []
    for seed in cfg.seeds:
        res = run_single(cfg, seed, objs)
        tails.append(np.mean([row.grad_norm_sq for row in res.rows[-375:]]))
    return float(np.mean(tails))


def test_a6_heterogeneity_error_floor():
    start = time.time()
    base_zeta = 0.5
    strongest = max(
        ("foe", "alie", "sf", "lf"), key=lambda attack: _floor(attack, base_zeta)
    )
    levels = [base_zeta, base_zeta * math.sqrt(2.0), base_zeta * 2.0]
    floors = [_floor(strongest, z) for z in levels]
    assert all(f > 1e-8 for f in floors), f"floors not positive: {floors}"
    ratios = [floors[1] / floors[0], floors[2] / floors[1]]
    for ratio in ratios:
        assert 1.5 <= ratio <= 2.5, f"zeta^2 doubling ratio {ratio:.2f} outside [1.5, 2.5]"
    elapsed = time.time() - start
    assert elapsed < 300.0, f"A6 runtime {elapsed:.1f}s exceeds 5min"
    verdict(
        "A6",
        f"strongest attack '{strongest}': floors {floors[0]:.3e} -> {floors[1]:.3e} -> "
        f"{floors[2]:.3e}, doubling ratios {ratios[0]:.2f}, {ratios[1]:.2f} in {elapsed:.0f}s",
    )


# ---------------------------------------------------------------------------
# A7: exhaustive small-instance echo-broadcast properties.


def test_a7_broadcast_properties():
    start = time.time()
    stats = exhaustive_property_check(max_n=7, max_f=2)
    assert stats["validity_failures"] == 0
    assert stats["consistency_violations"] == 0
    elapsed = time.time() - start
    assert elapsed < 60.0, f"A7 runtime {elapsed:.1f}s exceeds 60s"
    verdict(
        "A7",
        f"{stats['instances']} executions over (n,f) in {stats['pairs']}: "
        f"0 validity failures, 0 consistency violations in {elapsed:.1f}s",
    )


# ---------------------------------------------------------------------------
# A8: schedule algebra on 1000 random in-regime draws.


def test_a8_schedule_algebra():
    start = time.time()
    rng = np.random.default_rng(8)
    for _ in range(1000):
        lip = float(rng.uniform(0.05, 50.0))
        iters = int(rng.integers(1, 100_000))
        sigma = float(rng.uniform(0.01, 20.0))
        f = int(rng.integers(0, 6))
        n = 11 * f + int(rng.integers(0, 30)) if f else int(rng.integers(1, 40))
        gap = float(rng.uniform(0.0, 100.0))
        sched, consts = theoretical_schedule(lip, iters, sigma, n, f, gap)
        assert abs((1 - sched.beta**2) - 12 * sched.gamma * lip) <= 1e-12 * max(
            1.0, 12 * sched.gamma * lip
        )
        assert sched.gamma <= 1 / (12 * lip) * (1 + 1e-15)
        # straight independent transcription of the constants
        alpha = 9.88 * f / (n - f)
        lam = 9.0 * f / (n - f)
        c0 = 12.0 * gap
        c1 = 18.0 * alpha * (1 + alpha) / (1 - alpha) ** 2
        c2 = 72.0 * lip * (3.0 / (n - f) + 2 * c1 + (9 * lam / 2) * (2 * c1 + 3))
        c3 = 6.0 * (6 * c1 + (9 * lam / 2) * (4 * c1 + 9))
        c4 = 9.0 * n * c0 * c1 / c2
        for got, want in (
            (consts.alpha, alpha), (consts.lam, lam), (consts.c0, c0),
            (consts.c1, c1), (consts.c2, c2), (consts.c3, c3), (consts.c4, c4),
        ):
            assert got == pytest.approx(want, rel=1e-12, abs=1e-15)
    elapsed = time.time() - start
    assert elapsed < 1.0, f"A8 runtime {elapsed:.2f}s exceeds 1s"
    verdict("A8", f"1000 draws: 1-beta^2 = 12*gamma*L to 1e-12, constants match, {elapsed:.2f}s")
