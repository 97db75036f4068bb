import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hetassoc.dual_solver import (MU_FLOOR, DualState, StepsizeParams, bs_price_step,
                                  bs_supply_step, dual_objective, dual_subgradient,
                                  dynamic_stepsize, epsilon_update, initial_mu, run_dual,
                                  user_step)
from hetassoc.fua_solver import brute_force_optimal, fua_objective, solve_fua
from hetassoc.topology import LinkTable

from conftest import random_links


def _state(best, eps):
    return DualState(mu=np.zeros(1), supply=np.ones(1), demand=np.ones(1), t=0,
                     eps=eps, best_dual=best)


class TestSteps:
    def test_user_step_tie(self):
        lt = LinkTable.from_rates([[2.0, 4.0]])
        assert user_step(lt, [0.0, math.log(2)]).choice.tolist() == [0]

    def test_user_step_zero_prices(self):
        lt = random_links(np.random.default_rng(0), 10, 4)
        np.testing.assert_array_equal(user_step(lt, np.zeros(4)).choice, lt.rate.argmax(axis=1))

    def test_high_price_empties_bs(self):
        lt = random_links(np.random.default_rng(1), 10, 3)
        assert np.all(user_step(lt, [100.0, 0.0, 0.0]).choice != 0)

    def test_supply(self):
        assert bs_supply_step(1.0, 10) == pytest.approx(1.0)
        assert bs_supply_step(1 + math.log(2), 10) == pytest.approx(2.0)
        assert bs_supply_step(1 + math.log(10) + 5, 10) == 10.0

    def test_price(self):
        assert bs_price_step(1.0, 0.1, 2.0, 5.0) == pytest.approx(1.3)
        assert bs_price_step(1.0, 0.1, 3.0, 3.0) == 1.0
        assert bs_price_step(1.0, 0.1, 5.0, 2.0) == pytest.approx(0.7)

    def test_stepsize_arithmetic(self):
        p = StepsizeParams(eps_min=0.1, eps_init=2.0)
        assert dynamic_stepsize(_state(10.0, 2.0), p, 4.0, 10.0) == pytest.approx(0.5)
        p2 = StepsizeParams(gamma=2.0 - 1e-9, eps_min=0.1, eps_init=2.0)
        assert dynamic_stepsize(_state(10.0, 2.0), p2, 4.0, 10.0) == pytest.approx(1.0)

    def test_stepsize_zero_gradient(self):
        assert dynamic_stepsize(_state(1.0, 1.0), StepsizeParams(), 0.0, 1.0) == 0.0

    def test_stepsize_bounded_away_from_zero(self):
        p = StepsizeParams(eps_min=0.2, eps_init=0.2)
        # at a new best each step the numerator is eps >= eps_min
        for d in (5.0, 4.0, 3.0):
            assert dynamic_stepsize(_state(d, 0.2), p, 4.0, d) >= 0.2 / 4.0

    def test_epsilon_update(self):
        p = StepsizeParams(eps_min=0.1, eps_init=1.0)
        assert epsilon_update(1.0, True, p) == pytest.approx(1.5)
        assert epsilon_update(1.0, False, p) == pytest.approx(0.5)
        assert epsilon_update(0.15, False, p) == pytest.approx(0.1)

    @pytest.mark.parametrize("kw", [dict(gamma=0.0), dict(gamma=2.0), dict(beta=1.0),
                                    dict(rho=1.0), dict(eps_min=0.0),
                                    dict(eps_min=1.0, eps_init=0.5)])
    def test_params_validated(self, kw):
        with pytest.raises(ValueError):
            StepsizeParams(**kw)

    def test_resolve_defaults(self):
        p = StepsizeParams().resolve(200, -50.0)
        assert p.eps_min == pytest.approx(0.2) and p.eps_init == pytest.approx(5.0)
        assert StepsizeParams().resolve(10, 3.0).eps_init == 1.0

    def test_initial_mu(self):
        np.testing.assert_allclose(bs_supply_step(initial_mu(30, 5), 30), 6.0)


class TestDualObjective:
    def test_closed_form(self):
        lt = LinkTable.from_rates([[math.e, math.e, math.e]])
        assert dual_objective(lt, np.zeros(3)) == pytest.approx(1 + 3 / math.e)

    def test_weak_duality_against_fua(self):
        rng = np.random.default_rng(2)
        for _ in range(60):
            n_u, n_b = int(rng.integers(1, 7)), int(rng.integers(1, 4))
            lt = random_links(rng, n_u, n_b)
            u = solve_fua(lt).utility
            for _ in range(5):
                mu = rng.normal(1.0, 2.0, size=n_b)
                assert dual_objective(lt, mu) >= u - 1e-9

    def test_subgradient_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            lt = random_links(rng, 6, 3)
            mu = rng.normal(1.0, 0.5, size=3)
            g = dual_subgradient(lt, mu)
            h = 1e-7
            for j in range(3):
                e = np.zeros(3)
                e[j] = h
                # a price change this small never flips a user's choice unless it is a near tie
                scores = lt.log_rate - mu
                srt = np.sort(scores, axis=1)
                if np.min(srt[:, -1] - srt[:, -2]) < 1e-5:
                    continue
                num = (dual_objective(lt, mu + e) - dual_objective(lt, mu - e)) / (2 * h)
                assert num == pytest.approx(g[j], abs=1e-5)


class TestRunDual:
    def test_single_bs(self):
        lt = LinkTable.from_rates([[1.0], [2.0], [3.0]])
        res = run_dual(lt)
        assert res.converged and res.stop_reason == "balanced"
        assert res.state.supply[0] == pytest.approx(3.0)
        np.testing.assert_array_equal(res.assoc.x, 1.0)

    def test_frozen_small(self):
        lt = LinkTable.from_rates([[2.0, 1.0], [1.5, 3.0], [1.0, 0.5]])
        res = run_dual(lt, d_ref=math.log(1.5))
        assert res.stop_reason == "balanced" and res.iterations == 1 and res.balanced_at == 0
        # balance at 0.5 users per BS stops above the optimum: 0.575 vs ln 1.5
        assert res.bound_ok is False
        assert res.best_dual == pytest.approx(0.5753641449035616)
        np.testing.assert_allclose(res.state.mu, 1 + math.log(1.5))

    def test_trace_invariants(self, three_tier_links):
        lt = three_tier_links[0]
        res = run_dual(lt, max_iter=100)
        tr = res.trace
        n = len(tr)
        assert n == res.iterations
        for name in ("dual_value", "stepsize", "epsilon", "max_imbalance", "primal_utility",
                     "mu", "supply", "demand", "broadcasts", "requests"):
            assert len(getattr(tr, name)) == n
        assert all(d >= u - 1e-9 for d, u in zip(tr.dual_value, tr.primal_utility))
        assert all(b == lt.n_bs for b in tr.broadcasts)
        assert all(r == lt.n_users for r in tr.requests)
        eps_min = res.params.eps_min
        assert all(e >= eps_min - 1e-15 for e in tr.epsilon)
        for k, mu in zip(tr.supply, tr.mu):
            np.testing.assert_allclose(k, np.minimum(lt.n_users, np.exp(mu - 1)))
        for k, dem in zip(tr.supply, tr.demand):
            assert np.linalg.norm(k - dem) <= 2 * lt.n_users
        assert all(np.all(mu >= MU_FLOOR) for mu in tr.mu)

    def test_deterministic(self, three_tier_links):
        a = run_dual(three_tier_links[1], max_iter=60)
        b = run_dual(three_tier_links[1], max_iter=60)
        assert a.trace.dual_value == b.trace.dual_value
        np.testing.assert_array_equal(a.state.mu, b.state.mu)

    def test_trace_csv(self, tmp_path):
        res = run_dual(random_links(np.random.default_rng(4), 5, 2))
        p = tmp_path / "d.csv"
        res.trace.to_csv(p)
        lines = p.read_text().splitlines()
        assert lines[0] == "iter,dual_value,stepsize,epsilon,max_imbalance,primal_utility"
        assert len(lines) == res.iterations + 1

    def test_unpacks_as_triple(self):
        assoc, state, trace = run_dual(random_links(np.random.default_rng(5), 4, 2))
        assert assoc.integer and len(trace) == state.t + 1

    def test_unbalanced_flagged_at_max_iter(self, three_tier_links):
        res = run_dual(three_tier_links[0], max_iter=5)
        assert not res.converged and res.stop_reason == "max_iter"
        gap = np.abs(res.state.supply - res.state.demand)
        np.testing.assert_array_equal(res.unbalanced_bs, np.flatnonzero(gap > 0.5))

    def test_small_instances_near_optimum(self):
        rng = np.random.default_rng(0)
        good = 0
        for _ in range(200):
            n_u, n_b = int(rng.integers(1, 7)), int(rng.integers(1, 4))
            lt = random_links(rng, n_u, n_b)
            u = fua_objective(run_dual(lt).assoc, lt)
            close = min(abs(u - brute_force_optimal(lt).utility), abs(u - solve_fua(lt).utility))
            good += close <= 1e-2
        # about 95% of runs end within 0.01 of one of the two optima
        assert good >= 180

    def test_bad_eps_rule(self):
        with pytest.raises(ValueError):
            run_dual(random_links(np.random.default_rng(0), 2, 2), eps_rule="other")

    def test_consecutive_rule_runs(self):
        res = run_dual(random_links(np.random.default_rng(6), 5, 3), eps_rule="consecutive")
        assert len(res.trace) >= 1

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.integers(1, 6), st.integers(1, 3))
    def test_weak_duality_every_iteration(self, seed, n_u, n_b):
        lt = random_links(np.random.default_rng(seed), n_u, n_b)
        res = run_dual(lt, max_iter=80, tol_balance=None)
        for d, u in zip(res.trace.dual_value, res.trace.primal_utility):
            assert d >= u - 1e-9
