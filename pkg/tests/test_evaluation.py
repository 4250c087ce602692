"""Factual/counterfactual metrics, permutation test, and the exact MDP oracles."""

import itertools
import math
from datetime import date, timedelta

import numpy as np
import pytest

from careersim.evaluation import (
    ObservedPath,
    TinyMdp,
    compare_policies,
    distribution_report,
    factual_income,
    generate_counterfactual,
    monthly_income_series,
    observed_paths,
    permutation_test,
    policy_evaluation_oracle,
    random_tiny_mdp,
    value_iteration_oracle,
    write_distribution_csv,
)
from careersim.forest import ForestParams
from careersim.market import JobId, Vacancy, WorkExperienceRecord
from careersim.models import fit_salary_model

from test_env import CATALOG, make_env


def constant_salary_model(jobs, annual):
    vacancies = [Vacancy(j, annual) for j in jobs for _ in range(20)]
    return fit_salary_model(vacancies, jobs, ForestParams(n_trees=5, seed=0))


def rec(emp, job, start, days):
    start = date.fromisoformat(start)
    return WorkExperienceRecord(emp, job, start, start + timedelta(days=days))


class TestIncomeSeries:
    def test_single_year_job(self):
        model = constant_salary_model([JobId(0, 0)], 36_000.0)
        path = monthly_income_series([rec("a", JobId(0, 0), "2020-01-15", 330)], model)
        assert path.duration_months == 12
        assert all(m == pytest.approx(3_000.0) for m in path.monthly_income)
        assert factual_income(path) == pytest.approx(36_000.0)

    def test_overlap_pays_mean(self):
        jobs = [JobId(0, 0), JobId(1, 1)]
        vacancies = [Vacancy(jobs[0], 12_000.0)] * 30 + [Vacancy(jobs[1], 24_000.0)] * 30
        model = fit_salary_model(vacancies, jobs, ForestParams(n_trees=10, seed=1))
        records = [rec("a", jobs[0], "2020-01-01", 89), rec("a", jobs[1], "2020-01-01", 89)]
        path = monthly_income_series(records, model)
        assert path.duration_months == 3
        assert all(m == pytest.approx(1_500.0) for m in path.monthly_income)

    def test_gap_carries_previous_salary(self):
        jobs = [JobId(0, 0), JobId(1, 1)]
        vacancies = [Vacancy(jobs[0], 36_000.0)] * 30 + [Vacancy(jobs[1], 60_000.0)] * 30
        model = fit_salary_model(vacancies, jobs, ForestParams(n_trees=10, seed=1))
        records = [rec("a", jobs[0], "2020-01-01", 59), rec("a", jobs[1], "2020-07-01", 60)]
        path = monthly_income_series(records, model)
        # Jan..Aug inclusive; Mar..Jun are gap months at 3000
        assert path.duration_months == 8
        assert path.monthly_income[2] == pytest.approx(3_000.0)
        assert path.monthly_income[5] == pytest.approx(3_000.0)
        assert path.monthly_income[7] == pytest.approx(5_000.0)

    def test_start_job_is_first_record(self):
        jobs = [JobId(0, 0), JobId(1, 1)]
        model = constant_salary_model(jobs, 30_000.0)
        records = [rec("a", jobs[1], "2021-01-01", 30), rec("a", jobs[0], "2020-01-01", 30)]
        assert monthly_income_series(records, model).start_job == jobs[0]

    def test_empty_records_rejected(self):
        model = constant_salary_model([JobId(0, 0)], 30_000.0)
        with pytest.raises(ValueError, match="zero records"):
            monthly_income_series([], model)

    def test_factual_income_matches_brute_force(self):
        rng = np.random.default_rng(0)
        incomes = tuple(float(x) for x in rng.uniform(1000, 5000, size=31))
        path = ObservedPath("a", JobId(0, 0), 31, incomes)
        total = 0.0
        for m in range(31):
            total += incomes[m]
        assert factual_income(path) == pytest.approx(total)


class TestCounterfactual:
    def test_closed_loop_equals_factual(self):
        # stay policy, certain hire, constant salary: CFI == FI exactly
        salaries = {j: 36_000.0 for j in CATALOG}
        env = make_env(prob=lambda e, a: 1.0, salaries=salaries, horizon=40)
        path = ObservedPath("a", CATALOG[0], 12, tuple([3_000.0] * 12))

        def stay(env_, state, rng):
            return state.current_job

        cfi = generate_counterfactual(stay, env, path, np.random.default_rng(0))
        assert cfi == factual_income(path)

    def test_partial_quarter_prorated(self):
        salaries = {j: 48_000.0 for j in CATALOG}
        env = make_env(prob=lambda e, a: 0.0, salaries=salaries, horizon=40)
        path = ObservedPath("a", CATALOG[0], 7, tuple([1.0] * 7))

        def stay(env_, state, rng):
            return state.current_job

        cfi = generate_counterfactual(stay, env, path, np.random.default_rng(0))
        # two full quarters plus one month of the third
        assert cfi == pytest.approx(2 * 12_000.0 + 12_000.0 / 3.0)

    def test_zero_months(self):
        env = make_env()
        path = ObservedPath("a", CATALOG[0], 0, ())
        assert generate_counterfactual(lambda e, s, r: CATALOG[0], env, path,
                                       np.random.default_rng(0)) == 0.0

    def test_duration_beyond_horizon_supported(self):
        env = make_env(prob=lambda e, a: 0.0, horizon=4,
                       salaries={j: 36_000.0 for j in CATALOG})
        path = ObservedPath("a", CATALOG[0], 24, tuple([1.0] * 24))

        def stay(env_, state, rng):
            return state.current_job

        cfi = generate_counterfactual(stay, env, path, np.random.default_rng(0))
        assert cfi == pytest.approx(8 * 9_000.0)

    def test_start_outside_catalog_raises(self):
        env = make_env()
        path = ObservedPath("a", JobId(9, 9), 3, (1.0, 1.0, 1.0))
        with pytest.raises(ValueError, match="catalog"):
            generate_counterfactual(lambda e, s, r: CATALOG[0], env, path,
                                    np.random.default_rng(0))

    def test_frozen_seed_reproducible(self):
        env = make_env(prob=lambda e, a: 0.5)

        def policy(env_, state, rng):
            return CATALOG[int(rng.integers(len(CATALOG)))]

        path = ObservedPath("a", CATALOG[0], 18, tuple([1.0] * 18))
        a = generate_counterfactual(policy, env, path, np.random.default_rng(3))
        b = generate_counterfactual(policy, env, path, np.random.default_rng(3))
        assert a == b


class TestComparePolicies:
    def make_paths(self, n, months=12, income=3000.0):
        return [
            ObservedPath(f"e{i}", CATALOG[i % len(CATALOG)], months, tuple([income] * months))
            for i in range(n)
        ]

    def test_replay_equilibrium_zero_change(self):
        salaries = {j: 36_000.0 for j in CATALOG}
        env = make_env(prob=lambda e, a: 1.0, salaries=salaries)

        def stay(env_, state, rng):
            return state.current_job

        report = compare_policies(stay, env, self.make_paths(40), rng=np.random.default_rng(0))
        assert report.change_pct == 0.0
        assert report.gainers_pct == 0.0
        assert report.losers_pct == 0.0
        assert report.n_paths == 40

    def test_mean_cfi_matches_independent_accumulation(self):
        env = make_env(prob=lambda e, a: 0.5)

        def policy(env_, state, rng):
            return CATALOG[int(rng.integers(len(CATALOG)))]

        paths = self.make_paths(25, months=9)
        report = compare_policies(policy, env, paths, rng=np.random.default_rng(5))
        # independent accumulation with an identically seeded stream
        rng = np.random.default_rng(5)
        total = 0.0
        for p in paths:
            total += generate_counterfactual(policy, env, p, rng)
        assert report.mean_cfi_eur == pytest.approx(total / len(paths), rel=1e-9)

    def test_gainers_losers_ties_partition(self):
        env = make_env(prob=lambda e, a: 0.5)

        def policy(env_, state, rng):
            return CATALOG[int(rng.integers(len(CATALOG)))]

        paths = self.make_paths(30, months=10)
        report = compare_policies(policy, env, paths, rng=np.random.default_rng(1))
        ties_pct = 100.0 - report.gainers_pct - report.losers_pct
        assert ties_pct >= -1e-9
        assert report.n_paths == 30

    def test_sampling_without_replacement_and_skips(self):
        env = make_env(prob=lambda e, a: 0.5)
        paths = self.make_paths(20) + [ObservedPath("x", JobId(9, 9), 6, tuple([1.0] * 6))]

        def policy(env_, state, rng):
            return state.current_job

        report = compare_policies(policy, env, paths, n_sample=10_000,
                                  rng=np.random.default_rng(2))
        assert report.n_skipped == 1
        assert report.n_paths == 20
        small = compare_policies(policy, env, paths, n_sample=5, rng=np.random.default_rng(2))
        assert small.n_paths + small.n_skipped == 5

    def test_deterministic_given_seed(self):
        env = make_env(prob=lambda e, a: 0.4)

        def policy(env_, state, rng):
            return CATALOG[int(rng.integers(len(CATALOG)))]

        paths = self.make_paths(15)
        a = compare_policies(policy, env, paths, rng=np.random.default_rng(9))
        b = compare_policies(policy, env, paths, rng=np.random.default_rng(9))
        assert a == b


def exhaustive_permutation_oracle(a, b):
    """Brute-force two-sided permutation p-value over all label assignments."""
    pooled = list(a) + list(b)
    na, n = len(a), len(a) + len(b)
    observed = abs(sum(a) / na - sum(b) / (n - na))
    hits = total = 0
    for combo in itertools.combinations(range(n), na):
        ga = [pooled[i] for i in combo]
        gb = [pooled[i] for i in range(n) if i not in combo]
        diff = abs(sum(ga) / len(ga) - sum(gb) / len(gb))
        total += 1
        if diff >= observed - 1e-12 * (1 + observed):
            hits += 1
    return hits / total


class TestPermutationTest:
    def test_identical_samples_p_one(self):
        data = [1.0, 2.0, 3.0, 4.0]
        assert permutation_test(data, list(data)) >= 0.9

    def test_exact_agreement_with_enumeration_small_inputs(self):
        rng = np.random.default_rng(0)
        for na in (1, 2, 3, 4):
            for nb in (1, 2, 3, 4):
                if na + nb > 8:
                    continue
                a = list(rng.normal(size=na))
                b = list(rng.normal(size=nb))
                assert permutation_test(a, b) == pytest.approx(
                    exhaustive_permutation_oracle(a, b), abs=1e-12
                )

    def test_separated_gaussians_reject(self):
        rng = np.random.default_rng(1)
        a = rng.normal(0.0, 1.0, size=100)
        b = rng.normal(5.0, 1.0, size=100)
        assert permutation_test(a, b, rng=np.random.default_rng(2)) < 0.01

    def test_p_value_floor(self):
        a = [0.0] * 30
        b = [100.0] * 30
        p = permutation_test(a, b, n_permutations=1000, rng=np.random.default_rng(3))
        assert p == pytest.approx(1.0 / 1001.0)

    def test_affine_invariance(self):
        rng = np.random.default_rng(4)
        a = list(rng.normal(size=6))
        b = list(rng.normal(size=5))
        base = permutation_test(a, b)
        shifted = permutation_test([3.0 * x + 7.0 for x in a], [3.0 * x + 7.0 for x in b])
        assert base == pytest.approx(shifted, abs=1e-12)

    def test_empty_sample_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            permutation_test([], [1.0])


class TestDistributionReport:
    def test_no_movement_start_equals_final(self):
        env = make_env(prob=lambda e, a: 0.0, horizon=5)

        def policy(env_, state, rng):
            return CATALOG[int(rng.integers(len(CATALOG)))]

        report = distribution_report(policy, env, n_episodes=200, rng=np.random.default_rng(0))
        assert report.start_counts == report.final_counts

    def test_counts_sum_to_episodes(self):
        env = make_env(prob=lambda e, a: 0.5, horizon=4)

        def policy(env_, state, rng):
            return CATALOG[int(rng.integers(len(CATALOG)))]

        report = distribution_report(policy, env, n_episodes=157, rng=np.random.default_rng(1))
        assert sum(report.start_counts.values()) == 157
        assert sum(report.final_counts.values()) == 157

    def test_top_k_truncation_and_csv(self, tmp_path):
        env = make_env(prob=lambda e, a: 1.0, horizon=3)

        def to_first(env_, state, rng):
            return CATALOG[0]

        report = distribution_report(to_first, env, n_episodes=50,
                                     rng=np.random.default_rng(2), top_k=2)
        assert len(report.top_final()) == 1
        assert report.top_final()[0][0] == CATALOG[0]
        out = tmp_path / "dist.csv"
        write_distribution_csv(report, out)
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "position,occupation,industry,count"
        assert any(line.startswith("final,0,0,50") for line in lines)

    def test_start_jobs_pool_respected(self):
        env = make_env(prob=lambda e, a: 0.0, horizon=2)

        def stay(env_, state, rng):
            return state.current_job

        report = distribution_report(stay, env, n_episodes=80, rng=np.random.default_rng(3),
                                     start_jobs=[CATALOG[1]])
        assert report.start_counts == {CATALOG[1]: 80}


def enumerate_policies_oracle(mdp):
    """Best total expected reward over all deterministic time-dependent policies.

    Exhaustive: only usable for very small instances.
    """
    best = -math.inf
    stationary_actions = list(itertools.product(range(mdp.A), repeat=mdp.S))
    for per_step in itertools.product(stationary_actions, repeat=mdp.horizon):
        # evaluate this time-dependent deterministic policy exactly
        v = np.zeros(mdp.S)
        for t in range(mdp.horizon - 1, -1, -1):
            actions = per_step[t]
            v = np.array([
                mdp.rewards[s, actions[s]] + mdp.discount * mdp.transitions[s, actions[s]] @ v
                for s in range(mdp.S)
            ])
        best = max(best, float(v.max()))
    return best


class TestValueIterationOracle:
    def test_single_action_chain(self):
        # one state, one action, reward 1 per step, gamma 1: Q at start = horizon
        P = np.ones((1, 1, 1))
        R = np.ones((1, 1))
        mdp = TinyMdp(P, R, horizon=3, discount=1.0)
        sol = value_iteration_oracle(mdp)
        assert sol.q[0, 0, 0] == pytest.approx(3.0)
        assert sol.v[0, 0] == pytest.approx(3.0)

    def test_gamma_zero_is_myopic(self):
        rng = np.random.default_rng(2)
        mdp = random_tiny_mdp(rng, discount=0.0)
        sol = value_iteration_oracle(mdp)
        assert np.array_equal(sol.policy[0], mdp.rewards.argmax(axis=1))
        assert np.allclose(sol.q[0], mdp.rewards)

    def test_matches_policy_enumeration(self):
        rng = np.random.default_rng(3)
        mdp = random_tiny_mdp(rng, n_states=3, n_actions=2, horizon=3)
        sol = value_iteration_oracle(mdp)
        assert sol.v[0].max() == pytest.approx(enumerate_policies_oracle(mdp), abs=1e-9)

    def test_malformed_tensors_rejected(self):
        with pytest.raises(ValueError, match="shape"):
            TinyMdp(np.ones((2, 2)), np.ones((2, 2)), horizon=2)
        with pytest.raises(ValueError, match="distributions"):
            TinyMdp(np.full((2, 2, 2), 0.3), np.ones((2, 2)), horizon=2)

    def test_policy_evaluation_uniform_policy(self):
        rng = np.random.default_rng(4)
        mdp = random_tiny_mdp(rng, n_states=2, n_actions=2, horizon=2, discount=1.0)
        probs = np.full((2, 2), 0.5)
        q = policy_evaluation_oracle(mdp, probs)
        # hand-rolled two-step expectation for state 0, action 0
        v1 = (probs * mdp.rewards).sum(axis=1)
        want = mdp.rewards[0, 0] + mdp.transitions[0, 0] @ v1
        assert q[0, 0, 0] == pytest.approx(float(want))

    def test_policy_evaluation_of_greedy_matches_optimal(self):
        rng = np.random.default_rng(5)
        mdp = random_tiny_mdp(rng)
        sol = value_iteration_oracle(mdp)
        greedy = np.zeros((mdp.horizon, mdp.S, mdp.A))
        for t in range(mdp.horizon):
            greedy[t, np.arange(mdp.S), sol.policy[t]] = 1.0
        q = policy_evaluation_oracle(mdp, greedy)
        assert np.allclose(q, sol.q)


class TestObservedPathsFromMarket:
    def test_paths_from_synthetic_market(self):
        from careersim.market import SynthConfig, generate_synthetic, preprocess

        ds = preprocess(generate_synthetic(SynthConfig(n_employees=120, seed=8, n_vacancies=1500)))
        salary = fit_salary_model(ds.vacancies, ds.job_catalog, ForestParams(n_trees=10, seed=0))
        paths = observed_paths(ds, salary)
        assert len(paths) == len({r.employee_id for r in ds.experiences})
        for p in paths[:20]:
            assert p.duration_months >= 1
            assert all(m > 0 for m in p.monthly_income)
