"""Train tabular policies and compare them with observed careers.

Reproduces the last-job experiment: Q-Learning and Sarsa climb the salary
ladder through reachable jobs and beat both greedy baselines, which stay
close to the factual incomes. Takes a couple of minutes.
"""

import numpy as np

from careersim import SynthConfig, generate_synthetic, plausible_jobs, preprocess
from careersim.agents import (
    TabularCareerEnv,
    TrainConfig,
    highest_expected_reward_policy,
    most_common_policy,
    q_learning_train,
    qtable_policy,
    sarsa_train,
)
from careersim.env import CareerEnv, EnvConfig
from careersim.evaluation import compare_policies, observed_paths
from careersim.forest import ForestParams
from careersim.models import StateRepresentation, fit_salary_model, fit_transition_model

dataset = preprocess(generate_synthetic(SynthConfig(n_employees=3000, n_vacancies=12_000, seed=0)))
catalog = tuple(plausible_jobs(dataset, 60))
transition, _ = fit_transition_model(dataset, StateRepresentation.LAST_JOB, catalog,
                                     ForestParams(min_samples_leaf=40, seed=1))
salary = fit_salary_model(dataset.vacancies, catalog, ForestParams(seed=2))
env = CareerEnv(EnvConfig(catalog=catalog), transition, salary)

adapter = TabularCareerEnv(env)
print("training Q-Learning and Sarsa (30k episodes each)...")
ql = q_learning_train(adapter, TrainConfig(episodes=30_000, alpha=0.2, alpha_decay=0.01,
                                           epsilon_end=0.3, gamma=0.95, seed=3))
sa = sarsa_train(adapter, TrainConfig(episodes=30_000, alpha=0.2, alpha_decay=0.01,
                                      epsilon_end=0.1, gamma=0.95, seed=4))

paths = observed_paths(dataset, salary)
print(f"evaluating on {len(paths)} observed careers "
      f"(mean {np.mean([p.duration_months for p in paths]):.0f} months)\n")
header = f"{'policy':24s} {'mean FI':>10} {'mean CFI':>10} {'change':>8} {'p':>6} {'gain%':>6} {'loss%':>6}"
print(header)
print("-" * len(header))
for name, policy in [
    ("qlearning", qtable_policy(ql, catalog)),
    ("sarsa", qtable_policy(sa, catalog)),
    ("greedy most common", most_common_policy()),
    ("greedy highest reward", highest_expected_reward_policy()),
]:
    rep = compare_policies(policy, env, paths, n_sample=1500,
                           rng=np.random.default_rng(9), n_permutations=2000)
    print(f"{name:24s} {rep.mean_fi_eur:10,.0f} {rep.mean_cfi_eur:10,.0f} "
          f"{rep.change_pct:+7.2f}% {rep.p_value:6.3f} {rep.gainers_pct:6.1f} {rep.losers_pct:6.1f}")
