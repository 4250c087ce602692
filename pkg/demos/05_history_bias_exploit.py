"""Reproduce the missing-history exploit under the full-history view.

When a fraction of hires into top-salary-decile jobs is emitted with the
candidate's background deleted, the hire-probability model learns that people
with no visible related experience still land senior jobs. The greedy
highest-expected-reward baseline then applies to the top-paying job from
everywhere and eventually gets it: the final job distribution collapses onto
a single job regardless of where episodes start. Takes a few minutes.
"""

import numpy as np

from careersim import SynthConfig, generate_synthetic, plausible_jobs, preprocess
from careersim.agents import highest_expected_reward_policy
from careersim.env import CareerEnv, EnvConfig
from careersim.evaluation import distribution_report
from careersim.forest import ForestParams
from careersim.models import StateRepresentation, fit_salary_model, fit_transition_model

MARKET = dict(
    n_employees=3000, n_occupations=5, n_industries=5, n_vacancies=8000,
    records_per_employee_mean=8.0, duration_median_days=360.0, duration_mean_days=520.0,
    salary_spread=1.8, entry_application_rate=0.1,
    stay_fraction=0.02, same_occupation_fraction=0.10, same_industry_fraction=0.05,
    hire_intercept=-2.6, hire_occupation_coef=5.2, hire_industry_coef=0.8,
    hire_total_coef=0.05, hire_tenure_cap_years=0.25, hire_incumbent_bonus=0.0,
    seed=380,
)

for bias in (0.0, 0.9):
    dataset = preprocess(generate_synthetic(SynthConfig(**MARKET, senior_missing_history_bias=bias)))
    catalog = tuple(plausible_jobs(dataset, 22))
    transition, _ = fit_transition_model(
        dataset, StateRepresentation.FULL_HISTORY, catalog,
        ForestParams(n_trees=150, max_depth=8, min_samples_leaf=64, seed=381))
    salary = fit_salary_model(dataset.vacancies, catalog, ForestParams(seed=383))
    env = CareerEnv(EnvConfig(catalog=catalog), transition, salary)
    top_job = max(catalog, key=lambda j: salary.table[j])
    rep = distribution_report(highest_expected_reward_policy(), env, n_episodes=400,
                              rng=np.random.default_rng(391))
    mass = rep.final_counts.get(top_job, 0) / rep.n_episodes
    print(f"missing-history bias {bias:.1f}: "
          f"{100 * mass:5.1f}% of episodes end at the top-salary job "
          f"({top_job.occupation_code}, {top_job.industry_code})")
    if bias > 0:
        print("\n  final job distribution (top 6):")
        for job, count in rep.top_final()[:6]:
            print(f"    ({job.occupation_code}, {job.industry_code})  {count:4d} episodes"
                  + ("   <-- highest salary" if job == top_job else ""))
