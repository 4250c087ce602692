"""Fit the hire-probability and salary models and poke at their predictions.

The transition model is a random-forest classifier over encoded
(history, target job) pairs trained on application outcomes; the salary
model is a random-forest regressor over (occupation, industry) trained on
vacancies, materialized as a per-job annual salary table.
"""

from datetime import date

import numpy as np

from careersim import SynthConfig, generate_synthetic, plausible_jobs, preprocess
from careersim.forest import ForestParams
from careersim.market import WorkExperienceRecord
from careersim.models import (
    StateRepresentation,
    annual_salary,
    fit_salary_model,
    fit_transition_model,
    transition_probabilities,
)

dataset = preprocess(generate_synthetic(SynthConfig(n_employees=2000, seed=3)))
catalog = tuple(plausible_jobs(dataset, 30))

transition, training = fit_transition_model(
    dataset, StateRepresentation.LAST_JOB, catalog, ForestParams(min_samples_leaf=40, seed=1)
)
print(f"transition model fit on {training.features.shape[0]} applications "
      f"({training.n_skipped} skipped), overall hire rate {training.labels.mean():.1%}")

salary = fit_salary_model(dataset.vacancies, catalog, ForestParams(seed=2))

# pick a catalog job whose occupation appears more than once
occupations = [j.occupation_code for j in catalog]
job = next(j for j in catalog if occupations.count(j.occupation_code) > 1)
job_index = catalog.index(job)
history = [WorkExperienceRecord("demo", job, date(2022, 1, 1), date(2023, 1, 1))]
probs = transition_probabilities(transition, history, catalog)

print(f"\nfrom job ({job.occupation_code}, {job.industry_code}):")
print(f"  p(rehired into own job)            = {probs[job_index]:.2f}")
same_occ = [i for i, j in enumerate(catalog) if j.occupation_code == job.occupation_code and j != job]
other = [i for i, j in enumerate(catalog) if j.occupation_code != job.occupation_code
         and j.industry_code != job.industry_code]
print(f"  mean p(same occupation, other ind) = {probs[same_occ].mean():.2f}")
print(f"  mean p(unrelated job)              = {probs[other].mean():.2f}")

print("\nannual salary table (first 5 catalog jobs):")
for j in catalog[:5]:
    print(f"  ({j.occupation_code:2d}, {j.industry_code:2d})  {annual_salary(salary, j):>9,.0f} EUR")

# the last-job view ignores everything before the final record
longer = [WorkExperienceRecord("demo", catalog[5], date(2015, 1, 1), date(2020, 1, 1))] + history
assert np.array_equal(probs, transition_probabilities(transition, longer, catalog))
print("\nlast-job view confirmed: earlier records do not change the probabilities")
