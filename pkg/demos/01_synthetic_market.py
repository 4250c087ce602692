"""Generate a synthetic labor market and inspect its headline statistics.

The generator draws job durations and vacancy salaries from lognormals whose
median/mean match the configured targets, assigns each (occupation, industry)
pair a popularity weight and a salary offset, and simulates careers whose
hire outcomes follow a logistic ground truth over history/target similarity.
"""

import numpy as np

from careersim import SynthConfig, generate_synthetic, plausible_jobs, preprocess
from careersim.market import experiences_by_employee, synthetic_job_stats

config = SynthConfig(n_employees=2000, n_vacancies=10_000, seed=7)
dataset = generate_synthetic(config)

print(f"experience records : {len(dataset.experiences)}")
print(f"vacancies          : {len(dataset.vacancies)}")
print(f"applications       : {len(dataset.applications)}")

durations = np.array([r.duration_days for r in dataset.experiences], dtype=float)
salaries = np.array([v.annual_salary_eur for v in dataset.vacancies])
print(f"\njob duration days  : mean {durations.mean():.0f} (target 161), "
      f"median {np.median(durations):.0f} (target 95)")
print(f"vacancy salary eur : mean {salaries.mean():.0f} (target 42000), "
      f"median {np.median(salaries):.0f} (target 38000)")

hired = sum(a.hired for a in dataset.applications)
print(f"hire rate          : {hired / len(dataset.applications):.1%}")

clean = preprocess(dataset)
print(f"\nafter preprocessing: {len(clean.experiences)} records "
      f"({len(dataset.experiences) - len(clean.experiences)} shorter than a week dropped)")

catalog = plausible_jobs(clean, 20)
by_emp = experiences_by_employee(clean)
print(f"employees          : {len(by_emp)}, "
      f"mean records {np.mean([len(v) for v in by_emp.values()]):.1f}")
print("\nmost prevalent jobs (occupation, industry):")
stats = synthetic_job_stats(config)
salary_by_job = dict(zip(stats.jobs, stats.expected_salary))
for job in catalog[:8]:
    print(f"  ({job.occupation_code:2d}, {job.industry_code:2d})  "
          f"expected salary {salary_by_job[job]:,.0f} EUR")
