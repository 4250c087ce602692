"""Labor-market data: records, CSV schemas, preprocessing, and a synthetic generator.

A market is three linked tables: work-experience spells, posted vacancies with
annual salaries, and job applications with hire/reject outcomes. A job is an
(occupation, industry) code pair.

The synthetic generator produces careers whose durations and salaries match
configurable lognormal targets, with hire outcomes drawn from a ground-truth
logistic function of how similar the candidate's history is to the target job.
A configurable fraction of hires into top-salary-decile jobs can be emitted
with the candidate's prior background records deleted, so the data shows
people hired into senior jobs whose visible history carries no related
experience.
"""

from __future__ import annotations

import csv
import math
import warnings
from collections import Counter
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path

import numpy as np

__all__ = [
    "HIRED",
    "REJECTED",
    "MIN_DURATION_DAYS",
    "MAX_EXPERIENCE_RECORDS",
    "MarketDataError",
    "JobId",
    "WorkExperienceRecord",
    "Vacancy",
    "ApplicationRecord",
    "MarketDataset",
    "SynthConfig",
    "SyntheticJobStats",
    "make_dataset",
    "experiences_by_employee",
    "load_work_experience",
    "load_vacancies",
    "load_applications",
    "load_market",
    "write_market",
    "preprocess",
    "plausible_jobs",
    "lognormal_params",
    "synthetic_job_stats",
    "generate_synthetic",
]

HIRED = "hired"
REJECTED = "rejected"

MIN_DURATION_DAYS = 7
MAX_EXPERIENCE_RECORDS = 50

WORK_EXPERIENCE_HEADER = ("employee_id", "occupation_code", "industry_code", "start_date", "end_date")
VACANCIES_HEADER = ("occupation_code", "industry_code", "annual_salary_eur")
APPLICATIONS_HEADER = ("candidate_id", "application_date", "occupation_code", "industry_code", "outcome")

_DAYS_PER_YEAR = 365.25


class MarketDataError(ValueError):
    """Malformed market data or invalid generator settings."""


@dataclass(frozen=True, order=True)
class JobId:
    """An occupation/industry code pair; ordering is occupation-major."""

    occupation_code: int
    industry_code: int

    def __post_init__(self):
        if self.occupation_code < 0 or self.industry_code < 0:
            raise MarketDataError(
                f"job codes must be nonnegative, got ({self.occupation_code}, {self.industry_code})"
            )


@dataclass(frozen=True)
class WorkExperienceRecord:
    employee_id: str
    job: JobId
    start_date: date
    end_date: date

    def __post_init__(self):
        if self.end_date < self.start_date:
            raise MarketDataError(
                f"end_date {self.end_date} precedes start_date {self.start_date}"
            )

    @property
    def duration_days(self) -> int:
        return (self.end_date - self.start_date).days


@dataclass(frozen=True)
class Vacancy:
    job: JobId
    annual_salary_eur: float

    def __post_init__(self):
        if not (self.annual_salary_eur > 0 and math.isfinite(self.annual_salary_eur)):
            raise MarketDataError(
                f"annual salary must be positive and finite, got {self.annual_salary_eur}"
            )


@dataclass(frozen=True)
class ApplicationRecord:
    candidate_id: str
    application_date: date
    target_job: JobId
    outcome: str

    def __post_init__(self):
        if self.outcome not in (HIRED, REJECTED):
            raise MarketDataError(f"outcome must be '{HIRED}' or '{REJECTED}', got {self.outcome!r}")

    @property
    def hired(self) -> bool:
        return self.outcome == HIRED


@dataclass(frozen=True)
class MarketDataset:
    experiences: tuple[WorkExperienceRecord, ...]
    vacancies: tuple[Vacancy, ...]
    applications: tuple[ApplicationRecord, ...]
    job_catalog: tuple[JobId, ...]


def make_dataset(experiences, vacancies, applications, job_catalog=None) -> MarketDataset:
    """Assemble a dataset in canonical order.

    Experience records are sorted per employee by start date; applications by
    candidate and date. If no catalog is given, the catalog is the sorted set
    of all referenced jobs. Every referenced job must be in the catalog.
    """
    experiences = tuple(
        sorted(experiences, key=lambda r: (r.employee_id, r.start_date, r.end_date, r.job))
    )
    applications = tuple(
        sorted(applications, key=lambda a: (a.candidate_id, a.application_date, a.target_job, a.outcome))
    )
    vacancies = tuple(vacancies)
    referenced = (
        {r.job for r in experiences}
        | {v.job for v in vacancies}
        | {a.target_job for a in applications}
    )
    if job_catalog is None:
        catalog = tuple(sorted(referenced))
    else:
        catalog = tuple(job_catalog)
        missing = referenced - set(catalog)
        if missing:
            raise MarketDataError(
                f"{len(missing)} referenced job(s) absent from catalog, e.g. {sorted(missing)[0]}"
            )
    return MarketDataset(experiences, vacancies, applications, catalog)


def experiences_by_employee(dataset: MarketDataset) -> dict[str, list[WorkExperienceRecord]]:
    out: dict[str, list[WorkExperienceRecord]] = {}
    for rec in dataset.experiences:
        out.setdefault(rec.employee_id, []).append(rec)
    return out


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

def _read_rows(path, expected_header):
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MarketDataError(f"{path}: empty file, expected header {','.join(expected_header)}")
        header = tuple(h.strip() for h in header)
        if header != expected_header:
            missing = [c for c in expected_header if c not in header]
            detail = f"missing columns {missing}" if missing else f"got {','.join(header)}"
            raise MarketDataError(f"{path}: bad header, {detail}; expected {','.join(expected_header)}")
        rows = [(lineno, row) for lineno, row in enumerate(reader, start=2) if row]
    return path, rows


def _parse_date(text: str, path, lineno) -> date:
    try:
        return date.fromisoformat(text.strip())
    except ValueError:
        raise MarketDataError(f"{path}:{lineno}: invalid ISO date {text!r}")


def _parse_int(text: str, path, lineno, column) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise MarketDataError(f"{path}:{lineno}: invalid integer {text!r} in {column}")


def load_work_experience(path) -> list[WorkExperienceRecord]:
    """Parse a work_experience.csv file; row order is preserved."""
    path, rows = _read_rows(path, WORK_EXPERIENCE_HEADER)
    out = []
    for lineno, row in rows:
        if len(row) != len(WORK_EXPERIENCE_HEADER):
            raise MarketDataError(f"{path}:{lineno}: expected {len(WORK_EXPERIENCE_HEADER)} fields, got {len(row)}")
        emp, occ, ind, start, end = row
        try:
            rec = WorkExperienceRecord(
                employee_id=emp.strip(),
                job=JobId(
                    _parse_int(occ, path, lineno, "occupation_code"),
                    _parse_int(ind, path, lineno, "industry_code"),
                ),
                start_date=_parse_date(start, path, lineno),
                end_date=_parse_date(end, path, lineno),
            )
        except MarketDataError as err:
            if str(err).startswith(str(path)):
                raise
            raise MarketDataError(f"{path}:{lineno}: {err}") from None
        out.append(rec)
    return out


def load_vacancies(path) -> list[Vacancy]:
    path, rows = _read_rows(path, VACANCIES_HEADER)
    out = []
    for lineno, row in rows:
        if len(row) != len(VACANCIES_HEADER):
            raise MarketDataError(f"{path}:{lineno}: expected {len(VACANCIES_HEADER)} fields, got {len(row)}")
        occ, ind, salary_text = row
        try:
            salary = float(salary_text)
        except ValueError:
            raise MarketDataError(f"{path}:{lineno}: invalid salary {salary_text!r}")
        try:
            vac = Vacancy(
                job=JobId(
                    _parse_int(occ, path, lineno, "occupation_code"),
                    _parse_int(ind, path, lineno, "industry_code"),
                ),
                annual_salary_eur=salary,
            )
        except MarketDataError as err:
            if str(err).startswith(str(path)):
                raise
            raise MarketDataError(f"{path}:{lineno}: {err}") from None
        out.append(vac)
    return out


def load_applications(path) -> list[ApplicationRecord]:
    path, rows = _read_rows(path, APPLICATIONS_HEADER)
    out = []
    for lineno, row in rows:
        if len(row) != len(APPLICATIONS_HEADER):
            raise MarketDataError(f"{path}:{lineno}: expected {len(APPLICATIONS_HEADER)} fields, got {len(row)}")
        cand, app_date, occ, ind, outcome = row
        try:
            rec = ApplicationRecord(
                candidate_id=cand.strip(),
                application_date=_parse_date(app_date, path, lineno),
                target_job=JobId(
                    _parse_int(occ, path, lineno, "occupation_code"),
                    _parse_int(ind, path, lineno, "industry_code"),
                ),
                outcome=outcome.strip().lower(),
            )
        except MarketDataError as err:
            if str(err).startswith(str(path)):
                raise
            raise MarketDataError(f"{path}:{lineno}: {err}") from None
        out.append(rec)
    return out


def load_market(directory) -> MarketDataset:
    directory = Path(directory)
    experiences = load_work_experience(directory / "work_experience.csv")
    vacancies = load_vacancies(directory / "vacancies.csv")
    applications = load_applications(directory / "applications.csv")
    catalog_path = directory / "catalog.csv"
    catalog = None
    if catalog_path.exists():
        _, rows = _read_rows(catalog_path, ("occupation_code", "industry_code"))
        catalog = [
            JobId(_parse_int(o, catalog_path, n, "occupation_code"), _parse_int(i, catalog_path, n, "industry_code"))
            for n, (o, i) in rows
        ]
    return make_dataset(experiences, vacancies, applications, catalog)


def write_market(dataset: MarketDataset, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "work_experience.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(WORK_EXPERIENCE_HEADER)
        for r in dataset.experiences:
            w.writerow([r.employee_id, r.job.occupation_code, r.job.industry_code,
                        r.start_date.isoformat(), r.end_date.isoformat()])
    with open(directory / "vacancies.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(VACANCIES_HEADER)
        for v in dataset.vacancies:
            w.writerow([v.job.occupation_code, v.job.industry_code, f"{v.annual_salary_eur:.2f}"])
    with open(directory / "applications.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(APPLICATIONS_HEADER)
        for a in dataset.applications:
            w.writerow([a.candidate_id, a.application_date.isoformat(),
                        a.target_job.occupation_code, a.target_job.industry_code, a.outcome])
    with open(directory / "catalog.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(("occupation_code", "industry_code"))
        for j in dataset.job_catalog:
            w.writerow([j.occupation_code, j.industry_code])


# ---------------------------------------------------------------------------
# Preprocessing
# ---------------------------------------------------------------------------

def preprocess(dataset: MarketDataset) -> MarketDataset:
    """Filter the experience table: drop records shorter than a week, records
    missing required fields, and every record of employees holding more than
    fifty. Idempotent; vacancies and applications pass through unchanged."""
    kept = [
        r for r in dataset.experiences
        if r.employee_id and r.duration_days >= MIN_DURATION_DAYS
    ]
    counts = Counter(r.employee_id for r in kept)
    kept = [r for r in kept if counts[r.employee_id] <= MAX_EXPERIENCE_RECORDS]
    return MarketDataset(
        experiences=tuple(kept),
        vacancies=dataset.vacancies,
        applications=dataset.applications,
        job_catalog=dataset.job_catalog,
    )


def plausible_jobs(dataset: MarketDataset, k: int = 142) -> list[JobId]:
    """The k jobs with the most experience records, descending by count.

    Ties break by occupation-major job ordering. If fewer than k distinct jobs
    exist, all are returned and a RuntimeWarning is issued.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    counts = Counter(r.job for r in dataset.experiences)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    if len(ranked) < k:
        warnings.warn(
            f"only {len(ranked)} distinct jobs available, fewer than requested k={k}",
            RuntimeWarning,
            stacklevel=2,
        )
    return [job for job, _ in ranked[:k]]


# ---------------------------------------------------------------------------
# Synthetic generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SynthConfig:
    n_employees: int = 2000
    n_occupations: int = 15
    n_industries: int = 10
    duration_median_days: float = 95.0
    duration_mean_days: float = 161.0
    salary_median_eur: float = 38_000.0
    salary_mean_eur: float = 42_000.0
    records_per_employee_mean: float = 3.0
    max_records_per_employee: int = MAX_EXPERIENCE_RECORDS
    n_vacancies: int = 20_000
    # half-width of the per-job log-salary offset; offsets are normalized so
    # the popularity-weighted mean salary still matches salary_mean_eur
    salary_spread: float = 0.20
    popularity_exponent: float = 0.8
    # application target mix: renew current job / same occupation / same
    # industry / anywhere (remainder)
    stay_fraction: float = 0.15
    same_occupation_fraction: float = 0.30
    same_industry_fraction: float = 0.20
    # chance that an employee's recorded history starts with an application
    # made before any work experience existed
    entry_application_rate: float = 0.3
    # ground-truth hire log-odds: intercept + coefs * tenure years (each
    # tenure saturating at hire_tenure_cap_years), plus a renewal bonus when
    # someone applies to the job they currently hold
    hire_intercept: float = -2.2
    hire_occupation_coef: float = 1.5
    hire_industry_coef: float = 1.5
    hire_total_coef: float = 0.1
    hire_tenure_cap_years: float = 10.0
    hire_incumbent_bonus: float = 1.2
    senior_missing_history_bias: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.n_employees < 1 or self.n_occupations < 1 or self.n_industries < 1:
            raise MarketDataError("n_employees, n_occupations, n_industries must be positive")
        for name in ("duration_median_days", "duration_mean_days", "salary_median_eur",
                     "salary_mean_eur", "records_per_employee_mean"):
            if getattr(self, name) <= 0:
                raise MarketDataError(f"{name} must be positive")
        if self.duration_mean_days < self.duration_median_days:
            raise MarketDataError("duration mean below median cannot be matched by a lognormal")
        if self.salary_mean_eur < self.salary_median_eur:
            raise MarketDataError("salary mean below median cannot be matched by a lognormal")
        if not (0 <= self.senior_missing_history_bias <= 1):
            raise MarketDataError("senior_missing_history_bias must be in [0, 1]")
        if self.max_records_per_employee < 1 or self.max_records_per_employee > MAX_EXPERIENCE_RECORDS:
            raise MarketDataError(f"max_records_per_employee must be in [1, {MAX_EXPERIENCE_RECORDS}]")
        if self.n_vacancies < 0:
            raise MarketDataError("n_vacancies must be nonnegative")
        mix = self.stay_fraction + self.same_occupation_fraction + self.same_industry_fraction
        if min(self.stay_fraction, self.same_occupation_fraction, self.same_industry_fraction) < 0 or mix > 1:
            raise MarketDataError("application target fractions must be nonnegative and sum to at most 1")
        if not (0 <= self.entry_application_rate <= 1):
            raise MarketDataError("entry_application_rate must be in [0, 1]")
        if self.hire_tenure_cap_years <= 0:
            raise MarketDataError("hire_tenure_cap_years must be positive")
        if self.salary_spread < 0:
            raise MarketDataError("salary_spread must be nonnegative")


def lognormal_params(median: float, mean: float) -> tuple[float, float]:
    """(mu, sigma) of the lognormal matching a given median and mean."""
    if mean < median:
        raise MarketDataError(f"lognormal requires mean >= median, got mean={mean}, median={median}")
    return math.log(median), math.sqrt(2.0 * math.log(mean / median))


@dataclass(frozen=True)
class SyntheticJobStats:
    """Ground truth the generator committed to for one seed."""

    jobs: tuple[JobId, ...]
    popularity: np.ndarray       # sums to 1
    salary_factor: np.ndarray    # per-job multiplicative offset
    expected_salary: np.ndarray  # salary_mean_eur * salary_factor
    top_decile: frozenset[JobId]


def synthetic_job_stats(config: SynthConfig) -> SyntheticJobStats:
    """Per-job popularity and salary offsets for a seed, reproducible without
    generating the full dataset (the generator draws these first)."""
    config.validate()
    rng = np.random.default_rng([config.seed, 0])
    jobs = tuple(
        JobId(o, i)
        for o in range(config.n_occupations)
        for i in range(config.n_industries)
    )
    n = len(jobs)
    ranks = np.arange(1, n + 1, dtype=np.float64) ** (-config.popularity_exponent)
    popularity = ranks[rng.permutation(n)]
    popularity /= popularity.sum()
    factor = np.exp(rng.uniform(-config.salary_spread, config.salary_spread, size=n))
    factor /= float(popularity @ factor)
    expected = config.salary_mean_eur * factor
    threshold = np.quantile(expected, 0.9)
    top = frozenset(jobs[i] for i in np.flatnonzero(expected >= threshold))
    return SyntheticJobStats(jobs, popularity, factor, expected, top)


class _CareerSim:
    def __init__(self, config: SynthConfig, stats: SyntheticJobStats, rng):
        self.config = config
        self.stats = stats
        self.rng = rng
        self.n_jobs = len(stats.jobs)
        pop = stats.popularity.reshape(config.n_occupations, config.n_industries)
        self._ind_given_occ = pop / pop.sum(axis=1, keepdims=True)
        self._occ_given_ind = (pop / pop.sum(axis=0, keepdims=True)).T
        mu_d, sigma_d = lognormal_params(config.duration_median_days, config.duration_mean_days)
        self._mu_d, self._sigma_d = mu_d, sigma_d

    def draw_duration(self) -> int:
        return max(1, int(round(self.rng.lognormal(self._mu_d, self._sigma_d))))

    def draw_job(self) -> JobId:
        return self.stats.jobs[int(self.rng.choice(self.n_jobs, p=self.stats.popularity))]

    def propose_target(self, current: JobId) -> JobId:
        c = self.config
        u = self.rng.random()
        if u < c.stay_fraction:
            return current
        if u < c.stay_fraction + c.same_occupation_fraction:
            ind = int(self.rng.choice(c.n_industries, p=self._ind_given_occ[current.occupation_code]))
            return JobId(current.occupation_code, ind)
        if u < c.stay_fraction + c.same_occupation_fraction + c.same_industry_fraction:
            occ = int(self.rng.choice(c.n_occupations, p=self._occ_given_ind[current.industry_code]))
            return JobId(occ, current.industry_code)
        return self.draw_job()

    def hire_probability(self, records, app_date: date, target: JobId) -> float:
        occ = ind = tot = 0.0
        current = None
        latest = None
        for job, start, end in records:
            if start >= app_date:
                continue
            if latest is None or start > latest:
                latest, current = start, job
            days = (min(end, app_date) - start).days
            tot += days
            if job.occupation_code == target.occupation_code:
                occ += days
            if job.industry_code == target.industry_code:
                ind += days
        c = self.config
        cap = c.hire_tenure_cap_years
        z = (
            c.hire_intercept
            + c.hire_occupation_coef * min(occ / _DAYS_PER_YEAR, cap)
            + c.hire_industry_coef * min(ind / _DAYS_PER_YEAR, cap)
            + c.hire_total_coef * min(tot / _DAYS_PER_YEAR, cap)
        )
        if current == target:
            z += c.hire_incumbent_bonus
        return 1.0 / (1.0 + math.exp(-z))


def generate_synthetic(config: SynthConfig) -> MarketDataset:
    """Generate a full synthetic market; byte-identical for a fixed seed.

    Careers and outcomes are drawn from one child stream and the missing-
    history decisions from another, so the same seed with a different bias
    produces the same underlying careers.
    """
    config.validate()
    stats = synthetic_job_stats(config)
    rng = np.random.default_rng([config.seed, 1])
    rng_bias = np.random.default_rng([config.seed, 2])
    sim = _CareerSim(config, stats, rng)
    mu_s, sigma_s = lognormal_params(config.salary_median_eur, config.salary_mean_eur)

    vacancies: list[Vacancy] = []
    if config.n_vacancies:
        counts = rng.multinomial(config.n_vacancies, stats.popularity)
        for j, count in enumerate(counts):
            if count == 0:
                continue
            salaries = rng.lognormal(mu_s, sigma_s, size=count) * stats.salary_factor[j]
            vacancies.extend(
                Vacancy(stats.jobs[j], max(round(float(s), 2), 0.01)) for s in salaries
            )

    base_date = date(2016, 1, 1)
    experiences: list[WorkExperienceRecord] = []
    applications: list[ApplicationRecord] = []
    bias = config.senior_missing_history_bias

    for e in range(config.n_employees):
        emp = f"emp{e:06d}"
        target_records = int(min(
            1 + rng.poisson(max(config.records_per_employee_mean - 1.0, 0.0)),
            config.max_records_per_employee,
        ))
        start = base_date + timedelta(days=int(rng.integers(0, 4 * 365)))
        apps: list[ApplicationRecord] = []

        # some careers open with a recorded application made before any work
        # experience exists; a hired one provides the first job
        job = None
        if rng.random() < config.entry_application_rate:
            entry_date = start - timedelta(days=int(rng.integers(7, 60)))
            target = sim.draw_job()
            entry_p = sim.hire_probability([], entry_date, target)
            entry_hired = rng.random() < entry_p
            apps.append(ApplicationRecord(emp, entry_date, target, HIRED if entry_hired else REJECTED))
            if entry_hired:
                job = target
        if job is None:
            job = sim.draw_job()
        spells: list[tuple[JobId, date, date]] = [(job, start, start + timedelta(days=sim.draw_duration()))]

        attempts = 0
        max_attempts = 4 * target_records + 8
        while len(spells) < target_records and attempts < max_attempts:
            attempts += 1
            cur_job, cur_start, cur_end = spells[-1]
            held = (cur_end - cur_start).days
            offset = max(1, int(round(held * rng.uniform(0.4, 1.0))))
            app_date = cur_start + timedelta(days=offset)
            target = sim.propose_target(cur_job)
            p = sim.hire_probability(spells, app_date, target)
            hired = rng.random() < p
            apps.append(ApplicationRecord(emp, app_date, target, HIRED if hired else REJECTED))
            if hired:
                new_start = cur_end + timedelta(days=int(rng.integers(1, 30)))
                spells.append((target, new_start, new_start + timedelta(days=sim.draw_duration())))

        if bias > 0:
            cutoff = None
            for app in sorted(apps, key=lambda a: a.application_date):
                if app.hired and app.target_job in stats.top_decile and rng_bias.random() < bias:
                    cutoff = app.application_date
            if cutoff is not None:
                # the candidate's completed background vanishes; the engagement
                # they held while applying stays on file, so the data shows
                # senior hires whose visible history is unrelated to the job
                spells = [s for s in spells if s[2] >= cutoff]
                apps = [a for a in apps if a.application_date >= cutoff]

        experiences.extend(WorkExperienceRecord(emp, j, s, t) for j, s, t in spells)
        applications.extend(apps)

    return make_dataset(experiences, vacancies, applications, job_catalog=stats.jobs)
