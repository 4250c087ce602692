"""Learned market dynamics: hire-probability and salary models over encoded histories.

Two state views are supported. The last-job view encodes only the job a
person currently holds against the job they target; the full-history view
adds tenure aggregates computed over every recorded spell. Both views feed
random forests: a classifier fit on application outcomes estimates the
probability that an application succeeds, and a regressor fit on vacancies
estimates each job's annual salary.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from enum import Enum
from typing import NamedTuple

import numpy as np

from .forest import (
    ForestClassifier,
    ForestParams,
    ForestRegressor,
    fit_classifier,
    fit_regressor,
    predict_proba_batch,
    predict_value,
    predict_value_batch,
)
from .market import JobId, MarketDataset, WorkExperienceRecord, experiences_by_employee

__all__ = [
    "StateRepresentation",
    "NEVER_WORKED_SENTINEL_DAYS",
    "Span",
    "spans_from_records",
    "spans_from_steps",
    "encode_state_action",
    "feature_dim",
    "TrainingSet",
    "build_transition_training_set",
    "TransitionModel",
    "fit_transition_model",
    "transition_probability",
    "transition_probabilities",
    "SalaryModel",
    "fit_salary_model",
    "annual_salary",
    "quarterly_salary",
    "monthly_salary",
    "StateFeaturizer",
]


class StateRepresentation(str, Enum):
    LAST_JOB = "last_job"
    FULL_HISTORY = "full_history"


NEVER_WORKED_SENTINEL_DAYS = 36500.0
_NO_CODE = -1.0

_LAST_JOB_DIM = 6
_FULL_HISTORY_DIM = 11


def feature_dim(representation: StateRepresentation) -> int:
    return _LAST_JOB_DIM if representation is StateRepresentation.LAST_JOB else _FULL_HISTORY_DIM


@dataclass(frozen=True)
class Span:
    """One held job normalized to (duration, recency): `end_offset_days` is
    how many days before "now" the spell ended (0 while ongoing)."""

    job: JobId
    duration_days: float
    end_offset_days: float


def spans_from_records(
    history: list[WorkExperienceRecord] | tuple[WorkExperienceRecord, ...],
    as_of: date | None = None,
) -> list[Span]:
    """Normalize dated records, clipped to `as_of` (records starting on or
    after it are dropped, ongoing ones truncated). Defaults to the latest
    end date in the history."""
    if not history:
        return []
    records = sorted(history, key=lambda r: (r.start_date, r.end_date, r.job))
    if as_of is None:
        as_of = max(r.end_date for r in records)
    out = []
    for r in records:
        if r.start_date >= as_of:
            continue
        end = min(r.end_date, as_of)
        out.append(Span(r.job, float((end - r.start_date).days), float((as_of - end).days)))
    return out


def spans_from_steps(entries, days_per_step: float) -> list[Span]:
    """Normalize an environment history of (job, steps held) pairs."""
    total = sum(steps for _, steps in entries)
    out = []
    elapsed = 0
    for job, steps in entries:
        elapsed += steps
        out.append(Span(job, steps * days_per_step, (total - elapsed) * days_per_step))
    return out


def _features_from_spans(spans: list[Span], target: JobId, representation: StateRepresentation) -> np.ndarray:
    if spans:
        cur = spans[-1].job
        cur_occ, cur_ind = float(cur.occupation_code), float(cur.industry_code)
    elif representation is StateRepresentation.LAST_JOB:
        raise ValueError("last-job encoding requires a non-empty history")
    else:
        cur_occ = cur_ind = _NO_CODE
    base = [
        cur_occ,
        cur_ind,
        float(target.occupation_code),
        float(target.industry_code),
        1.0 if cur_occ == target.occupation_code else 0.0,
        1.0 if cur_ind == target.industry_code else 0.0,
    ]
    if representation is StateRepresentation.LAST_JOB:
        return np.asarray(base, dtype=np.float64)
    total = occ_days = ind_days = 0.0
    recency = NEVER_WORKED_SENTINEL_DAYS
    jobs_held = set()
    for span in spans:
        total += span.duration_days
        jobs_held.add(span.job)
        if span.job.occupation_code == target.occupation_code:
            occ_days += span.duration_days
            recency = min(recency, span.end_offset_days)
        if span.job.industry_code == target.industry_code:
            ind_days += span.duration_days
    return np.asarray(
        base + [total, occ_days, ind_days, float(len(jobs_held)), recency],
        dtype=np.float64,
    )


def encode_state_action(
    history,
    target: JobId,
    representation: StateRepresentation,
    as_of: date | None = None,
) -> np.ndarray:
    """Feature vector for "history applies to target" under either view."""
    return _features_from_spans(spans_from_records(history, as_of), target, representation)


class TrainingSet(NamedTuple):
    features: np.ndarray
    labels: np.ndarray
    n_skipped: int


def build_transition_training_set(
    dataset: MarketDataset, representation: StateRepresentation
) -> TrainingSet:
    """One row per application: the candidate's history strictly before the
    application date, encoded against the target job; label 1 when hired.

    Applications from candidates with no usable history are skipped and
    counted: always for unknown candidates, and additionally under the
    last-job view when no record predates the application.
    """
    by_emp = experiences_by_employee(dataset)
    rows, labels = [], []
    skipped = 0
    for app in dataset.applications:
        records = by_emp.get(app.candidate_id)
        if records is None:
            skipped += 1
            continue
        spans = spans_from_records(records, as_of=app.application_date)
        if not spans and representation is StateRepresentation.LAST_JOB:
            skipped += 1
            continue
        rows.append(_features_from_spans(spans, app.target_job, representation))
        labels.append(1.0 if app.hired else 0.0)
    if rows:
        X = np.stack(rows)
    else:
        X = np.zeros((0, feature_dim(representation)))
    return TrainingSet(X, np.asarray(labels, dtype=np.float64), skipped)


@dataclass
class TransitionModel:
    """Hire-probability model P(hired | state, target job) over a job catalog."""

    representation: StateRepresentation
    classifier: ForestClassifier
    catalog: tuple[JobId, ...]
    job_index: dict[JobId, int]
    # under the last-job view the probability depends only on (current job,
    # target job), so it is materialized once for catalog pairs
    last_job_matrix: np.ndarray | None = None


def fit_transition_model(
    dataset: MarketDataset,
    representation: StateRepresentation,
    catalog,
    params: ForestParams | None = None,
) -> tuple[TransitionModel, TrainingSet]:
    catalog = tuple(catalog)
    training = build_transition_training_set(dataset, representation)
    clf = fit_classifier(training.features, training.labels, params)
    index = {job: i for i, job in enumerate(catalog)}
    matrix = None
    if representation is StateRepresentation.LAST_JOB:
        n = len(catalog)
        rows = np.stack([
            _features_from_spans([Span(s, 0.0, 0.0)], a, representation)
            for s in catalog
            for a in catalog
        ])
        matrix = predict_proba_batch(clf, rows).reshape(n, n)
    return TransitionModel(representation, clf, catalog, index, matrix), training


def _check_actions(model: TransitionModel, actions) -> list[JobId]:
    actions = list(actions)
    for a in actions:
        if a not in model.job_index:
            raise ValueError(f"action {a} is not in the job catalog")
    return actions


def _probabilities_for_spans(model: TransitionModel, spans: list[Span], actions) -> np.ndarray:
    actions = _check_actions(model, actions)
    if model.last_job_matrix is not None and spans:
        state = model.job_index.get(spans[-1].job)
        if state is not None:
            cols = [model.job_index[a] for a in actions]
            return model.last_job_matrix[state, cols].copy()
    rows = np.stack([_features_from_spans(spans, a, model.representation) for a in actions])
    return predict_proba_batch(model.classifier, rows)


def transition_probability(
    model: TransitionModel,
    history,
    action: JobId,
    as_of: date | None = None,
) -> float:
    """Probability that applying from a dated history to `action` succeeds."""
    spans = spans_from_records(history, as_of)
    return float(_probabilities_for_spans(model, spans, [action])[0])


def transition_probabilities(model: TransitionModel, history, actions, as_of=None) -> np.ndarray:
    spans = spans_from_records(history, as_of)
    return _probabilities_for_spans(model, spans, actions)


def transition_probability_from_steps(model, entries, action: JobId, days_per_step: float) -> float:
    spans = spans_from_steps(entries, days_per_step)
    return float(_probabilities_for_spans(model, spans, [action])[0])


def transition_probabilities_from_steps(model, entries, actions, days_per_step: float) -> np.ndarray:
    spans = spans_from_steps(entries, days_per_step)
    return _probabilities_for_spans(model, spans, actions)


@dataclass
class SalaryModel:
    """Annual salary per job: a regressor plus a materialized catalog table."""

    regressor: ForestRegressor
    catalog: tuple[JobId, ...]
    table: dict[JobId, float]


def _salary_features(job: JobId) -> list[float]:
    return [float(job.occupation_code), float(job.industry_code)]


def fit_salary_model(vacancies, catalog, params: ForestParams | None = None) -> SalaryModel:
    vacancies = list(vacancies)
    if not vacancies:
        raise ValueError("cannot fit a salary model on zero vacancies")
    catalog = tuple(catalog)
    X = np.asarray([_salary_features(v.job) for v in vacancies])
    y = np.asarray([v.annual_salary_eur for v in vacancies])
    reg = fit_regressor(X, y, params)
    values = predict_value_batch(reg, np.asarray([_salary_features(j) for j in catalog]))
    table = {job: float(v) for job, v in zip(catalog, values)}
    return SalaryModel(reg, catalog, table)


def annual_salary(model: SalaryModel, job: JobId) -> float:
    """Table lookup for catalog jobs, regressor fallback for any other job."""
    hit = model.table.get(job)
    if hit is not None:
        return hit
    return predict_value(model.regressor, np.asarray(_salary_features(job)))


def quarterly_salary(model: SalaryModel, job: JobId) -> float:
    if job not in model.table:
        raise ValueError(f"job {job} is not in the salary table")
    return model.table[job] / 4.0


def monthly_salary(model: SalaryModel, job: JobId) -> float:
    return annual_salary(model, job) / 12.0


class StateFeaturizer:
    """Network-facing state features for environment histories.

    The last-job view one-hot encodes the current occupation and industry;
    the full-history view adds tenure-year aggregates per occupation and per
    industry, total tenure, and the count of distinct jobs held. Both views
    end with the fraction of episode steps remaining.
    """

    _TENURE_SCALE_YEARS = 10.0

    def __init__(self, catalog, representation: StateRepresentation,
                 days_per_step: float, horizon_steps: int):
        self.catalog = tuple(catalog)
        self.representation = representation
        self.days_per_step = days_per_step
        self.horizon_steps = horizon_steps
        self.occupations = sorted({j.occupation_code for j in self.catalog})
        self.industries = sorted({j.industry_code for j in self.catalog})
        self._occ_index = {o: i for i, o in enumerate(self.occupations)}
        self._ind_index = {d: i for i, d in enumerate(self.industries)}

    @property
    def dim(self) -> int:
        base = len(self.occupations) + len(self.industries) + 1
        if self.representation is StateRepresentation.LAST_JOB:
            return base
        return base + len(self.occupations) + len(self.industries) + 2

    def features(self, entries, t: int) -> np.ndarray:
        n_occ, n_ind = len(self.occupations), len(self.industries)
        cur = entries[-1][0]
        out = np.zeros(self.dim)
        out[self._occ_index[cur.occupation_code]] = 1.0
        out[n_occ + self._ind_index[cur.industry_code]] = 1.0
        pos = n_occ + n_ind
        if self.representation is StateRepresentation.FULL_HISTORY:
            years = self.days_per_step / 365.25 / self._TENURE_SCALE_YEARS
            jobs_held = set()
            total = 0.0
            for job, steps in entries:
                tenure = steps * years
                out[pos + self._occ_index[job.occupation_code]] += tenure
                out[pos + n_occ + self._ind_index[job.industry_code]] += tenure
                total += tenure
                jobs_held.add(job)
            pos += n_occ + n_ind
            out[pos] = total
            out[pos + 1] = len(jobs_held) / 10.0
            pos += 2
        out[pos] = (self.horizon_steps - t) / self.horizon_steps
        return out
