"""Factual-versus-counterfactual income evaluation and small-MDP oracles.

Observed careers are flattened to a month-by-month income series: months with
several concurrent jobs earn the mean of their monthly salaries, and gap
months carry the most recent job's salary forward. A policy's counterfactual
for a career replays the environment from the same starting job for the same
number of months, and policies are compared on mean factual versus mean
counterfactual income with a two-sided permutation test on the difference in
means, plus gainer/loser breakdowns.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from datetime import date
from itertools import combinations
from pathlib import Path

import numpy as np

from .env import CareerEnv
from .market import JobId, MarketDataset, experiences_by_employee
from .models import SalaryModel, monthly_salary

__all__ = [
    "ObservedPath",
    "ComparisonReport",
    "monthly_income_series",
    "observed_paths",
    "factual_income",
    "generate_counterfactual",
    "compare_policies",
    "permutation_test",
    "DistributionReport",
    "distribution_report",
    "write_distribution_csv",
    "TinyMdp",
    "random_tiny_mdp",
    "OracleSolution",
    "value_iteration_oracle",
    "policy_evaluation_oracle",
]


@dataclass(frozen=True)
class ObservedPath:
    employee_id: str
    start_job: JobId
    duration_months: int
    monthly_income: tuple[float, ...]

    def __post_init__(self):
        if len(self.monthly_income) != self.duration_months:
            raise ValueError("monthly_income length must equal duration_months")


def _month_index(d: date) -> int:
    return d.year * 12 + (d.month - 1)


def monthly_income_series(records, salary_model: SalaryModel) -> ObservedPath:
    """Flatten one employee's records to a monthly income series.

    The series spans every calendar month from the first start to the last
    end. A month earns the mean monthly salary of all jobs active in it;
    months where nothing is active carry the most recently ended job's salary.
    """
    records = sorted(records, key=lambda r: (r.start_date, r.end_date, r.job))
    if not records:
        raise ValueError("cannot build an income series from zero records")
    first = _month_index(records[0].start_date)
    last = max(_month_index(r.end_date) for r in records)
    salaries = {}
    for r in records:
        if r.job not in salaries:
            salaries[r.job] = monthly_salary(salary_model, r.job)
    incomes = []
    for month in range(first, last + 1):
        active = [
            r for r in records
            if _month_index(r.start_date) <= month <= _month_index(r.end_date)
        ]
        if active:
            income = sum(salaries[r.job] for r in active) / len(active)
        else:
            # gap month: the most recently ended job keeps paying
            prev = max(
                (r for r in records if _month_index(r.end_date) < month),
                key=lambda r: (r.end_date, r.start_date, r.job),
            )
            income = salaries[prev.job]
        incomes.append(income)
    return ObservedPath(
        employee_id=records[0].employee_id,
        start_job=records[0].job,
        duration_months=len(incomes),
        monthly_income=tuple(incomes),
    )


def observed_paths(dataset: MarketDataset, salary_model: SalaryModel) -> list[ObservedPath]:
    by_emp = experiences_by_employee(dataset)
    return [monthly_income_series(records, salary_model) for _, records in sorted(by_emp.items())]


def factual_income(path: ObservedPath) -> float:
    return float(sum(path.monthly_income))


def generate_counterfactual(policy, env: CareerEnv, path: ObservedPath,
                            rng: np.random.Generator) -> float:
    """Income the policy would have earned from the path's start job over the
    path's duration. The final partial step, if any, is prorated to months."""
    months = path.duration_months
    if months == 0:
        return 0.0
    if path.start_job not in env.job_index:
        raise ValueError(f"start job {path.start_job} is not in the catalog")
    step_months = env.config.step_months
    n_steps = math.ceil(months / step_months)
    run_env = env.with_horizon(max(n_steps, env.config.horizon_steps))
    trace = run_env.rollout(policy, path.start_job, rng, n_steps=n_steps)
    rewards = trace.rewards
    total = sum(rewards[: months // step_months])
    remainder = months % step_months
    if remainder:
        total += rewards[n_steps - 1] * remainder / step_months
    return float(total)


@dataclass(frozen=True)
class ComparisonReport:
    mean_fi_eur: float
    mean_cfi_eur: float
    change_pct: float
    p_value: float
    gainers_pct: float
    mean_gain_pct: float
    losers_pct: float
    mean_loss_pct: float
    n_paths: int
    n_skipped: int = 0


def compare_policies(policy, env: CareerEnv, paths, n_sample: int = 20_000,
                     rng: np.random.Generator | None = None,
                     n_permutations: int = 10_000) -> ComparisonReport:
    """Factual-versus-counterfactual comparison over a sampled set of paths.

    Up to ``n_sample`` paths are drawn without replacement (all of them when
    the corpus is smaller). Paths starting outside the catalog are skipped and
    counted. Ties (CFI == FI) belong to neither gainers nor losers.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    paths = list(paths)
    if not paths:
        raise ValueError("need at least one observed path")
    if len(paths) > n_sample:
        idx = rng.choice(len(paths), size=n_sample, replace=False)
        paths = [paths[i] for i in sorted(idx)]
    fi, cfi = [], []
    skipped = 0
    for path in paths:
        if path.start_job not in env.job_index:
            skipped += 1
            continue
        fi.append(factual_income(path))
        cfi.append(generate_counterfactual(policy, env, path, rng))
    if not fi:
        raise ValueError("every sampled path starts outside the catalog")
    fi_arr = np.asarray(fi)
    cfi_arr = np.asarray(cfi)
    mean_fi = float(fi_arr.mean())
    mean_cfi = float(cfi_arr.mean())
    rel = 100.0 * (cfi_arr - fi_arr) / fi_arr
    gain_mask = cfi_arr > fi_arr
    loss_mask = cfi_arr < fi_arr
    n = fi_arr.size
    return ComparisonReport(
        mean_fi_eur=mean_fi,
        mean_cfi_eur=mean_cfi,
        change_pct=100.0 * (mean_cfi - mean_fi) / mean_fi,
        p_value=permutation_test(fi, cfi, n_permutations=n_permutations, rng=rng),
        gainers_pct=100.0 * gain_mask.sum() / n,
        mean_gain_pct=float(rel[gain_mask].mean()) if gain_mask.any() else 0.0,
        losers_pct=100.0 * loss_mask.sum() / n,
        mean_loss_pct=float(rel[loss_mask].mean()) if loss_mask.any() else 0.0,
        n_paths=n,
        n_skipped=skipped,
    )


def permutation_test(sample_a, sample_b, n_permutations: int = 10_000,
                     rng: np.random.Generator | None = None) -> float:
    """Two-sided permutation test on the difference in means.

    All label assignments are enumerated exactly when there are no more of
    them than ``n_permutations``; otherwise random permutations are drawn and
    the identity permutation is included in the count, so the p-value is at
    least 1 / (n_permutations + 1).
    """
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    rng = rng if rng is not None else np.random.default_rng(0)
    pooled = np.concatenate([a, b])
    n, na = pooled.size, a.size
    total = float(pooled.sum())
    observed = abs(float(a.mean()) - float(b.mean()))
    tol = 1e-12 * (1.0 + observed)

    def diff_from_group_a(sum_a: float) -> float:
        return abs(sum_a / na - (total - sum_a) / (n - na))

    if math.comb(n, na) <= n_permutations:
        count = hits = 0
        for idx in combinations(range(n), na):
            count += 1
            if diff_from_group_a(float(pooled[list(idx)].sum())) >= observed - tol:
                hits += 1
        return hits / count

    hits = 1  # identity permutation
    for _ in range(n_permutations):
        perm = rng.permutation(n)
        if diff_from_group_a(float(pooled[perm[:na]].sum())) >= observed - tol:
            hits += 1
    return hits / (n_permutations + 1)


@dataclass(frozen=True)
class DistributionReport:
    """Job frequencies at the start and end of a batch of episodes."""

    start_counts: dict[JobId, int]
    final_counts: dict[JobId, int]
    n_episodes: int
    top_k: int = 12

    def _top(self, counts) -> list[tuple[JobId, int]]:
        return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[: self.top_k]

    def top_start(self):
        return self._top(self.start_counts)

    def top_final(self):
        return self._top(self.final_counts)

    def to_rows(self) -> list[tuple[str, int, int, int]]:
        rows = [("start", j.occupation_code, j.industry_code, c) for j, c in self.top_start()]
        rows += [("final", j.occupation_code, j.industry_code, c) for j, c in self.top_final()]
        return rows


def distribution_report(policy, env: CareerEnv, n_episodes: int = 1000,
                        rng: np.random.Generator | None = None,
                        start_jobs=None, top_k: int = 12) -> DistributionReport:
    """Start and final job distributions over full-horizon episodes.

    Start jobs are sampled from ``start_jobs`` when given (e.g. observed
    starts), otherwise uniformly from the catalog.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    pool = tuple(start_jobs) if start_jobs is not None else env.config.catalog
    start_counts: Counter = Counter()
    final_counts: Counter = Counter()
    for _ in range(n_episodes):
        start = pool[int(rng.integers(len(pool)))]
        trace = env.rollout(policy, start, rng)
        start_counts[start] += 1
        final_counts[trace.final_job] += 1
    return DistributionReport(dict(start_counts), dict(final_counts), n_episodes, top_k)


def write_distribution_csv(report: DistributionReport, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["position,occupation,industry,count"]
    lines += [f"{pos},{occ},{ind},{count}" for pos, occ, ind, count in report.to_rows()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Explicit small MDPs and exact oracles
# ---------------------------------------------------------------------------

class TinyMdp:
    """Finite-horizon MDP with explicit tensors, usable by every trainer.

    States exposed to learners are (s, t) pairs so finite-horizon values are
    learnable by stationary tables; index keys and one-hot features encode
    both components.
    """

    def __init__(self, transitions, rewards, horizon: int, discount: float = 1.0):
        P = np.asarray(transitions, dtype=np.float64)
        R = np.asarray(rewards, dtype=np.float64)
        if P.ndim != 3 or P.shape[0] != P.shape[2] or P.shape[0] < 1 or P.shape[1] < 1:
            raise ValueError(f"transitions must have shape (S, A, S), got {P.shape}")
        if R.shape != P.shape[:2]:
            raise ValueError(f"rewards must have shape {P.shape[:2]}, got {R.shape}")
        if not np.isfinite(P).all() or not np.isfinite(R).all():
            raise ValueError("tensors must be finite")
        if (P < 0).any() or not np.allclose(P.sum(axis=2), 1.0, atol=1e-9):
            raise ValueError("transition rows must be distributions over next states")
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not (0.0 <= discount <= 1.0):
            raise ValueError("discount must be in [0, 1]")
        self.transitions = P
        self.rewards = R
        self.horizon = horizon
        self.discount = discount
        self.S = P.shape[0]
        self.A = P.shape[1]

    @property
    def n_actions(self) -> int:
        return self.A

    @property
    def n_states(self) -> int:
        return self.S * self.horizon

    @property
    def state_dim(self) -> int:
        return self.S + self.horizon

    def reset_any(self, rng) -> tuple[int, int]:
        return int(rng.integers(self.S)), 0

    def step(self, state, action: int, rng):
        s, t = state
        s2 = int(rng.choice(self.S, p=self.transitions[s, action]))
        t2 = t + 1
        return (s2, t2), float(self.rewards[s, action]), t2 == self.horizon

    def state_index(self, state) -> int:
        s, t = state
        return s * self.horizon + t

    def state_features(self, state) -> np.ndarray:
        s, t = state
        x = np.zeros(self.state_dim)
        x[s] = 1.0
        x[self.S + min(t, self.horizon - 1)] = 1.0
        return x


def random_tiny_mdp(rng: np.random.Generator, n_states: int = 3, n_actions: int = 3,
                    horizon: int = 4, discount: float = 1.0) -> TinyMdp:
    P = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    R = rng.uniform(0.0, 1.0, size=(n_states, n_actions))
    return TinyMdp(P, R, horizon, discount)


@dataclass(frozen=True)
class OracleSolution:
    q: np.ndarray       # (horizon, S, A)
    v: np.ndarray       # (horizon + 1, S)
    policy: np.ndarray  # (horizon, S) greedy action ids

    def max_abs_q(self) -> float:
        return float(np.abs(self.q).max())


def value_iteration_oracle(mdp: TinyMdp) -> OracleSolution:
    """Exact finite-horizon backward induction."""
    H, S, A = mdp.horizon, mdp.S, mdp.A
    v = np.zeros((H + 1, S))
    q = np.zeros((H, S, A))
    for t in range(H - 1, -1, -1):
        q[t] = mdp.rewards + mdp.discount * mdp.transitions @ v[t + 1]
        v[t] = q[t].max(axis=1)
    return OracleSolution(q=q, v=v, policy=q.argmax(axis=2))


def policy_evaluation_oracle(mdp: TinyMdp, policy_probs) -> np.ndarray:
    """Exact Q values of a fixed stochastic policy, shape (horizon, S, A).

    ``policy_probs`` is (S, A) for a stationary policy or (horizon, S, A)
    for a time-dependent one.
    """
    probs = np.asarray(policy_probs, dtype=np.float64)
    if probs.ndim == 2:
        probs = np.broadcast_to(probs, (mdp.horizon, *probs.shape))
    H, S, A = mdp.horizon, mdp.S, mdp.A
    if probs.shape != (H, S, A):
        raise ValueError(f"policy must have shape {(H, S, A)}, got {probs.shape}")
    q = np.zeros((H, S, A))
    v_next = np.zeros(S)
    for t in range(H - 1, -1, -1):
        q[t] = mdp.rewards + mdp.discount * mdp.transitions @ v_next
        v_next = (probs[t] * q[t]).sum(axis=1)
    return q
