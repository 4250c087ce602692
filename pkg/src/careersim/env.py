"""Episodic job-market MDP: fixed-length episodes of quarterly steps.

Each step the agent applies to one catalog job. With the modeled hire
probability the application succeeds and the agent moves; otherwise it stays
where it is. Either way the step pays the salary of the job held after the
application resolves, so the agent always holds exactly one job and there is
no unemployment inside an episode.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .market import JobId
from .models import (
    SalaryModel,
    StateRepresentation,
    TransitionModel,
    annual_salary,
    transition_probabilities_from_steps,
    transition_probability_from_steps,
)

__all__ = [
    "DAYS_PER_MONTH",
    "EnvConfig",
    "State",
    "StepOutcome",
    "StepRecord",
    "EpisodeTrace",
    "CareerEnv",
    "write_traces_csv",
]

DAYS_PER_MONTH = 30.4375


@dataclass(frozen=True)
class EnvConfig:
    catalog: tuple[JobId, ...]
    horizon_steps: int = 40
    step_months: int = 3
    discount: float = 1.0

    def __post_init__(self):
        if not self.catalog:
            raise ValueError("catalog must be non-empty")
        if self.horizon_steps < 1:
            raise ValueError("horizon_steps must be >= 1")
        if self.step_months < 1:
            raise ValueError("step_months must be >= 1")
        if not (0.0 < self.discount <= 1.0):
            raise ValueError("discount must be in (0, 1]")


@dataclass(frozen=True)
class State:
    current_job: JobId
    history: tuple[tuple[JobId, int], ...]  # (job, steps held), oldest first
    t: int


@dataclass(frozen=True)
class StepOutcome:
    next_state: State
    reward_eur: float
    hired: bool
    done: bool


@dataclass(frozen=True)
class StepRecord:
    step: int
    job: JobId      # job held when the action was taken
    action: JobId
    hired: bool
    reward_eur: float

    @property
    def job_after(self) -> JobId:
        return self.action if self.hired else self.job


@dataclass(frozen=True)
class EpisodeTrace:
    start_job: JobId
    steps: tuple[StepRecord, ...]

    @property
    def total_reward(self) -> float:
        return float(sum(s.reward_eur for s in self.steps))

    @property
    def final_job(self) -> JobId:
        return self.steps[-1].job_after if self.steps else self.start_job

    @property
    def rewards(self) -> list[float]:
        return [s.reward_eur for s in self.steps]


class CareerEnv:
    """An MDP over a job catalog with learned hire probabilities and salaries."""

    def __init__(self, config: EnvConfig, transition_model: TransitionModel,
                 salary_model: SalaryModel):
        if tuple(transition_model.catalog) != tuple(config.catalog):
            raise ValueError("transition model catalog differs from environment catalog")
        self.config = config
        self.transition_model = transition_model
        self.salary_model = salary_model
        self.days_per_step = config.step_months * DAYS_PER_MONTH
        self.job_index = {job: i for i, job in enumerate(config.catalog)}
        self.step_salaries = np.asarray(
            [annual_salary(salary_model, j) * config.step_months / 12.0 for j in config.catalog]
        )

    @property
    def representation(self) -> StateRepresentation:
        return self.transition_model.representation

    @property
    def n_actions(self) -> int:
        return len(self.config.catalog)

    def with_horizon(self, horizon_steps: int) -> "CareerEnv":
        if horizon_steps == self.config.horizon_steps:
            return self
        return type(self)(replace(self.config, horizon_steps=horizon_steps),
                          self.transition_model, self.salary_model)

    def reset(self, start_job: JobId) -> State:
        if start_job not in self.job_index:
            raise ValueError(f"start job {start_job} is not in the catalog")
        return State(current_job=start_job, history=((start_job, 0),), t=0)

    def transition_probability(self, state: State, action: JobId) -> float:
        return transition_probability_from_steps(
            self.transition_model, state.history, action, self.days_per_step
        )

    def action_probabilities(self, state: State) -> np.ndarray:
        """Hire probability for every catalog job from this state."""
        return transition_probabilities_from_steps(
            self.transition_model, state.history, self.config.catalog, self.days_per_step
        )

    def step_salary(self, job: JobId) -> float:
        return float(self.step_salaries[self.job_index[job]])

    def step(self, state: State, action: JobId, rng: np.random.Generator) -> StepOutcome:
        if state.t >= self.config.horizon_steps:
            raise ValueError(f"episode already done at t={state.t}")
        if action not in self.job_index:
            raise ValueError(f"action {action} is not in the catalog")
        p = self.transition_probability(state, action)
        hired = bool(rng.random() < p)
        if hired and action != state.current_job:
            history = state.history + ((action, 1),)
            job_after = action
        else:
            last_job, held = state.history[-1]
            history = state.history[:-1] + ((last_job, held + 1),)
            job_after = state.current_job
        next_state = State(current_job=job_after, history=history, t=state.t + 1)
        return StepOutcome(
            next_state=next_state,
            reward_eur=self.step_salary(job_after),
            hired=hired,
            done=next_state.t == self.config.horizon_steps,
        )

    def rollout(self, policy, start_job: JobId, rng: np.random.Generator,
                n_steps: int | None = None) -> EpisodeTrace:
        """Run `policy(env, state, rng) -> JobId` for n_steps (default: the
        full horizon) and record every step."""
        n = self.config.horizon_steps if n_steps is None else n_steps
        if n > self.config.horizon_steps:
            raise ValueError(f"n_steps={n} exceeds horizon {self.config.horizon_steps}")
        state = self.reset(start_job)
        steps = []
        for _ in range(n):
            action = policy(self, state, rng)
            outcome = self.step(state, action, rng)
            steps.append(StepRecord(
                step=state.t,
                job=state.current_job,
                action=action,
                hired=outcome.hired,
                reward_eur=outcome.reward_eur,
            ))
            state = outcome.next_state
        return EpisodeTrace(start_job=start_job, steps=tuple(steps))


def write_traces_csv(traces, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "step", "occupation", "industry",
                    "action_occupation", "action_industry", "hired", "reward_eur"])
        for episode, trace in enumerate(traces):
            for rec in trace.steps:
                w.writerow([
                    episode, rec.step,
                    rec.job.occupation_code, rec.job.industry_code,
                    rec.action.occupation_code, rec.action.industry_code,
                    int(rec.hired), f"{rec.reward_eur:.2f}",
                ])
