"""Step through the job-market MDP and roll out simple policies.

Episodes run 40 quarterly steps (ten years). Each step the agent applies to
one job; with the modeled probability it moves, otherwise it stays, and it
earns the quarterly salary of whichever job it holds after the application
resolves.
"""

import numpy as np

from careersim import SynthConfig, generate_synthetic, plausible_jobs, preprocess
from careersim.agents import highest_expected_reward_policy, most_common_policy, stay_policy
from careersim.env import CareerEnv, EnvConfig
from careersim.forest import ForestParams
from careersim.models import StateRepresentation, fit_salary_model, fit_transition_model

dataset = preprocess(generate_synthetic(SynthConfig(n_employees=1500, seed=11)))
catalog = tuple(plausible_jobs(dataset, 25))
transition, _ = fit_transition_model(dataset, StateRepresentation.LAST_JOB, catalog,
                                     ForestParams(min_samples_leaf=40, seed=1))
salary = fit_salary_model(dataset.vacancies, catalog, ForestParams(seed=2))
env = CareerEnv(EnvConfig(catalog=catalog), transition, salary)

rng = np.random.default_rng(0)
start = catalog[10]
state = env.reset(start)
print(f"start: job ({start.occupation_code}, {start.industry_code}), "
      f"quarterly salary {env.step_salary(start):,.0f} EUR\n")

print("one episode, applying wherever hire probability is highest:")
policy = most_common_policy()
for _ in range(6):
    action = policy(env, state, rng)
    outcome = env.step(state, action, rng)
    print(f"  t={state.t:2d} applied to ({action.occupation_code}, {action.industry_code}) "
          f"{'HIRED  ' if outcome.hired else 'rejected'} reward {outcome.reward_eur:8,.0f}")
    state = outcome.next_state

def climb_policy():
    """Apply to the best-paying job that shares occupation or industry."""

    def policy(env_, state, rng):
        cur = state.current_job
        related = [
            j for j in env_.config.catalog
            if (j.occupation_code == cur.occupation_code or j.industry_code == cur.industry_code)
            and env_.step_salary(j) > env_.step_salary(cur)
        ]
        return max(related, key=env_.step_salary) if related else cur

    return policy


start = min(catalog, key=env.step_salary)
print(f"\nmean ten-year income from the lowest-paying job "
      f"({start.occupation_code}, {start.industry_code}), 200 episodes per policy:")
for name, pol in [("stay put", stay_policy()),
                  ("most common", most_common_policy()),
                  ("highest expected reward", highest_expected_reward_policy()),
                  ("climb related ladder", climb_policy())]:
    rng = np.random.default_rng(42)
    totals = [env.rollout(pol, start, rng).total_reward for _ in range(200)]
    print(f"  {name:24s} {np.mean(totals):12,.0f} EUR")
print("\nthe greedy baselines barely move: staying maximizes both hire probability")
print("and the myopic product. Multi-step ladder climbing is what RL discovers.")
