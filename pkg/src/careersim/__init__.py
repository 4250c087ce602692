"""careersim: job-market MDP simulation, policy learning, and counterfactual evaluation.

The package simulates a labor market from (synthetic) work-experience,
vacancy, and application data, trains policies that maximize cumulative
income over a multi-year horizon, and evaluates them against observed careers
by comparing factual with counterfactual income.
"""

__version__ = "0.1.0"

from .market import (  # noqa: F401
    JobId,
    WorkExperienceRecord,
    Vacancy,
    ApplicationRecord,
    MarketDataset,
    SynthConfig,
    MarketDataError,
    make_dataset,
    preprocess,
    plausible_jobs,
    generate_synthetic,
)
from .forest import ForestParams, fit_classifier, fit_regressor, predict_proba, predict_value  # noqa: F401
from .models import (  # noqa: F401
    StateRepresentation,
    TransitionModel,
    SalaryModel,
    encode_state_action,
    build_transition_training_set,
    fit_transition_model,
    fit_salary_model,
    transition_probability,
    quarterly_salary,
    monthly_salary,
)
from .env import CareerEnv, EnvConfig, State, StepOutcome, EpisodeTrace  # noqa: F401
from .approx import Mlp, init_mlp, forward, grad, adam_step, init_adam  # noqa: F401
from .agents import (  # noqa: F401
    TrainConfig,
    NetSpec,
    QTable,
    ReplayBuffer,
    sarsa_train,
    q_learning_train,
    dqn_train,
    a2c_train,
    most_common_action,
    highest_expected_reward_action,
    TabularCareerEnv,
    FeatureCareerEnv,
)
from .evaluation import (  # noqa: F401
    ObservedPath,
    ComparisonReport,
    monthly_income_series,
    observed_paths,
    factual_income,
    generate_counterfactual,
    compare_policies,
    permutation_test,
    distribution_report,
    TinyMdp,
    random_tiny_mdp,
    value_iteration_oracle,
    policy_evaluation_oracle,
)
from .cli import ExperimentConfig, run_pipeline, recommend  # noqa: F401
