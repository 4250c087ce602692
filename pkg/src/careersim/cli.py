"""Experiment orchestration: config loading, staged pipeline, and recommendations.

Stages write their artifacts under one output directory and later stages read
them back, so re-running only downstream stages works:

    data/        work_experience.csv, vacancies.csv, applications.csv, catalog.csv
    models/      transition.json, salary.json
    policy/      policy.json
    report.json, report.csv, distribution.csv, manifest.json

All randomness flows from one master seed through named child streams, so a
repeated run with the same seed writes byte-identical reports.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .agents import (
    FeatureCareerEnv,
    NetSpec,
    TabularCareerEnv,
    TrainConfig,
    a2c_policy,
    a2c_train,
    dqn_policy,
    dqn_train,
    highest_expected_reward_policy,
    most_common_policy,
    q_learning_train,
    qtable_policy,
    sarsa_train,
)
from .env import CareerEnv, EnvConfig
from .evaluation import compare_policies, distribution_report, observed_paths, write_distribution_csv
from .forest import ForestParams
from .market import (
    MarketDataError,
    SynthConfig,
    generate_synthetic,
    load_market,
    load_work_experience,
    plausible_jobs,
    preprocess,
    write_market,
)
from .models import StateRepresentation, fit_salary_model, fit_transition_model
from .persist import (
    load_doc,
    mlp_from_doc,
    mlp_to_doc,
    qtable_from_doc,
    qtable_to_doc,
    report_to_doc,
    salary_model_from_doc,
    salary_model_to_doc,
    save_doc,
    transition_model_from_doc,
    transition_model_to_doc,
    write_manifest,
    write_report_csv,
)

__all__ = [
    "ConfigError",
    "ALGORITHMS",
    "TABULAR_ALGORITHMS",
    "EnvSettings",
    "EvalSettings",
    "ExperimentConfig",
    "config_from_dict",
    "config_to_dict",
    "load_config",
    "child_seed",
    "child_rng",
    "run_pipeline",
    "recommend",
    "main",
]

ALGORITHMS = ("sarsa", "qlearning", "dqn", "a2c", "greedy_common", "greedy_her")
TABULAR_ALGORITHMS = ("sarsa", "qlearning")

# named child streams hanging off the master seed
_STREAMS = {
    "synth": 1,
    "fit.transition": 2,
    "fit.salary": 3,
    "train": 4,
    "eval": 5,
    "distribution": 6,
    "recommend": 7,
}


class ConfigError(ValueError):
    """Invalid experiment configuration; messages carry the field path."""


def child_seed(master_seed: int, stream: str) -> int:
    seq = np.random.SeedSequence([master_seed, _STREAMS[stream]])
    return int(seq.generate_state(1, np.uint64)[0])


def child_rng(master_seed: int, stream: str) -> np.random.Generator:
    return np.random.default_rng([master_seed, _STREAMS[stream]])


@dataclass(frozen=True)
class EnvSettings:
    horizon_steps: int = 40
    step_months: int = 3
    discount: float = 1.0


@dataclass(frozen=True)
class EvalSettings:
    n_sample: int = 20_000
    n_permutations: int = 10_000
    n_episodes_distribution: int = 1000

    def __post_init__(self):
        if min(self.n_sample, self.n_permutations, self.n_episodes_distribution) < 1:
            raise ValueError("evaluation sizes must be positive")


@dataclass(frozen=True)
class ExperimentConfig:
    master_seed: int = 0
    output_dir: str = "runs/experiment"
    algorithm: str = "qlearning"
    representation: StateRepresentation = StateRepresentation.LAST_JOB
    catalog_size: int = 142
    synth: SynthConfig = SynthConfig()
    env: EnvSettings = EnvSettings()
    transition_forest: ForestParams = ForestParams()
    salary_forest: ForestParams = ForestParams()
    # tabular learners bootstrap through the horizon truncation, which needs a
    # training discount below 1 even though the income objective is undiscounted
    train: TrainConfig = TrainConfig(episodes=30_000, alpha=0.2, alpha_decay=0.01,
                                     epsilon_end=0.3, gamma=0.95)
    net: NetSpec = NetSpec()
    eval: EvalSettings = EvalSettings()


def _build_section(cls, data, path: str, forbidden=("seed",)):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key in forbidden:
            raise ConfigError(f"{path}.{key}: derived from master_seed, not configurable")
        if key not in names:
            raise ConfigError(f"{path}.{key}: unknown field")
        if isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{path}: {err}") from None


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    known = {
        "master_seed", "output_dir", "algorithm", "representation", "catalog_size",
        "synth", "env", "transition_forest", "salary_forest", "train", "net", "eval",
    }
    for key in data:
        if key not in known:
            raise ConfigError(f"{key}: unknown field")
    algorithm = data.get("algorithm", "qlearning")
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"algorithm: must be one of {ALGORITHMS}, got {algorithm!r}")
    rep_text = data.get("representation", StateRepresentation.LAST_JOB.value)
    try:
        representation = StateRepresentation(rep_text)
    except ValueError:
        raise ConfigError(
            f"representation: must be one of "
            f"{[r.value for r in StateRepresentation]}, got {rep_text!r}"
        ) from None
    if algorithm in TABULAR_ALGORITHMS and representation is not StateRepresentation.LAST_JOB:
        raise ConfigError(
            f"algorithm: {algorithm} is tabular and requires representation="
            f"{StateRepresentation.LAST_JOB.value}"
        )
    catalog_size = data.get("catalog_size", 142)
    if not isinstance(catalog_size, int) or catalog_size < 1:
        raise ConfigError(f"catalog_size: must be a positive integer, got {catalog_size!r}")
    master_seed = data.get("master_seed", 0)
    if not isinstance(master_seed, int):
        raise ConfigError(f"master_seed: must be an integer, got {master_seed!r}")
    try:
        synth = _build_section(SynthConfig, data.get("synth", {}), "synth")
        synth.validate()
    except MarketDataError as err:
        raise ConfigError(f"synth: {err}") from None
    env = _build_section(EnvSettings, data.get("env", {}), "env", forbidden=())
    if env.horizon_steps < 1 or env.step_months < 1 or not (0 < env.discount <= 1):
        raise ConfigError("env: horizon_steps/step_months must be positive, discount in (0, 1]")
    train_data = dict(data.get("train", {}))
    train_data.setdefault("episodes", 30_000)
    train_data.setdefault("alpha", 0.2)
    train_data.setdefault("alpha_decay", 0.01)
    train_data.setdefault("epsilon_end", 0.3)
    train_data.setdefault("gamma", 0.95)
    train = _build_section(TrainConfig, train_data, "train")
    if algorithm in TABULAR_ALGORITHMS and (train.gamma is None or train.gamma >= 1.0):
        raise ConfigError(
            "train.gamma: tabular learners bootstrap through the horizon "
            "truncation and need a training discount below 1"
        )
    return ExperimentConfig(
        master_seed=master_seed,
        output_dir=str(data.get("output_dir", "runs/experiment")),
        algorithm=algorithm,
        representation=representation,
        catalog_size=catalog_size,
        synth=synth,
        env=env,
        transition_forest=_build_section(ForestParams, data.get("transition_forest", {}), "transition_forest"),
        salary_forest=_build_section(ForestParams, data.get("salary_forest", {}), "salary_forest"),
        train=train,
        net=_build_section(NetSpec, data.get("net", {}), "net", forbidden=()),
        eval=_build_section(EvalSettings, data.get("eval", {}), "eval", forbidden=()),
    )


def config_to_dict(cfg: ExperimentConfig) -> dict:
    def section(obj, drop_seed=True):
        d = dataclasses.asdict(obj)
        if drop_seed:
            d.pop("seed", None)
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}

    return {
        "master_seed": cfg.master_seed,
        "output_dir": cfg.output_dir,
        "algorithm": cfg.algorithm,
        "representation": cfg.representation.value,
        "catalog_size": cfg.catalog_size,
        "synth": section(cfg.synth),
        "env": section(cfg.env, drop_seed=False),
        "transition_forest": section(cfg.transition_forest),
        "salary_forest": section(cfg.salary_forest),
        "train": section(cfg.train),
        "net": section(cfg.net, drop_seed=False),
        "eval": section(cfg.eval, drop_seed=False),
    }


def load_config(path=None, seed=None, output=None) -> ExperimentConfig:
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as err:
            raise ConfigError(f"cannot read config: {err}") from None
        except json.JSONDecodeError as err:
            raise ConfigError(f"config is not valid JSON: {err}") from None
    cfg = config_from_dict(data)
    if seed is not None:
        cfg = replace(cfg, master_seed=seed)
    if output is not None:
        cfg = replace(cfg, output_dir=str(output))
    return cfg


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------

def _say(quiet: bool, message: str) -> None:
    if not quiet:
        print(message)


def stage_generate_data(cfg: ExperimentConfig, quiet: bool = False) -> Path:
    out = Path(cfg.output_dir)
    synth = replace(cfg.synth, seed=child_seed(cfg.master_seed, "synth"))
    dataset = generate_synthetic(synth)
    write_market(dataset, out / "data")
    _say(quiet, f"generated {len(dataset.experiences)} experience records, "
                f"{len(dataset.vacancies)} vacancies, {len(dataset.applications)} applications")
    return out / "data"


def _load_preprocessed(cfg: ExperimentConfig):
    return preprocess(load_market(Path(cfg.output_dir) / "data"))


def stage_fit_models(cfg: ExperimentConfig, quiet: bool = False) -> Path:
    out = Path(cfg.output_dir)
    dataset = _load_preprocessed(cfg)
    catalog = plausible_jobs(dataset, cfg.catalog_size)
    t_params = replace(cfg.transition_forest, seed=child_seed(cfg.master_seed, "fit.transition"))
    transition, training = fit_transition_model(dataset, cfg.representation, catalog, t_params)
    s_params = replace(cfg.salary_forest, seed=child_seed(cfg.master_seed, "fit.salary"))
    salary = fit_salary_model(dataset.vacancies, catalog, s_params)
    save_doc(out / "models" / "transition.json", "transition_model", transition_model_to_doc(transition))
    save_doc(out / "models" / "salary.json", "salary_model", salary_model_to_doc(salary))
    _say(quiet, f"fit transition model on {training.features.shape[0]} applications "
                f"({training.n_skipped} skipped); salary table over {len(catalog)} jobs")
    return out / "models"


def _load_models(cfg: ExperimentConfig):
    out = Path(cfg.output_dir)
    transition = transition_model_from_doc(load_doc(out / "models" / "transition.json", "transition_model"))
    salary = salary_model_from_doc(load_doc(out / "models" / "salary.json", "salary_model"))
    return transition, salary


def _build_env(cfg: ExperimentConfig, transition, salary) -> CareerEnv:
    env_config = EnvConfig(
        catalog=transition.catalog,
        horizon_steps=cfg.env.horizon_steps,
        step_months=cfg.env.step_months,
        discount=cfg.env.discount,
    )
    return CareerEnv(env_config, transition, salary)


def stage_train(cfg: ExperimentConfig, quiet: bool = False) -> Path:
    out = Path(cfg.output_dir)
    transition, salary = _load_models(cfg)
    env = _build_env(cfg, transition, salary)
    train_cfg = replace(cfg.train, seed=child_seed(cfg.master_seed, "train"))
    algo = cfg.algorithm
    payload: dict = {"algorithm": algo, "representation": cfg.representation.value}
    if algo in TABULAR_ALGORITHMS:
        adapter = TabularCareerEnv(env)
        table = sarsa_train(adapter, train_cfg) if algo == "sarsa" else q_learning_train(adapter, train_cfg)
        payload["qtable"] = qtable_to_doc(table)
    elif algo == "dqn":
        adapter = FeatureCareerEnv(env)
        payload["net"] = mlp_to_doc(dqn_train(adapter, train_cfg, cfg.net))
    elif algo == "a2c":
        adapter = FeatureCareerEnv(env)
        actor, critic = a2c_train(adapter, train_cfg, cfg.net)
        payload["actor"] = mlp_to_doc(actor)
        payload["critic"] = mlp_to_doc(critic)
    # greedy baselines need no training; the marker document still records them
    save_doc(out / "policy" / "policy.json", "policy", payload)
    _say(quiet, f"trained policy: {algo}")
    return out / "policy"


def load_policy(cfg: ExperimentConfig, env: CareerEnv):
    """Policy callable (env, state, rng) -> JobId from the run's artifacts."""
    doc = load_doc(Path(cfg.output_dir) / "policy" / "policy.json", "policy")
    algo = doc["algorithm"]
    if algo in TABULAR_ALGORITHMS:
        return qtable_policy(qtable_from_doc(doc["qtable"]), env.config.catalog), algo
    if algo == "dqn":
        return dqn_policy(FeatureCareerEnv(env), mlp_from_doc(doc["net"])), algo
    if algo == "a2c":
        return a2c_policy(FeatureCareerEnv(env), mlp_from_doc(doc["actor"])), algo
    if algo == "greedy_common":
        return most_common_policy(), algo
    if algo == "greedy_her":
        return highest_expected_reward_policy(), algo
    raise ConfigError(f"policy document names unknown algorithm {algo!r}")


def stage_evaluate(cfg: ExperimentConfig, quiet: bool = False) -> Path:
    out = Path(cfg.output_dir)
    dataset = _load_preprocessed(cfg)
    transition, salary = _load_models(cfg)
    env = _build_env(cfg, transition, salary)
    policy, label = load_policy(cfg, env)
    paths = observed_paths(dataset, salary)
    report = compare_policies(
        policy, env, paths,
        n_sample=cfg.eval.n_sample,
        rng=child_rng(cfg.master_seed, "eval"),
        n_permutations=cfg.eval.n_permutations,
    )
    save_doc(out / "report.json", "comparison_report", report_to_doc(report))
    write_report_csv({label: report}, out / "report.csv")
    _say(quiet, f"{label}: mean factual {report.mean_fi_eur:.2f}, "
                f"mean counterfactual {report.mean_cfi_eur:.2f}, "
                f"change {report.change_pct:+.2f}% (p={report.p_value:.4f}) "
                f"over {report.n_paths} paths ({report.n_skipped} skipped)")
    return out / "report.json"


def stage_distribution_report(cfg: ExperimentConfig, quiet: bool = False) -> Path:
    out = Path(cfg.output_dir)
    dataset = _load_preprocessed(cfg)
    transition, salary = _load_models(cfg)
    env = _build_env(cfg, transition, salary)
    policy, label = load_policy(cfg, env)
    catalog = set(env.config.catalog)
    starts = [p.start_job for p in observed_paths(dataset, salary) if p.start_job in catalog]
    report = distribution_report(
        policy, env,
        n_episodes=cfg.eval.n_episodes_distribution,
        rng=child_rng(cfg.master_seed, "distribution"),
        start_jobs=starts or None,
    )
    write_distribution_csv(report, out / "distribution.csv")
    _say(quiet, f"{label}: distribution over {report.n_episodes} episodes written")
    return out / "distribution.csv"


_PIPELINE_ARTIFACTS = (
    "data/work_experience.csv",
    "data/vacancies.csv",
    "data/applications.csv",
    "data/catalog.csv",
    "models/transition.json",
    "models/salary.json",
    "policy/policy.json",
    "report.json",
    "report.csv",
    "distribution.csv",
)


def run_pipeline(cfg: ExperimentConfig, quiet: bool = False) -> Path:
    """generate -> fit -> train -> evaluate -> distribution -> manifest."""
    stage_generate_data(cfg, quiet)
    stage_fit_models(cfg, quiet)
    stage_train(cfg, quiet)
    stage_evaluate(cfg, quiet)
    stage_distribution_report(cfg, quiet)
    meta = {
        "package_version": __version__,
        "master_seed": cfg.master_seed,
        "config": config_to_dict(cfg),
    }
    path = write_manifest(Path(cfg.output_dir), _PIPELINE_ARTIFACTS, meta)
    _say(quiet, f"pipeline complete: {cfg.output_dir}")
    return path


# ---------------------------------------------------------------------------
# Recommendations
# ---------------------------------------------------------------------------

def _deterministic_policy_rng(cfg: ExperimentConfig) -> np.random.Generator:
    return child_rng(cfg.master_seed, "recommend")


def _expected_income_last_job(env: CareerEnv, policy, horizon: int,
                              start_index: int, rng) -> float:
    """Exact expected cumulative income of a policy under the last-job view,
    by propagating the distribution over current jobs step by step."""
    matrix = env.transition_model.last_job_matrix
    n = env.n_actions
    salaries = env.step_salaries
    dist = np.zeros(n)
    dist[start_index] = 1.0
    total = 0.0
    for t in range(horizon):
        actions = np.asarray([
            env.job_index[policy(env, _synthetic_state(env, s, t), rng)]
            for s in range(n)
        ])
        p = matrix[np.arange(n), actions]
        total += float((dist * (p * salaries[actions] + (1.0 - p) * salaries)).sum())
        moved = np.zeros(n)
        np.add.at(moved, actions, dist * p)
        moved += dist * (1.0 - p)
        dist = moved
    return total


def _synthetic_state(env: CareerEnv, job_index: int, t: int):
    job = env.config.catalog[job_index]
    from .env import State

    return State(current_job=job, history=((job, t),), t=t)


def _monte_carlo_income(env: CareerEnv, policy, horizon: int, start, rng,
                        n_rollouts: int = 2000) -> float:
    totals = 0.0
    for _ in range(n_rollouts):
        totals += env.rollout(policy, start, rng, n_steps=horizon).total_reward
    return totals / n_rollouts


def recommend(cfg: ExperimentConfig, history_path, horizon: int | None = None,
              quiet: bool = False) -> Path:
    """Recommend a job sequence from a work-history CSV.

    Emits the greedy most-likely realization (an application succeeds when
    its modeled probability is at least one half) and a projected income:
    exact under the last-job view, Monte Carlo otherwise.
    """
    out = Path(cfg.output_dir)
    transition, salary = _load_models(cfg)
    env = _build_env(cfg, transition, salary)
    policy, label = load_policy(cfg, env)
    records = load_work_experience(history_path)
    if not records:
        raise MarketDataError(f"{history_path}: history holds no records")
    last = max(records, key=lambda r: (r.start_date, r.end_date, r.job))
    if last.job not in env.job_index:
        raise MarketDataError(
            f"last held job ({last.job.occupation_code}, {last.job.industry_code}) "
            f"is not in the model catalog"
        )
    horizon = horizon or env.config.horizon_steps
    env = env.with_horizon(max(horizon, env.config.horizon_steps))
    rng = _deterministic_policy_rng(cfg)

    # most-likely realization of the policy from the current job
    state = env.reset(last.job)
    lines = ["step,action_occupation,action_industry,hire_probability,job_occupation,job_industry"]
    for t in range(horizon):
        action = policy(env, state, rng)
        p = env.transition_probability(state, action)
        hired = p >= 0.5
        if hired and action != state.current_job:
            history = state.history + ((action, 1),)
            job_after = action
        else:
            last_job, held = state.history[-1]
            history = state.history[:-1] + ((last_job, held + 1),)
            job_after = state.current_job
        lines.append(
            f"{t},{action.occupation_code},{action.industry_code},{p:.4f},"
            f"{job_after.occupation_code},{job_after.industry_code}"
        )
        from .env import State

        state = State(current_job=job_after, history=history, t=state.t + 1)

    if env.representation is StateRepresentation.LAST_JOB and env.transition_model.last_job_matrix is not None:
        projected = _expected_income_last_job(env, policy, horizon, env.job_index[last.job], rng)
        method = "exact"
    else:
        projected = _monte_carlo_income(env, policy, horizon, last.job, rng)
        method = "monte_carlo"

    out.mkdir(parents=True, exist_ok=True)
    rec_path = out / "recommendation.csv"
    rec_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    _say(quiet, f"{label}: projected income over {horizon} steps "
                f"{projected:,.2f} EUR ({method}); recommendation written to {rec_path}")
    save_doc(out / "recommendation.json", "recommendation", {
        "algorithm": label,
        "horizon_steps": horizon,
        "projected_income_eur": projected,
        "projection_method": method,
    })
    return rec_path


# ---------------------------------------------------------------------------
# Command line
# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="careersim",
        description="Simulate a job market, train income-maximizing policies, "
                    "and evaluate them against observed careers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "generate-data": "generate the synthetic market CSVs",
        "fit-models": "fit the hire-probability and salary models",
        "train": "train the configured policy",
        "evaluate": "compare the policy against observed careers",
        "distribution-report": "start/final job distributions over rollouts",
        "recommend": "recommend a job sequence for a work history",
        "pipeline": "run every stage end to end and write a manifest",
    }
    for name, help_text in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, default=None, help="JSON config path")
        p.add_argument("--seed", type=int, default=None, help="override master_seed")
        p.add_argument("--output", type=Path, default=None, help="override output_dir")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
        if name == "recommend":
            p.add_argument("--history", type=Path, required=True,
                           help="work-experience CSV for the person to advise")
            p.add_argument("--horizon", type=int, default=None,
                           help="steps to project (default: environment horizon)")
    return parser


_STAGES = {
    "generate-data": stage_generate_data,
    "fit-models": stage_fit_models,
    "train": stage_train,
    "evaluate": stage_evaluate,
    "distribution-report": stage_distribution_report,
    "pipeline": run_pipeline,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed=args.seed, output=args.output)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    try:
        if args.command == "recommend":
            recommend(cfg, args.history, horizon=args.horizon, quiet=args.quiet)
        else:
            _STAGES[args.command](cfg, quiet=args.quiet)
    except (ConfigError, MarketDataError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except Exception as err:  # noqa: BLE001 - runtime failures exit 2 by contract
        print(f"runtime failure: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
