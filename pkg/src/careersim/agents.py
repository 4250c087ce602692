"""Policy learners and greedy baselines over discrete-action episodic environments.

Trainers are generic over a small duck-typed environment protocol:

    n_actions, discount
    reset_any(rng) -> state            # uniformly random episode start
    step(state, action_index, rng) -> (next_state, reward, done)

Tabular learners additionally use ``n_states`` and ``state_index(state)``;
network learners use ``state_dim`` and ``state_features(state)``. The career
environment is wrapped by the adapters at the bottom of this module, and the
explicit small MDPs used as oracles implement the same protocol directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .approx import (
    Mlp,
    adam_step,
    backward_batch,
    clone,
    forward,
    forward_batch,
    forward_cache,
    init_adam,
    init_mlp,
)
from .env import CareerEnv, State
from .market import JobId
from .models import StateFeaturizer, StateRepresentation

__all__ = [
    "TrainConfig",
    "NetSpec",
    "QTable",
    "ReplayBuffer",
    "sarsa_train",
    "q_learning_train",
    "dqn_train",
    "a2c_train",
    "most_common_action",
    "highest_expected_reward_action",
    "TabularCareerEnv",
    "FeatureCareerEnv",
    "qtable_policy",
    "dqn_policy",
    "a2c_policy",
    "most_common_policy",
    "highest_expected_reward_policy",
    "stay_policy",
]


@dataclass(frozen=True)
class TrainConfig:
    episodes: int
    alpha: float = 0.1
    # per-pair learning-rate decay: alpha / (1 + alpha_decay * visits(s, a))
    alpha_decay: float = 0.0
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.8
    gamma: float | None = None  # defaults to the environment's discount
    seed: int = 0

    def __post_init__(self):
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError("alpha must be in [0, 1]")
        for eps in (self.epsilon_start, self.epsilon_end):
            if not (0.0 <= eps <= 1.0):
                raise ValueError("epsilon must stay in [0, 1]")
        if self.gamma is not None and not (0.0 <= self.gamma <= 1.0):
            raise ValueError("gamma must be in [0, 1]")

    def epsilon_at(self, episode: int) -> float:
        span = max(1, int(self.epsilon_decay_fraction * self.episodes))
        frac = min(episode / span, 1.0)
        return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac

    def resolve_gamma(self, env) -> float:
        return self.gamma if self.gamma is not None else float(env.discount)


@dataclass(frozen=True)
class NetSpec:
    hidden: tuple[int, ...] = (64, 64)
    activation: str = "tanh"
    learning_rate: float = 1e-3
    batch_size: int = 64
    buffer_capacity: int = 50_000
    target_sync_interval: int = 500
    warmup: int = 500
    entropy_coef: float = 0.01


@dataclass
class QTable:
    """Dense state-action value table; unseen pairs read exactly 0."""

    values: np.ndarray  # (n_states, n_actions)

    @classmethod
    def zeros(cls, n_states: int, n_actions: int) -> "QTable":
        return cls(np.zeros((n_states, n_actions)))

    @property
    def n_states(self) -> int:
        return self.values.shape[0]

    @property
    def n_actions(self) -> int:
        return self.values.shape[1]

    def get(self, state: int, action: int) -> float:
        return float(self.values[state, action])

    def greedy_action(self, state: int, rng: np.random.Generator) -> int:
        return _argmax_uniform(self.values[state], rng)


def _argmax_uniform(scores: np.ndarray, rng: np.random.Generator) -> int:
    """Argmax with exact ties broken uniformly at random."""
    ties = np.flatnonzero(scores == scores.max())
    if ties.size == 1:
        return int(ties[0])
    return int(rng.choice(ties))


def _epsilon_greedy(row: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    if rng.random() < epsilon:
        return int(rng.integers(row.size))
    return _argmax_uniform(row, rng)


def _require_tabular(env) -> None:
    if not hasattr(env, "state_index") or not hasattr(env, "n_states"):
        raise TypeError(
            "tabular learners need an index-keyed state space; "
            "use the last-job view of the career environment"
        )


def _td_train(env, config: TrainConfig, on_policy: bool) -> QTable:
    _require_tabular(env)
    rng = np.random.default_rng(config.seed)
    gamma = config.resolve_gamma(env)
    # horizon truncation is not a real terminal when the state key carries no
    # time component: keep bootstrapping through it so values stay stationary
    truncating = bool(getattr(env, "bootstrap_on_done", False))
    if truncating and gamma >= 1.0:
        raise ValueError(
            "bootstrapping through episode truncation needs a discount below 1"
        )
    q = np.zeros((env.n_states, env.n_actions))
    visits = np.zeros_like(q) if config.alpha_decay > 0 else None
    for episode in range(config.episodes):
        eps = config.epsilon_at(episode)
        state = env.reset_any(rng)
        s = env.state_index(state)
        a = _epsilon_greedy(q[s], eps, rng)
        while True:
            next_state, reward, done = env.step(state, a, rng)
            s2 = env.state_index(next_state)
            a2 = None
            if done and not truncating:
                target = reward
            elif on_policy:
                a2 = _epsilon_greedy(q[s2], eps, rng)
                target = reward + gamma * q[s2, a2]
            else:
                target = reward + gamma * q[s2].max()
            alpha = config.alpha
            if visits is not None:
                visits[s, a] += 1.0
                alpha = config.alpha / (1.0 + config.alpha_decay * visits[s, a])
            q[s, a] += alpha * (target - q[s, a])
            if done:
                break
            state, s = next_state, s2
            a = a2 if on_policy else _epsilon_greedy(q[s], eps, rng)
    return QTable(q)


def sarsa_train(env, config: TrainConfig) -> QTable:
    """On-policy TD control: the update target uses the action the epsilon-
    greedy behavior policy actually takes next."""
    return _td_train(env, config, on_policy=True)


def q_learning_train(env, config: TrainConfig) -> QTable:
    """Off-policy TD control: the update target maximizes over next actions
    regardless of the behavior policy."""
    return _td_train(env, config, on_policy=False)


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions with uniform sampling."""

    def __init__(self, capacity: int, state_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._states = np.zeros((capacity, state_dim))
        self._actions = np.zeros(capacity, dtype=np.int64)
        self._rewards = np.zeros(capacity)
        self._next_states = np.zeros((capacity, state_dim))
        self._dones = np.zeros(capacity)
        self._pos = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, state, action, reward, next_state, done) -> None:
        i = self._pos
        self._states[i] = state
        self._actions[i] = action
        self._rewards[i] = reward
        self._next_states[i] = next_state
        self._dones[i] = float(done)
        self._pos = (self._pos + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = rng.choice(self._size, size=min(batch_size, self._size), replace=False)
        return (
            self._states[idx],
            self._actions[idx],
            self._rewards[idx],
            self._next_states[idx],
            self._dones[idx],
        )

    def snapshot(self):
        """Stored transitions in insertion order (oldest first)."""
        order = np.arange(self._size)
        if self._size == self.capacity:
            order = (order + self._pos) % self.capacity
        return [
            (self._states[i].copy(), int(self._actions[i]), float(self._rewards[i]),
             self._next_states[i].copy(), bool(self._dones[i]))
            for i in order
        ]


def _require_features(env) -> None:
    if not hasattr(env, "state_features") or not hasattr(env, "state_dim"):
        raise TypeError("network learners need feature-encoded states")


def _check_finite(arrays, context: str) -> None:
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError(f"non-finite values during {context}")


def dqn_train(env, config: TrainConfig, spec: NetSpec | None = None) -> Mlp:
    """Q-network trained from replayed transitions against a periodically
    synchronized target network; returns the network (act greedily on it)."""
    spec = spec or NetSpec()
    _require_features(env)
    rng = np.random.default_rng(config.seed)
    gamma = config.resolve_gamma(env)
    net = init_mlp((env.state_dim, *spec.hidden, env.n_actions),
                   hidden=spec.activation, output="linear", seed=rng)
    target = clone(net)
    adam = init_adam(net, spec.learning_rate)
    buffer = ReplayBuffer(spec.buffer_capacity, env.state_dim)
    updates = 0
    for episode in range(config.episodes):
        eps = config.epsilon_at(episode)
        state = env.reset_any(rng)
        x = env.state_features(state)
        done = False
        while not done:
            if rng.random() < eps:
                a = int(rng.integers(env.n_actions))
            else:
                a = int(np.argmax(forward(net, x)))
            next_state, reward, done = env.step(state, a, rng)
            x2 = env.state_features(next_state)
            buffer.push(x, a, reward, x2, done)
            state, x = next_state, x2
            if len(buffer) < max(spec.batch_size, spec.warmup):
                continue
            bs, ba, br, bx2, bdone = buffer.sample(spec.batch_size, rng)
            q_next = forward_batch(target, bx2).max(axis=1)
            targets = br + gamma * q_next * (1.0 - bdone)
            cache = forward_cache(net, bs)
            q = cache[2]
            n = bs.shape[0]
            d_out = np.zeros_like(q)
            rows = np.arange(n)
            d_out[rows, ba] = 2.0 * (q[rows, ba] - targets) / n
            grads = backward_batch(net, cache, d_out)
            _check_finite(grads[0] + grads[1], f"DQN update {updates} (episode {episode})")
            adam_step(net, grads, adam)
            updates += 1
            if updates % spec.target_sync_interval == 0:
                target = clone(net)
    return net


def a2c_train(env, config: TrainConfig, spec: NetSpec | None = None) -> tuple[Mlp, Mlp]:
    """Advantage actor-critic with one-step TD advantages, updated per episode.

    Returns (actor, critic): a softmax policy network and a state-value
    network trained side by side.
    """
    spec = spec or NetSpec()
    _require_features(env)
    rng = np.random.default_rng(config.seed)
    gamma = config.resolve_gamma(env)
    actor = init_mlp((env.state_dim, *spec.hidden, env.n_actions),
                     hidden=spec.activation, output="softmax", seed=rng)
    critic = init_mlp((env.state_dim, *spec.hidden, 1),
                      hidden=spec.activation, output="linear", seed=rng)
    adam_actor = init_adam(actor, spec.learning_rate)
    adam_critic = init_adam(critic, spec.learning_rate)
    for episode in range(config.episodes):
        state = env.reset_any(rng)
        xs, actions, rewards, next_xs, dones = [], [], [], [], []
        done = False
        x = env.state_features(state)
        while not done:
            probs = forward(actor, x)
            a = int(rng.choice(env.n_actions, p=probs))
            next_state, reward, done = env.step(state, a, rng)
            x2 = env.state_features(next_state)
            xs.append(x)
            actions.append(a)
            rewards.append(reward)
            next_xs.append(x2)
            dones.append(float(done))
            state, x = next_state, x2
        X = np.asarray(xs)
        X2 = np.asarray(next_xs)
        r = np.asarray(rewards)
        d = np.asarray(dones)
        a_idx = np.asarray(actions)
        n = X.shape[0]

        critic_cache = forward_cache(critic, X)
        v = critic_cache[2][:, 0]
        v2 = forward_batch(critic, X2)[:, 0]
        advantage = r + gamma * v2 * (1.0 - d) - v

        d_v = (-2.0 * advantage / n)[:, None]
        critic_grads = backward_batch(critic, critic_cache, d_v)

        actor_cache = forward_cache(actor, X)
        pi = actor_cache[2]
        rows = np.arange(n)
        d_pi = np.zeros_like(pi)
        # policy-gradient term of -A * log pi(a|s)
        d_pi[rows, a_idx] = -advantage / np.maximum(pi[rows, a_idx], 1e-12) / n
        if spec.entropy_coef:
            safe = np.maximum(pi, 1e-300)
            d_pi += spec.entropy_coef * (np.log(safe) + 1.0) / n
        actor_grads = backward_batch(actor, actor_cache, d_pi)

        _check_finite(actor_grads[0] + actor_grads[1] + critic_grads[0] + critic_grads[1],
                      f"A2C update (episode {episode})")
        adam_step(critic, critic_grads, adam_critic)
        adam_step(actor, actor_grads, adam_actor)
    return actor, critic


# ---------------------------------------------------------------------------
# Greedy baselines
# ---------------------------------------------------------------------------

def most_common_action(env: CareerEnv, state: State, rng: np.random.Generator) -> JobId:
    """Apply for the catalog job with the highest hire probability."""
    p = env.action_probabilities(state)
    return env.config.catalog[_argmax_uniform(p, rng)]


def highest_expected_reward_action(env: CareerEnv, state: State, rng: np.random.Generator) -> JobId:
    """Apply for the job maximizing hire probability times its step salary."""
    scores = env.action_probabilities(state) * env.step_salaries
    return env.config.catalog[_argmax_uniform(scores, rng)]


# ---------------------------------------------------------------------------
# Career-environment adapters for the trainers
# ---------------------------------------------------------------------------

class TabularCareerEnv:
    """Index-keyed view of a career environment: the state key is the current
    job's catalog position, which is only sound under the last-job view.

    Episode ends are horizon truncations, not terminal states, so TD trainers
    bootstrap through them (which requires training with a discount below 1).
    """

    bootstrap_on_done = True

    def __init__(self, env: CareerEnv):
        if env.representation is not StateRepresentation.LAST_JOB:
            raise ValueError(
                "tabular learners require the last-job state representation"
            )
        self.env = env
        self.catalog = env.config.catalog
        self.n_states = len(self.catalog)
        self.n_actions = len(self.catalog)
        self.discount = env.config.discount

    def reset_any(self, rng) -> State:
        return self.env.reset(self.catalog[int(rng.integers(self.n_states))])

    def step(self, state: State, action_index: int, rng):
        out = self.env.step(state, self.catalog[action_index], rng)
        return out.next_state, out.reward_eur, out.done

    def state_index(self, state: State) -> int:
        return self.env.job_index[state.current_job]


class FeatureCareerEnv:
    """Feature-encoded view of a career environment for network learners.

    Rewards are rescaled (by default to the top catalog step salary) so value
    targets stay well inside the network's comfortable range.
    """

    def __init__(self, env: CareerEnv, reward_scale: float | None = None):
        self.env = env
        self.catalog = env.config.catalog
        self.n_actions = len(self.catalog)
        self.discount = env.config.discount
        self.featurizer = StateFeaturizer(
            self.catalog, env.representation, env.days_per_step, env.config.horizon_steps
        )
        self.reward_scale = reward_scale or 1.0 / float(env.step_salaries.max())

    @property
    def state_dim(self) -> int:
        return self.featurizer.dim

    def state_features(self, state: State) -> np.ndarray:
        return self.featurizer.features(state.history, state.t)

    def reset_any(self, rng) -> State:
        return self.env.reset(self.catalog[int(rng.integers(self.n_actions))])

    def step(self, state: State, action_index: int, rng):
        out = self.env.step(state, self.catalog[action_index], rng)
        return out.next_state, out.reward_eur * self.reward_scale, out.done


# ---------------------------------------------------------------------------
# Policies for rollouts: callables (env, state, rng) -> JobId
# ---------------------------------------------------------------------------

def qtable_policy(qtable: QTable, catalog):
    catalog = tuple(catalog)
    index = {job: i for i, job in enumerate(catalog)}

    def policy(env, state, rng):
        return catalog[qtable.greedy_action(index[state.current_job], rng)]

    return policy


def dqn_policy(adapter: FeatureCareerEnv, net: Mlp):
    def policy(env, state, rng):
        q = forward(net, adapter.state_features(state))
        return adapter.catalog[int(np.argmax(q))]

    return policy


def a2c_policy(adapter: FeatureCareerEnv, actor: Mlp):
    """Recommendation-time policy: the most likely action under the actor."""

    def policy(env, state, rng):
        probs = forward(actor, adapter.state_features(state))
        return adapter.catalog[int(np.argmax(probs))]

    return policy


def most_common_policy():
    return most_common_action


def highest_expected_reward_policy():
    return highest_expected_reward_action


def stay_policy():
    def policy(env, state, rng):
        return state.current_job

    return policy
