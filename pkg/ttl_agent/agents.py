"""
This module provides the policies that act on gridworld observations:
- RandomWalker: uniform over the four actions.
- GreedyOracle: reads the current sub-task from the observation and walks a
  shortest path to the nearest object that fulfils it, remembering the cells
  it has seen during the episode.
- LinearA2C: a linear advantage actor-critic over one-hot cell features,
  with n-step returns, entropy and value-loss regularisation, a training loop
  over sampled sub-tasks, and a versioned text checkpoint format.
"""

import io
import logging
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from ttl_agent.errors import CheckpointFormatError, NumericalInstabilityError, PreconditionError
from ttl_agent.gridworld import (
    ACTIONS,
    AGENT,
    CATALOG_OBJECTS,
    CENTRE,
    DELTAS,
    EMPTY,
    MAP_SIZE,
    OBJECT_BASE,
    OP_CHOICE,
    OP_NEG,
    WALL,
    WINDOW,
    Action,
    decode_subtask,
    object_ahead,
    object_name,
    observe,
    step,
)
from ttl_agent.symbolic_module import SUBTASK_STEP_CAP, advance_sm, fulfills, start_sm
from ttl_agent.utils import read_text_file, write_text_file

logger = logging.getLogger(__name__)

OBS_SHAPE = (WINDOW + 1, WINDOW)
VOCABULARY = (EMPTY, WALL, AGENT, OP_NEG, OP_CHOICE) + tuple(
    OBJECT_BASE + k for k in range(len(CATALOG_OBJECTS)))
FEATURE_DIM = OBS_SHAPE[0] * OBS_SHAPE[1] * len(VOCABULARY)
N_ACTIONS = len(ACTIONS)
# Memory code for interior cells the oracle has not seen yet.
UNKNOWN = -1

_CODE_INDEX = np.full(max(VOCABULARY) + 1, -1, dtype=np.int64)
_CODE_INDEX[list(VOCABULARY)] = np.arange(len(VOCABULARY))


def _random_action(rng):
    return ACTIONS[int(rng.integers(N_ACTIONS))]


# --- Baselines -----------------------------------------------------------------

@dataclass(frozen=True)
class RandomWalker:
    name: str = "random"

    def act(self, obs, rng):
        return _random_action(rng)


def _bfs_first_steps(grid, start, passable):
    """
    BFS from `start` over the `passable` cells of `grid`, neighbours in action
    order. Impassable cells are reached but not expanded.

    Returns:
        dict: {cell: (distance, first action)} in discovery order.
    """
    reached = {start: (0, None)}
    queue = deque([start])
    while queue:
        cell = queue.popleft()
        dist, first = reached[cell]
        for action in ACTIONS:
            d_row, d_col = DELTAS[action]
            nxt = (cell[0] + d_row, cell[1] + d_col)
            if nxt in reached or not (0 <= nxt[0] < grid.shape[0] and 0 <= nxt[1] < grid.shape[1]):
                continue
            reached[nxt] = (dist + 1, first if first is not None else action)
            if passable(grid[nxt]):
                queue.append(nxt)
    return reached


def _nearest(reached, is_goal):
    """First action towards the nearest goal cell; BFS order breaks ties."""
    best = None
    for cell, (dist, first) in reached.items():
        if first is not None and is_goal(cell) and (best is None or dist < best[0]):
            best = (dist, first)
    return None if best is None else best[1]


def locate(window):
    """
    Map (row, col) of the agent, read off the 5x5 window: each fully walled
    window row above the agent puts it one row higher than the map centre,
    each one below puts it one row lower, and likewise for columns.
    """
    half = WINDOW // 2
    wall_rows = [bool(np.all(window[k] == WALL)) for k in range(WINDOW)]
    wall_cols = [bool(np.all(window[:, k] == WALL)) for k in range(WINDOW)]
    return (CENTRE[0] - sum(wall_rows[:half]) + sum(wall_rows[half + 1:]),
            CENTRE[1] - sum(wall_cols[:half]) + sum(wall_cols[half + 1:]))


def _blank_memory():
    # Padded by half a window so every window fits; the interior starts unknown.
    half = WINDOW // 2
    memory = np.full((MAP_SIZE + 2 * half, MAP_SIZE + 2 * half), WALL, dtype=np.int64)
    memory[half + 1:half + MAP_SIZE - 1, half + 1:half + MAP_SIZE - 1] = UNKNOWN
    return memory


@dataclass(frozen=True)
class GreedyOracle:
    """
    Walks to the nearest object that fulfils the current sub-task.

    The oracle itself holds no state: `episode()` hands out an OracleEpisode
    that remembers every cell seen so far, which is what run_sm drives.
    Calling `act` directly plans from the current window alone.

    Attributes:
        explore (bool): When no fulfilling object is known, walk towards the
                        nearest unseen cell instead of moving at random.
    """

    explore: bool = True
    name: str = "oracle"

    def episode(self):
        return OracleEpisode(self)

    def act(self, obs, rng):
        return self.episode().act(obs, rng)


@dataclass(eq=False)
class OracleEpisode:
    """
    One episode of a GreedyOracle. Only the agent changes the map, and only
    cells next to it, so remembered cells stay accurate.

    Each step, in order:
    - a shortest path to the nearest remembered fulfilling object, through
      empty or unseen cells (other objects are not crossed);
    - with `explore`, a shortest path to the nearest unseen cell;
    - a shortest path to a fulfilling object that walks over other objects;
    - a uniform random action.
    """

    oracle: GreedyOracle
    memory: np.ndarray = field(default_factory=_blank_memory)

    @property
    def name(self):
        return self.oracle.name

    def _remember(self, window):
        row, col = locate(window)
        half = WINDOW // 2
        self.memory[row:row + WINDOW, col:col + WINDOW] = window
        self.memory[row + half, col + half] = EMPTY
        return row + half, col + half

    def act(self, obs, rng):
        start = self._remember(obs[:WINDOW])
        subtask = decode_subtask(obs[WINDOW])
        if subtask is None:
            return _random_action(rng)
        memory = self.memory

        def is_target(cell):
            code = memory[cell]
            return code >= OBJECT_BASE and fulfills(object_name(code), subtask)

        reached = _bfs_first_steps(memory, start, lambda code: code in (EMPTY, UNKNOWN))
        action = _nearest(reached, is_target)
        if action is None and self.oracle.explore:
            action = _nearest(reached, lambda cell: memory[cell] == UNKNOWN)
        if action is None:
            action = _nearest(_bfs_first_steps(memory, start, lambda code: code != WALL), is_target)
        if action is None:
            action = _random_action(rng)
        return action


def begin_episode(policy):
    """
    The policy to drive one episode with: a fresh OracleEpisode for an
    oracle, the policy itself for memoryless ones.
    """
    start = getattr(policy, "episode", None)
    return start() if callable(start) else policy


# --- Linear actor-critic ----------------------------------------------------------

def features(obs):
    """One-hot encoding of each of the 30 observation cells over VOCABULARY."""
    codes = np.asarray(obs, dtype=np.int64).ravel()
    if codes.size != OBS_SHAPE[0] * OBS_SHAPE[1]:
        raise PreconditionError(f"observation must be {OBS_SHAPE[0]}x{OBS_SHAPE[1]}")
    index = _CODE_INDEX[codes]
    if np.any(index < 0):
        raise PreconditionError("observation holds codes outside the vocabulary")
    vector = np.zeros(FEATURE_DIM)
    vector[np.arange(codes.size) * len(VOCABULARY) + index] = 1.0
    return vector


@dataclass(frozen=True, eq=False)
class A2CParams:
    policy_weights: np.ndarray
    value_weights: np.ndarray
    gamma: float = 0.99
    learning_rate: float = 8e-5
    entropy_coef: float = 1e-2
    value_coef: float = 0.5
    n_steps: int = 5
    master_seed: int = 0

    def __post_init__(self):
        policy = np.array(self.policy_weights, dtype=float)
        value = np.array(self.value_weights, dtype=float)
        if policy.ndim != 2 or policy.shape[1] != N_ACTIONS:
            raise ValueError(f"policy weights must have shape (d, {N_ACTIONS}), got {policy.shape}")
        if value.shape != (policy.shape[0],):
            raise ValueError(f"value weights must have shape ({policy.shape[0]},), got {value.shape}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be at least 1, got {self.n_steps}")
        object.__setattr__(self, "policy_weights", policy)
        object.__setattr__(self, "value_weights", value)

    @property
    def feature_dim(self):
        return self.policy_weights.shape[0]


def init_params(master_seed=0, feature_dim=FEATURE_DIM, **hyperparameters):
    """Zero-initialised parameters; the uniform policy is the starting point."""
    return A2CParams(np.zeros((feature_dim, N_ACTIONS)), np.zeros(feature_dim),
                     master_seed=master_seed, **hyperparameters)


def softmax(logits):
    """
    Args:
        logits (numpy.ndarray): Scores, actions on the last axis.

    Returns:
        numpy.ndarray: Probabilities of the same shape, summing to 1 along
            the last axis.
    """
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / np.sum(exp, axis=-1, keepdims=True)


def policy_probabilities(params, x):
    """
    Args:
        params (A2CParams): Current weights.
        x (numpy.ndarray): One feature vector, or a batch of them as rows.

    Returns:
        numpy.ndarray: pi(a | x) over the four actions, per row.
    """
    return softmax(np.asarray(x) @ params.policy_weights)


@dataclass(frozen=True)
class Transition:
    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray
    terminal: bool


def n_step_returns(params, trajectory):
    """Discounted returns, bootstrapped from the value head after a non-terminal tail."""
    last = trajectory[-1]
    running = 0.0 if last.terminal else float(features(last.next_obs) @ params.value_weights)
    returns = np.zeros(len(trajectory))
    for t in range(len(trajectory) - 1, -1, -1):
        if trajectory[t].terminal:
            running = 0.0
        running = trajectory[t].reward + params.gamma * running
        returns[t] = running
    return returns


def a2c_loss(params, x, actions, returns, advantages):
    """
    Mean over the batch of
    -A_t log pi(a_t) - entropy_coef * H_t + value_coef * (R_t - V_t)^2,
    with the advantages held fixed.
    """
    probs = policy_probabilities(params, x)
    log_probs = np.log(probs)
    entropy = -np.sum(probs * log_probs, axis=1)
    values = x @ params.value_weights
    taken = log_probs[np.arange(len(actions)), actions]
    loss = -advantages * taken - params.entropy_coef * entropy + params.value_coef * (returns - values) ** 2
    return float(np.mean(loss))


def a2c_gradients(params, x, actions, returns, advantages):
    """Analytic gradients of a2c_loss with respect to (policy_weights, value_weights)."""
    batch = len(actions)
    probs = policy_probabilities(params, x)
    log_probs = np.log(probs)
    entropy = -np.sum(probs * log_probs, axis=1, keepdims=True)
    one_hot = np.zeros_like(probs)
    one_hot[np.arange(batch), actions] = 1.0
    d_logits = -advantages[:, None] * (one_hot - probs) + params.entropy_coef * probs * (log_probs + entropy)
    values = x @ params.value_weights
    d_values = -2.0 * params.value_coef * (returns - values)
    return x.T @ d_logits / batch, x.T @ d_values / batch


def a2c_update(params, trajectory):
    """
    One gradient step on a trajectory of at most `n_steps` transitions.

    Raises:
        PreconditionError: If the trajectory is empty or too long.
        NumericalInstabilityError: If the update produces non-finite weights.
    """
    if not trajectory:
        raise PreconditionError("a2c_update needs a non-empty trajectory")
    if len(trajectory) > params.n_steps:
        raise PreconditionError(f"trajectory of {len(trajectory)} exceeds n_steps={params.n_steps}")
    x = np.stack([features(t.obs) for t in trajectory])
    actions = np.array([int(t.action) for t in trajectory])
    returns = n_step_returns(params, trajectory)
    advantages = returns - x @ params.value_weights
    d_policy, d_value = a2c_gradients(params, x, actions, returns, advantages)
    policy = params.policy_weights - params.learning_rate * d_policy
    value = params.value_weights - params.learning_rate * d_value
    if not (np.all(np.isfinite(policy)) and np.all(np.isfinite(value))):
        raise NumericalInstabilityError("A2C update produced non-finite weights")
    return replace(params, policy_weights=policy, value_weights=value)


@dataclass
class LinearA2C:
    params: A2CParams = field(default_factory=init_params)
    name: str = "a2c"

    def act(self, obs, rng):
        probs = policy_probabilities(self.params, features(obs))
        return ACTIONS[int(rng.choice(N_ACTIONS, p=probs))]


def act(policy, obs, rng):
    """Asks any policy for an action on a 6x5 observation."""
    obs = np.asarray(obs)
    if obs.shape != OBS_SHAPE:
        raise PreconditionError(f"observation must be {OBS_SHAPE[0]}x{OBS_SHAPE[1]}, got {obs.shape}")
    return Action(policy.act(obs, rng))


# --- Training -------------------------------------------------------------------------

@dataclass(frozen=True)
class CurvePoint:
    steps: int
    episodes: int
    mean_reward: float


def train(envgen, formulagen, agent, total_steps, rng=None, window=100, step_cap=SUBTASK_STEP_CAP,
          consume_wrong=True):
    """
    Trains a LinearA2C agent in place on sampled sub-task episodes.

    Args:
        envgen (callable): (formula, seed, episode_index) -> GridMap.
        formulagen (callable): (rng) -> TtlFormula for the next episode.
        agent (LinearA2C): Updated every n_steps steps and at episode end.
        total_steps (int): Environment steps to train for.
        rng (int or numpy.random.Generator): Drives sampling and actions.
        window (int): Episodes averaged per curve point.
        step_cap (int): Episode length limit; truncated episodes bootstrap.
        consume_wrong (bool): Whether wrong interactions consume the object.

    Returns:
        list of CurvePoint: One point per window of episodes, the last one
            possibly partial; empty when total_steps is 0.
    """
    if total_steps < 0:
        raise PreconditionError("total_steps must be non-negative")
    if window < 1:
        raise PreconditionError("window must be at least 1")
    rng = np.random.default_rng(rng)
    curve = []
    pending = []
    steps = episodes = 0
    while steps < total_steps:
        formula = formulagen(rng)
        grid_map = envgen(formula, int(rng.integers(2 ** 31)), episodes)
        state = start_sm(formula)
        obs = observe(grid_map, state.current)
        buffer = []
        episode_reward = 0.0
        length = 0
        while state.current is not None and length < step_cap and steps < total_steps:
            action = agent.act(obs, rng)
            ahead = object_ahead(grid_map, action)
            consume = consume_wrong or ahead is None or fulfills(ahead, state.current)
            grid_map, labels = step(grid_map, action, consume=consume)
            state, reward = advance_sm(state, labels)
            done = state.current is None
            next_obs = observe(grid_map, state.current)
            buffer.append(Transition(obs, int(action), reward, next_obs, done))
            obs = next_obs
            episode_reward += reward
            length += 1
            steps += 1
            if len(buffer) == agent.params.n_steps or done or length == step_cap or steps == total_steps:
                agent.params = a2c_update(agent.params, buffer)
                buffer = []
        episodes += 1
        pending.append(episode_reward)
        if len(pending) == window:
            curve.append(CurvePoint(steps, episodes, float(np.mean(pending))))
            logger.info("Trained %d steps, %d episodes, window mean reward %.3f", steps, episodes, curve[-1].mean_reward)
            pending = []
    if pending:
        curve.append(CurvePoint(steps, episodes, float(np.mean(pending))))
    return curve


# --- Checkpoints -------------------------------------------------------------------

CHECKPOINT_HEADER = "ttl-a2c v1"
_HYPERPARAMETERS = (("gamma", float), ("learning_rate", float), ("entropy_coef", float),
                    ("value_coef", float), ("n_steps", int), ("master_seed", int))


def checkpoint_to_text(params):
    """
    Serialises parameters to the versioned checkpoint text: header,
    dimensions, one line per hyperparameter, then both weight blocks.

    Args:
        params (A2CParams): Parameters to save.

    Returns:
        str: Text that checkpoint_from_text reads back exactly.
    """
    lines = [CHECKPOINT_HEADER, f"feature_dim {params.feature_dim}", f"actions {N_ACTIONS}"]
    lines += [f"{name} {getattr(params, name)!r}" for name, _ in _HYPERPARAMETERS]
    policy, value = io.StringIO(), io.StringIO()
    np.savetxt(policy, params.policy_weights, fmt="%.17g")
    np.savetxt(value, params.value_weights[:, None], fmt="%.17g")
    return "\n".join(lines) + "\npolicy_weights\n" + policy.getvalue() + "value_weights\n" + value.getvalue()


def _header_value(lines, number, key, cast):
    if number > len(lines):
        raise CheckpointFormatError(f"missing '{key}'", number)
    name, _, raw = lines[number - 1].partition(" ")
    if name != key:
        raise CheckpointFormatError(f"expected '{key}', found {name!r}", number)
    try:
        return cast(raw)
    except ValueError:
        raise CheckpointFormatError(f"invalid value {raw!r} for '{key}'", number)


def _weights_block(lines, start, rows, cols, label):
    if start > len(lines) or lines[start - 1].strip() != label:
        raise CheckpointFormatError(f"expected '{label}'", start)
    block = lines[start:start + rows]
    if len(block) != rows:
        raise CheckpointFormatError(f"'{label}' needs {rows} rows, found {len(block)}", start + len(block) + 1)
    try:
        values = np.loadtxt(io.StringIO("\n".join(block)), ndmin=2)
    except ValueError as err:
        raise CheckpointFormatError(f"unreadable '{label}': {err}", start + 1)
    if values.shape != (rows, cols):
        raise CheckpointFormatError(f"'{label}' must be {rows}x{cols}, got {values.shape}", start + 1)
    return values


def checkpoint_from_text(text):
    """
    Raises:
        CheckpointFormatError: With the 1-based line of the problem.
    """
    lines = text.splitlines()
    if not lines or lines[0].strip() != CHECKPOINT_HEADER:
        raise CheckpointFormatError(f"expected header {CHECKPOINT_HEADER!r}", 1)
    dim = _header_value(lines, 2, "feature_dim", int)
    actions = _header_value(lines, 3, "actions", int)
    if actions != N_ACTIONS:
        raise CheckpointFormatError(f"checkpoint has {actions} actions, expected {N_ACTIONS}", 3)
    hyper = {name: _header_value(lines, 4 + k, name, cast) for k, (name, cast) in enumerate(_HYPERPARAMETERS)}
    start = 4 + len(_HYPERPARAMETERS)
    policy = _weights_block(lines, start, dim, N_ACTIONS, "policy_weights")
    value = _weights_block(lines, start + dim + 1, dim, 1, "value_weights")
    try:
        return A2CParams(policy, value[:, 0], **hyper)
    except ValueError as err:
        raise CheckpointFormatError(str(err))


def save_checkpoint(params, path):
    return write_text_file(path, checkpoint_to_text(params))


def load_checkpoint(path):
    return checkpoint_from_text(read_text_file(path))


def build_policy(name, checkpoint=None, master_seed=0):
    """Policy by CLI name: 'random', 'oracle' or 'a2c' (from `checkpoint` when given)."""
    if name == "random":
        return RandomWalker()
    if name == "oracle":
        return GreedyOracle()
    if name == "a2c":
        params = load_checkpoint(checkpoint) if checkpoint else init_params(master_seed)
        return LinearA2C(params)
    raise ValueError(f"Unknown agent {name!r}; choose from random, oracle, a2c")
