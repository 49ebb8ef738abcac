"""
This module implements the Symbolic Module that sits between a TTL instruction
and the agent acting in the gridworld. It provides:
- The sub-task fragment the agent is trained on: positive atoms, negated atoms
  and binary positive choices.
- The extractor, which turns a formula into an ordered "list-of-lists" of
  sequential sub-tasks, one list per resolution of the formula's choices.
- Progression and sub-task selection after each fulfilled proposition.
- The internal reward given to the agent at every step.
- The episode driver that ties the pieces together: extract, select, show the
  current sub-task in the observation, act, label, reward and progress until
  the instruction is fulfilled or the step cap is reached.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from ttl_agent.errors import PreconditionError
from ttl_agent.ttl_core import (
    Atom,
    Choice,
    Concurrent,
    NegAtom,
    Seq,
    Trace,
    count_choices,
    expand_concurrent,
    validate_atom_name,
)

logger = logging.getLogger(__name__)

REWARD_IDLE = -0.1
REWARD_FULFIL = 1.0
REWARD_WRONG = -1.0

SUBTASK_STEP_CAP = 40
COMPLEX_STEP_CAP = 120


# --- Sub-tasks ---------------------------------------------------------------

@dataclass(frozen=True)
class Pos:
    name: str

    def __post_init__(self):
        validate_atom_name(self.name)


@dataclass(frozen=True)
class Neg:
    name: str

    def __post_init__(self):
        validate_atom_name(self.name)


@dataclass(frozen=True)
class PosChoice:
    first: str
    second: str

    def __post_init__(self):
        validate_atom_name(self.first)
        validate_atom_name(self.second)
        if self.first == self.second:
            raise PreconditionError(f"choice members must differ, got {self.first!r} twice")


SUBTASK_TYPES = (Pos, Neg, PosChoice)


def render_subtask(subtask):
    """`wood`, `wood~` or `wood|iron`; the empty string for no sub-task."""
    if subtask is None:
        return ""
    if isinstance(subtask, Pos):
        return subtask.name
    if isinstance(subtask, Neg):
        return f"{subtask.name}~"
    return f"{subtask.first}|{subtask.second}"


def subtask_formula(subtask):
    """The TTL formula a sub-task stands for."""
    if isinstance(subtask, Pos):
        return Atom(subtask.name)
    if isinstance(subtask, Neg):
        return NegAtom(subtask.name)
    if isinstance(subtask, PosChoice):
        return Choice(Atom(subtask.first), Atom(subtask.second))
    raise PreconditionError(f"Not a sub-task: {subtask!r}")


# --- Task matrix ---------------------------------------------------------------

@dataclass(frozen=True)
class TaskMatrix:
    """
    Ordered alternatives of sequential sub-tasks. Inner lists hold only Pos and
    Neg entries; empty inner lists are dropped on construction, so an empty
    matrix means the instruction has been fulfilled.
    """

    sequences: Tuple[Tuple[object, ...], ...] = ()

    def __post_init__(self):
        cleaned = tuple(tuple(seq) for seq in self.sequences if len(seq) > 0)
        for seq in cleaned:
            for subtask in seq:
                if not isinstance(subtask, (Pos, Neg)):
                    raise PreconditionError(f"task matrix entries must be Pos or Neg, got {subtask!r}")
        object.__setattr__(self, "sequences", cleaned)

    def __len__(self):
        return len(self.sequences)

    def __iter__(self):
        return iter(self.sequences)

    def __getitem__(self, index):
        return self.sequences[index]

    @property
    def is_empty(self):
        return not self.sequences

    @property
    def heads(self):
        return tuple(seq[0] for seq in self.sequences)


def render_matrix(matrix):
    """One list per line, sub-tasks separated by single spaces."""
    return "".join(" ".join(render_subtask(st) for st in seq) + "\n" for seq in matrix)


def _extract_lists(formula):
    if isinstance(formula, Atom):
        return [(Pos(formula.name),)]
    if isinstance(formula, NegAtom):
        return [(Neg(formula.name),)]
    if isinstance(formula, Concurrent):
        raise PreconditionError("extract requires a Concurrent-free formula; call expand_concurrent first")
    left = _extract_lists(formula.left)
    right = _extract_lists(formula.right)
    if isinstance(formula, Seq):
        # Clones of the left lists are appended after the originals.
        return [lhs + rhs for rhs in right for lhs in left]
    # One block per resolution of the discarded side's choices.
    return left * (2 ** count_choices(formula.right)) + right * (2 ** count_choices(formula.left))


def extract(formula):
    """
    Extracts the task matrix of a Concurrent-free formula.

    Each list is one resolution of the formula's Choice nodes, so a formula
    with c choices yields 2**c lists (duplicates included). Read as a trace
    with one instant per sub-task, every list satisfies the formula.

    Example:
        ((wood ; grass) | (iron ; axe)) ; workbench ; toolshed~
        -> [wood grass workbench toolshed~], [iron axe workbench toolshed~]

    Raises:
        PreconditionError: If the formula contains a Concurrent node.
    """
    return TaskMatrix(tuple(_extract_lists(formula)))


# --- Progression and selection ------------------------------------------------------

def fulfills(proposition, subtask):
    """Whether a single proposition fulfills a sub-task."""
    if isinstance(subtask, Pos):
        return proposition == subtask.name
    if isinstance(subtask, Neg):
        return proposition != subtask.name
    if isinstance(subtask, PosChoice):
        return proposition in (subtask.first, subtask.second)
    raise PreconditionError(f"Not a sub-task: {subtask!r}")


def progress(matrix, proposition):
    """
    Consumes a fulfilled proposition: lists whose head it fulfills lose that
    head, all other lists are discarded. If any list runs out the whole
    instruction is fulfilled and the empty matrix is returned. A proposition
    that fulfills no head prunes every list, so the result is empty as well;
    advance_sm rejects that case before it gets here.
    """
    remaining = []
    for seq in matrix:
        if not fulfills(proposition, seq[0]):
            continue
        if len(seq) == 1:
            return TaskMatrix()
        remaining.append(seq[1:])
    return TaskMatrix(tuple(remaining))


def select_subtask(matrix):
    """
    Picks the sub-task to show next:
    - nothing for the empty matrix;
    - the common head when every head is the same;
    - a choice between the first two positive heads that differ, scanning
      pairs (i, j) with i < j in list order;
    - the head of the first list otherwise.
    """
    heads = matrix.heads
    if not heads:
        return None
    if all(head == heads[0] for head in heads):
        return heads[0]
    for i, first in enumerate(heads):
        for second in heads[i + 1:]:
            if first != second and isinstance(first, Pos) and isinstance(second, Pos):
                return PosChoice(first.name, second.name)
    return heads[0]


def internal_reward(labels, current):
    """
    -0.1 when nothing was interacted with, +1 when the interaction fulfills
    the current sub-task and -1 for any other interaction.
    """
    labels = frozenset(labels)
    if len(labels) > 1:
        raise PreconditionError(f"at most one proposition per step, got {sorted(labels)}")
    if not labels:
        return REWARD_IDLE
    (proposition,) = labels
    return REWARD_FULFIL if fulfills(proposition, current) else REWARD_WRONG


# --- Driver -----------------------------------------------------------------------

@dataclass(frozen=True)
class SmState:
    matrix: TaskMatrix
    current: Optional[object]
    steps_on_current: int = 0


def start_sm(formula):
    """Initial driver state for a formula; Concurrent nodes are expanded first."""
    matrix = extract(expand_concurrent(formula))
    return SmState(matrix, select_subtask(matrix), 0)


def advance_sm(state, labels):
    """
    Rewards one step's labels against the current sub-task and, on
    fulfilment, progresses the matrix and selects the next sub-task in the
    same step.

    Returns:
        tuple: (SmState, float reward)

    Raises:
        PreconditionError: If the instruction is already fulfilled, or a
                           fulfilling label matches no head of the matrix.
    """
    if state.current is None:
        raise PreconditionError("the instruction is already fulfilled")
    reward = internal_reward(labels, state.current)
    if reward != REWARD_FULFIL:
        return SmState(state.matrix, state.current, state.steps_on_current + 1), reward
    (proposition,) = frozenset(labels)
    if not any(fulfills(proposition, seq[0]) for seq in state.matrix):
        raise PreconditionError(f"{proposition!r} fulfills no head of the task matrix")
    matrix = progress(state.matrix, proposition)
    current = select_subtask(matrix)
    logger.debug("Fulfilled %s with %s; next %s", render_subtask(state.current), proposition,
                 render_subtask(current) or "<done>")
    return SmState(matrix, current, 0), reward


@dataclass(frozen=True)
class EpisodeConfig:
    step_cap: int = COMPLEX_STEP_CAP
    consume_wrong: bool = True

    def __post_init__(self):
        if self.step_cap < 1:
            raise ValueError(f"step_cap must be at least 1, got {self.step_cap}")


@dataclass(frozen=True)
class StepRecord:
    step: int
    action: str
    label: str
    reward: float
    current_subtask: str


@dataclass
class EpisodeResult:
    total_reward: float
    steps: int
    success: bool
    trace: Trace
    log: list = field(default_factory=list)
    final_map: object = None


def run_sm(formula, grid_map, policy, config=None, rng=None, displayed=None):
    """
    Runs one episode of `policy` on `grid_map` under a TTL instruction.

    Args:
        formula (TtlFormula): The instruction; Concurrent nodes are expanded.
        grid_map (GridMap): Starting map (not modified).
        policy: A policy accepted by agents.act.
        config (EpisodeConfig): Step cap and wrong-interaction handling.
        rng (int or numpy.random.Generator): Source of the agent's randomness.
        displayed (SubTask, optional): Shown in every observation instead of
            the current sub-task; rewards still follow `formula`.

    Returns:
        EpisodeResult: Cumulative reward, steps, success flag, label trace and
            one StepRecord per step. Hitting the cap is an unsuccessful
            result, not an error.
    """
    from ttl_agent import agents, gridworld

    config = config or EpisodeConfig()
    rng = np.random.default_rng(rng)
    policy = agents.begin_episode(policy)
    state = start_sm(formula)
    total = 0.0
    labels_seen = []
    log = []
    while state.current is not None and len(labels_seen) < config.step_cap:
        shown = displayed if displayed is not None else state.current
        action = agents.act(policy, gridworld.observe(grid_map, shown), rng)
        ahead = gridworld.object_ahead(grid_map, action)
        consume = config.consume_wrong or ahead is None or fulfills(ahead, state.current)
        grid_map, labels = gridworld.step(grid_map, action, consume=consume)
        labels_seen.append(labels)
        previous = state.current
        state, reward = advance_sm(state, labels)
        total += reward
        log.append(StepRecord(len(labels_seen), action.name, ",".join(sorted(labels)), reward,
                              render_subtask(previous)))
    success = state.current is None
    logger.debug("Episode finished: success=%s steps=%d reward=%.2f", success, len(labels_seen), total)
    return EpisodeResult(total, len(labels_seen), success, Trace(tuple(labels_seen)), log, grid_map)
