"""
This module orchestrates the experiments run from the command line:
- Binary Choice Map sweeps with reliable and deceptive instructions.
- The bundled suite of five complex instructions.
- Atomic sub-task evaluation and A2C training runs.
- Aggregation into result rows (mean over independent runs, std of the run
  means) and CSV / text reports with the readability offsets applied.

Map and agent seeds are derived from the master seed and the episode's
(run, map) index only, so agents and instruction modes compared in one
experiment always face identical maps.
"""

import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
import pandas as pd

from ttl_agent.agents import LinearA2C, build_policy, init_params, train
from ttl_agent.errors import PreconditionError
from ttl_agent.gridworld import (
    MAX_OBJECTS,
    MIN_OBJECTS,
    SPLIT_PRESETS,
    ObjectCatalog,
    generate_bcm,
    generate_map,
    generate_training_map,
)
from ttl_agent.symbolic_module import (
    COMPLEX_STEP_CAP,
    SUBTASK_STEP_CAP,
    EpisodeConfig,
    Neg,
    Pos,
    PosChoice,
    extract,
    run_sm,
)
from ttl_agent.ttl_core import Atom, Choice, NegAtom, expand_concurrent, parse_ttl, render_ttl
from ttl_agent.utils import derive_seed, mean_and_std_across_runs

logger = logging.getLogger(__name__)

COMPLEX_INSTRUCTIONS = (
    "((iron ; workbench) & wood) ; toolshed ; axe",
    "(wood & iron) ; workbench",
    "grass~ ; grass ; (workbench | toolshed)",
    "(workbench~ & toolshed~) ; toolshed",
    "((wood ; grass) | (iron ; axe)) ; workbench ; toolshed~",
)

EXPERIMENT_KINDS = ("bcm", "complex", "train", "subtask-eval")
AGENT_NAMES = ("random", "oracle", "a2c")
OFFSETS = (0, 10, 30)
BCM_MODES = ("reliable", "deceptive")
BCM_POLARITIES = ("positive", "negative", "choice")
CHOICE_SLOTS = ("first", "second")
SUBTASK_KINDS = ("pos", "neg", "choice")


def complex_corpus():
    """The bundled complex instructions, parsed."""
    return [parse_ttl(text) for text in COMPLEX_INSTRUCTIONS]


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "bcm"
    split: str = "small"
    agent: str = "oracle"
    n_maps: int = 100
    step_cap: int = SUBTASK_STEP_CAP
    offset: int = 10
    master_seed: int = 0
    runs: int = 3
    n_objects: int = MAX_OBJECTS
    checkpoint: Optional[str] = None
    consume_wrong: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(f"kind must be one of {EXPERIMENT_KINDS}, got {self.kind!r}")
        if self.split not in SPLIT_PRESETS:
            raise ValueError(f"split must be one of {sorted(SPLIT_PRESETS)}, got {self.split!r}")
        if self.agent not in AGENT_NAMES:
            raise ValueError(f"agent must be one of {AGENT_NAMES}, got {self.agent!r}")
        if self.offset not in OFFSETS:
            raise ValueError(f"offset must be one of {OFFSETS}, got {self.offset}")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if self.n_maps < 1:
            raise ValueError("n_maps must be at least 1")
        if self.step_cap < 1:
            raise ValueError("step_cap must be at least 1")
        if not MIN_OBJECTS <= self.n_objects <= MAX_OBJECTS:
            raise ValueError(f"n_objects must be in {MIN_OBJECTS}..{MAX_OBJECTS}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    @property
    def catalog(self):
        return ObjectCatalog.preset(self.split)

    @property
    def episode_config(self):
        return EpisodeConfig(step_cap=self.step_cap, consume_wrong=self.consume_wrong)


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    agent: str
    instruction: str
    n_maps: int
    mean_reward: float
    std: float
    mean_steps: float
    success_rate: float
    offset: int = 0


# --- Episode execution -----------------------------------------------------------

@dataclass(frozen=True)
class EpisodeTask:
    run: int
    formula: object
    grid_map: object
    agent_seed: int
    displayed: object = None


@dataclass(frozen=True)
class EpisodeSummary:
    run: int
    reward: float
    steps: int
    success: bool


@lru_cache(maxsize=8)
def _cached_policy(agent, checkpoint, master_seed):
    return build_policy(agent, checkpoint=checkpoint, master_seed=master_seed)


def _run_chunk(config, tasks):
    policy = _cached_policy(config.agent, config.checkpoint, config.master_seed)
    summaries = []
    for task in tasks:
        result = run_sm(task.formula, task.grid_map, policy, config.episode_config,
                        rng=task.agent_seed, displayed=task.displayed)
        summaries.append(EpisodeSummary(task.run, result.total_reward, result.steps, result.success))
    return summaries


def run_episodes(config, tasks):
    """
    Runs every task with the configured agent. With `workers > 1` chunks of
    tasks go to a process pool; results always come back in task order.
    """
    if config.workers == 1 or len(tasks) < 2:
        return _run_chunk(config, tasks)
    n_chunks = min(config.workers, len(tasks))
    chunks = [tasks[k::n_chunks] for k in range(n_chunks)]
    with ProcessPoolExecutor(max_workers=n_chunks) as executor:
        done = list(executor.map(_run_chunk, [config] * n_chunks, chunks))
    summaries = [None] * len(tasks)
    for k, chunk in enumerate(done):
        summaries[k::n_chunks] = chunk
    return summaries


def aggregate(experiment, config, instruction, summaries):
    """ResultRow over the summaries: reward mean/std across per-run means."""
    if not summaries:
        raise PreconditionError("cannot aggregate zero episodes")
    runs = sorted({s.run for s in summaries})
    run_means = [np.mean([s.reward for s in summaries if s.run == r]) for r in runs]
    mean, std = mean_and_std_across_runs(run_means)
    return ResultRow(
        experiment=experiment,
        agent=config.agent,
        instruction=instruction,
        n_maps=config.n_maps,
        mean_reward=mean,
        std=std,
        mean_steps=float(np.mean([s.steps for s in summaries])),
        success_rate=float(np.mean([s.success for s in summaries])),
        offset=config.offset,
    )


# --- Binary Choice Maps ----------------------------------------------------------

def bcm_instruction(mode, polarity, valid, decoy, third, choice_slot="first"):
    """
    The sub-task shown on a BCM. Reliable instructions point at the valid
    object (positively, or by negating the decoy); deceptive ones at the decoy.
    Choices pair the pointed-at object with `third`, which is not on the map.
    """
    pointed, other = (valid, decoy) if mode == "reliable" else (decoy, valid)
    if polarity == "positive":
        return Pos(pointed)
    if polarity == "negative":
        return Neg(other)
    if choice_slot == "first":
        return PosChoice(pointed, third)
    return PosChoice(third, pointed)


def collect_bcm_episodes(config, mode, polarity, choice_slot="first"):
    """
    Builds the paired-seed BCM episodes of an experiment. Rewards always
    follow the valid object; the instruction only changes what is shown.
    """
    if mode not in BCM_MODES:
        raise ValueError(f"mode must be one of {BCM_MODES}, got {mode!r}")
    if polarity not in BCM_POLARITIES:
        raise ValueError(f"polarity must be one of {BCM_POLARITIES}, got {polarity!r}")
    if choice_slot not in CHOICE_SLOTS:
        raise ValueError(f"choice_slot must be one of {CHOICE_SLOTS}, got {choice_slot!r}")
    objects = config.catalog.test
    if len(objects) < 3:
        raise PreconditionError(f"BCM evaluation needs at least 3 test objects, the split has {len(objects)}")
    tasks = []
    for run in range(config.runs):
        for index in range(config.n_maps):
            seed = derive_seed(config.master_seed, "bcm", run, index)
            rng = np.random.default_rng(seed)
            valid, decoy, third = (objects[int(k)] for k in rng.choice(len(objects), size=3, replace=False))
            displayed = bcm_instruction(mode, polarity, valid, decoy, third, choice_slot)
            tasks.append(EpisodeTask(
                run=run,
                formula=Atom(valid),
                grid_map=generate_bcm(valid, decoy, seed),
                agent_seed=derive_seed(config.master_seed, "bcm-agent", run, index),
                displayed=displayed,
            ))
    return tasks


def eval_bcm(config, mode, polarity, choice_slot="first"):
    tasks = collect_bcm_episodes(config, mode, polarity, choice_slot)
    label = f"{mode} {polarity}" + (f" ({choice_slot})" if polarity == "choice" else "")
    logger.info("Evaluating %s on %d BCMs: %s", config.agent, len(tasks), label)
    return aggregate("bcm", config, label, run_episodes(config, tasks))


# --- Complex instructions --------------------------------------------------------

def _map_tasks(config, experiment, key, formula, split="test"):
    tasks = []
    matrix = extract(expand_concurrent(formula))
    for run in range(config.runs):
        for index in range(config.n_maps):
            seed = derive_seed(config.master_seed, experiment, key, run, index)
            tasks.append(EpisodeTask(
                run=run,
                formula=formula,
                grid_map=generate_map(config.catalog, split, matrix, config.n_objects, seed),
                agent_seed=derive_seed(config.master_seed, f"{experiment}-agent", key, run, index),
            ))
    return tasks


def eval_complex(config):
    """One row per bundled instruction plus a pooled row over all of them."""
    rows, pooled = [], []
    for key, formula in enumerate(complex_corpus()):
        summaries = run_episodes(config, _map_tasks(config, "complex", key, formula))
        rows.append(aggregate("complex", config, render_ttl(formula), summaries))
        pooled += summaries
    rows.append(aggregate("complex", config, "pooled", pooled))
    return rows


# --- Sub-tasks ---------------------------------------------------------------------

def sample_subtask(rng, objects, kind):
    """A random sub-task formula of the given kind over `objects`."""
    if kind == "pos":
        return Atom(objects[int(rng.integers(len(objects)))])
    if kind == "neg":
        return NegAtom(objects[int(rng.integers(len(objects)))])
    if kind == "choice":
        if len(objects) < 2:
            raise PreconditionError("a choice needs at least two objects")
        first, second = rng.choice(len(objects), size=2, replace=False)
        return Choice(Atom(objects[int(first)]), Atom(objects[int(second)]))
    raise ValueError(f"kind must be one of {SUBTASK_KINDS}, got {kind!r}")


def subtask_sampler(objects, kinds=SUBTASK_KINDS):
    """Callable drawing a kind uniformly from `kinds`, then a sub-task of that kind."""
    objects = tuple(objects)
    kinds = tuple(kinds)

    def sample(rng):
        return sample_subtask(rng, objects, kinds[int(rng.integers(len(kinds)))])

    return sample


def eval_subtasks(config, kinds=SUBTASK_KINDS):
    """Zero-shot sub-task evaluation on test objects: one row per kind and a pooled row."""
    objects = config.catalog.test
    rows, pooled = [], []
    for kind in kinds:
        tasks = []
        for run in range(config.runs):
            for index in range(config.n_maps):
                seed = derive_seed(config.master_seed, "subtask", kind, run, index)
                formula = sample_subtask(np.random.default_rng(seed), objects, kind)
                tasks.append(EpisodeTask(
                    run=run,
                    formula=formula,
                    grid_map=generate_map(config.catalog, "test", formula, config.n_objects, seed),
                    agent_seed=derive_seed(config.master_seed, "subtask-agent", kind, run, index),
                ))
        summaries = run_episodes(config, tasks)
        rows.append(aggregate("subtask-eval", config, kind, summaries))
        pooled += summaries
    rows.append(aggregate("subtask-eval", config, "pooled", pooled))
    return rows


# --- Training ----------------------------------------------------------------------

def run_training(config, total_steps, kinds=SUBTASK_KINDS, window=100):
    """
    Trains a LinearA2C agent on training-split sub-tasks.

    Returns:
        tuple: (list of CurvePoint, trained A2CParams)
    """
    catalog = config.catalog

    def envgen(formula, seed, episode_index):
        return generate_training_map(catalog, "train", formula, config.n_objects, seed, episode_index)

    agent = LinearA2C(init_params(config.master_seed))
    curve = train(envgen, subtask_sampler(catalog.train, kinds), agent, total_steps,
                  rng=derive_seed(config.master_seed, "train"), window=window,
                  step_cap=config.step_cap, consume_wrong=config.consume_wrong)
    return curve, agent.params


def curve_frame(curve, offset=0):
    return pd.DataFrame({
        "steps": [p.steps for p in curve],
        "episodes": [p.episodes for p in curve],
        "mean_reward": [p.mean_reward for p in curve],
        "mean_reward_offset": [p.mean_reward + offset for p in curve],
    })


# --- Reports -------------------------------------------------------------------------

REPORT_COLUMNS = ["experiment", "agent", "instruction", "maps", "mean_reward", "std", "mean_steps",
                  "success_rate", "offset", "raw_mean_reward"]


def _frame_to_csv(frame):
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, float_format="%.4f", lineterminator="\n")
    return buffer.getvalue()


def report_frame(rows):
    if not rows:
        raise PreconditionError("report needs at least one result row")
    return pd.DataFrame(
        [[r.experiment, r.agent, r.instruction, r.n_maps, r.mean_reward + r.offset, r.std, r.mean_steps,
          r.success_rate, r.offset, r.mean_reward] for r in rows],
        columns=REPORT_COLUMNS,
    )


def report(rows):
    """
    Returns:
        tuple: (CSV text, aligned text table). mean_reward carries the
            offset; raw_mean_reward is the un-offset value.
    """
    frame = report_frame(rows)
    table = frame.to_string(index=False, float_format=lambda v: f"{v:.4f}")
    return _frame_to_csv(frame), table + "\n"


def rows_from_csv(text):
    """Reads rows written by report() back into ResultRows."""
    frame = pd.read_csv(io.StringIO(text), keep_default_na=False)
    missing = [c for c in REPORT_COLUMNS if c not in frame.columns]
    if missing:
        raise ValueError(f"result CSV lacks columns {missing}")
    return [
        ResultRow(str(r.experiment), str(r.agent), str(r.instruction), int(r.maps), float(r.raw_mean_reward),
                  float(r.std), float(r.mean_steps), float(r.success_rate), int(r.offset))
        for r in frame.itertuples(index=False)
    ]


def episode_log_frame(result):
    """Per-step episode log: step, action, label, reward, current_subtask."""
    return pd.DataFrame(
        [[s.step, s.action, s.label, s.reward, s.current_subtask] for s in result.log],
        columns=["step", "action", "label", "reward", "current_subtask"],
    )


def episode_log_csv(result):
    return _frame_to_csv(episode_log_frame(result))


def curve_csv(curve, offset=0):
    return _frame_to_csv(curve_frame(curve, offset))


DEFAULT_STEP_CAPS = {"bcm": SUBTASK_STEP_CAP, "subtask-eval": SUBTASK_STEP_CAP, "train": SUBTASK_STEP_CAP,
                     "complex": COMPLEX_STEP_CAP}