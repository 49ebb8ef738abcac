"""
This module implements the deterministic Minecraft-like gridworld the agent
acts in. It covers:
- The object catalog (26 named objects, split into training and test sets)
  and the fixed numeric cell codes shared by maps and observations.
- GridMap, an immutable 7x7 walled map with at most one object per cell.
- Movement and interaction: moving onto an object consumes it and labels the
  step with the object's name.
- Pseudo-egocentric observations: a 5x5 window centred on the agent plus one
  row encoding the current sub-task.
- Seeded map generators that keep an instruction solvable, Binary Choice Maps,
  and a line-based text format for saving and loading maps.
"""

import logging
import re
from collections import Counter, deque
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Optional, Tuple

import numpy as np

from ttl_agent.errors import InfeasibleGenerationError, MapFormatError, PreconditionError
from ttl_agent.symbolic_module import Neg, Pos, PosChoice, TaskMatrix, extract
from ttl_agent.ttl_core import TtlFormula, expand_concurrent

logger = logging.getLogger(__name__)

MAP_SIZE = 7
WINDOW = 5
CENTRE = (MAP_SIZE // 2, MAP_SIZE // 2)
MIN_OBJECTS = 2
MAX_OBJECTS = 8
PLACEMENT_ATTEMPTS = 200

EMPTY = 0
WALL = 1
AGENT = 2
OP_NEG = 3
OP_CHOICE = 4
OBJECT_BASE = 10

# Symbol used for each object in map files, in catalog order. The objects that
# appear in the bundled instructions come last so they land in the test split.
_CATALOG = (
    ("coal", "c"), ("diamond", "d"), ("gem", "e"), ("feather", "f"), ("hammer", "h"),
    ("jar", "j"), ("key", "k"), ("leather", "l"), ("mushroom", "m"), ("net", "n"),
    ("gold", "o"), ("pickaxe", "p"), ("quartz", "q"), ("rope", "r"), ("stone", "s"),
    ("umbrella", "u"), ("vine", "v"), ("box", "x"), ("yarn", "y"), ("zinc", "z"),
    ("wood", "w"), ("iron", "i"), ("grass", "g"), ("axe", "a"), ("workbench", "b"),
    ("toolshed", "t"),
)
CATALOG_OBJECTS = tuple(name for name, _ in _CATALOG)
OBJECT_SYMBOLS = dict(_CATALOG)
SYMBOL_OBJECTS = {symbol: name for name, symbol in _CATALOG}
SPLIT_PRESETS = {"small": 6, "medium": 10, "large": 20}


def object_code(name):
    """
    Cell code of a catalog object.

    Args:
        name (str): Object name from the catalog.

    Returns:
        int: OBJECT_BASE plus the catalog index.

    Raises:
        PreconditionError: If the name is not in the catalog.
    """
    try:
        return OBJECT_BASE + CATALOG_OBJECTS.index(name)
    except ValueError:
        raise PreconditionError(f"Unknown object {name!r}")


def object_name(code):
    """
    Inverse of object_code.

    Args:
        code (int): A cell code.

    Returns:
        str: The catalog name.

    Raises:
        PreconditionError: If the code is not an object code.
    """
    index = int(code) - OBJECT_BASE
    if not 0 <= index < len(CATALOG_OBJECTS):
        raise PreconditionError(f"Cell code {code} is not an object")
    return CATALOG_OBJECTS[index]


@dataclass(frozen=True)
class ObjectCatalog:
    """The first `train_size` objects form the training split, the rest the test split."""

    train_size: int = SPLIT_PRESETS["small"]
    objects: Tuple[str, ...] = CATALOG_OBJECTS

    def __post_init__(self):
        unknown = [o for o in self.objects if o not in OBJECT_SYMBOLS]
        if unknown:
            raise ValueError(f"Objects outside the catalog: {unknown}")
        if len(set(self.objects)) != len(self.objects):
            raise ValueError("Catalog objects must be distinct")
        if not 1 <= self.train_size < len(self.objects):
            raise ValueError(f"train_size must be in 1..{len(self.objects) - 1}, got {self.train_size}")

    @classmethod
    def preset(cls, name):
        if name not in SPLIT_PRESETS:
            raise ValueError(f"Unknown split preset {name!r}; choose from {sorted(SPLIT_PRESETS)}")
        return cls(train_size=SPLIT_PRESETS[name])

    @property
    def train(self):
        return self.objects[:self.train_size]

    @property
    def test(self):
        return self.objects[self.train_size:]

    def split(self, which):
        if which == "train":
            return self.train
        if which == "test":
            return self.test
        raise ValueError(f"split must be 'train' or 'test', got {which!r}")


class Action(IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3


ACTIONS = tuple(Action)
DELTAS = {
    Action.UP: (-1, 0),
    Action.DOWN: (1, 0),
    Action.LEFT: (0, -1),
    Action.RIGHT: (0, 1),
}


@dataclass(frozen=True, eq=False)
class GridMap:
    """
    A 7x7 map of cell codes (WALL, EMPTY or an object code) and the agent's
    (row, col). The agent is not stored in `cells`; its cell is always empty.
    `seed` records how the map was generated and takes no part in equality.
    """

    cells: np.ndarray
    agent_pos: Tuple[int, int]
    seed: Optional[int] = field(default=None, compare=False)

    def __post_init__(self):
        cells = np.array(self.cells, dtype=np.int64)
        if cells.shape != (MAP_SIZE, MAP_SIZE):
            raise PreconditionError(f"map must be {MAP_SIZE}x{MAP_SIZE}, got {cells.shape}")
        border = np.ones_like(cells, dtype=bool)
        border[1:-1, 1:-1] = False
        if not np.all(cells[border] == WALL):
            raise PreconditionError("map border must be entirely wall")
        interior = cells[1:-1, 1:-1]
        valid = (interior == EMPTY) | ((interior >= OBJECT_BASE) & (interior < OBJECT_BASE + len(CATALOG_OBJECTS)))
        if not np.all(valid):
            raise PreconditionError("interior cells must be empty or hold a catalog object")
        row, col = (int(v) for v in self.agent_pos)
        if not (1 <= row <= MAP_SIZE - 2 and 1 <= col <= MAP_SIZE - 2):
            raise PreconditionError(f"agent must be strictly inside the map, got {(row, col)}")
        if cells[row, col] != EMPTY:
            raise PreconditionError("the agent's cell must be empty")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "agent_pos", (row, col))

    def __eq__(self, other):
        if not isinstance(other, GridMap):
            return NotImplemented
        return self.agent_pos == other.agent_pos and np.array_equal(self.cells, other.cells)

    def __hash__(self):
        return hash((self.agent_pos, self.cells.tobytes()))

    def objects(self):
        """(row, col, name) for every object, in row-major order."""
        rows, cols = np.nonzero(self.cells >= OBJECT_BASE)
        return [(int(r), int(c), object_name(self.cells[r, c])) for r, c in zip(rows, cols)]

    def inventory(self):
        return Counter(name for _, _, name in self.objects())


def empty_map(agent_pos=CENTRE):
    """
    Args:
        agent_pos (tuple): (row, col) for the agent.

    Returns:
        tuple: (cells, agent_pos), the cells a walled 7x7 array with an
            empty interior, ready for placing objects.
    """
    cells = np.full((MAP_SIZE, MAP_SIZE), WALL, dtype=np.int64)
    cells[1:-1, 1:-1] = EMPTY
    return cells, agent_pos


def build_map(agent_pos, placements, seed=None):
    """GridMap from an agent position and a {(row, col): object name} mapping."""
    cells, _ = empty_map()
    for (row, col), name in placements.items():
        cells[row, col] = object_code(name)
    return GridMap(cells, agent_pos, seed)


# --- Dynamics ------------------------------------------------------------------

def _target_cell(grid_map, action):
    d_row, d_col = DELTAS[Action(action)]
    row, col = grid_map.agent_pos
    return row + d_row, col + d_col


def object_ahead(grid_map, action):
    """Name of the object the action would interact with, or None."""
    row, col = _target_cell(grid_map, action)
    code = grid_map.cells[row, col]
    return object_name(code) if code >= OBJECT_BASE else None


def step(grid_map, action, consume=True):
    """
    Applies one action.

    Moving into a wall leaves the agent in place. Moving onto an object labels
    the step with the object's name; with `consume` the object is removed and
    the agent enters its cell, otherwise nothing moves.

    Returns:
        tuple: (GridMap, frozenset of labels) with at most one label.
    """
    row, col = _target_cell(grid_map, action)
    code = grid_map.cells[row, col]
    if code == WALL:
        return grid_map, frozenset()
    if code == EMPTY:
        return replace(grid_map, agent_pos=(row, col)), frozenset()
    label = frozenset({object_name(code)})
    if not consume:
        return grid_map, label
    cells = grid_map.cells.copy()
    cells[row, col] = EMPTY
    return GridMap(cells, (row, col), grid_map.seed), label


# --- Observations --------------------------------------------------------------

def encode_subtask(subtask):
    """The observation row for a sub-task; all EMPTY when there is none."""
    row = np.full(WINDOW, EMPTY, dtype=np.int64)
    if subtask is None:
        return row
    if isinstance(subtask, Pos):
        row[0] = object_code(subtask.name)
    elif isinstance(subtask, Neg):
        row[0], row[1] = object_code(subtask.name), OP_NEG
    elif isinstance(subtask, PosChoice):
        row[0], row[1], row[2] = object_code(subtask.first), OP_CHOICE, object_code(subtask.second)
    else:
        raise PreconditionError(f"Not a sub-task: {subtask!r}")
    return row


def decode_subtask(row):
    """Inverse of encode_subtask."""
    row = [int(v) for v in row]
    if row[0] == EMPTY:
        return None
    if row[1] == OP_NEG:
        return Neg(object_name(row[0]))
    if row[1] == OP_CHOICE:
        return PosChoice(object_name(row[0]), object_name(row[2]))
    return Pos(object_name(row[0]))


def observe(grid_map, current):
    """
    6x5 observation: rows 0-4 show the map around the agent (cells outside
    the map read as WALL, the agent as AGENT at row 2, col 2) and row 5
    encodes `current`.
    """
    half = WINDOW // 2
    padded = np.pad(grid_map.cells, half, mode="constant", constant_values=WALL)
    row, col = grid_map.agent_pos
    window = padded[row:row + WINDOW, col:col + WINDOW].copy()
    window[half, half] = AGENT
    return np.vstack([window, encode_subtask(current)[np.newaxis, :]])


# --- Generation ------------------------------------------------------------------

def _as_matrix(matrix):
    if isinstance(matrix, TtlFormula):
        return extract(expand_concurrent(matrix))
    if isinstance(matrix, TaskMatrix):
        return matrix
    return TaskMatrix(tuple(tuple(seq) for seq in matrix))


def _positive_counts(seq):
    return Counter(st.name for st in seq if isinstance(st, Pos))


def _neg_exposure(seq):
    """Per positive object, how many earlier Neg entries it could be spent on."""
    exposure = Counter()
    for k, st in enumerate(seq):
        if isinstance(st, Pos):
            earlier = sum(1 for prev in seq[:k] if isinstance(prev, Neg) and prev.name != st.name)
            exposure[st.name] = max(exposure[st.name], earlier)
    return exposure


def _union(counters):
    total = Counter()
    for counter in counters:
        total |= counter
    return total


def _populate(matrix, split_objects, n_objects, rng, required_lists):
    indices = list(range(len(matrix))) if required_lists is None else list(required_lists)
    for k in indices:
        if not 0 <= k < len(matrix):
            raise PreconditionError(f"required list {k} outside 0..{len(matrix) - 1}")
    chosen = [matrix[k] for k in indices]
    if not chosen:
        raise PreconditionError("at least one list of the task matrix must be required")
    formula_atoms = {st.name for seq in matrix for st in seq}

    needed = _union(_positive_counts(seq) for seq in chosen)
    if sum(needed.values()) > n_objects:
        chosen = chosen[:1]
        needed = _positive_counts(chosen[0])
        logger.debug("Requirements of all lists exceed %d objects; placing only the first list", n_objects)
    if sum(needed.values()) > n_objects:
        raise InfeasibleGenerationError(
            f"the instruction needs {sum(needed.values())} objects but only {n_objects} can be placed")
    objects = sorted(needed.elements())

    outside = [o for o in split_objects if o not in formula_atoms]
    others = outside or [o for o in CATALOG_OBJECTS if o not in formula_atoms]
    witnesses = max(sum(1 for st in seq if isinstance(st, Neg)) for seq in chosen)
    if len(objects) + witnesses > n_objects:
        raise InfeasibleGenerationError(
            f"the instruction needs {len(objects) + witnesses} objects but only {n_objects} can be placed")
    objects += [others[int(rng.integers(len(others)))] for _ in range(witnesses)]

    exposure = _union(_neg_exposure(seq) for seq in chosen)
    for name in sorted(exposure):
        for _ in range(exposure[name]):
            if len(objects) >= n_objects:
                break
            objects.append(name)

    negated = sorted({st.name for seq in chosen for st in seq if isinstance(st, Neg)} - set(objects))
    for name in negated:
        if len(objects) < n_objects:
            objects.append(name)

    fillers = outside or sorted(needed) or others
    while len(objects) < n_objects:
        objects.append(fillers[int(rng.integers(len(fillers)))])
    return objects


def _connected(cells, agent_pos):
    """Every object touches the empty region around the agent, which covers every empty cell."""
    seen = {agent_pos}
    queue = deque([agent_pos])
    while queue:
        row, col = queue.popleft()
        for d_row, d_col in DELTAS.values():
            nxt = (row + d_row, col + d_col)
            if nxt not in seen and cells[nxt] == EMPTY:
                seen.add(nxt)
                queue.append(nxt)
    if int(np.sum(cells == EMPTY)) != len(seen):
        return False
    for row, col in zip(*np.nonzero(cells >= OBJECT_BASE)):
        if not any((row + dr, col + dc) in seen for dr, dc in DELTAS.values()):
            return False
    return True


def _place(objects, rng, seed):
    if len(objects) > (MAP_SIZE - 2) ** 2 - 2:
        raise InfeasibleGenerationError(f"{len(objects)} objects do not fit in the map")
    interior = [(r, c) for r in range(1, MAP_SIZE - 1) for c in range(1, MAP_SIZE - 1)]
    for _ in range(PLACEMENT_ATTEMPTS):
        order = rng.permutation(len(interior))
        agent_pos = interior[int(order[0])]
        free = [interior[int(k)] for k in order[1:] if interior[int(k)] != CENTRE]
        cells, _ = empty_map()
        for (row, col), name in zip(free, objects):
            cells[row, col] = object_code(name)
        if _connected(cells, agent_pos):
            return GridMap(cells, agent_pos, seed)
    raise InfeasibleGenerationError(f"no connected placement found in {PLACEMENT_ATTEMPTS} attempts")


def generate_map(catalog, split, matrix, n_objects, seed, required_lists=None):
    """
    Generates a map on which an instruction can be completed.

    The map holds the positive objects of every list of the task matrix (the
    first list alone if they do not all fit), one object outside the
    instruction per negated sub-task, spare copies of positives an earlier
    negated sub-task might use up, one copy of each negated object, and
    distractors from the split. The map
    centre is left free and every object can be reached without crossing
    another one.

    Args:
        catalog (ObjectCatalog): Object universe and split.
        split (str): 'train' or 'test'; distractors come from this split.
        matrix (TaskMatrix or TtlFormula): What must stay achievable.
        n_objects (int): Total number of objects, 2..8.
        seed (int): Generation seed; the same seed gives the same map.
        required_lists (sequence of int, optional): Indices of the lists whose
            objects must be present; all lists by default.

    Returns:
        GridMap: The generated map.

    Raises:
        PreconditionError: If n_objects is outside 2..8 or the split is empty.
        InfeasibleGenerationError: If the requirements exceed n_objects.
    """
    if not MIN_OBJECTS <= n_objects <= MAX_OBJECTS:
        raise PreconditionError(f"n_objects must be in {MIN_OBJECTS}..{MAX_OBJECTS}, got {n_objects}")
    split_objects = catalog.split(split)
    if not split_objects:
        raise PreconditionError(f"the {split} split is empty")
    rng = np.random.default_rng(seed)
    objects = _populate(_as_matrix(matrix), split_objects, n_objects, rng, required_lists)
    return _place(objects, rng, seed)


CHOICE_ROTATION = ((0,), (1,), (0, 1))


def generate_training_map(catalog, split, formula, n_objects, seed, episode_index=0):
    """
    Training map for a sub-task formula. For a choice the maps rotate
    between only the first disjunct, only the second, and both present.
    """
    matrix = _as_matrix(formula)
    required = None
    if len(matrix) == 2 and matrix[0] != matrix[1]:
        required = CHOICE_ROTATION[episode_index % len(CHOICE_ROTATION)]
    return generate_map(catalog, split, matrix, n_objects, seed, required_lists=required)


def generate_bcm(valid, decoy, seed):
    """A Binary Choice Map: exactly one `valid` and one `decoy` object plus the agent."""
    if valid == decoy:
        raise PreconditionError("the valid and decoy objects must differ")
    object_code(valid)
    object_code(decoy)
    rng = np.random.default_rng(seed)
    return _place([valid, decoy], rng, seed)


# --- Map files ----------------------------------------------------------------

MAP_HEADER = "ttl-map v1"
AGENT_SYMBOL = "@"
_LEGEND = "legend: 0=empty 1=wall @=agent " + " ".join(f"{s}={n}" for n, s in _CATALOG)


def save_map(grid_map):
    """Serialises a map to the `ttl-map v1` text format."""
    lines = [MAP_HEADER, _LEGEND]
    for row in range(MAP_SIZE):
        symbols = []
        for col in range(MAP_SIZE):
            code = int(grid_map.cells[row, col])
            if (row, col) == grid_map.agent_pos:
                symbols.append(AGENT_SYMBOL)
            elif code >= OBJECT_BASE:
                symbols.append(OBJECT_SYMBOLS[object_name(code)])
            else:
                symbols.append(str(code))
        lines.append("row: " + " ".join(symbols))
    return "\n".join(lines) + "\n"


def _parse_legend(line, number):
    if not line.startswith("legend:"):
        raise MapFormatError("expected 'legend:' line", number, 1)
    symbols = {"0": EMPTY, "1": WALL, AGENT_SYMBOL: AGENT}
    for match in re.finditer(r"\S+", line[len("legend:"):]):
        column = match.start() + len("legend:") + 1
        symbol, sep, name = match.group().partition("=")
        if not sep or not symbol:
            raise MapFormatError(f"malformed legend entry {match.group()!r}", number, column)
        if symbol in ("0", "1", AGENT_SYMBOL):
            continue
        if name not in OBJECT_SYMBOLS:
            raise MapFormatError(f"unknown object {name!r} in legend", number, column)
        symbols[symbol] = object_code(name)
    return symbols


def load_map(text):
    """
    Parses the `ttl-map v1` format produced by save_map.

    Raises:
        MapFormatError: With the 1-based line and column of the problem.
    """
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAP_HEADER:
        raise MapFormatError(f"expected header {MAP_HEADER!r}", 1, 1)
    if len(lines) < 2:
        raise MapFormatError("missing legend line", 2)
    symbols = _parse_legend(lines[1], 2)
    cells = np.full((MAP_SIZE, MAP_SIZE), WALL, dtype=np.int64)
    agent = None
    for k in range(MAP_SIZE):
        number = k + 3
        if number > len(lines) or not lines[number - 1].strip():
            raise MapFormatError(f"missing row {k + 1} of {MAP_SIZE}", number)
        line = lines[number - 1]
        if not line.startswith("row:"):
            raise MapFormatError("expected 'row:'", number, 1)
        tokens = list(re.finditer(r"\S+", line[len("row:"):]))
        if len(tokens) != MAP_SIZE:
            raise MapFormatError(f"expected {MAP_SIZE} cells, found {len(tokens)}", number)
        for col, match in enumerate(tokens):
            column = match.start() + len("row:") + 1
            symbol = match.group()
            if symbol not in symbols:
                raise MapFormatError(f"unknown cell symbol {symbol!r}", number, column)
            code = symbols[symbol]
            on_border = k in (0, MAP_SIZE - 1) or col in (0, MAP_SIZE - 1)
            if on_border != (code == WALL):
                raise MapFormatError("walls must form exactly the map border", number, column)
            if code == AGENT:
                if agent is not None:
                    raise MapFormatError("more than one agent", number, column)
                agent, code = (k, col), EMPTY
            cells[k, col] = code
    for extra, line in enumerate(lines[MAP_SIZE + 2:], start=MAP_SIZE + 3):
        if line.strip():
            raise MapFormatError("unexpected content after the last row", extra, 1)
    if agent is None:
        raise MapFormatError("no agent cell '@' in the map", len(lines))
    return GridMap(cells, agent)
