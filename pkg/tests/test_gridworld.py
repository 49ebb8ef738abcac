# tests/test_gridworld.py
"""
Tests for the gridworld: catalog and cell codes, movement and interaction,
observations, map generators and the map text format.
"""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ttl_agent.errors import InfeasibleGenerationError, MapFormatError, PreconditionError
from ttl_agent.gridworld import (
    ACTIONS,
    AGENT,
    CATALOG_OBJECTS,
    CENTRE,
    EMPTY,
    MAP_HEADER,
    OBJECT_BASE,
    OP_CHOICE,
    OP_NEG,
    WALL,
    Action,
    GridMap,
    ObjectCatalog,
    build_map,
    decode_subtask,
    empty_map,
    encode_subtask,
    generate_bcm,
    generate_map,
    generate_training_map,
    load_map,
    object_ahead,
    object_code,
    object_name,
    observe,
    save_map,
    step,
)
from ttl_agent.symbolic_module import Neg, Pos, PosChoice, TaskMatrix
from ttl_agent.ttl_core import Trace, parse_ttl, ttl_satisfies

GOLD_TOOL = "((wood ; grass) | (iron ; axe)) ; workbench ; toolshed~"


@pytest.fixture
def catalog():
    """The small split: six training objects, twenty test objects."""
    return ObjectCatalog.preset("small")


@pytest.fixture
def small_map():
    """Agent in a corner next to wood, iron further away."""
    return build_map((1, 1), {(1, 2): "wood", (3, 4): "iron"})


# --- Catalog and codes ---

def test_catalog_splits_partition_the_objects(catalog):
    assert len(CATALOG_OBJECTS) == 26
    assert len(catalog.train) == 6 and len(catalog.test) == 20
    assert set(catalog.train) | set(catalog.test) == set(CATALOG_OBJECTS)
    assert not set(catalog.train) & set(catalog.test)


@pytest.mark.parametrize("preset, size", [("small", 6), ("medium", 10), ("large", 20)])
def test_split_presets(preset, size):
    assert len(ObjectCatalog.preset(preset).train) == size


def test_catalog_rejects_bad_arguments(catalog):
    with pytest.raises(ValueError):
        ObjectCatalog.preset("huge")
    with pytest.raises(ValueError):
        catalog.split("validation")
    with pytest.raises(ValueError):
        ObjectCatalog(train_size=0)


def test_object_codes_follow_catalog_order():
    assert object_code(CATALOG_OBJECTS[0]) == OBJECT_BASE == 10
    assert object_code(CATALOG_OBJECTS[-1]) == 35
    for code in range(10, 36):
        assert object_code(object_name(code)) == code
    with pytest.raises(PreconditionError):
        object_code("dragon")
    with pytest.raises(PreconditionError):
        object_name(WALL)


def test_fixed_cell_codes():
    assert (EMPTY, WALL, AGENT, OP_NEG, OP_CHOICE) == (0, 1, 2, 3, 4)
    assert [a.name for a in ACTIONS] == ["UP", "DOWN", "LEFT", "RIGHT"]


# --- Maps and dynamics ---

def test_map_validation():
    cells, _ = empty_map()
    bad_border = cells.copy()
    bad_border[0, 3] = EMPTY
    with pytest.raises(PreconditionError):
        GridMap(bad_border, (3, 3))
    with pytest.raises(PreconditionError):
        GridMap(cells, (0, 3))
    with pytest.raises(PreconditionError):
        build_map((2, 2), {(2, 2): "wood"})


def test_maps_are_immutable_and_compare_by_content(small_map):
    with pytest.raises(ValueError):
        small_map.cells[1, 1] = WALL
    twin = build_map((1, 1), {(1, 2): "wood", (3, 4): "iron"}, seed=99)
    assert twin == small_map, "The generation seed takes no part in equality"
    assert hash(twin) == hash(small_map)


def test_moving_into_a_wall_is_a_no_op(small_map):
    moved, labels = step(small_map, Action.UP)
    assert moved == small_map and labels == frozenset()


def test_moving_onto_an_object_consumes_it(small_map):
    assert object_ahead(small_map, Action.RIGHT) == "wood"
    moved, labels = step(small_map, Action.RIGHT)
    assert labels == {"wood"}
    assert moved.agent_pos == (1, 2)
    assert moved.cells[1, 2] == EMPTY
    assert moved.inventory() == {"iron": 1}


def test_interaction_without_consumption_leaves_everything_in_place(small_map):
    moved, labels = step(small_map, Action.RIGHT, consume=False)
    assert labels == {"wood"}
    assert moved == small_map


def test_consecutive_interactions_form_a_trace():
    grid_map = build_map((3, 3), {(3, 4): "wood", (3, 5): "iron"})
    grid_map, first = step(grid_map, Action.RIGHT)
    grid_map, second = step(grid_map, Action.RIGHT)
    trace = Trace((first, second))
    assert trace.steps == (frozenset({"wood"}), frozenset({"iron"}))
    assert ttl_satisfies(trace, parse_ttl("wood ; iron"))


@given(st.integers(0, 30), st.lists(st.sampled_from(ACTIONS), max_size=30))
def test_dynamics_conserve_objects_and_emit_single_labels(seed, actions):
    grid_map = generate_map(ObjectCatalog(), "train", parse_ttl("wood ; iron"), 8, seed)
    replay = grid_map
    initial = sum(grid_map.inventory().values())
    emitted = 0
    for action in actions:
        before = grid_map.inventory()
        grid_map, labels = step(grid_map, action)
        replay, replay_labels = step(replay, action)
        assert len(labels) <= 1
        assert labels == replay_labels and grid_map == replay
        assert grid_map.cells[grid_map.agent_pos] == EMPTY
        if labels:
            (label,) = labels
            assert before[label] - grid_map.inventory()[label] == 1, "The label names the consumed object"
        emitted += len(labels)
    assert sum(grid_map.inventory().values()) == initial - emitted


# --- Observations ---

def test_observation_shape_and_agent_marker(small_map):
    obs = observe(small_map, Pos("wood"))
    assert obs.shape == (6, 5)
    assert obs[2, 2] == AGENT


def test_corner_window_shows_two_wall_rows_and_columns(small_map):
    obs = observe(small_map, None)
    assert np.all(obs[0:2] == WALL)
    assert np.all(obs[:5, 0:2] == WALL)
    assert obs[2, 3] == object_code("wood")
    assert np.all(obs[5] == EMPTY)


@given(st.integers(1, 5), st.integers(1, 5))
def test_window_shows_the_cells_around_the_agent(row, col):
    placements = {(r, c): CATALOG_OBJECTS[(r * 5 + c) % 26]
                  for r in range(1, 6) for c in range(1, 6) if (r, c) != (row, col)}
    grid_map = build_map((row, col), placements)
    obs = observe(grid_map, None)
    for r in range(5):
        for c in range(5):
            if (r, c) == (2, 2):
                continue
            mr, mc = row + r - 2, col + c - 2
            expected = grid_map.cells[mr, mc] if 0 <= mr < 7 and 0 <= mc < 7 else WALL
            assert obs[r, c] == expected


def test_subtask_row_encoding():
    wood, iron = object_code("wood"), object_code("iron")
    assert list(encode_subtask(Pos("wood"))) == [wood, EMPTY, EMPTY, EMPTY, EMPTY]
    assert list(encode_subtask(Neg("wood"))) == [wood, OP_NEG, EMPTY, EMPTY, EMPTY]
    assert list(encode_subtask(PosChoice("wood", "iron"))) == [wood, OP_CHOICE, iron, EMPTY, EMPTY]
    for subtask in (Pos("wood"), Neg("wood"), PosChoice("wood", "iron"), None):
        assert decode_subtask(encode_subtask(subtask)) == subtask


# --- Generation ---

def test_single_atom_map(catalog):
    grid_map = generate_map(catalog, "train", TaskMatrix(((Pos("wood"),),)), 2, seed=0)
    assert grid_map.inventory()["wood"] >= 1
    assert sum(grid_map.inventory().values()) == 2


def test_generation_is_deterministic(catalog):
    first = generate_map(catalog, "test", parse_ttl(GOLD_TOOL), 8, seed=11)
    second = generate_map(catalog, "test", parse_ttl(GOLD_TOOL), 8, seed=11)
    assert first == second and first.seed == 11


@pytest.mark.parametrize("seed", range(20))
def test_generated_maps_keep_the_instruction_solvable(catalog, seed):
    grid_map = generate_map(catalog, "test", parse_ttl(GOLD_TOOL), 8, seed=seed)
    inventory = grid_map.inventory()
    assert sum(inventory.values()) == 8
    assert all(inventory[o] >= 1 for o in ("wood", "grass", "workbench")) or \
        all(inventory[o] >= 1 for o in ("iron", "axe", "workbench"))
    assert any(name != "toolshed" for name in inventory), "A negated sub-task needs an alternative object"
    assert grid_map.cells[CENTRE] == EMPTY
    assert grid_map.cells[grid_map.agent_pos] == EMPTY


def test_negated_atom_gets_a_witness(catalog):
    for seed in range(10):
        inventory = generate_map(catalog, "train", parse_ttl("wood~"), 2, seed=seed).inventory()
        assert any(name != "wood" for name in inventory)


def test_generation_preconditions(catalog):
    with pytest.raises(PreconditionError):
        generate_map(catalog, "train", parse_ttl("wood"), 9, seed=0)
    with pytest.raises(PreconditionError):
        generate_map(catalog, "train", parse_ttl("wood"), 1, seed=0)
    too_long = " ; ".join(CATALOG_OBJECTS[:9])
    with pytest.raises(InfeasibleGenerationError):
        generate_map(catalog, "train", parse_ttl(too_long), 8, seed=0)


def test_training_maps_rotate_choice_members(catalog):
    formula = parse_ttl("wood | iron")
    inventories = [generate_training_map(catalog, "train", formula, 4, seed=5, episode_index=k).inventory()
                   for k in range(3)]
    assert inventories[0]["wood"] >= 1 and inventories[0]["iron"] == 0
    assert inventories[1]["iron"] >= 1 and inventories[1]["wood"] == 0
    assert inventories[2]["wood"] >= 1 and inventories[2]["iron"] >= 1


def test_binary_choice_map():
    grid_map = generate_bcm("wood", "iron", seed=4)
    assert grid_map.inventory() == {"wood": 1, "iron": 1}
    assert grid_map == generate_bcm("wood", "iron", seed=4)
    with pytest.raises(PreconditionError):
        generate_bcm("wood", "wood", seed=4)


# --- Map files ---

def test_save_map_format(small_map):
    lines = save_map(small_map).splitlines()
    assert lines[0] == MAP_HEADER
    assert lines[1].startswith("legend: 0=empty 1=wall @=agent c=coal d=diamond")
    assert lines[2:] == [
        "row: 1 1 1 1 1 1 1",
        "row: 1 @ w 0 0 0 1",
        "row: 1 0 0 0 0 0 1",
        "row: 1 0 0 0 i 0 1",
        "row: 1 0 0 0 0 0 1",
        "row: 1 0 0 0 0 0 1",
        "row: 1 1 1 1 1 1 1",
    ]


def test_map_round_trip_on_generated_maps(catalog):
    formulas = [parse_ttl(text) for text in (GOLD_TOOL, "wood ; iron", "grass~", "(wood | iron) ; workbench")]
    for seed in range(100):
        grid_map = generate_map(catalog, "test", formulas[seed % len(formulas)], 4 + seed % 5, seed=seed)
        assert load_map(save_map(grid_map)) == grid_map


def _map_error(text):
    with pytest.raises(MapFormatError) as excinfo:
        load_map(text)
    return excinfo.value


def test_truncated_map_names_the_missing_row(small_map):
    text = "\n".join(save_map(small_map).splitlines()[:8]) + "\n"
    err = _map_error(text)
    assert "missing row 7 of 7" in str(err)
    assert err.line == 9


def test_map_errors_carry_line_and_column(small_map):
    lines = save_map(small_map).splitlines()
    assert _map_error("ttl-map v2\n" + "\n".join(lines[1:])).line == 1

    unknown = lines.copy()
    unknown[3] = "row: 1 X w 0 0 0 1"
    err = _map_error("\n".join(unknown))
    assert (err.line, err.column) == (4, 8)
    assert "unknown cell symbol 'X'" in str(err)

    inner_wall = lines.copy()
    inner_wall[4] = "row: 1 0 1 0 0 0 1"
    assert (_map_error("\n".join(inner_wall)).line, _map_error("\n".join(inner_wall)).column) == (5, 10)

    two_agents = lines.copy()
    two_agents[4] = "row: 1 @ 0 0 0 0 1"
    assert "more than one agent" in str(_map_error("\n".join(two_agents)))

    no_agent = lines.copy()
    no_agent[3] = "row: 1 0 w 0 0 0 1"
    assert "no agent" in str(_map_error("\n".join(no_agent)))

    short_row = lines.copy()
    short_row[5] = "row: 1 0 0 0 1"
    assert "expected 7 cells" in str(_map_error("\n".join(short_row)))

    trailing = "\n".join(lines) + "\nextra\n"
    assert _map_error(trailing).line == 10
