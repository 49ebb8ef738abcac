# tests/test_visualization.py
import matplotlib.pyplot as plt
import numpy as np
import pytest

from ttl_agent.errors import PreconditionError
from ttl_agent.gridworld import WALL, build_map, observe
from ttl_agent.symbolic_module import Neg, PosChoice
from ttl_agent.visualization import glyph, plot_map, plot_observation, render_map, render_observation


@pytest.fixture
def grid_map():
    return build_map((3, 3), {(3, 4): "wood", (1, 1): "iron"})


@pytest.fixture(autouse=True)
def _close_figures():
    yield
    plt.close("all")


def test_render_shapes(grid_map):
    assert render_observation(observe(grid_map, Neg("wood"))).shape == (54, 45)
    assert render_map(grid_map).shape == (63, 63)


def test_glyphs_are_stable_and_bounded():
    wood = glyph(30)
    assert np.array_equal(wood, glyph(30))
    assert not np.array_equal(wood, glyph(31))
    assert np.all(glyph(WALL) == 1.0)
    assert wood.min() >= 0.0 and wood.max() <= 1.0
    with pytest.raises(PreconditionError):
        glyph(99)


def test_plots_return_their_axes(grid_map):
    ax = plot_map(grid_map, title="map")
    assert ax.get_title() == "map"
    assert len(ax.texts) == 2
    _, own = plt.subplots()
    assert plot_observation(observe(grid_map, PosChoice("wood", "iron")), ax=own) is own
