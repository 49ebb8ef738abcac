# visualization.py
"""
This module provides functions for visualizing gridworld maps and the extended
observations the agent receives, using matplotlib. Every cell code is drawn
as a 9x9 glyph, so a 6x5 observation becomes a 54x45 image.
"""

import matplotlib.pyplot as plt
import numpy as np

from ttl_agent.gridworld import (
    AGENT,
    EMPTY,
    OBJECT_SYMBOLS,
    OP_CHOICE,
    OP_NEG,
    WALL,
    object_name,
)

GLYPH = 9


def _fixed_glyphs():
    wall = np.ones((GLYPH, GLYPH))
    agent = np.zeros((GLYPH, GLYPH))
    rows, cols = np.indices((GLYPH, GLYPH))
    agent[np.abs(rows - 4) + np.abs(cols - 4) <= 3] = 1.0  # diamond
    neg = np.zeros((GLYPH, GLYPH))
    neg[3, 1:3] = neg[4, 3:6] = neg[5, 6:8] = 1.0  # tilde
    choice = np.zeros((GLYPH, GLYPH))
    choice[1:7, 2] = choice[1:7, 6] = choice[7, 3:6] = 1.0  # cup
    return {EMPTY: np.zeros((GLYPH, GLYPH)), WALL: wall, AGENT: agent, OP_NEG: neg, OP_CHOICE: choice}


_GLYPHS = _fixed_glyphs()


def glyph(code):
    """
    Returns the 9x9 glyph of a cell code.

    Object glyphs are a framed 7x7 pattern drawn from a generator seeded with
    the object code, so each object always looks the same.

    Args:
        code (int): A cell code (wall, empty, agent, operator or object).

    Returns:
        numpy.ndarray: A 9x9 float array with values in [0, 1].
    """
    code = int(code)
    if code in _GLYPHS:
        return _GLYPHS[code]
    object_name(code)  # validates the code
    pattern = np.random.default_rng(code).random((GLYPH - 2, GLYPH - 2)) > 0.5
    tile = np.full((GLYPH, GLYPH), 0.5)
    tile[1:-1, 1:-1] = pattern
    return tile


def render_codes(codes):
    """
    Expands a 2-D array of cell codes into its glyph image.

    Args:
        codes (array-like): Cell codes, shape (rows, cols).

    Returns:
        numpy.ndarray: Image of shape (9 * rows, 9 * cols).
    """
    codes = np.asarray(codes)
    return np.block([[glyph(c) for c in row] for row in codes])


def render_observation(obs):
    """Renders a 6x5 observation as a 54x45 image."""
    return render_codes(obs)


def render_map(grid_map):
    """Renders a whole 7x7 map, agent included, as a 63x63 image."""
    codes = np.array(grid_map.cells)
    codes[grid_map.agent_pos] = AGENT
    return render_codes(codes)


def plot_observation(obs, ax=None, title=None):
    """
    Draws an extended observation.

    Args:
        obs (numpy.ndarray): The 6x5 observation.
        ax (matplotlib.axes.Axes, optional): Axes to draw on; a new figure is
                                             created when omitted.
        title (str, optional): Axes title.

    Returns:
        matplotlib.axes.Axes: The axes drawn on.
    """
    if ax is None:
        _, ax = plt.subplots(figsize=(3, 3.6))
    ax.imshow(render_observation(obs), cmap="gray_r", vmin=0, vmax=1, interpolation="nearest")
    # Separate the sub-task row from the window.
    ax.axhline(5 * GLYPH - 0.5, color="tab:red", linewidth=1)
    ax.set_xticks([])
    ax.set_yticks([])
    if title:
        ax.set_title(title)
    return ax


def plot_map(grid_map, ax=None, title=None, annotate=True):
    """
    Draws a map with an optional map-file symbol over each object.

    Args:
        grid_map (GridMap): The map to draw.
        ax (matplotlib.axes.Axes, optional): Axes to draw on.
        title (str, optional): Axes title.
        annotate (bool): If True, write each object's symbol on its cell.

    Returns:
        matplotlib.axes.Axes: The axes drawn on.
    """
    if ax is None:
        _, ax = plt.subplots(figsize=(4, 4))
    ax.imshow(render_map(grid_map), cmap="gray_r", vmin=0, vmax=1, interpolation="nearest")
    if annotate:
        for row, col, name in grid_map.objects():
            ax.text(col * GLYPH + GLYPH // 2, row * GLYPH + GLYPH // 2, OBJECT_SYMBOLS[name],
                    ha="center", va="center", color="tab:blue", fontsize=9, fontweight="bold")
    ax.set_xticks([])
    ax.set_yticks([])
    if title:
        ax.set_title(title)
    return ax
