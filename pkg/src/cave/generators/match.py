"""Embedded template-matching scenes.

A 2x2 template of shapes must be found, with identical shape kinds and
poses, inside a 4x4 grid. Positive samples embed the template verbatim at a
random sub-window; negative samples plant near-miss windows and are then
repaired until an exhaustive scan confirms that no window matches under
symmetry-canonical rotation comparison.
"""

from __future__ import annotations

import numpy as np

from ..render import BLACK, DrawCommand
from .base import (PALETTE, BenchSample, DependencyGraph, DifficultyProfile,
                   GenerationInfeasible, LatentScene, make_rng, metadata_for)
from .shapes import CIRCLE_RADIUS, SHAPE_KINDS, same_pose, shape_points

TEMPLATE_N = 2
GRID_N = 4
CELL = 56
PAD = 14
SHAPE_SIZE = CELL * 0.64
SHAPE_COLOR = PALETTE["navy"]

# published sample format for this scenario
PROMPT = (
    "The left side shows a 2x2 template inside a black box, consisting of "
    "basic shapes (triangle, square, circle, parallelogram, pentagon) each "
    "with a specific rotation angle and uniform visual size. The right side "
    "shows a 4x4 large image inside a black box (sharing a common edge with "
    "the template box) filled with the same types of shapes (uniform visual "
    "size, random rotation except for template area). Please check if the "
    "exact shape pattern of the template (including the identical rotation "
    "angle for each corresponding shape) exists in the large image. Respond "
    "with only {yes} or {no}."
)

WIDTH = PAD + TEMPLATE_N * CELL + PAD + GRID_N * CELL + PAD
HEIGHT = PAD + GRID_N * CELL + PAD

Cell = "tuple[str, float]"  # (shape kind, rotation degrees)


def _random_cell(rng: np.random.Generator, fine_rotation: bool) -> tuple:
    kind = SHAPE_KINDS[int(rng.integers(0, len(SHAPE_KINDS)))]
    step = 15 if fine_rotation else 90
    rotation = float(rng.integers(0, 360 // step) * step)
    return (kind, rotation)


def _window_matches(grid: list, template: list, row: int, col: int) -> bool:
    for dr in range(TEMPLATE_N):
        for dc in range(TEMPLATE_N):
            gk, gr = grid[row + dr][col + dc]
            tk, tr = template[dr][dc]
            if not same_pose(gk, gr, tk, tr):
                return False
    return True


def scan_windows(grid: list, template: list) -> list:
    """All (row, col) whose sub-window equals the template pose-for-pose."""
    hits = []
    for row in range(GRID_N - TEMPLATE_N + 1):
        for col in range(GRID_N - TEMPLATE_N + 1):
            if _window_matches(grid, template, row, col):
                hits.append((row, col))
    return hits


def _perturb_cell(rng: np.random.Generator, cell: tuple) -> tuple:
    """A visibly different pose: change kind, or rotate a non-circle shape."""
    kind, rotation = cell
    if kind != "circle" and rng.random() < 0.5:
        bumped = rotation + float(rng.integers(1, 3) * 15)
        if not same_pose(kind, bumped, kind, rotation):
            return (kind, bumped % 360.0)
    others = [k for k in SHAPE_KINDS if k != kind]
    return (others[int(rng.integers(0, len(others)))], rotation)


def gen_embedded_match(profile: DifficultyProfile, seed: int,
                       force_label: "str | None" = None,
                       sample_id: "str | None" = None,
                       ) -> "tuple[LatentScene, BenchSample]":
    rng = make_rng(seed)
    fine = profile.scale_rotation is not None
    label = force_label if force_label is not None else (
        "yes" if rng.random() < 0.5 else "no")
    if label not in ("yes", "no"):
        raise ValueError(f"force_label must be yes/no, got {label!r}")

    template = [[_random_cell(rng, fine) for _ in range(TEMPLATE_N)]
                for _ in range(TEMPLATE_N)]
    grid = [[_random_cell(rng, fine) for _ in range(GRID_N)]
            for _ in range(GRID_N)]

    windows = [(r, c) for r in range(GRID_N - TEMPLATE_N + 1)
               for c in range(GRID_N - TEMPLATE_N + 1)]
    embed_at: "tuple[int, int] | None" = None

    if label == "yes":
        embed_at = windows[int(rng.integers(0, len(windows)))]
        er, ec = embed_at
        for dr in range(TEMPLATE_N):
            for dc in range(TEMPLATE_N):
                grid[er + dr][ec + dc] = template[dr][dc]
    else:
        # plant near-miss windows: the template with exactly one cell off
        n_near = min(1 + profile.structural_distractors, len(windows))
        order = list(rng.permutation(len(windows)))
        for w in order[:n_near]:
            nr, nc = windows[w]
            off_dr = int(rng.integers(0, TEMPLATE_N))
            off_dc = int(rng.integers(0, TEMPLATE_N))
            for dr in range(TEMPLATE_N):
                for dc in range(TEMPLATE_N):
                    cell = template[dr][dc]
                    if (dr, dc) == (off_dr, off_dc):
                        cell = _perturb_cell(rng, cell)
                    grid[nr + dr][nc + dc] = cell
        # repair any window that still matches until the scan is clean
        for _ in range(64):
            hits = scan_windows(grid, template)
            if not hits:
                break
            hr, hc = hits[0]
            dr = int(rng.integers(0, TEMPLATE_N))
            dc = int(rng.integers(0, TEMPLATE_N))
            grid[hr + dr][hc + dc] = _perturb_cell(rng, grid[hr + dr][hc + dc])
        else:
            raise GenerationInfeasible("could not build a guaranteed negative")

    scene = LatentScene(
        scenario="match", seed=int(seed),
        graph=DependencyGraph(nodes=(), edges=()),
        placements=tuple(_placements(template, grid)),
        transform=profile.scale_rotation, label=label,
        width=WIDTH, height=HEIGHT,
        draw_commands=tuple(_draw(template, grid)),
        extra={"template": template, "grid": grid, "embed_at": embed_at,
               "structure": {"template": template, "grid": grid}})

    sid = sample_id if sample_id is not None else f"match_{seed}"
    sample = BenchSample(
        id=sid, image=f"./images/{sid}.png", prompt=PROMPT,
        answer=label, perception=_perception(template),
        metadata=metadata_for("match", seed, profile))
    return scene, sample


def _perception(template: list) -> str:
    """A distinguishing template fact, never the yes/no answer itself."""
    priority = ("triangle", "pentagon", "parallelogram", "square", "circle")
    flat = [(template[r][c], (r, c)) for r in range(TEMPLATE_N)
            for c in range(TEMPLATE_N)]
    for wanted in priority:
        for (kind, rotation), (r, c) in flat:
            if kind != wanted:
                continue
            if kind == "triangle":
                rot = rotation % 120.0
                if rot == 0.0:
                    return "Equilateral triangle in template points upward."
                return (f"Equilateral triangle in template is rotated "
                        f"{rot:g} degrees clockwise.")
            if kind == "circle":
                place = ("top left", "top right", "bottom left",
                         "bottom right")[r * 2 + c]
                return f"Circle in template sits at the {place} cell."
            name = {"pentagon": "Pentagon", "parallelogram": "Parallelogram",
                    "square": "Square"}[kind]
            from .shapes import canonical_rotation
            rot = canonical_rotation(kind, rotation)
            if rot == 0.0:
                return f"{name} in template sits in its upright pose."
            return f"{name} in template is rotated {rot:g} degrees clockwise."
    return "Template contains four basic shapes."


def _cell_center(grid_left: float, row: int, col: int) -> tuple:
    return (grid_left + col * CELL + CELL / 2, PAD + row * CELL + CELL / 2)


def _placements(template: list, grid: list) -> list:
    out = []
    t_left = float(PAD)
    g_left = float(PAD + TEMPLATE_N * CELL + PAD)
    for r in range(TEMPLATE_N):
        for c in range(TEMPLATE_N):
            x, y = _cell_center(t_left, r, c)
            out.append((f"T{r}{c}", x, y))
    for r in range(GRID_N):
        for c in range(GRID_N):
            x, y = _cell_center(g_left, r, c)
            out.append((f"G{r}{c}", x, y))
    return out


def _shape_cmds(kind: str, rotation: float, center: tuple) -> list:
    if kind == "circle":
        return [DrawCommand(kind="circle",
                            geometry=(center, CIRCLE_RADIUS * SHAPE_SIZE),
                            fill=SHAPE_COLOR)]
    return [DrawCommand(kind="polygon",
                        geometry=tuple(shape_points(kind, center, SHAPE_SIZE,
                                                    rotation)),
                        fill=SHAPE_COLOR)]


def _box(x0: float, y0: float, x1: float, y1: float) -> DrawCommand:
    return DrawCommand(kind="polygon",
                       geometry=((x0, y0), (x1, y0), (x1, y1), (x0, y1)),
                       fill=None, stroke=BLACK, width=2.0)


def _draw(template: list, grid: list) -> list:
    t_left = float(PAD)
    g_left = float(PAD + TEMPLATE_N * CELL + PAD)
    cmds = [
        _box(t_left, PAD, t_left + TEMPLATE_N * CELL, PAD + TEMPLATE_N * CELL),
        _box(g_left, PAD, g_left + GRID_N * CELL, PAD + GRID_N * CELL),
    ]
    for r in range(TEMPLATE_N):
        for c in range(TEMPLATE_N):
            kind, rot = template[r][c]
            cmds.extend(_shape_cmds(kind, rot, _cell_center(t_left, r, c)))
    for r in range(GRID_N):
        for c in range(GRID_N):
            kind, rot = grid[r][c]
            cmds.extend(_shape_cmds(kind, rot, _cell_center(g_left, r, c)))
    return cmds
