"""Independent recomputation of answers from latent scene state.

Each checker rederives the label through its own code path, sharing no walk
or matching logic with the generators: the navigation walker reads only the
dependency graph and rule list, the curve tracer follows raw geometry, the
window scanner enumerates sub-grids, and the patch checker reasons over
rectangles. A disagreement raises OracleMismatch and must surface as a test
failure, never be silently repaired.
"""

from __future__ import annotations

import math

from .base import LatentScene, OracleMismatch
from .match import GRID_N, TEMPLATE_N
from .shapes import same_pose


def oracle_answer(scene: LatentScene) -> str:
    checker = _CHECKERS.get(scene.scenario)
    if checker is None:
        raise KeyError(f"no oracle for scenario {scene.scenario!r}")
    return checker(scene)


def _walk_vjump(scene: LatentScene) -> str:
    graph = scene.graph
    current = scene.extra["start"]
    for step, rule in enumerate(scene.rule_sequence):
        if rule == "arrow":
            outgoing = graph.out_edges(current, "arrow")
            if len(outgoing) != 1:
                raise OracleMismatch(
                    f"step {step}: node {current} has {len(outgoing)} arrows")
            current = outgoing[0][1]
        elif rule == "color":
            color = graph.node(current).color
            peers = [n.node_id for n in graph.nodes
                     if n.color == color and n.node_id != current]
            if len(peers) != 1:
                raise OracleMismatch(
                    f"step {step}: color {color} has {len(peers)} peers")
            current = peers[0]
        else:
            raise OracleMismatch(f"unknown rule {rule!r}")
    return current


def _trace_curve(scene: LatentScene) -> str:
    """Follow the queried curve geometrically from letter to number."""
    curves = scene.extra["curves"]
    letter = scene.extra["query_letter"]
    letter_pos = None
    for name, x, y in scene.placements:
        if name == f"L{letter}":
            letter_pos = (x, y)
    if letter_pos is None:
        raise OracleMismatch(f"letter {letter} has no endpoint")

    best = None
    best_d = math.inf
    for c in curves:
        sx, sy = c["segments"][0][0]
        d = math.hypot(sx - letter_pos[0], sy - letter_pos[1])
        if d < best_d:
            best, best_d = c, d
    if best is None or best_d > 1.0:
        raise OracleMismatch(f"no curve starts at letter {letter}")

    # continuity audit: chained segments must join exactly
    for prev, nxt in zip(best["segments"], best["segments"][1:]):
        if prev[3] != nxt[0]:
            raise OracleMismatch("curve segments do not chain")

    end = best["segments"][-1][3]
    nearest = None
    nearest_d = math.inf
    for name, x, y in scene.placements:
        if not name.startswith("N"):
            continue
        d = math.hypot(x - end[0], y - end[1])
        if d < nearest_d:
            nearest, nearest_d = name, d
    if nearest is None or nearest_d > 1.0:
        raise OracleMismatch("curve end matches no number endpoint")
    return nearest[1:]


def _scan_match(scene: LatentScene) -> str:
    template = scene.extra["template"]
    grid = scene.extra["grid"]
    for row in range(GRID_N - TEMPLATE_N + 1):
        for col in range(GRID_N - TEMPLATE_N + 1):
            hit = True
            for dr in range(TEMPLATE_N):
                for dc in range(TEMPLATE_N):
                    gk, gr = grid[row + dr][col + dc]
                    tk, tr = template[dr][dc]
                    if not same_pose(gk, gr, tk, tr):
                        hit = False
            if hit:
                return "yes"
    return "no"


def match_window_hits(scene: LatentScene) -> list:
    """All matching windows; forced negatives must yield an empty list."""
    template = scene.extra["template"]
    grid = scene.extra["grid"]
    hits = []
    for row in range(GRID_N - TEMPLATE_N + 1):
        for col in range(GRID_N - TEMPLATE_N + 1):
            ok = all(same_pose(grid[row + dr][col + dc][0],
                               grid[row + dr][col + dc][1],
                               template[dr][dc][0], template[dr][dc][1])
                     for dr in range(TEMPLATE_N) for dc in range(TEMPLATE_N))
            if ok:
                hits.append((row, col))
    return hits


def _check_rs(scene: LatentScene) -> str:
    view = tuple(scene.extra["view_rect"])
    cand = tuple(scene.extra["cand_rect"])
    if scene.extra["cand_source"] != scene.extra["source"]:
        return "no"
    contained = (view[0] <= cand[0] and view[1] <= cand[1]
                 and cand[2] <= view[2] and cand[3] <= view[3])
    if contained:
        return "yes"
    overlap_w = min(view[2], cand[2]) - max(view[0], cand[0])
    overlap_h = min(view[3], cand[3]) - max(view[1], cand[1])
    if overlap_w > 0 and overlap_h > 0:
        raise OracleMismatch("candidate partially overlaps the view rect")
    return "no"


def _walk_tvjump(scene: LatentScene) -> str:
    border = scene.extra["border"]
    cue = scene.extra["cue"]
    by_color = {}
    for label, color in border.items():
        if color in by_color:
            raise OracleMismatch(f"border color {color} is not unique")
        by_color[color] = label
    current = scene.extra["start"]
    for _ in range(int(scene.extra["jumps"])):
        current = by_color[cue[current]]
    return current


_CHECKERS = {
    "vjump": _walk_vjump,
    "lt": _trace_curve,
    "match": _scan_match,
    "rs": _check_rs,
    "tvjump": _walk_tvjump,
}
