"""Nonsemantic curve-tracing scenes.

Each curve is a chain of cubic Bezier segments with C1-continuous joints,
running from a lettered endpoint on the left edge to a numbered endpoint on
the right. Curves share the corridor, so distractor paths run parallel or
cross, and background speckle adds local clutter. The latent permutation
between letters and numbers is the only ground truth.
"""

from __future__ import annotations

import string

import numpy as np

from ..render import BLACK, DrawCommand
from .base import (PALETTE, PALETTE_NAMES, BenchSample, DependencyGraph,
                   DifficultyProfile, GenerationInfeasible, LatentScene,
                   make_rng, metadata_for, speckle_commands)

WIDTH, HEIGHT = 480, 360
MIN_ENDPOINT_SEPARATION = 28.0
X_LEFT, X_RIGHT = 34.0, 446.0

PROMPT_TEMPLATE = (
    "The image shows {n} curved lines. Each line connects a letter on the "
    "left side to a number on the right side. Lines may cross or run close "
    "to each other. Which number is connected to the letter {letter}? "
    "Respond with only the number in braces, e.g. {{1}}."
)


def _lane_positions(rng: np.random.Generator, count: int) -> list:
    """Vertically jittered lane anchors that keep the separation floor."""
    margin = 34.0
    span = HEIGHT - 2 * margin
    if count > 1 and span / (count - 1) < MIN_ENDPOINT_SEPARATION:
        raise GenerationInfeasible(
            f"{count} endpoints cannot keep {MIN_ENDPOINT_SEPARATION}px separation")
    lane = span / max(count - 1, 1)
    jitter = max(0.0, min((lane - MIN_ENDPOINT_SEPARATION) / 2, 20.0))
    return [margin + i * lane + float(rng.uniform(-jitter, jitter))
            for i in range(count)]


def _curve_segments(rng: np.random.Generator, start: tuple, end: tuple,
                    wobble: float) -> list:
    """2 to 4 chained cubics with matched tangents at interior joints."""
    n_seg = int(rng.integers(2, 5))
    xs = np.linspace(start[0], end[0], n_seg + 1)
    ys = np.linspace(start[1], end[1], n_seg + 1)
    way = []
    for i in range(n_seg + 1):
        if 0 < i < n_seg:
            y = float(np.clip(ys[i] + rng.uniform(-wobble, wobble),
                              12.0, HEIGHT - 12.0))
        else:
            y = float(ys[i])  # endpoints anchor exactly on the lane points
        way.append((float(xs[i]), y))
    # Catmull-Rom style tangents give C1 continuity at the joints
    tangents = []
    for i in range(n_seg + 1):
        prev_pt = way[max(0, i - 1)]
        next_pt = way[min(n_seg, i + 1)]
        tangents.append(((next_pt[0] - prev_pt[0]) / 2.0,
                         (next_pt[1] - prev_pt[1]) / 2.0))
    segments = []
    for i in range(n_seg):
        p0, p3 = way[i], way[i + 1]
        t0, t1 = tangents[i], tangents[i + 1]
        p1 = (p0[0] + t0[0] / 3.0, p0[1] + t0[1] / 3.0)
        p2 = (p3[0] - t1[0] / 3.0, p3[1] - t1[1] / 3.0)
        segments.append((p0, p1, p2, p3))
    return segments


def gen_line_trace(profile: DifficultyProfile, seed: int,
                   sample_id: "str | None" = None) -> "tuple[LatentScene, BenchSample]":
    rng = make_rng(seed)
    n_curves = max(2, 2 + profile.structural_distractors)
    if n_curves > 9:
        raise GenerationInfeasible("at most 9 curves supported")

    left_y = _lane_positions(rng, n_curves)
    right_y = _lane_positions(rng, n_curves)
    perm = list(rng.permutation(n_curves))

    wobble = 18.0 + 90.0 * profile.cross_region_distance
    letters = list(string.ascii_uppercase[:n_curves])
    color_names = list(PALETTE_NAMES)
    rng.shuffle(color_names)

    curves = []
    for i in range(n_curves):
        start = (X_LEFT, left_y[i])
        end = (X_RIGHT, right_y[perm[i]])
        curves.append({
            "letter": letters[i],
            "number": str(perm[i] + 1),
            "color": color_names[i % len(color_names)],
            "segments": _curve_segments(rng, start, end, wobble),
            "start": start,
            "end": end,
        })

    query_idx = int(rng.integers(0, n_curves))
    query = curves[query_idx]
    answer = query["number"]

    cmds: list = []
    cmds.extend(speckle_commands(rng, WIDTH, HEIGHT, profile.noise_density))
    for c in curves:
        cmds.append(DrawCommand(kind="bezier_path", geometry=tuple(c["segments"]),
                                stroke=PALETTE[c["color"]], width=3.0))
    for c in curves:
        cmds.append(DrawCommand(kind="glyph_label",
                                geometry=((c["start"][0] - 26, c["start"][1] - 7),),
                                stroke=BLACK, scale=2, text=c["letter"]))
        cmds.append(DrawCommand(kind="glyph_label",
                                geometry=((c["end"][0] + 10, c["end"][1] - 7),),
                                stroke=BLACK, scale=2, text=c["number"]))

    scene = LatentScene(
        scenario="lt", seed=int(seed),
        graph=DependencyGraph(nodes=(), edges=()),
        placements=tuple([(f"L{c['letter']}", *c["start"]) for c in curves]
                         + [(f"N{c['number']}", *c["end"]) for c in curves]),
        label=answer, width=WIDTH, height=HEIGHT,
        draw_commands=tuple(cmds),
        extra={
            "curves": curves,
            "query_letter": query["letter"],
            "permutation": [int(p) for p in perm],
            "structure": {"permutation": [int(p) for p in perm],
                          "segments": [[[round(v, 1) for v in pt]
                                        for pt in seg]
                                       for c in curves for seg in c["segments"]]},
        })

    perception = (f"The curve starting at letter {query['letter']} is drawn in "
                  f"{query['color']}. The {query['color']} curve ends at "
                  f"number {answer}.")
    sid = sample_id if sample_id is not None else f"lt_{seed}"
    sample = BenchSample(
        id=sid, image=f"./images/{sid}.png",
        prompt=PROMPT_TEMPLATE.format(n=n_curves, letter=query["letter"]),
        answer=answer, perception=perception,
        metadata=metadata_for("lt", seed, profile,
                              query_letter=query["letter"]))
    return scene, sample
