"""Cue-driven region jumping scenes for the auxiliary training corpus.

Labeled boxes with distinct border colors tile the canvas; each box contains
a colored cue dot naming the border color of the next region. Starting from
a given region, following the cues for a fixed number of jumps lands on the
answer region. Decoy gray dots add clutter without creating ambiguity since
border colors are unique.
"""

from __future__ import annotations

import math

import numpy as np

from ..render import BLACK, DrawCommand
from .base import (PALETTE, PALETTE_NAMES, BenchSample, DependencyGraph,
                   DifficultyProfile, GenerationInfeasible, GraphNode,
                   LatentScene, make_rng, metadata_for, place_separated)

WIDTH, HEIGHT = 480, 360
BOX_W, BOX_H = 74, 56

PROMPT_TEMPLATE = (
    "The image shows labeled regions with colored borders. Each region "
    "contains one colored dot. Start at region {start}. In each step, look "
    "at the dot inside the current region and jump to the region whose "
    "border has the dot's color. After {jumps} jump(s), which region are "
    "you in? Respond with only the region label in braces, e.g. {{R3}}."
)


def gen_tv_jump(profile: DifficultyProfile, seed: int,
                sample_id: "str | None" = None) -> "tuple[LatentScene, BenchSample]":
    rng = make_rng(seed)
    jumps = max(1, profile.dependency_length)
    extras = max(0, profile.structural_distractors)
    n_regions = jumps + 1 + extras
    if n_regions > len(PALETTE_NAMES):
        raise GenerationInfeasible(
            f"{n_regions} regions exceed the {len(PALETTE_NAMES)}-color palette")

    diag = math.hypot(WIDTH, HEIGHT)
    chain_gap = min(profile.cross_region_distance * diag, diag * 0.5)
    margin_x, margin_y = BOX_W / 2 + 6, BOX_H / 2 + 6
    bounds = (margin_x, margin_y, WIDTH - margin_x, HEIGHT - margin_y)
    min_dist = math.hypot(BOX_W, BOX_H) * 0.95

    centers = None
    for _ in range(8):
        try:
            centers = place_separated(rng, n_regions, bounds, min_dist)
            break
        except GenerationInfeasible:
            min_dist *= 0.92
    if centers is None:
        raise GenerationInfeasible("region placement failed")

    labels = [f"R{i + 1}" for i in range(n_regions)]
    colors = list(PALETTE_NAMES[:n_regions])
    rng.shuffle(colors)
    border = dict(zip(labels, colors))

    # chain regions chosen so consecutive hops respect the distance profile
    chain = _pick_chain(rng, centers, jumps + 1, chain_gap)
    chain_labels = [labels[i] for i in chain]

    cue: "dict[str, str | None]" = {lab: None for lab in labels}
    for i in range(jumps):
        cue[chain_labels[i]] = border[chain_labels[i + 1]]
    leftovers = [lab for lab in labels if cue[lab] is None]
    for lab in leftovers:
        target = labels[int(rng.integers(0, n_regions))]
        cue[lab] = border[target]

    nodes = tuple(GraphNode(node_id=lab, shape="square", color=border[lab],
                            rotation=0.0, position=centers[i])
                  for i, lab in enumerate(labels))
    edges = tuple((chain_labels[i], chain_labels[i + 1], "cue")
                  for i in range(jumps))
    answer = chain_labels[-1]

    perception = [f"Start at region {chain_labels[0]}."]
    for i in range(jumps):
        c = cue[chain_labels[i]]
        perception.append(f"Jump {i + 1}: the dot inside {chain_labels[i]} is "
                          f"{c}; the {c}-bordered region is {chain_labels[i + 1]}.")

    scene = LatentScene(
        scenario="tvjump", seed=int(seed),
        graph=DependencyGraph(nodes=nodes, edges=edges),
        placements=tuple((lab, *centers[i]) for i, lab in enumerate(labels)),
        label=answer, width=WIDTH, height=HEIGHT,
        draw_commands=tuple(_draw(labels, centers, border, cue, extras, rng)),
        extra={"start": chain_labels[0], "jumps": jumps,
               "border": dict(border), "cue": dict(cue),
               "structure": {"start": chain_labels[0],
                             "chain": chain_labels}})

    sid = sample_id if sample_id is not None else f"tvjump_{seed}"
    sample = BenchSample(
        id=sid, image=f"./images/{sid}.png",
        prompt=PROMPT_TEMPLATE.format(start=chain_labels[0], jumps=jumps),
        answer=answer, perception=" ".join(perception),
        metadata=metadata_for("tvjump", seed, profile, start=chain_labels[0]))
    return scene, sample


def _pick_chain(rng: np.random.Generator, centers: list,
                length: int, gap: float) -> list:
    for _ in range(32):
        perm = list(rng.permutation(len(centers)))
        chain = [perm[0]]
        for idx in perm[1:]:
            if len(chain) == length:
                break
            cx, cy = centers[chain[-1]]
            px, py = centers[idx]
            if math.hypot(px - cx, py - cy) >= gap:
                chain.append(idx)
        if len(chain) == length:
            return chain
        gap *= 0.9
    raise GenerationInfeasible("no chain satisfies the distance profile")


def _draw(labels: list, centers: list, border: dict, cue: dict,
          decoys: int, rng: np.random.Generator) -> list:
    cmds: list = []
    for i, lab in enumerate(labels):
        cx, cy = centers[i]
        x0, y0 = cx - BOX_W / 2, cy - BOX_H / 2
        x1, y1 = cx + BOX_W / 2, cy + BOX_H / 2
        cmds.append(DrawCommand(kind="polygon",
                                geometry=((x0, y0), (x1, y0), (x1, y1), (x0, y1)),
                                fill=(250, 250, 250), stroke=PALETTE[border[lab]],
                                width=3.0))
        cmds.append(DrawCommand(kind="glyph_label", geometry=((x0 + 5, y0 + 4),),
                                stroke=BLACK, scale=2, text=lab))
        cmds.append(DrawCommand(kind="circle", geometry=((cx, cy + 8), 7.0),
                                fill=PALETTE[cue[lab]], stroke=BLACK, width=1.0))
    for _ in range(decoys):
        i = int(rng.integers(0, len(labels)))
        cx, cy = centers[i]
        dx = float(rng.uniform(-BOX_W / 2 + 10, BOX_W / 2 - 10))
        cmds.append(DrawCommand(kind="circle", geometry=((cx + dx, cy + 20), 4.0),
                                fill=(170, 170, 170)))
    return cmds
