"""Rule-switching navigation scenes.

A walk starts at a labeled node and alternates between two transition rules:
follow the unique outgoing arrow, or jump to the unique other node sharing
the current node's fill color. Rules are listed in the prompt in order, so
the evidence chain interleaves local directional cues with nonlocal color
matches. Distractor nodes and arrows never make a walk transition ambiguous.
"""

from __future__ import annotations

import math
import string

import numpy as np

from ..render import BLACK, DrawCommand
from .base import (PALETTE, PALETTE_NAMES, BenchSample, DependencyGraph,
                   DifficultyProfile, GenerationInfeasible, GraphNode,
                   LatentScene, make_rng, metadata_for, place_separated)
from .shapes import CIRCLE_RADIUS, SHAPE_KINDS, shape_points

WIDTH, HEIGHT = 480, 360
NODE_SIZE = 34.0
RULE_ARROW = "arrow"
RULE_COLOR = "color"

PROMPT_TEMPLATE = (
    "The image shows labeled shapes connected by arrows. Start at the node "
    "labeled {start}. Apply the following rules in order: {rules} After "
    "applying all rules, you arrive at a final node. Respond with only the "
    "final node label in braces, e.g. {{A}}."
)


def _rule_text(rules: "tuple[str, ...]") -> str:
    parts = []
    for i, rule in enumerate(rules):
        if rule == RULE_ARROW:
            parts.append(f"{i + 1}. follow the outgoing arrow from the current node;")
        else:
            parts.append(f"{i + 1}. jump to the other node that has the same "
                         "fill color as the current node;")
    return " ".join(parts)


def _sample_rules(rng: np.random.Generator, hops: int) -> tuple:
    """Interleaved rule list with no two color rules in a row.

    Consecutive color rules would force three nodes to share one color and
    make the middle transition ambiguous, so they are excluded up front.
    """
    rules: list = []
    for _ in range(hops):
        if rules and rules[-1] == RULE_COLOR:
            rules.append(RULE_ARROW)
        else:
            rules.append(RULE_ARROW if rng.random() < 0.5 else RULE_COLOR)
    if hops >= 2 and all(r == RULE_ARROW for r in rules):
        # force genuine rule switching on longer walks
        slot = int(rng.integers(0, hops))
        rules[slot] = RULE_COLOR
    return tuple(rules)


def gen_vjump(profile: DifficultyProfile, seed: int,
              sample_id: "str | None" = None) -> "tuple[LatentScene, BenchSample]":
    rng = make_rng(seed)
    hops = max(1, profile.dependency_length)
    distractors = max(0, profile.structural_distractors)
    n_nodes = hops + 1 + distractors
    if n_nodes > 24:
        raise GenerationInfeasible(f"{n_nodes} nodes exceed the label alphabet")

    diag = math.hypot(WIDTH, HEIGHT)
    walk_gap = min(profile.cross_region_distance * diag, diag * 0.55)
    margin = NODE_SIZE
    bounds = (margin, margin, WIDTH - margin, HEIGHT - margin - 18)

    rules = _sample_rules(rng, hops)

    # place walk nodes first so consecutive ones honor the distance profile
    for _ in range(8):
        try:
            walk_pts = _place_walk(rng, hops + 1, bounds, walk_gap)
            other_pts = place_separated(rng, distractors, bounds,
                                        min_dist=NODE_SIZE * 1.6, fixed=walk_pts)
            break
        except GenerationInfeasible:
            walk_gap *= 0.85
    else:
        raise GenerationInfeasible("node placement failed for the profile")

    labels = list(string.ascii_uppercase[:n_nodes])
    rng.shuffle(labels)
    walk_labels = labels[:hops + 1]
    other_labels = labels[hops + 1:]

    # color assignment: each color rule consumes a fresh color for its pair;
    # remaining nodes draw from colors never used by a color rule
    color_rule_steps = [i for i, r in enumerate(rules) if r == RULE_COLOR]
    names = list(PALETTE_NAMES)
    rng.shuffle(names)
    pair_colors = {step: names[k] for k, step in enumerate(color_rule_steps)}
    free_colors = names[len(color_rule_steps):]
    if not free_colors:
        raise GenerationInfeasible("palette exhausted by color rules")

    node_color: "dict[str, str]" = {}
    for i, rule in enumerate(rules):
        if rule == RULE_COLOR:
            node_color[walk_labels[i]] = pair_colors[i]
            node_color[walk_labels[i + 1]] = pair_colors[i]
    for lab in walk_labels + other_labels:
        if lab not in node_color:
            node_color[lab] = free_colors[int(rng.integers(0, len(free_colors)))]

    positions = dict(zip(walk_labels + other_labels, walk_pts + other_pts))
    nodes = tuple(
        GraphNode(node_id=lab,
                  shape=SHAPE_KINDS[int(rng.integers(0, len(SHAPE_KINDS)))],
                  color=node_color[lab],
                  rotation=float(rng.integers(0, 24) * 15),
                  position=positions[lab])
        for lab in walk_labels + other_labels)

    # walk arrows; distractor arrows only leave non-walk nodes so every
    # arrow transition from a walk node stays unique
    edges = []
    for i, rule in enumerate(rules):
        if rule == RULE_ARROW:
            edges.append((walk_labels[i], walk_labels[i + 1], RULE_ARROW))
    arrow_sources = set(e[0] for e in edges)
    for lab in other_labels:
        if rng.random() < 0.75 and lab not in arrow_sources:
            target = labels[int(rng.integers(0, n_nodes))]
            if target != lab:
                edges.append((lab, target, RULE_ARROW))
                arrow_sources.add(lab)

    graph = DependencyGraph(nodes=nodes, edges=tuple(edges))
    answer = walk_labels[-1]

    perception = []
    for i, rule in enumerate(rules):
        src, dst = walk_labels[i], walk_labels[i + 1]
        if rule == RULE_ARROW:
            perception.append(f"Step {i + 1}: the arrow from node {src} points to node {dst}.")
        else:
            perception.append(f"Step {i + 1}: node {src} is {node_color[src]}; "
                              f"the other {node_color[src]} node is {dst}.")

    scene = LatentScene(
        scenario="vjump", seed=int(seed), graph=graph,
        placements=tuple((lab, *positions[lab]) for lab in labels),
        rule_sequence=rules, label=answer, width=WIDTH, height=HEIGHT,
        draw_commands=tuple(_draw(nodes, edges)),
        extra={"start": walk_labels[0], "walk": list(walk_labels),
               "structure": {"start": walk_labels[0]}})

    sid = sample_id if sample_id is not None else f"vjump_{seed}"
    sample = BenchSample(
        id=sid, image=f"./images/{sid}.png",
        prompt=PROMPT_TEMPLATE.format(start=walk_labels[0], rules=_rule_text(rules)),
        answer=answer, perception=" ".join(perception),
        metadata=metadata_for("vjump", seed, profile, start=walk_labels[0]))
    return scene, sample


def _place_walk(rng: np.random.Generator, count: int, bounds: tuple,
                gap: float) -> list:
    """Walk-node chain where consecutive nodes sit at least `gap` apart."""
    x0, y0, x1, y1 = bounds
    for _ in range(8):
        pts = [(float(rng.uniform(x0, x1)), float(rng.uniform(y0, y1)))]
        ok = True
        for _i in range(count - 1):
            for attempt in range(32):
                px = float(rng.uniform(x0, x1))
                py = float(rng.uniform(y0, y1))
                prev = pts[-1]
                if math.hypot(px - prev[0], py - prev[1]) < gap:
                    continue
                if all(math.hypot(px - qx, py - qy) >= NODE_SIZE * 1.6
                       for qx, qy in pts):
                    pts.append((px, py))
                    break
            else:
                ok = False
                break
        if ok:
            return pts
    raise GenerationInfeasible(f"walk placement failed (gap {gap:.0f}px)")


def _draw(nodes: tuple, edges: list) -> list:
    cmds: list = []
    pos = {n.node_id: n.position for n in nodes}
    for src, dst, _ in edges:
        sx, sy = pos[src]
        dx, dy = pos[dst]
        norm = math.hypot(dx - sx, dy - sy) or 1.0
        ux, uy = (dx - sx) / norm, (dy - sy) / norm
        r = NODE_SIZE * 0.62
        cmds.append(DrawCommand(
            kind="arrow",
            geometry=((sx + ux * r, sy + uy * r), (dx - ux * r, dy - uy * r)),
            stroke=(60, 60, 60), width=2.0))
    for n in nodes:
        color = PALETTE[n.color]
        if n.shape == "circle":
            cmds.append(DrawCommand(kind="circle",
                                    geometry=(n.position, CIRCLE_RADIUS * NODE_SIZE),
                                    fill=color, stroke=BLACK, width=1.5))
        else:
            cmds.append(DrawCommand(kind="polygon",
                                    geometry=tuple(shape_points(
                                        n.shape, n.position, NODE_SIZE, n.rotation)),
                                    fill=color, stroke=BLACK, width=1.5))
        cmds.append(DrawCommand(kind="glyph_label",
                                geometry=((n.position[0] - 5,
                                           n.position[1] + NODE_SIZE * 0.62 + 3),),
                                stroke=BLACK, scale=2, text=n.node_id))
    return cmds
