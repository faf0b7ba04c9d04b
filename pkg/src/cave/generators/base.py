"""Shared machinery for procedural scenario generation.

Every sample is produced from its own seeded random stream, and every answer
is a pure function of the latent scene state, never of rendered pixels. A
bounded retry budget turns unsatisfiable placement constraints into
GenerationInfeasible instead of unbounded loops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Sequence

import numpy as np

from ..render import Canvas, DrawCommand, render

RETRY_BUDGET = 64

# named fill palette; names appear in prompts and perception text
PALETTE: "dict[str, tuple[int, int, int]]" = {
    "red": (211, 47, 47),
    "blue": (25, 118, 210),
    "green": (56, 142, 60),
    "orange": (239, 108, 0),
    "purple": (123, 31, 162),
    "teal": (0, 137, 123),
    "magenta": (194, 24, 91),
    "brown": (121, 85, 72),
    "navy": (26, 35, 126),
    "olive": (130, 119, 23),
    "maroon": (127, 0, 0),
    "cyan": (0, 151, 167),
}
PALETTE_NAMES = tuple(PALETTE)


class GenerationInfeasible(RuntimeError):
    """Constraints could not be satisfied within the retry budget."""


class OracleMismatch(AssertionError):
    """Independent answer recomputation disagrees with the stored label."""


@dataclass(frozen=True)
class DifficultyProfile:
    """Per-scenario difficulty knobs; each scenario reads its own subset."""

    dependency_length: int = 2
    structural_distractors: int = 2
    cross_region_distance: float = 0.25  # fraction of the canvas diagonal
    scale_rotation: "tuple[float, int] | None" = None  # (scale, rotation degrees)
    noise_density: float = 0.002  # background speckle dots per pixel

    def as_dict(self) -> dict:
        return {
            "dependency_length": self.dependency_length,
            "structural_distractors": self.structural_distractors,
            "cross_region_distance": self.cross_region_distance,
            "scale_rotation": list(self.scale_rotation) if self.scale_rotation else None,
        }


@dataclass(frozen=True)
class GraphNode:
    node_id: str
    shape: str
    color: str
    rotation: float
    position: tuple  # (x, y) canvas coordinates


@dataclass(frozen=True)
class DependencyGraph:
    nodes: tuple  # tuple[GraphNode, ...]
    edges: tuple  # tuple[(src_id, dst_id, label), ...], directed

    def node(self, node_id: str) -> GraphNode:
        for n in self.nodes:
            if n.node_id == node_id:
                return n
        raise KeyError(node_id)

    def out_edges(self, node_id: str, label: "str | None" = None) -> list:
        return [e for e in self.edges
                if e[0] == node_id and (label is None or e[2] == label)]


@dataclass(frozen=True)
class LatentScene:
    scenario: str
    seed: int
    graph: DependencyGraph
    placements: tuple  # ((name, x, y), ...) of structural element anchors
    rule_sequence: tuple = ()
    transform: "tuple[float, int] | None" = None  # (scale, rotation degrees)
    label: str = ""
    width: int = 480
    height: int = 360
    draw_commands: tuple = field(default=(), repr=False)
    extra: "dict[str, Any]" = field(default_factory=dict, repr=False)

    def structure(self) -> dict:
        """Canonical structural description used for layout hashing.

        Quantizes placements to a 1/64-canvas grid and excludes cosmetic
        style so jitter-free layout reuse is detectable.
        """
        quant = [
            (name, int(round(x / self.width * 64)), int(round(y / self.height * 64)))
            for name, x, y in self.placements
        ]
        return {
            "scenario": self.scenario,
            "placements": sorted(quant),
            "nodes": sorted((n.node_id, n.shape, n.color, round(n.rotation, 1))
                            for n in self.graph.nodes),
            "edges": sorted(self.graph.edges),
            "rules": list(self.rule_sequence),
            "transform": list(self.transform) if self.transform else None,
            "structure_extra": self.extra.get("structure", None),
        }


@dataclass(frozen=True)
class BenchSample:
    """One benchmark record in the prompt-answer-perception format."""

    id: str
    image: str
    prompt: str
    answer: str
    perception: str
    metadata: "dict[str, Any]" = field(default_factory=dict)

    def to_record(self) -> dict:
        doc: dict = {"id": self.id, "image": self.image, "prompt": self.prompt,
                     "answer": self.answer, "perception": self.perception}
        if self.metadata:
            doc["metadata"] = self.metadata
        return doc

    @classmethod
    def from_record(cls, doc: dict) -> "BenchSample":
        return cls(id=doc["id"], image=doc["image"], prompt=doc["prompt"],
                   answer=doc["answer"], perception=doc["perception"],
                   metadata=doc.get("metadata", {}))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def render_scene(scene: LatentScene) -> Canvas:
    return render(scene.draw_commands, scene.width, scene.height)


def place_separated(rng: np.random.Generator, count: int,
                    bounds: tuple, min_dist: float,
                    fixed: Sequence = ()) -> list:
    """Sample `count` points inside bounds pairwise >= min_dist apart.

    `fixed` points also repel new ones. Raises GenerationInfeasible when the
    retry budget runs out, which signals an over-constrained profile.
    """
    x0, y0, x1, y1 = bounds
    points: list = list(fixed)
    placed: list = []
    for _ in range(count):
        for attempt in range(RETRY_BUDGET + 1):
            if attempt == RETRY_BUDGET:
                raise GenerationInfeasible(
                    f"cannot place {count} points {min_dist:.0f}px apart in {bounds}")
            px = float(rng.uniform(x0, x1))
            py = float(rng.uniform(y0, y1))
            if all(math.hypot(px - qx, py - qy) >= min_dist for qx, qy in points):
                points.append((px, py))
                placed.append((px, py))
                break
    return placed


def speckle_commands(rng: np.random.Generator, width: int, height: int,
                     density: float, color: tuple = (150, 150, 150)) -> list:
    count = int(density * width * height)
    if count <= 0:
        return []
    pts = tuple((float(rng.uniform(0, width)), float(rng.uniform(0, height)))
                for _ in range(count))
    return [DrawCommand(kind="speckle", geometry=pts, stroke=color, width=2.0)]


def metadata_for(scenario: str, seed: int, profile: DifficultyProfile,
                 **extra: Any) -> dict:
    meta = {"scenario": scenario, "seed": int(seed),
            "difficulty": profile.as_dict()}
    meta.update(extra)
    return meta


def with_difficulty_bin(profile: DifficultyProfile, sample: BenchSample,
                        bin_name: str) -> BenchSample:
    meta = dict(sample.metadata)
    difficulty = dict(meta.get("difficulty", {}))
    difficulty["bin"] = bin_name
    meta["difficulty"] = difficulty
    return replace(sample, metadata=meta)
