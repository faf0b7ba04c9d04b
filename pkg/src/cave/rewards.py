"""Trajectory reward aggregation, task anchors, and group-relative advantages.

Step credits are clipped, round-decayed, and summed per credit type; the
weighted combination forms the structured process reward. Lightweight
anchoring terms (answer correctness, format validity, round overrun) keep
training stable, and groups of trajectory rewards are standardized into
mean-zero advantages paired with response masks for a downstream trainer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .credits import StepCredits
from .trajectory import (ActionKind, Trajectory, TrajectoryError,
                         extract_answer_body, response_mask)


class GroupTooSmall(ValueError):
    """Group-relative advantages need at least two trajectories."""


@dataclass(frozen=True)
class RewardConfig:
    lambda_bu: float = 0.4
    lambda_ea: float = 0.3
    lambda_af: float = 0.3
    decay_base: float = 0.8
    clip_lo: float = -1.0
    clip_hi: float = 2.0
    anchor_answer: float = 1.0
    anchor_format: float = 0.1
    anchor_round_penalty: float = 0.1
    group_delta: float = 1e-4
    # "total" standardizes anchored rewards; "cave" uses the raw process reward
    advantage_source: str = "total"
    population_std: bool = True

    def __post_init__(self) -> None:
        if not (0.0 < self.decay_base <= 1.0):
            raise ValueError("decay_base must lie in (0, 1]")
        if not self.clip_lo < self.clip_hi:
            raise ValueError("clip_lo must be < clip_hi")
        if min(self.lambda_bu, self.lambda_ea, self.lambda_af) < 0:
            raise ValueError("credit weights must be non-negative")
        if self.advantage_source not in ("total", "cave"):
            raise ValueError("advantage_source must be 'total' or 'cave'")


@dataclass(frozen=True)
class Anchors:
    answer_correct: int = 0
    format_valid: int = 0
    round_penalty: float = 0.0


@dataclass(frozen=True)
class TrajectoryReward:
    c_bu: float
    c_ea: float
    c_af: float
    r_cave: float
    anchors: "Anchors | None" = None
    r_total: "float | None" = None

    def to_dict(self) -> dict:
        doc = {"C_bu": self.c_bu, "C_ea": self.c_ea, "C_af": self.c_af,
               "R_cave": self.r_cave}
        if self.anchors is not None:
            doc["anchors"] = {"answer_correct": self.anchors.answer_correct,
                              "format_valid": self.anchors.format_valid,
                              "round_penalty": self.anchors.round_penalty}
            doc["R_total"] = self.r_total
        return doc


def _clip(value: float, lo: float, hi: float) -> float:
    return min(hi, max(lo, value))


def aggregate(credits: Sequence[StepCredits],
              cfg: "RewardConfig | None" = None) -> TrajectoryReward:
    """Round-decayed sum of clipped step credits per type, then the weighted mix."""
    cfg = cfg if cfg is not None else RewardConfig()
    if not credits:
        raise ValueError("aggregate needs at least one step")
    c_bu = c_ea = c_af = 0.0
    for t, step in enumerate(credits):
        w = cfg.decay_base ** t
        c_bu += w * _clip(step.c_bu, cfg.clip_lo, cfg.clip_hi)
        c_ea += w * _clip(step.c_ea, cfg.clip_lo, cfg.clip_hi)
        c_af += w * _clip(step.c_af, cfg.clip_lo, cfg.clip_hi)
    r_cave = cfg.lambda_bu * c_bu + cfg.lambda_ea * c_ea + cfg.lambda_af * c_af
    return TrajectoryReward(c_bu=c_bu, c_ea=c_ea, c_af=c_af, r_cave=r_cave)


def normalize_answer(text: str) -> str:
    """Case-insensitive comparison key: braces and whitespace stripped."""
    return text.strip().strip("{}").strip().lower()


def answer_is_correct(trajectory: Trajectory, reference_answer: str) -> bool:
    try:
        if trajectory.final_action.kind is not ActionKind.ANSWER:
            return False
        body, _, _ = extract_answer_body(trajectory.final_action.text)
    except TrajectoryError:
        return False
    return normalize_answer(body) == normalize_answer(reference_answer)


def format_is_valid(trajectory: Trajectory) -> bool:
    """Valid when the run ends in an Answer carrying a brace-delimited body."""
    action = trajectory.final_action
    if action.kind is not ActionKind.ANSWER:
        return False
    body, start, _ = extract_answer_body(action.text)
    return bool(body) and start > 0 and "{" in action.text and "}" in action.text


def apply_anchors(reward: TrajectoryReward, trajectory: Trajectory,
                  reference_answer: str,
                  cfg: "RewardConfig | None" = None) -> TrajectoryReward:
    """Add task-anchoring terms on top of the process reward."""
    cfg = cfg if cfg is not None else RewardConfig()
    correct = 1 if answer_is_correct(trajectory, reference_answer) else 0
    fmt = 1 if format_is_valid(trajectory) else 0
    overrun = max(0, trajectory.num_rounds - trajectory.max_rounds)
    penalty = cfg.anchor_round_penalty * overrun
    total = (reward.r_cave + cfg.anchor_answer * correct
             + cfg.anchor_format * fmt - penalty)
    return TrajectoryReward(
        c_bu=reward.c_bu, c_ea=reward.c_ea, c_af=reward.c_af,
        r_cave=reward.r_cave,
        anchors=Anchors(answer_correct=correct, format_valid=fmt,
                        round_penalty=penalty),
        r_total=total)


@dataclass(frozen=True)
class GroupAdvantage:
    rewards: tuple
    advantages: tuple
    mean: float
    std: float


def group_advantages(rewards: Sequence[float],
                     delta: float = 1e-4,
                     population_std: bool = True) -> GroupAdvantage:
    """Standardize rewards within a rollout group: (r - mean) / (std + delta)."""
    g = len(rewards)
    if g < 2:
        raise GroupTooSmall(f"group size {g} < 2")
    first = rewards[0]
    if all(r == first for r in rewards):
        # std and every numerator are exactly zero; avoid float residue
        return GroupAdvantage(rewards=tuple(rewards),
                              advantages=(0.0,) * g, mean=first, std=0.0)
    mean = sum(rewards) / g
    denom = g if population_std else g - 1
    var = sum((r - mean) ** 2 for r in rewards) / denom
    std = math.sqrt(var)
    if std + delta == 0.0:  # variance underflow with delta = 0
        advantages = (0.0,) * g
    else:
        advantages = tuple((r - mean) / (std + delta) for r in rewards)
    return GroupAdvantage(rewards=tuple(rewards), advantages=advantages,
                          mean=mean, std=std)


@dataclass(frozen=True)
class ZoomRateReport:
    rate: float
    zoom_steps: int
    useful_steps: int
    no_zooms: bool


def useful_zoom_rate(credit_tables: "Sequence[Sequence[StepCredits]]") -> ZoomRateReport:
    """Fraction of zoom steps with positive belief or evidence gain."""
    zooms = useful = 0
    for table in credit_tables:
        for step in table:
            if step.is_zoom:
                zooms += 1
                if step.c_bu > 0.0 or step.c_ea > 0.0:
                    useful += 1
    if zooms == 0:
        return ZoomRateReport(rate=0.0, zoom_steps=0, useful_steps=0, no_zooms=True)
    return ZoomRateReport(rate=useful / zooms, zoom_steps=zooms,
                          useful_steps=useful, no_zooms=False)


def masked_advantage_export(group: GroupAdvantage,
                            trajectories: Sequence[Trajectory]) -> list[dict]:
    """Pair each scalar advantage with its trajectory's response mask."""
    if len(trajectories) != len(group.advantages):
        raise ValueError("one trajectory per group member required")
    return [{"advantage": adv, "response_mask": response_mask(traj)}
            for adv, traj in zip(group.advantages, trajectories)]
