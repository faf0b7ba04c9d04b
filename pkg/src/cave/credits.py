"""Structured per-step process credits from teacher-forcing outputs.

Three complementary signals per round: belief update (adjacent-state gain in
mean answer-body log-likelihood), evidence acquisition (mean positive gain in
recoverability of textualized evidence units), and adaptive focus control
(gated match between zoom scale and an uncertainty-derived target scale).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

from .scoring import (DEFAULT_TOP_K, EmptySpan, ScoreMatrix, Scorer,
                      teacher_forcing_pass)
from .trajectory import (Action, ActionKind, Tokenizer, Trajectory,
                         extract_answer_body, hash_word_tokenizer)


@dataclass(frozen=True)
class EvidenceUnit:
    """A textualized task-critical visual fact with its token sequence."""

    text: str
    tokens: tuple
    unit_id: str

    def __post_init__(self) -> None:
        if not self.tokens:
            raise ValueError(f"evidence unit {self.unit_id!r} has no tokens")


_SENTENCE_SPLIT = re.compile(r"[.;]")


def split_evidence_units(perception: str,
                         tokenizer: Tokenizer = hash_word_tokenizer,
                         prefix: str = "ev") -> list[EvidenceUnit]:
    """Split a perception string into units on sentence boundaries (. or ;)."""
    units = []
    for i, chunk in enumerate(_SENTENCE_SPLIT.split(perception)):
        text = chunk.strip()
        if not text:
            continue
        tokens = tuple(tokenizer(text))
        if tokens:
            units.append(EvidenceUnit(text=text, tokens=tokens,
                                      unit_id=f"{prefix}_{i}"))
    return units


@dataclass(frozen=True)
class FocusConfig:
    rho_min: float = 0.02
    rho_max: float = 0.30
    entropy_top_k: int = DEFAULT_TOP_K

    def __post_init__(self) -> None:
        if not (0.0 < self.rho_min < self.rho_max <= 1.0):
            raise ValueError(f"need 0 < rho_min < rho_max <= 1, "
                             f"got ({self.rho_min}, {self.rho_max})")
        if self.entropy_top_k < 2:
            raise ValueError("entropy_top_k must be >= 2")


@dataclass(frozen=True)
class StepCredits:
    round_index: int
    c_bu: float
    c_ea: float
    c_af: float
    is_zoom: bool
    rho: "float | None" = None
    rho_hat: "float | None" = None
    u: "float | None" = None
    gate: "float | None" = None
    invalid_zoom: bool = False

    def to_dict(self) -> dict:
        return {
            "round": self.round_index,
            "c_bu": self.c_bu, "c_ea": self.c_ea, "c_af": self.c_af,
            "is_zoom": self.is_zoom, "rho": self.rho, "rho_hat": self.rho_hat,
            "u": self.u, "gate": self.gate, "invalid_zoom": self.invalid_zoom,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "StepCredits":
        return cls(round_index=int(doc["round"]), c_bu=float(doc["c_bu"]),
                   c_ea=float(doc["c_ea"]), c_af=float(doc["c_af"]),
                   is_zoom=bool(doc["is_zoom"]),
                   rho=doc.get("rho"), rho_hat=doc.get("rho_hat"),
                   u=doc.get("u"), gate=doc.get("gate"),
                   invalid_zoom=bool(doc.get("invalid_zoom", False)))


def belief_value(logprobs: Sequence[float]) -> float:
    """Answer-side state value: mean per-token log-likelihood over the span."""
    if not logprobs:
        raise EmptySpan("belief value needs a non-empty answer span")
    return sum(logprobs) / len(logprobs)


def belief_credit(v_next: float, v_prev: float) -> float:
    return v_next - v_prev


def evidence_credit(unit_scores_next: Sequence[float],
                    unit_scores_prev: Sequence[float]) -> float:
    """Mean positive recoverability gain across evidence units; 0 when K = 0."""
    if len(unit_scores_next) != len(unit_scores_prev):
        raise ValueError("unit score arrays must align by unit_id")
    k = len(unit_scores_next)
    if k == 0:
        return 0.0
    return sum(max(0.0, nxt - prv)
               for nxt, prv in zip(unit_scores_next, unit_scores_prev)) / k


def normalized_uncertainty(topk_entropies: Sequence[float], k: int) -> float:
    """Mean top-k entropy over the answer span, normalized by ln(k) to [0, 1]."""
    if not topk_entropies:
        raise EmptySpan("uncertainty needs a non-empty answer span")
    u = (sum(topk_entropies) / len(topk_entropies)) / math.log(k)
    return min(1.0, max(0.0, u))


def target_scale(u: float, cfg: FocusConfig) -> float:
    return cfg.rho_min + (cfg.rho_max - cfg.rho_min) * u


def focus_gate(c_bu: float, c_ea: float) -> float:
    """Positive-progress gate in [0, 1): zero when neither credit is positive."""
    return 1.0 - math.exp(-(max(0.0, c_bu) + c_ea))


def focus_credit(action: Action, c_bu: float, c_ea: float,
                 rho_hat: float) -> "tuple[float, float | None, bool]":
    """Scale-match credit for zoom actions: (credit, rho, invalid_flag).

    Non-zoom actions get 0. Zooms with an out-of-bounds or degenerate box get
    0 and the invalid flag rather than a hard error, so malformed rollouts
    still enter group statistics. The distance term is clamped at 0, which is
    inert under default crop-scale ranges.
    """
    if action.kind is not ActionKind.ZOOM:
        return 0.0, None, False
    box = action.zoom_box
    if box is None or not box.is_valid() or box.area() <= 0.0:
        return 0.0, None, True
    rho = box.area()
    credit = focus_gate(c_bu, c_ea) * max(0.0, 1.0 - abs(rho - rho_hat))
    return credit, rho, False


def answer_body_target(trajectory: Trajectory) -> "tuple[tuple, str]":
    """Ground-truth answer-body tokens and text (format wrappers excluded)."""
    body, _, _ = extract_answer_body(trajectory.ground_truth_text)
    if not body:
        body = trajectory.ground_truth_text.strip()
    tokens = tuple(trajectory.tokenizer(body))
    if not tokens:
        raise EmptySpan("ground truth answer body has no tokens")
    return tokens, body


def score_trajectory(scorer: Scorer, trajectory: Trajectory,
                     evidence: "Sequence[EvidenceUnit]",
                     cfg: FocusConfig) -> ScoreMatrix:
    """One teacher-forcing pass over all states with answer + evidence targets."""
    answer_tokens, answer_text = answer_body_target(trajectory)
    targets = [answer_tokens] + [u.tokens for u in evidence]
    texts = [answer_text] + [u.text for u in evidence]
    return teacher_forcing_pass(scorer, trajectory, targets, texts,
                                entropy_top_k=cfg.entropy_top_k)


def compute_step_credits(trajectory: Trajectory, scorer: Scorer,
                         evidence: "Sequence[EvidenceUnit]",
                         cfg: "FocusConfig | None" = None) -> list[StepCredits]:
    """Per-round structured credits for a full trajectory.

    The uncertainty feeding the target scale is taken at the pre-action state
    M_t; the gate uses the same step's belief and evidence credits, i.e. the
    progress observed after the action's observation lands.
    """
    cfg = cfg if cfg is not None else FocusConfig()
    matrix = score_trajectory(scorer, trajectory, evidence, cfg)

    # target 0 is the answer body; targets 1..K are evidence units
    v = [belief_value(matrix.at(t, 0).logprobs) for t in range(matrix.num_states)]
    s = [[belief_value(matrix.at(t, j + 1).logprobs) for j in range(len(evidence))]
         for t in range(matrix.num_states)]

    out: list[StepCredits] = []
    for t, (state, action, _obs) in enumerate(trajectory.rounds):
        c_bu = belief_credit(v[t + 1], v[t])
        c_ea = evidence_credit(s[t + 1], s[t])
        u_t = normalized_uncertainty(matrix.at(t, 0).topk_entropies,
                                     cfg.entropy_top_k)
        rho_hat = target_scale(u_t, cfg)
        is_zoom = action.kind is ActionKind.ZOOM
        c_af, rho, invalid = focus_credit(action, c_bu, c_ea, rho_hat)
        out.append(StepCredits(
            round_index=state.round_index,
            c_bu=c_bu, c_ea=c_ea, c_af=c_af, is_zoom=is_zoom,
            rho=rho, rho_hat=rho_hat if is_zoom else None,
            u=u_t if is_zoom else None,
            gate=focus_gate(c_bu, c_ea) if is_zoom else None,
            invalid_zoom=invalid))
    return out
