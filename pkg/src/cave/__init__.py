"""Structured process credits for interleaved visual reasoning trajectories,
group-relative advantages, procedural cross-region benchmarks, and the
matching evaluation statistics."""

from .credits import (EvidenceUnit, FocusConfig, StepCredits, belief_credit,
                      belief_value, compute_step_credits, evidence_credit,
                      focus_credit, normalized_uncertainty,
                      split_evidence_units, target_scale)
from .rewards import (GroupAdvantage, RewardConfig, TrajectoryReward,
                      aggregate, apply_anchors, group_advantages,
                      masked_advantage_export, useful_zoom_rate)
from .scoring import (HashScorer, MockScorer, MockScorerTable, RemoteScorer,
                      ScorerQuery, ScorerReply, score_target,
                      teacher_forcing_pass)
from .trajectory import (Action, ActionKind, AnswerSpan, ContextState,
                         Observation, Origin, Segment, Trajectory, ZoomBox,
                         answer_span_of, build_trajectory, response_mask)

__version__ = "0.1.0"
