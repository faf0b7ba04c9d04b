"""Multi-round interleaved trajectory model.

A trajectory alternates context states, assistant actions (reason / zoom /
answer), and environment observations. States grow append-only: the segment
list of state t is a strict prefix of state t+1's list. Token bookkeeping is
done with an injected tokenizer so the model stays scorer-agnostic; image
references travel through payloads as opaque string tokens and are never
inspected here.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterable, Sequence

Tokenizer = Callable[[str], "list[int]"]

# A payload token is either a text token id (int) or an opaque image
# reference (str) resolvable against a media store.
Token = "int | str"


class TrajectoryError(Exception):
    """Base class for trajectory construction and query errors."""


class RoundLimitExceeded(TrajectoryError):
    """More round records than the configured maximum."""


class MalformedAction(TrajectoryError):
    """Zoom without a box, non-final answer, or unknown action kind."""


class NoAnswer(TrajectoryError):
    """The final action is not an Answer."""


class EmptyAnswer(TrajectoryError):
    """Answer-body extraction produced an empty span."""


class ActionKind(str, Enum):
    REASON = "reason"
    ZOOM = "zoom"
    ANSWER = "answer"


class Origin(str, Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"
    TOOL_OBSERVATION = "tool_observation"


_PIECE_RE = re.compile(r"[A-Za-z0-9]+|[^\sA-Za-z0-9]")
_hash_cache: dict[str, int] = {}


def _stable_id(piece: str) -> int:
    tid = _hash_cache.get(piece)
    if tid is None:
        digest = hashlib.sha256(piece.encode("utf-8")).digest()
        tid = int.from_bytes(digest[:4], "big") & 0x7FFFFFFF
        _hash_cache[piece] = tid
    return tid


def hash_word_tokenizer(text: str) -> list[int]:
    """Default offline tokenizer: word/punctuation pieces with stable hashed ids.

    Deterministic across runs and platforms; suitable for mock scoring where
    only token identity matters, not vocabulary membership.
    """
    return [_stable_id(p) for p in _PIECE_RE.findall(text)]


@dataclass(frozen=True)
class Segment:
    """One origin-tagged span of the context: text tokens plus image refs."""

    origin: Origin
    text: str
    tokens: tuple  # tuple[int | str, ...]; trailing strs are image refs
    image_refs: tuple = ()

    @property
    def token_count(self) -> int:
        return len(self.tokens)


def make_segment(origin: Origin, text: str, tokenizer: Tokenizer,
                 images: Sequence[str] = ()) -> Segment:
    refs = tuple(images)
    tokens = tuple(tokenizer(text)) + refs
    return Segment(origin=origin, text=text, tokens=tokens, image_refs=refs)


@dataclass(frozen=True)
class ZoomBox:
    """Axis-aligned rectangle in normalized image coordinates."""

    left: float
    top: float
    right: float
    bottom: float

    def is_valid(self) -> bool:
        return (0.0 <= self.left < self.right <= 1.0
                and 0.0 <= self.top < self.bottom <= 1.0)

    def area(self) -> float:
        return max(0.0, self.right - self.left) * max(0.0, self.bottom - self.top)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.left, self.top, self.right, self.bottom)


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    text: str
    tokens: tuple
    zoom_box: "ZoomBox | None" = None


@dataclass(frozen=True)
class Observation:
    payload: Segment
    source_action_round: int


@dataclass(frozen=True)
class ContextState:
    round_index: int
    segments: tuple  # tuple[Segment, ...]

    @property
    def token_count(self) -> int:
        return sum(s.token_count for s in self.segments)


@dataclass(frozen=True)
class AnswerSpan:
    """Token interval [start, end) of the answer body in the final message."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if not self.start < self.end:
            raise EmptyAnswer(f"empty answer span [{self.start}, {self.end})")


Round = "tuple[ContextState, Action, Observation | None]"


@dataclass(frozen=True)
class Trajectory:
    """Immutable multi-round trajectory; safe to share across threads."""

    rounds: tuple  # tuple[Round, ...]
    max_rounds: int
    ground_truth_text: str
    ground_truth_tokens: tuple
    tokenizer: Tokenizer = field(repr=False, compare=False, default=hash_word_tokenizer)

    @property
    def num_rounds(self) -> int:
        return len(self.rounds)

    @property
    def final_action(self) -> Action:
        return self.rounds[-1][1]

    def states(self) -> list[ContextState]:
        """All context states M_1..M_{T+1}, the last built by the prefix rule."""
        out = [r[0] for r in self.rounds]
        last_state, last_action, last_obs = self.rounds[-1]
        out.append(_advance(last_state, last_action, last_obs))
        return out

    def content_digest(self) -> str:
        """Stable digest over all structural content (tokenizer excluded)."""
        h = hashlib.sha256()
        for state, action, obs in self.rounds:
            h.update(repr((state.round_index,
                           tuple((s.origin.value, s.tokens) for s in state.segments),
                           action.kind.value, action.tokens,
                           action.zoom_box.as_tuple() if action.zoom_box else None,
                           obs.payload.tokens if obs else None)).encode())
        h.update(repr(self.ground_truth_tokens).encode())
        return h.hexdigest()


def _advance(state: ContextState, action: Action,
             observation: "Observation | None") -> ContextState:
    """Prefix rule: next segments are exactly the prior list + action (+ obs)."""
    action_seg = Segment(origin=Origin.ASSISTANT, text=action.text,
                         tokens=action.tokens)
    segments = state.segments + (action_seg,)
    if observation is not None:
        segments = segments + (observation.payload,)
    return ContextState(round_index=state.round_index + 1, segments=segments)


def _parse_action(record: "dict[str, Any]", tokenizer: Tokenizer,
                  round_index: int) -> Action:
    try:
        kind = ActionKind(record["kind"])
    except (KeyError, ValueError) as exc:
        raise MalformedAction(f"round {round_index}: bad action kind: {exc}") from exc
    text = record.get("text", "")
    box = None
    if kind is ActionKind.ZOOM:
        raw = record.get("zoom_box")
        if raw is None:
            raise MalformedAction(f"round {round_index}: zoom without a box")
        box = ZoomBox(*[float(v) for v in raw])
    return Action(kind=kind, text=text, tokens=tuple(tokenizer(text)), zoom_box=box)


def build_trajectory(initial: "Sequence[dict[str, Any]]",
                     rounds: "Sequence[dict[str, Any]]",
                     ground_truth: str,
                     tokenizer: Tokenizer = hash_word_tokenizer,
                     max_rounds: int = 5) -> Trajectory:
    """Assemble a trajectory from raw round records.

    `initial` lists the opening segments ({origin, text, images}) that form
    the first state. Each round record holds an `action` dict ({kind, text,
    zoom_box?}) and an optional `observation` dict ({text, images}).

    Raises RoundLimitExceeded when there are more records than `max_rounds`
    and MalformedAction for zooms without a box or a non-final answer.
    """
    if len(rounds) > max_rounds:
        raise RoundLimitExceeded(
            f"{len(rounds)} round records exceed max_rounds={max_rounds}")
    if not rounds:
        raise MalformedAction("a trajectory needs at least one round")

    segments = tuple(
        make_segment(Origin(rec.get("origin", "user")), rec.get("text", ""),
                     tokenizer, rec.get("images", ()))
        for rec in initial)
    state = ContextState(round_index=0, segments=segments)

    built: list[tuple] = []
    for idx, rec in enumerate(rounds):
        action = _parse_action(rec.get("action", {}), tokenizer, idx)
        if action.kind is ActionKind.ANSWER and idx != len(rounds) - 1:
            raise MalformedAction(f"round {idx}: answer before the final round")
        obs = None
        raw_obs = rec.get("observation")
        if raw_obs is not None:
            payload = make_segment(Origin.TOOL_OBSERVATION, raw_obs.get("text", ""),
                                   tokenizer, raw_obs.get("images", ()))
            obs = Observation(payload=payload, source_action_round=idx)
        built.append((state, action, obs))
        state = _advance(state, action, obs)

    return Trajectory(rounds=tuple(built), max_rounds=max_rounds,
                      ground_truth_text=ground_truth,
                      ground_truth_tokens=tuple(tokenizer(ground_truth)),
                      tokenizer=tokenizer)


def response_mask(trajectory: Trajectory) -> list[int]:
    """Per-token 0/1 mask over the final state plus the final action.

    Assistant-origin tokens get 1; system, user, and tool observations get 0,
    so they stay out of policy-gradient computation.
    """
    final_state = trajectory.rounds[-1][0]
    mask: list[int] = []
    for seg in final_state.segments:
        bit = 1 if seg.origin is Origin.ASSISTANT else 0
        mask.extend([bit] * seg.token_count)
    mask.extend([1] * len(trajectory.final_action.tokens))
    return mask


_MARKER_RE = re.compile(r"(?i)(?:final answer|answer)\s*(?:is|:)\s*")
_BRACE_RE = re.compile(r"\{([^{}]*)\}")


def extract_answer_body(text: str) -> tuple[str, int, int]:
    """Answer body and its character interval within `text`.

    Rule: the content of the last matched `{...}` pair when present, else the
    trailing non-whitespace run after the last answer marker (or of the whole
    text when no marker occurs). Surrounding whitespace is excluded.
    """
    matches = list(_BRACE_RE.finditer(text))
    if matches:
        m = matches[-1]
        inner = m.group(1)
        lead = len(inner) - len(inner.lstrip())
        body = inner.strip()
        start = m.start(1) + lead
        return body, start, start + len(body)
    tail_from = 0
    marker_matches = list(_MARKER_RE.finditer(text))
    if marker_matches:
        tail_from = marker_matches[-1].end()
    tail = text[tail_from:].rstrip()
    run = re.search(r"(\S+)\s*$", tail)
    if run is None:
        return "", len(text), len(text)
    start = tail_from + run.start(1)
    return run.group(1), start, start + len(run.group(1))


def answer_span_of(trajectory: Trajectory) -> AnswerSpan:
    """Token span of the answer body within the final assistant message.

    Raises NoAnswer when the final action is not an Answer and EmptyAnswer
    when extraction yields nothing.
    """
    action = trajectory.final_action
    if action.kind is not ActionKind.ANSWER:
        raise NoAnswer("final action is not an answer")
    body, char_start, char_end = extract_answer_body(action.text)
    if not body:
        raise EmptyAnswer("no answer body found in the final message")
    tok = trajectory.tokenizer
    start = len(tok(action.text[:char_start]))
    end = start + len(tok(body))
    return AnswerSpan(start=start, end=end)


def trajectory_to_dict(trajectory: Trajectory) -> "dict[str, Any]":
    """JSON-shaped document; see docs/trajectory-format.md."""
    initial_state = trajectory.rounds[0][0]
    doc: dict[str, Any] = {
        "initial": [
            {"origin": s.origin.value, "text": s.text, "images": list(s.image_refs)}
            for s in initial_state.segments
        ],
        "rounds": [],
        "ground_truth": trajectory.ground_truth_text,
        "max_rounds": trajectory.max_rounds,
    }
    for _, action, obs in trajectory.rounds:
        rec: dict[str, Any] = {
            "action": {"kind": action.kind.value, "text": action.text}
        }
        if action.zoom_box is not None:
            rec["action"]["zoom_box"] = list(action.zoom_box.as_tuple())
        rec["observation"] = (
            {"text": obs.payload.text, "images": list(obs.payload.image_refs)}
            if obs is not None else None)
        doc["rounds"].append(rec)
    try:
        span = answer_span_of(trajectory)
        doc["answer_span"] = [span.start, span.end]
    except TrajectoryError:
        doc["answer_span"] = None
    return doc


def trajectory_from_dict(doc: "dict[str, Any]",
                         tokenizer: Tokenizer = hash_word_tokenizer,
                         max_rounds: "int | None" = None) -> Trajectory:
    return build_trajectory(
        initial=doc.get("initial", ()),
        rounds=doc["rounds"],
        ground_truth=doc.get("ground_truth", ""),
        tokenizer=tokenizer,
        max_rounds=max_rounds if max_rounds is not None else doc.get("max_rounds", 5),
    )
