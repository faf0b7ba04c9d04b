"""Teacher-forcing scorer contract, deterministic mocks, and a remote client.

A scorer answers: given a context state and a fixed target token sequence,
what are the per-token log-probabilities (nats) and the per-token entropies
of the renormalized top-k next-token distribution? The mock variants are
pure and let the whole pipeline run offline; the remote client speaks the
HTTP wire protocol served by a model-backed adapter.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol, Sequence

import requests

from .trajectory import ContextState, Trajectory

DEFAULT_TOP_K = 500


class ScoringError(Exception):
    """Base class for scorer failures."""


class ScorerUnavailable(ScoringError):
    """Remote transport failure or non-2xx protocol error."""


class VocabularyMismatch(ScoringError):
    """Reply violates the contract (lengths, bounds, or token range)."""


class EmptySpan(ScoringError):
    """A score was requested over an empty token interval."""


@dataclass(frozen=True)
class ScorerQuery:
    context: ContextState
    target: tuple  # tuple[int, ...]
    entropy_top_k: int = DEFAULT_TOP_K
    target_text: str = ""  # used by remote transports, which tokenize themselves

    def __post_init__(self) -> None:
        if not self.target:
            raise EmptySpan("query target must be non-empty")
        if self.entropy_top_k < 2:
            raise ValueError("entropy_top_k must be >= 2")


@dataclass(frozen=True)
class ScorerReply:
    logprobs: tuple  # tuple[float, ...], nats, each <= 0
    topk_entropies: tuple  # tuple[float, ...], nats, each in [0, ln k]

    def __post_init__(self) -> None:
        if len(self.logprobs) != len(self.topk_entropies):
            raise VocabularyMismatch("logprob/entropy length mismatch")


def validate_reply(reply: ScorerReply, query: ScorerQuery,
                   expect_target_length: bool = True) -> ScorerReply:
    """Reject replies that break the scorer contract."""
    if expect_target_length and len(reply.logprobs) != len(query.target):
        raise VocabularyMismatch(
            f"reply length {len(reply.logprobs)} != target length {len(query.target)}")
    max_h = math.log(query.entropy_top_k)
    for lp in reply.logprobs:
        if lp > 0.0 or math.isnan(lp):
            raise VocabularyMismatch(f"logprob {lp} out of range (must be <= 0)")
    for h in reply.topk_entropies:
        if h < 0.0 or h > max_h + 1e-12 or math.isnan(h):
            raise VocabularyMismatch(f"entropy {h} outside [0, ln {query.entropy_top_k}]")
    return reply


class Scorer(Protocol):
    def score(self, query: ScorerQuery) -> ScorerReply: ...


def score_target(scorer: Scorer, query: ScorerQuery) -> ScorerReply:
    """Contract-level entry point: score and re-validate the reply bounds.

    Local scorers must match the target length; remote scorers own their
    tokenization, so only the value bounds are enforced for them.
    """
    reply = scorer.score(query)
    return validate_reply(reply, query,
                          expect_target_length=not isinstance(scorer, RemoteScorer))


def context_fingerprint(context: ContextState) -> str:
    """Stable hash over the segment list; distinct states get distinct keys."""
    h = hashlib.sha256()
    for seg in context.segments:
        h.update(seg.origin.value.encode())
        h.update(b"\x00")
        for tok in seg.tokens:
            h.update(repr(tok).encode())
            h.update(b"\x01")
        h.update(b"\x02")
    return h.hexdigest()


@dataclass
class MockScorerTable:
    """Deterministic (fingerprint, token, position) -> (logprob, entropy) table."""

    entries: "dict[tuple[str, int, int], tuple[float, float]]" = field(default_factory=dict)
    default_logprob: float = -1.0
    default_entropy: float = 0.5

    def set(self, fingerprint: str, token: int, position: int,
            logprob: float, entropy: float) -> None:
        self.entries[(fingerprint, token, position)] = (logprob, entropy)

    def lookup(self, fingerprint: str, token: int, position: int) -> tuple:
        return self.entries.get((fingerprint, token, position),
                                (self.default_logprob, self.default_entropy))

    def to_dict(self) -> "dict[str, Any]":
        return {
            "default_logprob": self.default_logprob,
            "default_entropy": self.default_entropy,
            "entries": [
                {"fingerprint": fp, "token": tok, "position": pos,
                 "logprob": lp, "entropy": ent}
                for (fp, tok, pos), (lp, ent) in sorted(self.entries.items())
            ],
        }

    @classmethod
    def from_dict(cls, doc: "dict[str, Any]") -> "MockScorerTable":
        table = cls(default_logprob=float(doc.get("default_logprob", -1.0)),
                    default_entropy=float(doc.get("default_entropy", 0.5)))
        for e in doc.get("entries", ()):
            table.set(e["fingerprint"], int(e["token"]), int(e["position"]),
                      float(e["logprob"]), float(e["entropy"]))
        return table


class MockScorer:
    """Pure table-backed scorer: identical queries yield identical replies."""

    def __init__(self, table: "MockScorerTable | None" = None) -> None:
        self.table = table if table is not None else MockScorerTable()

    def score(self, query: ScorerQuery) -> ScorerReply:
        fp = context_fingerprint(query.context)
        logprobs = []
        entropies = []
        max_h = math.log(query.entropy_top_k)
        for pos, tok in enumerate(query.target):
            lp, ent = self.table.lookup(fp, int(tok), pos)
            logprobs.append(min(0.0, lp))
            entropies.append(min(max(ent, 0.0), max_h))
        reply = ScorerReply(logprobs=tuple(logprobs), topk_entropies=tuple(entropies))
        return validate_reply(reply, query)


class HashScorer:
    """Pure procedural scorer deriving values from a salted hash.

    Produces varied but fully deterministic logprobs in [lo, hi] and
    entropies in [0, ln k]; useful for randomized fixtures without a table.
    """

    def __init__(self, salt: str = "", logprob_lo: float = -4.0,
                 logprob_hi: float = -0.05) -> None:
        self.salt = salt
        self.logprob_lo = logprob_lo
        self.logprob_hi = logprob_hi

    def _unit(self, *parts: object) -> float:
        h = hashlib.sha256(repr((self.salt,) + parts).encode()).digest()
        return int.from_bytes(h[:8], "big") / 2.0 ** 64

    def score(self, query: ScorerQuery) -> ScorerReply:
        fp = context_fingerprint(query.context)
        max_h = math.log(query.entropy_top_k)
        logprobs = []
        entropies = []
        for pos, tok in enumerate(query.target):
            u = self._unit(fp, tok, pos, "lp")
            logprobs.append(self.logprob_lo + (self.logprob_hi - self.logprob_lo) * u)
            entropies.append(max_h * self._unit(fp, tok, pos, "h"))
        reply = ScorerReply(logprobs=tuple(logprobs), topk_entropies=tuple(entropies))
        return validate_reply(reply, query)


def query_to_wire(query: ScorerQuery) -> "dict[str, Any]":
    """Wire request: the server tokenizes `target` itself, so text is sent."""
    context = []
    for seg in query.context.segments:
        context.append({
            "origin": seg.origin.value,
            "text": seg.text,
            "images": list(seg.image_refs),
        })
    return {"context": context, "target": query.target_text, "top_k": query.entropy_top_k}


def reply_from_wire(doc: "dict[str, Any]") -> ScorerReply:
    try:
        return ScorerReply(logprobs=tuple(float(v) for v in doc["logprobs"]),
                           topk_entropies=tuple(float(v) for v in doc["topk_entropies"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise VocabularyMismatch(f"malformed wire reply: {exc}") from exc


class RemoteScorer:
    """Client for the HTTP `/score` wire protocol.

    The server owns tokenization: reply arrays follow the server's own
    tokenization of `target_text` and their length is authoritative, so
    replies are validated for bounds but not against the local token count.
    """

    def __init__(self, endpoint: str,
                 post: "Callable[..., Any] | None" = None,
                 timeout: float = 60.0) -> None:
        self.endpoint = endpoint.rstrip("/")
        self._post = post if post is not None else requests.post
        self.timeout = timeout

    def score(self, query: ScorerQuery) -> ScorerReply:
        payload = query_to_wire(query)
        try:
            resp = self._post(self.endpoint + "/score", json=payload,
                              timeout=self.timeout)
        except Exception as exc:  # transport failure
            raise ScorerUnavailable(f"POST {self.endpoint}/score failed: {exc}") from exc
        if getattr(resp, "status_code", 0) != 200:
            detail = ""
            try:
                detail = resp.json().get("error", "")
            except Exception:
                pass
            raise ScorerUnavailable(
                f"scorer returned {resp.status_code}: {detail or 'no detail'}")
        reply = reply_from_wire(resp.json())
        return validate_reply(reply, query, expect_target_length=False)


@dataclass(frozen=True)
class ScoreMatrix:
    """Replies indexed by (state index 0..T, target index)."""

    replies: tuple  # tuple[tuple[ScorerReply, ...], ...]

    @property
    def num_states(self) -> int:
        return len(self.replies)

    def at(self, state_index: int, target_index: int) -> ScorerReply:
        return self.replies[state_index][target_index]


def teacher_forcing_pass(scorer: Scorer, trajectory: Trajectory,
                         targets: "Sequence[tuple]",
                         target_texts: "Sequence[str] | None" = None,
                         entropy_top_k: int = DEFAULT_TOP_K) -> ScoreMatrix:
    """Score every fixed target under every state M_1..M_{T+1}.

    The pass is read-only with respect to the trajectory and assembles the
    matrix in deterministic (state, target) order regardless of how the
    scorer batches or interleaves the underlying queries.
    """
    if target_texts is None:
        target_texts = ["" for _ in targets]
    states = trajectory.states()
    rows = []
    for t, state in enumerate(states):
        row = []
        for j, target in enumerate(targets):
            query = ScorerQuery(context=state, target=tuple(target),
                                entropy_top_k=entropy_top_k,
                                target_text=target_texts[j])
            try:
                row.append(scorer.score(query))
            except ScoringError as exc:
                raise type(exc)(f"state {t}, target {j}: {exc}") from exc
        rows.append(tuple(row))
    return ScoreMatrix(replies=tuple(rows))


def load_mock_table(path: str) -> MockScorerTable:
    with open(path, "r", encoding="utf-8") as fh:
        return MockScorerTable.from_dict(json.load(fh))
