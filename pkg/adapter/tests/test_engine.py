from __future__ import annotations

import math

import pytest
import torch
import torch.nn.functional as F

from cave_scorer_adapter.engine import WireRequest, WireSegment, parse_request
from cave_scorer_adapter.tokenizers import ByteTokenizer


def make_request(target="yes", top_k=50, images=()):
    return WireRequest(
        context=(
            WireSegment(origin="system", text="You answer visual questions.",
                        images=()),
            WireSegment(origin="user",
                        text="Is the region brighter? Respond with {yes} or {no}.",
                        images=tuple(images)),
        ),
        target=target, top_k=top_k)


def manual_forward(engine, request):
    """Independent teacher-forced pass through the same network."""
    tok = ByteTokenizer()
    context_text = engine.render_context(request.context)
    ids = [0] + tok.encode(context_text) + tok.encode(request.target)
    target_ids = tok.encode(request.target)
    start = len(ids) - len(target_ids)
    with torch.no_grad():
        logits = engine.model(
            input_ids=torch.tensor([ids], dtype=torch.long)).logits[0].double()
    out = []
    for j, tid in enumerate(target_ids):
        row = F.log_softmax(logits[start + j - 1], dim=-1)
        out.append(float(row[tid]))
    return out


def test_logprobs_match_manual_forward_pass(engine):
    for target in ("yes", "no", "R4", "a longer target phrase"):
        request = make_request(target=target)
        reply = engine.score(request)
        expected = manual_forward(engine, request)
        assert len(reply["logprobs"]) == len(expected)
        for ours, ref in zip(reply["logprobs"], expected):
            assert abs(ours - ref) <= 1e-4
            assert ours <= 0.0


def test_entropy_bound_every_position(engine):
    for top_k in (2, 10, 50, 257):
        reply = engine.score(make_request(target="some words", top_k=top_k))
        bound = math.log(top_k) + 1e-12
        for h in reply["topk_entropies"]:
            assert 0.0 <= h <= bound


def test_top_k_above_vocab_clamped(engine):
    reply = engine.score(make_request(target="ok", top_k=5000))
    # clamp keeps entropies legal for the request bound and the vocab bound
    for h in reply["topk_entropies"]:
        assert 0.0 <= h <= math.log(engine.vocab_size) + 1e-12


def test_reply_lengths_follow_server_tokenization(engine):
    tok = ByteTokenizer()
    target = "multi byte target"
    reply = engine.score(make_request(target=target))
    assert len(reply["logprobs"]) == len(tok.encode(target))
    assert len(reply["topk_entropies"]) == len(reply["logprobs"])
    assert reply["tokenizer_id"] == "byte-v1"


def test_repeat_determinism(engine):
    request = make_request(target="stable output")
    first = engine.score(request)
    for _ in range(5):
        assert engine.score(request) == first


def test_batching_equivalence(engine):
    requests = [make_request(target=t, top_k=25)
                for t in ("alpha", "beta", "gamma", "delta")]
    individual = [engine.score(r) for r in requests]
    batched = engine.score_many(requests)
    assert batched == individual
    shuffled = engine.score_many(list(reversed(requests)))[::-1]
    assert shuffled == individual


def test_entropy_is_renormalized_topk(engine):
    """Entropy must come from the renormalized top-k slice of the logits."""
    tok = ByteTokenizer()
    request = make_request(target="q", top_k=7)
    context_text = engine.render_context(request.context)
    ids = [0] + tok.encode(context_text)
    with torch.no_grad():
        logits = engine.model(
            input_ids=torch.tensor([ids], dtype=torch.long)).logits[0, -1].double()
    probs = F.softmax(logits, dim=-1)
    top = torch.topk(probs, k=7).values
    top = top / top.sum()
    expected = float(-(top * torch.log(top)).sum())
    reply = engine.score(request)
    assert reply["topk_entropies"][0] == pytest.approx(expected, abs=1e-9)


def test_parse_request_defaults_and_errors():
    doc = {"context": [{"origin": "user", "text": "q"}], "target": "t"}
    wire = parse_request(doc, default_top_k=123)
    assert wire.top_k == 123
    for bad in [
        [],  # not an object
        {"context": "x", "target": "t"},
        {"context": [], "target": ""},
        {"context": [{"origin": "weird", "text": ""}], "target": "t"},
        {"context": [], "target": "t", "top_k": 1},
        {"context": [], "target": "t", "top_k": True},
        {"context": [{"origin": "user", "text": 3}], "target": "t"},
    ]:
        with pytest.raises(Exception):
            parse_request(bad, default_top_k=500)
