"""Teacher-forced scoring against an autoregressive language model.

For a fixed target under a rendered context, the engine returns the log
probability of each target token given everything before it, plus the
Shannon entropy of the renormalized top-k next-token distribution at each
target position. Scoring is sampling-free and, on deterministic kernels,
bit-stable across repeats and batch compositions.
"""

from __future__ import annotations

import base64
import binascii
import io
import os
import threading
from dataclasses import dataclass
from typing import Sequence

import torch
import torch.nn.functional as F
from PIL import Image, UnidentifiedImageError

from .config import AdapterConfig
from .tokenizers import BYTE_BOS, ByteTokenizer, load_tokenizer

ORIGIN_TAGS = {
    "system": "<|system|>",
    "user": "<|user|>",
    "assistant": "<|assistant|>",
    "tool_observation": "<|observation|>",
}
IMAGE_PLACEHOLDER = "[image:{}]"


class MediaError(ValueError):
    """Image reference cannot be decoded under the configured policy."""


class SchemaError(ValueError):
    """Request JSON does not match the wire schema."""


@dataclass(frozen=True)
class WireSegment:
    origin: str
    text: str
    images: tuple


@dataclass(frozen=True)
class WireRequest:
    context: tuple  # tuple[WireSegment, ...]
    target: str
    top_k: int


def parse_request(doc: object, default_top_k: int) -> WireRequest:
    if not isinstance(doc, dict):
        raise SchemaError("request body must be a JSON object")
    context = doc.get("context")
    target = doc.get("target")
    if not isinstance(context, list):
        raise SchemaError("'context' must be a list of segments")
    if not isinstance(target, str) or not target:
        raise SchemaError("'target' must be a non-empty string")
    top_k = doc.get("top_k", default_top_k)
    if not isinstance(top_k, int) or isinstance(top_k, bool) or top_k < 2:
        raise SchemaError("'top_k' must be an integer >= 2")
    segments = []
    for i, seg in enumerate(context):
        if not isinstance(seg, dict):
            raise SchemaError(f"context[{i}] must be an object")
        origin = seg.get("origin")
        if origin not in ORIGIN_TAGS:
            raise SchemaError(f"context[{i}].origin must be one of "
                              f"{sorted(ORIGIN_TAGS)}")
        text = seg.get("text", "")
        if not isinstance(text, str):
            raise SchemaError(f"context[{i}].text must be a string")
        images = seg.get("images", [])
        if not isinstance(images, list) or not all(isinstance(v, str)
                                                   for v in images):
            raise SchemaError(f"context[{i}].images must be a list of strings")
        segments.append(WireSegment(origin=origin, text=text,
                                    images=tuple(images)))
    return WireRequest(context=tuple(segments), target=target, top_k=top_k)


class ScoringEngine:
    """Owns the model, tokenizer, and media decoding."""

    def __init__(self, cfg: AdapterConfig) -> None:
        self.cfg = cfg
        self.tokenizer = load_tokenizer(cfg.tokenizer, cfg.model_path)
        self._lock = threading.Lock()
        from transformers import AutoModelForCausalLM

        self.model = AutoModelForCausalLM.from_pretrained(cfg.model_path)
        self.model.to(cfg.device)
        self.model.eval()
        self.vocab_size = int(self.model.get_output_embeddings().weight.shape[0])
        self.model_id = os.path.basename(os.path.normpath(cfg.model_path))

    # media ------------------------------------------------------------------

    def _check_image(self, ref: str) -> str:
        """Validate one image reference and return its placeholder token."""
        policy = self.cfg.image_policy
        if policy == "reject":
            raise MediaError("this deployment does not accept images")
        is_b64 = ref.startswith("data:") or (len(ref) > 512 and os.sep not in ref)
        if is_b64:
            if policy == "path":
                raise MediaError("inline base64 images are not accepted")
            payload = ref.split(",", 1)[-1]
            try:
                raw = base64.b64decode(payload, validate=True)
                with Image.open(io.BytesIO(raw)) as img:
                    img.verify()
            except (binascii.Error, UnidentifiedImageError, OSError) as exc:
                raise MediaError(f"undecodable inline image: {exc}") from exc
            name = f"inline-{len(raw)}b"
        else:
            if policy == "base64":
                raise MediaError("path-based images are not accepted")
            path = ref if os.path.isabs(ref) else os.path.join(
                self.cfg.media_root, ref)
            try:
                with Image.open(path) as img:
                    img.verify()
            except (FileNotFoundError, UnidentifiedImageError, OSError) as exc:
                raise MediaError(f"unreadable image {ref!r}: {exc}") from exc
            name = os.path.basename(ref)
        return IMAGE_PLACEHOLDER.format(name)

    def render_context(self, segments: "Sequence[WireSegment]") -> str:
        """Flatten segments into the scoring prompt.

        Text-only backbones consume validated images as stable placeholder
        tokens; swapping in a VLM backbone would map them to pixel features
        behind this same interface.
        """
        parts = []
        for seg in segments:
            chunk = ORIGIN_TAGS[seg.origin] + seg.text
            for ref in seg.images:
                chunk += self._check_image(ref)
            parts.append(chunk)
        return "\n".join(parts)

    # scoring ------------------------------------------------------------------

    def score(self, request: WireRequest) -> dict:
        context_text = self.render_context(request.context)
        context_ids = self.tokenizer.encode(context_text)
        target_ids = self.tokenizer.encode(request.target)
        if not target_ids:
            raise SchemaError("target tokenizes to zero tokens")
        logprobs, entropies = self._teacher_forced(context_ids, target_ids,
                                                   request.top_k)
        return {
            "logprobs": logprobs,
            "topk_entropies": entropies,
            "tokenizer_id": self.tokenizer.tokenizer_id,
        }

    def score_many(self, requests: "Sequence[WireRequest]") -> list:
        """Queue-style entry point; replies are independent of batching."""
        return [self.score(req) for req in requests]

    def _teacher_forced(self, context_ids: list, target_ids: list,
                        top_k: int) -> "tuple[list, list]":
        bos = getattr(self.model.config, "bos_token_id", None)
        prefix = [bos if bos is not None else BYTE_BOS]
        ids = prefix + list(context_ids) + list(target_ids)
        if max(ids) >= self.vocab_size or min(ids) < 0:
            raise SchemaError("token ids exceed the model vocabulary")
        k = min(top_k, self.vocab_size)
        start = len(prefix) + len(context_ids)
        with self._lock, torch.no_grad():
            input_ids = torch.tensor([ids], dtype=torch.long,
                                     device=self.cfg.device)
            logits = self.model(input_ids=input_ids).logits[0].double()
            # logits[i] predicts ids[i + 1]
            rows = logits[start - 1:start - 1 + len(target_ids)]
            logprob_rows = F.log_softmax(rows, dim=-1)
            picked = logprob_rows[torch.arange(len(target_ids)),
                                  torch.tensor(target_ids)]
            top_logits = torch.topk(rows, k=k, dim=-1).values
            # softmax over the k retained logits IS the renormalized top-k
            top_probs = F.softmax(top_logits, dim=-1)
            plogp = torch.where(top_probs > 0,
                                top_probs * torch.log(top_probs),
                                torch.zeros_like(top_probs))
            entropy = (-plogp.sum(dim=-1)).clamp(min=0.0)
        return ([float(v) for v in picked], [float(v) for v in entropy])
