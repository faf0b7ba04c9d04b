"""Tokenizers owned by the adapter; reply array lengths are authoritative.

The byte-level tokenizer needs no vocabulary files and pairs with any model
whose vocabulary covers 257 ids; HF tokenizers load from the model directory
when available.
"""

from __future__ import annotations

BYTE_BOS = 0
BYTE_OFFSET = 1  # byte b maps to id b + 1
BYTE_VOCAB = 257


class ByteTokenizer:
    """UTF-8 bytes shifted by one; id 0 is the BOS marker."""

    tokenizer_id = "byte-v1"
    vocab_size = BYTE_VOCAB

    def encode(self, text: str) -> list:
        return [b + BYTE_OFFSET for b in text.encode("utf-8")]

    def decode(self, ids: list) -> str:
        return bytes(i - BYTE_OFFSET for i in ids if i >= BYTE_OFFSET).decode(
            "utf-8", errors="replace")


class HfTokenizer:
    """Thin wrapper over a transformers tokenizer loaded from the model dir."""

    def __init__(self, path: str) -> None:
        from transformers import AutoTokenizer

        self._tok = AutoTokenizer.from_pretrained(path)
        self.tokenizer_id = getattr(self._tok, "name_or_path", path)
        self.vocab_size = int(self._tok.vocab_size)

    def encode(self, text: str) -> list:
        return list(self._tok.encode(text, add_special_tokens=False))

    def decode(self, ids: list) -> str:
        return self._tok.decode(ids)


def load_tokenizer(kind: str, model_path: str):
    if kind == "byte":
        return ByteTokenizer()
    if kind == "auto":
        try:
            return HfTokenizer(model_path)
        except Exception:
            return ByteTokenizer()
    raise ValueError(f"unknown tokenizer kind {kind!r}")
