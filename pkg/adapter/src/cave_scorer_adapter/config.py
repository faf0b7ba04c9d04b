"""Adapter configuration."""

from __future__ import annotations

from dataclasses import dataclass

IMAGE_POLICIES = ("path", "base64", "both", "reject")


@dataclass
class AdapterConfig:
    model_path: str
    device: str = "cpu"
    max_batch_size: int = 8
    default_top_k: int = 500
    # which inline image forms requests may carry
    image_policy: str = "both"
    media_root: str = "."
    tokenizer: str = "auto"  # "auto" (from model dir) or "byte"

    def __post_init__(self) -> None:
        if self.default_top_k < 2:
            raise ValueError("default_top_k must be >= 2")
        if self.image_policy not in IMAGE_POLICIES:
            raise ValueError(f"image_policy must be one of {IMAGE_POLICIES}")
        if self.max_batch_size < 1:
            raise ValueError("max_batch_size must be >= 1")
