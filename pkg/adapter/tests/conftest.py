from __future__ import annotations

import os

import pytest
import torch

from cave_scorer_adapter.config import AdapterConfig
from cave_scorer_adapter.engine import ScoringEngine

FIXTURES = os.path.normpath(os.path.join(os.path.dirname(__file__), "..", "..",
                                         "fixtures", "scorer_protocol"))


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory) -> str:
    """A small randomly initialized causal LM saved locally.

    Random weights are fine: every assertion compares the adapter against a
    manual forward pass through the same network, not against model quality.
    """
    from transformers import GPT2Config, GPT2LMHeadModel

    d = tmp_path_factory.mktemp("tiny_model")
    config = GPT2Config(vocab_size=257, n_positions=2048, n_embd=32,
                        n_layer=2, n_head=2, bos_token_id=0, eos_token_id=0)
    torch.manual_seed(1234)
    model = GPT2LMHeadModel(config)
    model.save_pretrained(str(d))
    return str(d)


@pytest.fixture(scope="session")
def engine(tiny_model_dir) -> ScoringEngine:
    cfg = AdapterConfig(model_path=tiny_model_dir, tokenizer="byte",
                        media_root=FIXTURES)
    return ScoringEngine(cfg)


@pytest.fixture(scope="session")
def client(tiny_model_dir):
    from fastapi.testclient import TestClient

    from cave_scorer_adapter.server import create_app

    cfg = AdapterConfig(model_path=tiny_model_dir, tokenizer="byte",
                        media_root=FIXTURES)
    with TestClient(create_app(cfg)) as c:
        yield c
