from __future__ import annotations

import pytest

from cave.generators.rs import make_synthetic_sources
from cave.trajectory import build_trajectory


@pytest.fixture(scope="session")
def rs_sources(tmp_path_factory) -> str:
    d = tmp_path_factory.mktemp("rs_sources")
    make_synthetic_sources(str(d), count=4, seed=7)
    return str(d)


INITIAL = [
    {"origin": "system", "text": "You answer visual questions."},
    {"origin": "user",
     "text": "Does the template appear in the grid? Respond with only {yes} or {no}.",
     "images": ["scene.png"]},
]


def three_round_rounds() -> list:
    return [
        {"action": {"kind": "reason", "text": "First inspect the template box."}},
        {"action": {"kind": "zoom",
                    "text": "Zoom into the upper right corner of the grid.",
                    "zoom_box": [0.55, 0.1, 0.95, 0.5]},
         "observation": {"text": "The crop shows a triangle pointing upward.",
                         "images": ["crop_1.png"]}},
        {"action": {"kind": "answer", "text": "So the answer is {yes}."}},
    ]


@pytest.fixture
def three_round_trajectory():
    return build_trajectory(INITIAL, three_round_rounds(), ground_truth="yes")


def make_answer_only_trajectory():
    return build_trajectory(
        INITIAL,
        [{"action": {"kind": "answer", "text": "Answer: {no}."}}],
        ground_truth="no")
