"""Procedural scenario generators with verifiable latent ground truth."""

from __future__ import annotations

from typing import Any, Callable, Sequence

from ..render import Canvas
from .base import (PALETTE, BenchSample, DependencyGraph, DifficultyProfile,
                   GenerationInfeasible, GraphNode, LatentScene,
                   OracleMismatch, render_scene, with_difficulty_bin)
from .linetrace import gen_line_trace
from .match import gen_embedded_match
from .oracle import match_window_hits, oracle_answer
from .rs import SourceExhausted, gen_rs_match, rect_iou, texture_std
from .tvjump import gen_tv_jump
from .vjump import gen_vjump

BINARY_SCENARIOS = ("match", "rs")
SCENARIOS = ("vjump", "lt", "match", "rs", "tvjump")

# default difficulty strata; quotas split a batch evenly across bins with the
# remainder going to the earliest bins
DEFAULT_STRATA: "dict[str, list[tuple[str, DifficultyProfile]]]" = {
    "vjump": [
        ("easy", DifficultyProfile(1, 1, 0.18)),
        ("medium", DifficultyProfile(2, 3, 0.28)),
        ("hard", DifficultyProfile(3, 5, 0.38)),
    ],
    "lt": [
        ("easy", DifficultyProfile(1, 0, 0.15, noise_density=0.001)),
        ("medium", DifficultyProfile(1, 2, 0.25, noise_density=0.002)),
        ("hard", DifficultyProfile(1, 4, 0.35, noise_density=0.003)),
    ],
    # scale_rotation present turns on fine 15-degree rotation variation
    "match": [
        ("easy", DifficultyProfile(1, 0, 0.0, scale_rotation=None)),
        ("medium", DifficultyProfile(1, 1, 0.0, scale_rotation=(1.0, 0))),
        ("hard", DifficultyProfile(1, 2, 0.0, scale_rotation=(1.0, 0))),
    ],
    "rs": [
        ("easy", DifficultyProfile(1, 0, 0.0, scale_rotation=None)),
        ("medium", DifficultyProfile(1, 0, 0.0, scale_rotation=(1.0, 90))),
        ("hard", DifficultyProfile(1, 0, 0.0, scale_rotation=(2.0, 270))),
    ],
    "tvjump": [
        ("easy", DifficultyProfile(1, 2, 0.20)),
        ("medium", DifficultyProfile(2, 4, 0.30)),
        ("hard", DifficultyProfile(3, 6, 0.35)),
    ],
}

ID_PREFIX = {"vjump": "vjump", "lt": "lt", "match": "match", "rs": "rs",
             "tvjump": "tvjump"}


def split_quotas(count: int, bins: int) -> list:
    base, rem = divmod(count, bins)
    return [base + (1 if i < rem else 0) for i in range(bins)]


def generate_one(scenario: str, profile: DifficultyProfile, seed: int,
                 force_label: "str | None" = None,
                 sample_id: "str | None" = None,
                 source_dir: "str | None" = None,
                 ) -> "tuple[LatentScene, BenchSample]":
    if scenario == "vjump":
        return gen_vjump(profile, seed, sample_id=sample_id)
    if scenario == "lt":
        return gen_line_trace(profile, seed, sample_id=sample_id)
    if scenario == "match":
        return gen_embedded_match(profile, seed, force_label=force_label,
                                  sample_id=sample_id)
    if scenario == "rs":
        if source_dir is None:
            raise ValueError("rs generation requires a source image directory")
        return gen_rs_match(source_dir, profile, seed, force_label=force_label,
                            sample_id=sample_id)
    if scenario == "tvjump":
        return gen_tv_jump(profile, seed, sample_id=sample_id)
    raise KeyError(f"unknown scenario {scenario!r}")


def generate_batch(scenario: str, count: int, seed_base: int = 0,
                   strata: "Sequence[tuple[str, DifficultyProfile]] | None" = None,
                   quotas: "Sequence[int] | None" = None,
                   source_dir: "str | None" = None,
                   check_oracle: bool = True,
                   render: bool = True,
                   ) -> "list[tuple[LatentScene, BenchSample, Canvas | None]]":
    """Generate a stratified, label-balanced batch of samples.

    Sample i uses seed `seed_base + i`; binary scenarios alternate forced
    labels so any batch stays balanced within one sample. Every latent answer
    is cross-checked by the independent oracle unless disabled.
    """
    if scenario not in SCENARIOS:
        raise KeyError(f"unknown scenario {scenario!r}")
    strata = list(strata) if strata is not None else DEFAULT_STRATA[scenario]
    quotas = list(quotas) if quotas is not None else split_quotas(count, len(strata))
    if len(quotas) != len(strata):
        raise ValueError("one quota per stratum required")
    if sum(quotas) != count:
        raise ValueError(f"quotas {quotas} do not sum to count {count}")

    binary = scenario in BINARY_SCENARIOS
    out = []
    index = 0
    for (bin_name, profile), quota in zip(strata, quotas):
        for _ in range(quota):
            seed = seed_base + index
            force = None
            if binary:
                force = "yes" if index % 2 == 0 else "no"
            sid = f"{ID_PREFIX[scenario]}_{index}"
            scene, sample = generate_one(scenario, profile, seed,
                                         force_label=force, sample_id=sid,
                                         source_dir=source_dir)
            sample = with_difficulty_bin(profile, sample, bin_name)
            if check_oracle:
                recomputed = oracle_answer(scene)
                if recomputed != sample.answer:
                    raise OracleMismatch(
                        f"{sid}: oracle says {recomputed!r}, "
                        f"generator says {sample.answer!r}")
            canvas = render_scene(scene) if render else None
            out.append((scene, sample, canvas))
            index += 1
    return out
