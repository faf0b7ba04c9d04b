from __future__ import annotations

import dataclasses
import json
import os

import pytest

from cave.dataset import (DatasetManifest, InsufficientPool, IoError,
                          SchemaViolation, build_manifest, layout_hash,
                          read_jsonl, stratify_and_balance, verify_isolation,
                          write_dataset, write_jsonl)
from cave.generators import generate_batch
from cave.generators.base import BenchSample

LISTING_RECORD = {
    "id": "match_0",
    "image": "./images/exp_0000.png",
    "prompt": (
        "The left side shows a 2x2 template inside a black box, consisting "
        "of basic shapes (triangle, square, circle, parallelogram, pentagon) "
        "each with a specific rotation angle and uniform visual size. The "
        "right side shows a 4x4 large image inside a black box (sharing a "
        "common edge with the template box) filled with the same types of "
        "shapes (uniform visual size, random rotation except for template "
        "area). Please check if the exact shape pattern of the template "
        "(including the identical rotation angle for each corresponding "
        "shape) exists in the large image. Respond with only {yes} or {no}."),
    "answer": "yes",
    "perception": "Equilateral triangle in template points upward.",
}


def test_listing_record_round_trip(tmp_path):
    sample = BenchSample.from_record(LISTING_RECORD)
    path = str(tmp_path / "one.jsonl")
    write_jsonl([sample], path)
    back = read_jsonl(path)
    assert len(back) == 1
    assert back[0].to_record() == LISTING_RECORD
    assert back[0].answer == "yes"
    assert back[0].perception == "Equilateral triangle in template points upward."


def test_empty_file_reads_empty(tmp_path):
    path = str(tmp_path / "empty.jsonl")
    open(path, "w").close()
    assert read_jsonl(path) == []


def test_round_trip_generated_batch(tmp_path):
    items = generate_batch("match", 24, seed_base=300, render=False)
    samples = [s for _, s, _ in items]
    path = str(tmp_path / "batch.jsonl")
    write_jsonl(samples, path)
    assert read_jsonl(path) == samples


def test_schema_violations(tmp_path):
    path = str(tmp_path / "bad.jsonl")
    with open(path, "w") as fh:
        fh.write('{"id": "x", "image": "i", "prompt": "p"}\n')
    with pytest.raises(SchemaViolation, match="missing fields"):
        read_jsonl(path)
    with open(path, "w") as fh:
        fh.write(json.dumps({**LISTING_RECORD, "extra_key": 1}) + "\n")
    with pytest.raises(SchemaViolation, match="unknown fields"):
        read_jsonl(path)
    with open(path, "w") as fh:
        fh.write("not json\n")
    with pytest.raises(SchemaViolation, match="invalid JSON"):
        read_jsonl(path)
    with pytest.raises(IoError):
        read_jsonl(str(tmp_path / "missing.jsonl"))


def test_layout_hash_structure_sensitivity():
    items = generate_batch("vjump", 2, seed_base=70, render=False)
    a, b = items[0][0], items[1][0]
    assert layout_hash(a) == layout_hash(a)
    assert layout_hash(a) != layout_hash(b)


def test_layout_hash_ignores_sub_quantization_jitter():
    scene = generate_batch("vjump", 1, seed_base=70, render=False)[0][0]
    nudged = dataclasses.replace(
        scene,
        placements=tuple((name, x + 0.01, y - 0.01)
                         for name, x, y in scene.placements))
    assert layout_hash(scene) == layout_hash(nudged)


def test_manifest_determinism(tmp_path):
    items = generate_batch("match", 10, seed_base=40, render=False)
    samples = [s for _, s, _ in items]
    scenes = [sc for sc, _, _ in items]
    m1 = build_manifest("bench", samples, scenes)
    m2 = build_manifest("bench", samples, scenes)
    assert m1.to_dict() == m2.to_dict()
    m1.save(str(tmp_path / "m.json"))
    assert DatasetManifest.load(str(tmp_path / "m.json")).to_dict() == m1.to_dict()


def _manifests_disjoint():
    train_items = generate_batch("match", 12, seed_base=0, render=False)
    bench_items = generate_batch("match", 12, seed_base=5000, render=False)
    train = build_manifest("train", [s for _, s, _ in train_items],
                           [sc for sc, _, _ in train_items])
    bench = build_manifest("bench", [s for _, s, _ in bench_items],
                           [sc for sc, _, _ in bench_items])
    return train, bench


def test_isolation_clean_on_disjoint():
    train, bench = _manifests_disjoint()
    report = verify_isolation(train, bench)
    assert report.clean
    assert report.to_dict()["violations"] == []


def test_isolation_detects_seed_overlap():
    train, bench = _manifests_disjoint()
    bench.seed_ranges["match"] = [[5, 8]]
    train.seed_ranges["match"] = [[0, 11]]
    report = verify_isolation(train, bench)
    assert len(report.by_factor("seed_overlap")) == 1


def test_isolation_detects_planted_layout_duplicate():
    train, bench = _manifests_disjoint()
    bench.layout_hashes[0] = train.layout_hashes[3]
    report = verify_isolation(train, bench)
    assert len(report.by_factor("layout_collision")) == 1


def test_isolation_detects_rs_region_overlap():
    train, bench = _manifests_disjoint()
    train.rs_regions["source_00.png"] = [[10, 10, 60, 60]]
    bench.rs_regions["source_00.png"] = [[50, 50, 90, 90]]
    report = verify_isolation(train, bench)
    hits = report.by_factor("rs_region_overlap")
    assert len(hits) == 1 and "source_00.png" in hits[0].detail


def test_isolation_rs_touching_rects_are_clean():
    train, bench = _manifests_disjoint()
    train.rs_regions["s.png"] = [[0, 0, 50, 50]]
    bench.rs_regions["s.png"] = [[50, 0, 100, 50]]  # shares an edge, IoU 0
    assert verify_isolation(train, bench).clean


def test_isolation_detects_identical_tuple():
    train, bench = _manifests_disjoint()
    bench.tuple_hashes[2] = train.tuple_hashes[7]
    report = verify_isolation(train, bench)
    assert len(report.by_factor("identical_tuple")) == 1


def test_isolation_detects_within_split_layout_duplicate():
    train, bench = _manifests_disjoint()
    train.layout_hashes.append(train.layout_hashes[0])
    report = verify_isolation(train, bench)
    assert len(report.by_factor("layout_collision")) == 1


def test_stratify_balance_odd_binary():
    pool = generate_batch("match", 300, seed_base=100, render=False)
    samples = [s for _, s, _ in pool]
    chosen = stratify_and_balance(samples, {"match": 245})
    assert len(chosen) == 245
    yes = sum(1 for s in chosen if s.answer == "yes")
    assert (yes, 245 - yes) == (123, 122)


def test_stratify_bin_quotas_exact():
    pool = generate_batch("vjump", 300, seed_base=100, render=False)
    samples = [s for _, s, _ in pool]
    quotas = {"easy": 80, "medium": 80, "hard": 85}
    chosen = stratify_and_balance(samples, {"vjump": 245},
                                  bin_quotas={"vjump": quotas})
    bins = [s.metadata["difficulty"]["bin"] for s in chosen]
    assert {b: bins.count(b) for b in quotas} == quotas


def test_stratify_insufficient_pool():
    pool = [s for _, s, _ in generate_batch("match", 10, seed_base=0,
                                            render=False)]
    with pytest.raises(InsufficientPool):
        stratify_and_balance(pool, {"match": 50})


def test_write_dataset_tree(tmp_path):
    items = generate_batch("match", 4, seed_base=800)
    jsonl_path, manifest_path = write_dataset(items, str(tmp_path), "bench")
    assert os.path.exists(jsonl_path)
    assert os.path.exists(manifest_path)
    samples = read_jsonl(jsonl_path)
    for sample in samples:
        assert os.path.exists(os.path.join(str(tmp_path), sample.image))
    manifest = DatasetManifest.load(manifest_path)
    assert manifest.counts == {"match": 4}
    assert len(manifest.layout_hashes) == 4
