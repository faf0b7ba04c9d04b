"""JSONL dataset I/O, split manifests, and train/bench isolation checks.

Datasets are UTF-8 JSONL with LF line endings, one record per sample in the
prompt-answer-perception format. A manifest fingerprints a split: seed
ranges per scenario, structural layout hashes, the per-source crop-region
registry for real-image scenarios, and image/prompt/answer tuple hashes.
Isolation between a training corpus and a benchmark is verified factor by
factor; violations are report entries, never exceptions.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from .generators import rect_iou
from .generators.base import BenchSample, LatentScene
from .render import Canvas, save_png

SAMPLE_FIELDS = ("id", "image", "prompt", "answer", "perception")


class IoError(OSError):
    """Dataset file could not be read or written."""


class SchemaViolation(ValueError):
    """A JSONL record does not match the sample field contract."""


class InsufficientPool(ValueError):
    """The candidate pool cannot satisfy the requested strata."""


def layout_hash(scene: LatentScene) -> str:
    """64-bit structural fingerprint; equal latent structure, equal hash."""
    canonical = json.dumps(scene.structure(), sort_keys=True,
                           separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def write_jsonl(samples: "Sequence[BenchSample]", path: str) -> None:
    """One JSON object per line; atomic rename on completion."""
    tmp = path + ".tmp"
    try:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            for sample in samples:
                fh.write(json.dumps(sample.to_record(), ensure_ascii=False))
                fh.write("\n")
        os.replace(tmp, path)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_jsonl(path: str) -> "list[BenchSample]":
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    samples = []
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaViolation(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            missing = [f for f in SAMPLE_FIELDS if f not in doc]
            if missing:
                raise SchemaViolation(f"{path}:{lineno}: missing fields {missing}")
            unknown = [k for k in doc if k not in SAMPLE_FIELDS + ("metadata",)]
            if unknown:
                raise SchemaViolation(f"{path}:{lineno}: unknown fields {unknown}")
            samples.append(BenchSample.from_record(doc))
    return samples


def _sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class DatasetManifest:
    split: str
    seed_ranges: "dict[str, list[list[int]]]" = field(default_factory=dict)
    layout_hashes: "list[str]" = field(default_factory=list)
    rs_regions: "dict[str, list[list[int]]]" = field(default_factory=dict)
    tuple_hashes: "list[str]" = field(default_factory=list)
    counts: "dict[str, int]" = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "split": self.split,
            "seed_ranges": self.seed_ranges,
            "layout_hashes": sorted(self.layout_hashes),
            "rs_regions": {k: sorted(v) for k, v in self.rs_regions.items()},
            "tuple_hashes": sorted(self.tuple_hashes),
            "counts": self.counts,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DatasetManifest":
        return cls(split=doc["split"], seed_ranges=doc.get("seed_ranges", {}),
                   layout_hashes=list(doc.get("layout_hashes", [])),
                   rs_regions={k: [list(r) for r in v]
                               for k, v in doc.get("rs_regions", {}).items()},
                   tuple_hashes=list(doc.get("tuple_hashes", [])),
                   counts=dict(doc.get("counts", {})))

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str) -> "DatasetManifest":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except OSError as exc:
            raise IoError(f"cannot read manifest {path}: {exc}") from exc


def tuple_hash(image_digest: str, prompt: str, answer: str) -> str:
    h = hashlib.sha256()
    for part in (image_digest, prompt, answer):
        h.update(part.encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()[:16]


def build_manifest(split: str,
                   samples: "Sequence[BenchSample]",
                   scenes: "Sequence[LatentScene] | None" = None,
                   root: "str | None" = None) -> DatasetManifest:
    """Fingerprint a split from its samples (and scenes, when available).

    Rebuilding from the same inputs yields identical hashes. Image digests
    come from the files under `root`; without a root the relative path
    stands in, which still detects shared files within one dataset tree.
    """
    manifest = DatasetManifest(split=split)
    seeds: "dict[str, list[int]]" = {}
    for i, sample in enumerate(samples):
        meta = sample.metadata
        scenario = meta.get("scenario", "unknown")
        manifest.counts[scenario] = manifest.counts.get(scenario, 0) + 1
        if "seed" in meta:
            seeds.setdefault(scenario, []).append(int(meta["seed"]))
        if scenes is not None:
            manifest.layout_hashes.append(layout_hash(scenes[i]))
        for key in ("view_rect", "cand_rect"):
            rect = meta.get(key)
            if rect is not None:
                source = meta.get("cand_source" if key == "cand_rect" else "source")
                if source:
                    manifest.rs_regions.setdefault(source, []).append(
                        [int(v) for v in rect])
        digest = None
        if root is not None:
            img_path = os.path.normpath(os.path.join(root, sample.image))
            if os.path.exists(img_path):
                digest = _sha256_file(img_path)
        if digest is None and scenes is not None:
            # image bytes are a pure function of the latent scene, so its
            # structure plus seed stands in when files are absent
            digest = f"latent:{layout_hash(scenes[i])}:{scenes[i].seed}"
        if digest is None:
            digest = sample.image
        manifest.tuple_hashes.append(tuple_hash(digest, sample.prompt, sample.answer))
    for scenario, values in seeds.items():
        values.sort()
        ranges: "list[list[int]]" = []
        for v in values:
            if ranges and v == ranges[-1][1] + 1:
                ranges[-1][1] = v
            else:
                ranges.append([v, v])
        manifest.seed_ranges[scenario] = ranges
    return manifest


@dataclass(frozen=True)
class IsolationViolation:
    factor: str  # seed_overlap | layout_collision | rs_region_overlap | identical_tuple
    detail: str


@dataclass
class IsolationReport:
    violations: "list[IsolationViolation]" = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.violations

    def by_factor(self, factor: str) -> list:
        return [v for v in self.violations if v.factor == factor]

    def to_dict(self) -> dict:
        return {"clean": self.clean,
                "violations": [{"factor": v.factor, "detail": v.detail}
                               for v in self.violations]}


def _ranges_overlap(a: "list[int]", b: "list[int]") -> bool:
    return a[0] <= b[1] and b[0] <= a[1]


def verify_isolation(train: DatasetManifest, bench: DatasetManifest) -> IsolationReport:
    """Check every isolation factor between a training split and a benchmark."""
    report = IsolationReport()

    for scenario, t_ranges in train.seed_ranges.items():
        for b_range in bench.seed_ranges.get(scenario, []):
            for t_range in t_ranges:
                if _ranges_overlap(t_range, b_range):
                    report.violations.append(IsolationViolation(
                        "seed_overlap",
                        f"{scenario}: train {t_range} overlaps bench {b_range}"))

    shared_layouts = set(train.layout_hashes) & set(bench.layout_hashes)
    for lh in sorted(shared_layouts):
        report.violations.append(IsolationViolation(
            "layout_collision", f"layout hash {lh} appears in both splits"))
    for name, hashes in (("train", train.layout_hashes),
                         ("bench", bench.layout_hashes)):
        dupes = {h for h in hashes if hashes.count(h) > 1}
        for lh in sorted(dupes):
            report.violations.append(IsolationViolation(
                "layout_collision", f"layout hash {lh} duplicated within {name}"))

    for source in sorted(set(train.rs_regions) & set(bench.rs_regions)):
        for t_rect in train.rs_regions[source]:
            for b_rect in bench.rs_regions[source]:
                iou = rect_iou(tuple(t_rect), tuple(b_rect))
                if iou > 0.0:
                    report.violations.append(IsolationViolation(
                        "rs_region_overlap",
                        f"{source}: train {t_rect} vs bench {b_rect} "
                        f"(IoU {iou:.3f})"))

    shared_tuples = set(train.tuple_hashes) & set(bench.tuple_hashes)
    for th in sorted(shared_tuples):
        report.violations.append(IsolationViolation(
            "identical_tuple", f"image/prompt/answer tuple {th} in both splits"))

    return report


def stratify_and_balance(pool: "Sequence[BenchSample]",
                         targets: "dict[str, int]",
                         bin_quotas: "dict[str, dict[str, int]] | None" = None,
                         ) -> "list[BenchSample]":
    """Draw per-scenario counts from a pool, honoring difficulty-bin quotas
    and keeping binary answer labels balanced within one sample.

    Selection is deterministic: candidates are taken in pool order.
    """
    chosen: "list[BenchSample]" = []
    by_scenario: "dict[str, list[BenchSample]]" = {}
    for sample in pool:
        by_scenario.setdefault(
            sample.metadata.get("scenario", "unknown"), []).append(sample)

    for scenario, target in targets.items():
        candidates = by_scenario.get(scenario, [])
        quotas = (bin_quotas or {}).get(scenario)
        if quotas:
            picked: "list[BenchSample]" = []
            for bin_name, quota in quotas.items():
                in_bin = [s for s in candidates
                          if s.metadata.get("difficulty", {}).get("bin") == bin_name]
                selected = _balanced_take(in_bin, quota)
                if len(selected) < quota:
                    raise InsufficientPool(
                        f"{scenario}/{bin_name}: need {quota}, pool has "
                        f"{len(in_bin)} (balanced take {len(selected)})")
                picked.extend(selected)
            if len(picked) != target:
                raise InsufficientPool(
                    f"{scenario}: bin quotas sum to {len(picked)}, target {target}")
        else:
            picked = _balanced_take(candidates, target)
            if len(picked) < target:
                raise InsufficientPool(
                    f"{scenario}: need {target}, balanced pool yields {len(picked)}")
        chosen.extend(picked)
    return chosen


def _balanced_take(candidates: "list[BenchSample]", count: int) -> list:
    """Take `count` samples; for yes/no pools keep |#yes - #no| <= 1."""
    answers = {s.answer for s in candidates}
    if answers <= {"yes", "no"} and len(answers) == 2:
        yes = [s for s in candidates if s.answer == "yes"]
        no = [s for s in candidates if s.answer == "no"]
        want_yes = (count + 1) // 2
        want_no = count - want_yes
        if len(yes) < want_yes or len(no) < want_no:
            # rebalance the shortfall only if the other side can absorb it
            want_yes = min(want_yes, len(yes))
            want_no = count - want_yes
            if len(no) < want_no:
                return yes[:want_yes] + no[:len(no)]
        picked = yes[:want_yes] + no[:want_no]
        return picked
    return list(candidates[:count])


def write_dataset(items: "Sequence[tuple]", out_dir: str, split: str,
                  jsonl_name: str = "samples.jsonl") -> "tuple[str, str]":
    """Write images, JSONL, and a manifest for generated (scene, sample,
    canvas) triples. Returns (jsonl_path, manifest_path)."""
    os.makedirs(os.path.join(out_dir, "images"), exist_ok=True)
    samples = []
    scenes = []
    for scene, sample, canvas in items:
        if canvas is not None:
            img_path = os.path.normpath(os.path.join(out_dir, sample.image))
            os.makedirs(os.path.dirname(img_path), exist_ok=True)
            save_png(canvas, img_path)
        samples.append(sample)
        scenes.append(scene)
    jsonl_path = os.path.join(out_dir, jsonl_name)
    write_jsonl(samples, jsonl_path)
    manifest = build_manifest(split, samples, scenes, root=out_dir)
    manifest_path = os.path.join(out_dir, "manifest.json")
    manifest.save(manifest_path)
    return jsonl_path, manifest_path
