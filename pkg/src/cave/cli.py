"""Command-line entry point tying generation, verification, scoring,
advantage computation, and statistics together.

Exit codes: 0 success, 1 validation failure, 2 I/O failure, 3 remote-scorer
failure. Every subcommand is deterministic given flags, config, and inputs.
"""

from __future__ import annotations

import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Any

import click

from . import dataset as ds
from . import generators as gen
from . import stats as st
from .config import ConfigError, RunConfig, load_config
from .credits import StepCredits, compute_step_credits, split_evidence_units
from .rewards import (GroupTooSmall, aggregate, apply_anchors,
                      group_advantages, normalize_answer, useful_zoom_rate)
from .scoring import (HashScorer, MockScorer, RemoteScorer, ScorerUnavailable,
                      load_mock_table)
from .trajectory import (TrajectoryError, response_mask, trajectory_from_dict)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_SCORER = 3


class CliError(click.ClickException):
    def __init__(self, message: str, code: int) -> None:
        super().__init__(message)
        self.exit_code = code


def _resolve(root: str, path: "str | None") -> "str | None":
    if path is None:
        return None
    return path if os.path.isabs(path) else os.path.join(root, path)


def make_scorer(spec: str):
    """Scorer specs: mock:hash[:salt], mock:<table.json>, remote:<url>."""
    if spec in ("mock", "mock:hash"):
        return HashScorer()
    if spec.startswith("mock:hash:"):
        return HashScorer(salt=spec.split(":", 2)[2])
    if spec.startswith("mock:"):
        path = spec.split(":", 1)[1]
        try:
            return MockScorer(load_mock_table(path))
        except OSError as exc:
            raise CliError(f"cannot load mock table {path}: {exc}", EXIT_IO)
    if spec.startswith("remote:"):
        endpoint = spec.split(":", 1)[1]
        if not endpoint:
            raise ScorerUnavailable("remote scorer spec has no endpoint")
        return RemoteScorer(endpoint)
    raise CliError(f"unknown scorer spec {spec!r}", EXIT_VALIDATION)


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="TOML config file; CAVE_* env vars override keys.")
@click.option("--root", type=click.Path(), default=".",
              help="Base directory for relative paths.")
@click.pass_context
def main(ctx: click.Context, config_path: "str | None", root: str) -> None:
    try:
        cfg = load_config(_resolve(root, config_path))
    except ConfigError as exc:
        raise CliError(str(exc), EXIT_VALIDATION)
    ctx.obj = {"cfg": cfg, "root": root}


@main.command()
@click.option("--scenario", type=click.Choice(gen.SCENARIOS), required=True)
@click.option("--count", type=int, required=True)
@click.option("--seed-base", type=int, default=None)
@click.option("--source-dir", type=click.Path(), default=None,
              help="Raster sources for the rs scenario.")
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.option("--split", default="bench", help="Split name for the manifest.")
@click.option("--quotas", default=None,
              help="Comma-separated per-stratum counts, e.g. 82,82,81.")
@click.pass_context
def generate(ctx: click.Context, scenario: str, count: int,
             seed_base: "int | None", source_dir: "str | None",
             out_dir: "str | None", split: str, quotas: "str | None") -> None:
    """Generate a scenario batch: images + JSONL + manifest."""
    cfg: RunConfig = ctx.obj["cfg"]
    root: str = ctx.obj["root"]
    seed_base = seed_base if seed_base is not None else cfg.seed_base
    out_dir = _resolve(root, out_dir or cfg.out_dir)
    source_dir = _resolve(root, source_dir or (cfg.source_dir or None))
    quota_list = [int(v) for v in quotas.split(",")] if quotas else None
    if count < 0:
        raise CliError("count must be >= 0", EXIT_VALIDATION)
    try:
        items = gen.generate_batch(scenario, count, seed_base=seed_base,
                                   quotas=quota_list, source_dir=source_dir)
    except gen.OracleMismatch as exc:
        raise CliError(f"oracle disagreement: {exc}", EXIT_VALIDATION)
    except (gen.GenerationInfeasible, ValueError, KeyError) as exc:
        raise CliError(str(exc), EXIT_VALIDATION)
    except OSError as exc:
        raise CliError(str(exc), EXIT_IO)
    try:
        jsonl_path, manifest_path = ds.write_dataset(items, out_dir, split)
    except (ds.IoError, OSError) as exc:
        raise CliError(str(exc), EXIT_IO)
    answers = [s.answer for _, s, _ in items]
    yes = sum(1 for a in answers if a == "yes")
    no = sum(1 for a in answers if a == "no")
    click.echo(f"wrote {len(items)} samples to {jsonl_path}")
    click.echo(f"manifest: {manifest_path}")
    if yes or no:
        click.echo(f"label balance: {yes} yes / {no} no (|delta| = {abs(yes - no)})")
    click.echo("oracle agreement: 100%")


@main.command("verify-split")
@click.option("--train", "train_dir", type=click.Path(), required=True)
@click.option("--bench", "bench_dir", type=click.Path(), required=True)
@click.pass_context
def verify_split(ctx: click.Context, train_dir: str, bench_dir: str) -> None:
    """Check train/bench isolation factor by factor."""
    root: str = ctx.obj["root"]
    manifests = []
    for d in (_resolve(root, train_dir), _resolve(root, bench_dir)):
        path = os.path.join(d, "manifest.json")
        try:
            manifests.append(ds.DatasetManifest.load(path))
        except (ds.IoError, KeyError, ValueError) as exc:
            raise CliError(f"cannot load manifest from {d}: {exc}", EXIT_IO)
    report = ds.verify_isolation(manifests[0], manifests[1])
    click.echo(json.dumps(report.to_dict(), indent=2))
    if not report.clean:
        raise CliError(f"{len(report.violations)} isolation violations",
                       EXIT_VALIDATION)


def _load_jsonl(path: str) -> list:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO)
    except json.JSONDecodeError as exc:
        raise CliError(f"invalid JSONL in {path}: {exc}", EXIT_VALIDATION)


def _write_jsonl(records: list, path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for rec in records:
                fh.write(json.dumps(rec, ensure_ascii=False))
                fh.write("\n")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO)


@main.command()
@click.option("--trajectories", "traj_path", type=click.Path(), required=True,
              help="JSONL of {prompt_id, trajectory_id, sample_id?, trajectory}.")
@click.option("--evidence", "evidence_path", type=click.Path(), default=None,
              help="Dataset JSONL supplying perception fields by sample id.")
@click.option("--scorer", "scorer_spec", default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--jobs", type=int, default=None)
@click.option("--dry-run", is_flag=True, default=False)
@click.pass_context
def score(ctx: click.Context, traj_path: str, evidence_path: "str | None",
          scorer_spec: "str | None", out_path: "str | None",
          jobs: "int | None", dry_run: bool) -> None:
    """Compute per-step credits and trajectory rewards."""
    cfg: RunConfig = ctx.obj["cfg"]
    root: str = ctx.obj["root"]
    records = _load_jsonl(_resolve(root, traj_path))

    perception_by_id: "dict[str, dict]" = {}
    if evidence_path is not None:
        try:
            for sample in ds.read_jsonl(_resolve(root, evidence_path)):
                perception_by_id[sample.id] = {"perception": sample.perception,
                                               "answer": sample.answer}
        except (ds.IoError,) as exc:
            raise CliError(str(exc), EXIT_IO)
        except ds.SchemaViolation as exc:
            raise CliError(str(exc), EXIT_VALIDATION)

    try:
        scorer = make_scorer(scorer_spec or cfg.scorer)
    except ScorerUnavailable as exc:
        raise CliError(str(exc), EXIT_SCORER)

    parsed = []
    for i, rec in enumerate(records):
        try:
            traj = trajectory_from_dict(rec["trajectory"],
                                        max_rounds=cfg.max_rounds)
        except (KeyError, TrajectoryError, TypeError, ValueError) as exc:
            raise CliError(f"record {i}: bad trajectory: {exc}", EXIT_VALIDATION)
        parsed.append((rec, traj))

    if dry_run:
        click.echo(f"validated {len(parsed)} trajectory records; nothing written")
        return

    focus_cfg = cfg.focus_config()
    reward_cfg = cfg.reward_config()

    def one(item: "tuple[dict, Any]") -> dict:
        rec, traj = item
        sid = rec.get("sample_id") or rec.get("prompt_id", "")
        info = perception_by_id.get(sid, {})
        evidence = split_evidence_units(info.get("perception", ""))
        steps = compute_step_credits(traj, scorer, evidence, focus_cfg)
        reward = aggregate(steps, reward_cfg)
        reference = info.get("answer", traj.ground_truth_text)
        reward = apply_anchors(reward, traj, reference, reward_cfg)
        out = {"prompt_id": rec.get("prompt_id", sid),
               "trajectory_id": rec.get("trajectory_id", ""),
               "steps": [s.to_dict() for s in steps]}
        out.update(reward.to_dict())
        out["response_mask"] = response_mask(traj)
        return out

    n_jobs = max(1, jobs if jobs is not None else cfg.jobs)
    try:
        if n_jobs > 1:
            with ThreadPoolExecutor(max_workers=n_jobs) as pool:
                outputs = list(pool.map(one, parsed))
        else:
            outputs = [one(item) for item in parsed]
    except ScorerUnavailable as exc:
        raise CliError(str(exc), EXIT_SCORER)

    zoom = useful_zoom_rate([_steps_from_record(out) for out in outputs])
    out_path = _resolve(root, out_path) or os.path.join(root, "credits.jsonl")
    _write_jsonl(outputs, out_path)
    click.echo(f"wrote {len(outputs)} credit records to {out_path}")
    if zoom.no_zooms:
        click.echo("useful zoom rate: n/a (no zoom actions)")
    else:
        click.echo(f"useful zoom rate: {zoom.rate:.3f} "
                   f"({zoom.useful_steps}/{zoom.zoom_steps})")


def _steps_from_record(record: dict) -> list:
    return [StepCredits.from_dict(doc) for doc in record.get("steps", [])]


@main.command()
@click.option("--credits", "credits_path", type=click.Path(), required=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--source", "source",
              type=click.Choice(["total", "cave"]), default=None)
@click.option("--delta", type=float, default=None)
@click.pass_context
def advantage(ctx: click.Context, credits_path: str, out_path: "str | None",
              source: "str | None", delta: "float | None") -> None:
    """Group credit records by prompt and standardize rewards."""
    cfg: RunConfig = ctx.obj["cfg"]
    root: str = ctx.obj["root"]
    records = _load_jsonl(_resolve(root, credits_path))
    source = source or cfg.advantage_source
    delta = delta if delta is not None else cfg.group_delta

    groups: "dict[str, list[dict]]" = {}
    for rec in records:
        groups.setdefault(rec.get("prompt_id", ""), []).append(rec)

    outputs = []
    for prompt_id, members in groups.items():
        key = "R_total" if source == "total" else "R_cave"
        rewards = []
        for m in members:
            value = m.get(key)
            if value is None:
                raise CliError(f"group {prompt_id}: record lacks {key}",
                               EXIT_VALIDATION)
            rewards.append(float(value))
        try:
            group = group_advantages(rewards, delta=delta)
        except GroupTooSmall as exc:
            raise CliError(f"group {prompt_id}: {exc}", EXIT_VALIDATION)
        for m, adv in zip(members, group.advantages):
            outputs.append({
                "prompt_id": prompt_id,
                "trajectory_id": m.get("trajectory_id", ""),
                "R_cave": m.get("R_cave"),
                "R_total": m.get("R_total"),
                "advantage": adv,
                "mask": m.get("response_mask", []),
            })
    out_path = _resolve(root, out_path) or os.path.join(root, "advantages.jsonl")
    _write_jsonl(outputs, out_path)
    click.echo(f"wrote {len(outputs)} advantage records "
               f"({len(groups)} groups) to {out_path}")


@main.command("eval")
@click.option("--dataset", "dataset_path", type=click.Path(), required=True)
@click.option("--predictions", "pred_path", type=click.Path(), required=True,
              help="JSONL of {id, prediction, credit?}.")
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.pass_context
def eval_cmd(ctx: click.Context, dataset_path: str, pred_path: str,
             out_path: "str | None") -> None:
    """Match predictions against dataset answers into a results JSONL."""
    root: str = ctx.obj["root"]
    try:
        samples = ds.read_jsonl(_resolve(root, dataset_path))
    except ds.IoError as exc:
        raise CliError(str(exc), EXIT_IO)
    except ds.SchemaViolation as exc:
        raise CliError(str(exc), EXIT_VALIDATION)
    preds = {}
    for rec in _load_jsonl(_resolve(root, pred_path)):
        key = rec.get("id") or rec.get("sample_id")
        if key is None:
            raise CliError("prediction record lacks an id", EXIT_VALIDATION)
        preds[key] = rec
    results = []
    for sample in samples:
        rec = preds.get(sample.id)
        prediction = rec.get("prediction", "") if rec else ""
        correct = normalize_answer(prediction) == normalize_answer(sample.answer)
        row: dict = {"sample_id": sample.id, "prediction": prediction,
                     "correct": bool(correct),
                     "scenario": sample.metadata.get("scenario"),
                     "difficulty": sample.metadata.get("difficulty", {})}
        if rec and "credit" in rec:
            row["credit"] = rec["credit"]
        results.append(row)
    out_path = _resolve(root, out_path) or os.path.join(root, "results.jsonl")
    _write_jsonl(results, out_path)
    n_correct = sum(1 for r in results if r["correct"])
    click.echo(f"scored {len(results)} samples: accuracy "
               f"{n_correct / max(1, len(results)):.4f}")


@main.command("stats")
@click.option("--results", "results_path", type=click.Path(), required=True)
@click.option("--results-b", "results_b_path", type=click.Path(), default=None,
              help="Second model's results on the same instances for paired tests.")
@click.option("--out-dir", type=click.Path(), default=None)
@click.option("--quantiles", type=int, default=8)
@click.pass_context
def stats_cmd(ctx: click.Context, results_path: str,
              results_b_path: "str | None", out_dir: "str | None",
              quantiles: int) -> None:
    """Accuracy, confidence intervals, stratified and credit-based reports."""
    root: str = ctx.obj["root"]
    rows = _load_jsonl(_resolve(root, results_path))
    if not rows:
        raise CliError("results file is empty", EXIT_VALIDATION)
    out_dir = _resolve(root, out_dir) or root
    os.makedirs(out_dir, exist_ok=True)

    correct = [bool(r["correct"]) for r in rows]
    n = len(rows)
    s = sum(correct)
    report: dict = {
        "n": n,
        "accuracy": s / n,
        "normal_ci": list(st.normal_ci(s, n)),
        "wilson_ci": list(st.wilson_ci(s, n)),
        "by_scenario": {},
    }
    for scenario in sorted({r.get("scenario") for r in rows if r.get("scenario")}):
        flags = [bool(r["correct"]) for r in rows if r.get("scenario") == scenario]
        report["by_scenario"][scenario] = {
            "n": len(flags), "accuracy": sum(flags) / len(flags),
            "wilson_ci": list(st.wilson_ci(sum(flags), len(flags)))}

    csv_paths = []
    hop_rows = [(float(r["difficulty"]["dependency_length"]), bool(r["correct"]))
                for r in rows
                if isinstance(r.get("difficulty"), dict)
                and "dependency_length" in r["difficulty"]]
    if hop_rows:
        strat = st.stratified_accuracy([v for v, _ in hop_rows],
                                       [c for _, c in hop_rows],
                                       factor="dependency_length")
        report["stratified"] = strat.to_rows()
        csv_paths.append(_write_csv(os.path.join(out_dir, "stratified.csv"),
                                    strat.to_rows()))

    credit_rows = [(float(r["credit"]), bool(r["correct"]))
                   for r in rows if r.get("credit") is not None]
    if credit_rows:
        credits = [v for v, _ in credit_rows]
        flags = [c for _, c in credit_rows]
        quant = st.credit_quantile_accuracy(credits, flags, q=quantiles)
        rho, gap = st.credit_correlation(credits, flags)
        report["credit_quantiles"] = [
            {"bin": b.label, "n": b.n, "accuracy": b.accuracy,
             "ci_lo": b.interval[0], "ci_hi": b.interval[1]} for b in quant]
        report["credit_correlation"] = {"spearman_rho": rho, "mean_gap": gap}
        csv_paths.append(_write_csv(os.path.join(out_dir, "quantiles.csv"),
                                    report["credit_quantiles"]))

    if results_b_path is not None:
        rows_b = _load_jsonl(_resolve(root, results_b_path))
        by_id_b = {r["sample_id"]: bool(r["correct"]) for r in rows_b}
        shared = [r for r in rows if r["sample_id"] in by_id_b]
        if len(shared) != len(rows) or len(rows_b) != len(rows):
            raise CliError("paired results must cover the same instance set",
                           EXIT_VALIDATION)
        outcomes = st.PairedOutcomes(
            model_a_correct=tuple(bool(r["correct"]) for r in shared),
            model_b_correct=tuple(by_id_b[r["sample_id"]] for r in shared))
        result = st.mcnemar_paired(outcomes)
        s_b = sum(1 for v in by_id_b.values() if v)
        report["paired"] = {
            "b_only_a": result.b, "c_only_b": result.c,
            "mcnemar_p": result.p_value, "method": result.method,
            "delta": s / n - s_b / n,
            "delta_ci_unpaired": list(st.delta_ci_unpaired(s, n, s_b, n)),
            "delta_ci_paired": list(st.delta_ci_paired(result.b, result.c, n)),
        }

    report_path = os.path.join(out_dir, "report.json")
    try:
        with open(report_path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise CliError(str(exc), EXIT_IO)
    click.echo(f"report: {report_path}")
    for p in csv_paths:
        click.echo(f"table: {p}")


def _write_csv(path: str, rows: list) -> str:
    if rows:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
    return path


if __name__ == "__main__":
    main()
