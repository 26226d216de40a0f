"""
Evaluation mode: held-out ranking metrics, repeated runs, variant comparison and sweeps
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import colorama
import numpy as np

from config.settings import (
    AP_MODE_LITERAL, DEFAULT_MAP_CUTOFF, DEFAULT_MEMORY_EVAL, DEFAULT_RECALL_AT, SPLIT_TEST, SPLIT_VALIDATION,
    SWEEP_GRIDS, VARIANT_FULL,
)
from core.metrics import average_precision, recall_at_n
from core.model import encode_catalog, rank_items
from core.params import ModelParams
from processors.artifacts import Artifacts, load_artifacts
from processors.checkpoint import Checkpoint, load_checkpoint
from processors.ingest import split_per_user
from utils.errors import ColdUserError, ComparisonError, CompatibilityError, InputError
from utils.helpers import canonical_json, file_digest, print_banner, save_json

# user id, candidate ids -> candidate ids best first
Ranker = Callable[[str, List[str]], List[str]]


@dataclass
class MetricsReport:
    """Per-user and aggregate held-out metrics for one model on one split"""
    split: str
    recall_at: List[int]
    map_cutoff: int
    ap_mode: str
    candidate_policy: str
    per_user_recall: Dict[str, Dict[int, float]] = field(default_factory=dict)
    per_user_ap: Dict[str, float] = field(default_factory=dict)
    skipped_users: List[str] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def evaluated_users(self) -> int:
        return len(self.per_user_ap)

    @property
    def mean_recall(self) -> Dict[int, float]:
        users = list(self.per_user_recall)
        return {n: (float(np.mean([self.per_user_recall[u][n] for u in users])) if users else 0.0)
                for n in self.recall_at}

    @property
    def map(self) -> float:
        return float(np.mean(list(self.per_user_ap.values()))) if self.per_user_ap else 0.0

    def summary(self) -> dict:
        out = {f"recall@{n}": value for n, value in self.mean_recall.items()}
        out["map"] = self.map
        return out

    def to_dict(self) -> dict:
        return {
            "split": self.split,
            "recall_at": list(self.recall_at),
            "map_cutoff": self.map_cutoff,
            "ap_mode": self.ap_mode,
            "candidate_policy": self.candidate_policy,
            "evaluated_users": self.evaluated_users,
            "skipped_users": list(self.skipped_users),
            "aggregate": self.summary(),
            "per_user": {
                u: {"recall": {str(n): r for n, r in self.per_user_recall[u].items()}, "ap": self.per_user_ap[u]}
                for u in sorted(self.per_user_ap)
            },
            "metadata": dict(self.metadata),
        }


def candidate_policy(split: str, exclude_validation: bool) -> str:
    if split == SPLIT_TEST and exclude_validation:
        return "all items minus train and validation positives"
    return "all items minus train positives"


def candidate_universe(dataset, user_id: str, split: str = SPLIT_TEST, exclude_validation: bool = True) -> List[str]:
    """Items ranked for a user when evaluating `split`, in catalog order"""
    user_split = dataset.split_of(user_id)
    excluded = set(user_split.train)
    if split == SPLIT_TEST and exclude_validation:
        excluded.update(user_split.validation)
    return [item for item in dataset.items if item not in excluded]


def evaluate_rankings(ranker: Ranker, dataset, split: str = SPLIT_TEST,
                      recall_at: Sequence[int] = DEFAULT_RECALL_AT, map_cutoff: int = DEFAULT_MAP_CUTOFF,
                      ap_mode: str = AP_MODE_LITERAL, exclude_validation: bool = True,
                      metadata: Optional[dict] = None) -> MetricsReport:
    """
    Score any ranking function against a held-out split

    Args:
        ranker: (user id, candidates) -> ranked candidate ids
        dataset: InteractionDataset with splits
        split: 'validation' or 'test'
        recall_at: recall cut-offs
        map_cutoff: K'
        ap_mode: 'paper-literal' or 'standard'
        exclude_validation: Drop validation positives from the test-time candidates
        metadata: Run metadata copied into the report

    Returns:
        MetricsReport (users with an empty held-out set or no memory are skipped and listed)
    """
    if split not in (SPLIT_VALIDATION, SPLIT_TEST):
        raise InputError(f"Unknown evaluation split '{split}'")
    report = MetricsReport(split=split, recall_at=sorted(set(recall_at)), map_cutoff=map_cutoff, ap_mode=ap_mode,
                           candidate_policy=candidate_policy(split, exclude_validation), metadata=metadata or {})
    for user in dataset.users:
        held_out = dataset.split_of(user).part(split)
        if not held_out:
            report.skipped_users.append(user)
            continue
        try:
            ranked = ranker(user, candidate_universe(dataset, user, split, exclude_validation))
        except ColdUserError:
            report.skipped_users.append(user)
            continue
        report.per_user_recall[user] = {n: recall_at_n(ranked, held_out, n) for n in report.recall_at}
        report.per_user_ap[user] = average_precision(ranked, held_out, map_cutoff, ap_mode)
    if report.skipped_users:
        logging.info(f"{len(report.skipped_users)} users skipped during {split} evaluation")
    return report


def model_ranker(params: ModelParams, artifacts: Artifacts, memory_size: int = DEFAULT_MEMORY_EVAL,
                 seed: int = 0) -> Ranker:
    """Ranking function backed by a trained model (catalog encoded once)"""
    encoding = encode_catalog(params, artifacts.documents)

    def ranker(user: str, candidates: List[str]) -> List[str]:
        return rank_items(params, artifacts.dataset, artifacts.documents, user, candidates=candidates,
                          memory_size=memory_size, seed=seed, encoding=encoding).item_ids

    return ranker


def evaluate_params(params: ModelParams, artifacts: Artifacts, split: str = SPLIT_TEST,
                    recall_at: Sequence[int] = DEFAULT_RECALL_AT, map_cutoff: int = DEFAULT_MAP_CUTOFF,
                    ap_mode: str = AP_MODE_LITERAL, memory_size: int = DEFAULT_MEMORY_EVAL, seed: int = 0,
                    exclude_validation: bool = True, metadata: Optional[dict] = None) -> MetricsReport:
    """Evaluate in-memory parameters on one split"""
    metadata = dict(metadata or {})
    metadata.setdefault("variant", params.variant)
    metadata.setdefault("seed", seed)
    metadata.setdefault("split_digest", artifacts.split_digest)
    return evaluate_rankings(model_ranker(params, artifacts, memory_size, seed), artifacts.dataset, split,
                             recall_at, map_cutoff, ap_mode, exclude_validation, metadata)


def check_compatibility(checkpoint: Checkpoint, artifacts: Artifacts):
    """Reject checkpoints trained on another vocabulary or catalog"""
    if checkpoint.vocab_digest != artifacts.vocab_digest:
        raise CompatibilityError("checkpoint vocabulary digest does not match the dataset vocabulary")
    if checkpoint.catalog_digest != artifacts.catalog_digest:
        raise CompatibilityError("checkpoint item catalog does not match the dataset catalog")


def evaluate(checkpoint: Checkpoint, artifacts: Artifacts, split: str = SPLIT_TEST,
             recall_at: Sequence[int] = DEFAULT_RECALL_AT, map_cutoff: int = DEFAULT_MAP_CUTOFF,
             ap_mode: str = AP_MODE_LITERAL, memory_size: Optional[int] = None, seed: Optional[int] = None,
             exclude_validation: bool = True, checkpoint_digest: str = "") -> MetricsReport:
    """
    Evaluate a checkpoint on the validation or test split

    Memory size and seed default to the values recorded in the checkpoint's config.
    """
    check_compatibility(checkpoint, artifacts)
    config = checkpoint.config
    memory_size = memory_size or config.get("memory_size_eval", DEFAULT_MEMORY_EVAL)
    seed = config.get("seed", 0) if seed is None else seed
    report = evaluate_params(checkpoint.params, artifacts, split, recall_at, map_cutoff, ap_mode, memory_size, seed,
                             exclude_validation, metadata={"checkpoint_digest": checkpoint_digest})
    logging.info(f"{split} evaluation: {report.evaluated_users} users, MAP {report.map:.5f}")
    return report


def run_evaluation(data_dir: str, checkpoint_path: str, split: str = SPLIT_TEST,
                   recall_at: Sequence[int] = DEFAULT_RECALL_AT, map_cutoff: int = DEFAULT_MAP_CUTOFF,
                   ap_mode: str = AP_MODE_LITERAL, seed: Optional[int] = None, exclude_validation: bool = True,
                   report_path: Optional[str] = None, quiet: bool = False) -> MetricsReport:
    """Load artifacts and a checkpoint, evaluate, optionally write the report"""
    artifacts = load_artifacts(data_dir)
    checkpoint = load_checkpoint(checkpoint_path)
    report = evaluate(checkpoint, artifacts, split, recall_at, map_cutoff, ap_mode, seed=seed,
                      exclude_validation=exclude_validation, checkpoint_digest=file_digest(checkpoint_path))
    if report_path:
        save_json(report_path, report.to_dict())
    if not quiet:
        lines = [f"recall@{n}: {value:.4f}" for n, value in report.mean_recall.items()]
        lines += [f"MAP ({report.ap_mode}, K'={report.map_cutoff}): {report.map:.4f}",
                  f"Users evaluated: {report.evaluated_users} (skipped {len(report.skipped_users)})"]
        print_banner(f"{split.upper()} METRICS", lines, color=colorama.Fore.CYAN)
    return report


# ---------------------------------------------------------------------------
# Repeated runs, variant comparison, sweeps
# ---------------------------------------------------------------------------

def resplit(artifacts: Artifacts, seed: int, train_frac: Optional[float] = None) -> Artifacts:
    """Same data with a fresh per-user split"""
    dataset = artifacts.dataset
    frac = train_frac or dataset.train_frac
    splits = split_per_user(dataset, frac, seed)
    return Artifacts(dataset=dataset.with_splits(splits, seed=seed, train_frac=frac), vocab=artifacts.vocab,
                     documents=artifacts.documents, titles=artifacts.titles, stats=artifacts.stats)


def aggregate_reports(reports: Sequence[MetricsReport]) -> dict:
    """Mean and standard deviation of each aggregate metric over runs"""
    if not reports:
        raise InputError("no reports to aggregate")
    keys = list(reports[0].summary())
    values = {key: [r.summary()[key] for r in reports] for key in keys}
    return {key: {"mean": float(np.mean(v)), "std": float(np.std(v)), "runs": len(v)} for key, v in values.items()}


def evaluate_repeated(artifacts: Artifacts, config, seeds: Sequence[int], resplit_data: bool = True) -> dict:
    """
    Train and test once per seed, re-drawing the split each time

    Args:
        artifacts: Ingest artifacts
        config: TrainConfig (its seed is replaced by each run seed)
        seeds: Run seeds
        resplit_data: Draw a new split per seed (False keeps the ingest split)

    Returns:
        {"seeds": [...], "reports": [...], "aggregate": {metric: {mean, std, runs}}}
    """
    from modes.training import train_model

    reports = []
    for seed in seeds:
        run_artifacts = resplit(artifacts, seed) if resplit_data else artifacts
        run_config = config.model_copy(update={"seed": seed})
        result = train_model(run_artifacts, run_config)
        reports.append(evaluate_params(result.params, run_artifacts, SPLIT_TEST, config.recall_at, config.map_cutoff,
                                       config.ap_mode, config.memory_size_eval, seed, config.exclude_validation))
    return {"seeds": list(seeds), "reports": [r.to_dict() for r in reports], "aggregate": aggregate_reports(reports)}


@dataclass
class ComparisonTable:
    variants: List[str]
    metrics: List[str]
    values: Dict[str, Dict[str, float]]
    stds: Dict[str, Dict[str, float]]
    baseline: str
    seeds: List[int]

    def relative_delta(self, variant: str, metric: str) -> Optional[float]:
        base = self.values[self.baseline][metric]
        if variant == self.baseline or base == 0:
            return None
        return (self.values[variant][metric] - base) / base

    def pairwise(self) -> Dict[str, Dict[str, float]]:
        out = {}
        for a_pos, a in enumerate(self.variants):
            for b in self.variants[a_pos + 1:]:
                out[f"{a} - {b}"] = {m: self.values[a][m] - self.values[b][m] for m in self.metrics}
        return out

    def to_dict(self) -> dict:
        return {
            "baseline": self.baseline,
            "seeds": list(self.seeds),
            "metrics": list(self.metrics),
            "variants": {v: {"mean": self.values[v], "std": self.stds[v]} for v in self.variants},
            "relative_to_baseline": {v: {m: self.relative_delta(v, m) for m in self.metrics} for v in self.variants},
            "pairwise": self.pairwise(),
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict(), indent=2)


def compare_reports(reports: Dict[str, List[MetricsReport]], baseline: str = VARIANT_FULL) -> ComparisonTable:
    """
    Build the ablation table from per-variant reports

    Every variant must have been evaluated on the same splits with the same seeds.

    Args:
        reports: variant -> one report per seed
        baseline: Variant the relative deltas are measured against

    Returns:
        ComparisonTable
    """
    if not reports:
        raise ComparisonError("no variants to compare")
    variants = list(reports)

    def signature(runs):
        return [(r.metadata.get("split_digest"), r.metadata.get("seed")) for r in runs]

    reference = signature(reports[variants[0]])
    for variant in variants[1:]:
        if signature(reports[variant]) != reference:
            raise ComparisonError(f"variant '{variant}' was evaluated on different splits or seeds "
                                  f"than '{variants[0]}'")
    if baseline not in reports:
        baseline = variants[0]

    aggregates = {v: aggregate_reports(runs) for v, runs in reports.items()}
    metrics = list(aggregates[variants[0]])
    return ComparisonTable(
        variants=variants,
        metrics=metrics,
        values={v: {m: aggregates[v][m]["mean"] for m in metrics} for v in variants},
        stds={v: {m: aggregates[v][m]["std"] for m in metrics} for v in variants},
        baseline=baseline,
        seeds=[seed for _, seed in reference],
    )


def format_table(table: ComparisonTable) -> str:
    """Aligned text rendering: one row per variant, metric means then change vs the baseline"""
    header = ["variant"] + table.metrics + [f"vs {table.baseline} {m}" for m in table.metrics]
    rows = []
    for variant in table.variants:
        cells = [variant] + [f"{table.values[variant][m]:.4f}" for m in table.metrics]
        for m in table.metrics:
            delta = table.relative_delta(variant, m)
            cells.append("-" if delta is None else f"{delta:+.1%}")
        rows.append(cells)
    widths = [max(len(row[k]) for row in [header] + rows) for k in range(len(header))]

    def line(cells):
        first = cells[0].ljust(widths[0])
        rest = [cell.rjust(widths[k + 1]) for k, cell in enumerate(cells[1:])]
        return "  ".join([first] + rest)

    return "\n".join([line(header)] + [line(row) for row in rows]) + "\n"


def compare_variants(artifacts: Artifacts, config, variants: Sequence[str], seeds: Sequence[int],
                     split: str = SPLIT_TEST) -> ComparisonTable:
    """
    Train every variant with identical splits and seeds and compare them

    Args:
        artifacts: Ingest artifacts (their split is used for every run)
        config: Base TrainConfig
        variants: Variant tags
        seeds: Training seeds; each variant is trained once per seed
        split: Split to report on

    Returns:
        ComparisonTable
    """
    from modes.training import train_model

    reports: Dict[str, List[MetricsReport]] = {}
    for variant in variants:
        runs = []
        for seed in seeds:
            run_config = config.model_copy(update={"variant": variant, "seed": seed})
            result = train_model(artifacts, run_config)
            runs.append(evaluate_params(result.params, artifacts, split, config.recall_at, config.map_cutoff,
                                        config.ap_mode, config.memory_size_eval, seed, config.exclude_validation))
            logging.info(f"{variant} (seed {seed}): {runs[-1].summary()}")
        reports[variant] = runs
    return compare_reports(reports)


def sweep(artifacts: Artifacts, config, param: str, values: Optional[Sequence] = None) -> dict:
    """
    Validation-split sweep over one hyper-parameter

    Args:
        artifacts: Ingest artifacts
        config: Base TrainConfig
        param: 'latent_dim', 'lambda_u', 'lambda_v' or 'lambda' (both weights)
        values: Grid (defaults to the built-in grid for the parameter)

    Returns:
        {"param", "results": [{"value", metrics...}], "best": value with the highest validation MAP}
    """
    from modes.training import train_model

    grid_key = "lambda_u" if param == "lambda" else param
    if grid_key not in SWEEP_GRIDS:
        raise InputError(f"Cannot sweep '{param}' (choose from latent_dim, lambda_u, lambda_v, lambda)")
    values = list(values) if values else SWEEP_GRIDS[grid_key]
    results = []
    for value in values:
        update = {"lambda_u": value, "lambda_v": value} if param == "lambda" else {param: value}
        run_config = config.model_copy(update=update)
        result = train_model(artifacts, run_config)
        report = evaluate_params(result.params, artifacts, SPLIT_VALIDATION, config.recall_at, config.map_cutoff,
                                 config.ap_mode, config.memory_size_eval, config.seed)
        results.append({"value": value, **report.summary()})
        logging.info(f"sweep {param}={value}: {report.summary()}")
    best = max(results, key=lambda r: r["map"])["value"]
    return {"param": param, "results": results, "best": best}


def load_for_inference(data_dir: str, checkpoint_path: str):
    """Artifacts and a checkpoint known to be compatible with them"""
    artifacts = load_artifacts(data_dir)
    checkpoint = load_checkpoint(checkpoint_path)
    check_compatibility(checkpoint, artifacts)
    return artifacts, checkpoint
