#!/usr/bin/env python3
"""
MARS Recommender - Main CLI Entry Point

Memory-attention recommendations from item text: ingest rating data, train,
evaluate, recommend and explain.
"""
import argparse
import logging
import sys
from typing import List, Optional

from config.settings import (
    AP_MODE_LITERAL, AP_MODE_STANDARD, DEFAULT_AP_MODE, DEFAULT_EXPLAIN_TOP_K, DEFAULT_MAP_CUTOFF, DEFAULT_MAX_LEN,
    DEFAULT_MIN_FREQ, DEFAULT_MIN_PER_ITEM, DEFAULT_MIN_PER_USER, DEFAULT_TRAIN_FRAC, DEFAULT_WINDOW_SIZE,
    FORMAT_CSV, FORMAT_TSV, GRADCHECK_H, GRADCHECK_PROBES, GRADCHECK_THRESHOLD, LOG_FILE, MODE_ANY_RATING,
    MODE_RATING5, REFERENCE_STATS, SPLIT_TEST, SPLIT_VALIDATION, SWEEP_GRIDS, VARIANTS, VARIANT_FULL,
)
from utils.errors import ConfigError, MarsError
from utils.helpers import canonical_json, resolve_seed

EPILOG = """
Examples:
  # Generate the synthetic two-cluster dataset and ingest it
  python main.py synth --out data/synth --seed 7
  python main.py ingest --interactions data/synth/interactions.tsv --items data/synth/items.jsonl --out data/synth/artifacts

  # Train with a config file, overriding the seed
  python main.py train --data data/synth/artifacts --config train.json --out runs/full.ckpt --seed 42

  # Evaluate on the test split (recall@10 and recall@50, textbook AveP)
  python main.py evaluate --data data/synth/artifacts --checkpoint runs/full.ckpt --recall-at 10,50 --ap-mode standard

  # Recommend and explain
  python main.py recommend --data data/synth/artifacts --checkpoint runs/full.ckpt --user user007 --top 10 --explain
  python main.py explain --data data/synth/artifacts --checkpoint runs/full.ckpt --user user007 --item item042

  # Ablation table over three seeds
  python main.py compare --data data/synth/artifacts --config train.json --seeds 1,2,3

Exit codes:
  0  success
  1  usage or configuration error
  2  data or model error
"""


class UsageError(Exception):
    pass


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage problems as exit code 1"""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def int_list(text: str) -> List[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got '{text}'")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one value")
    return values


def number_list(text: str) -> List[float]:
    try:
        return [float(part) if any(c in part for c in ".eE") else int(part)
                for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got '{text}'")


def build_parser() -> CliParser:
    parser = CliParser(
        prog="main.py",
        description="MARS: memory-attention recommendations from item text",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=EPILOG,
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=None,
                        help='Random seed (falls back to the config file, then MARS_SEED, then 42)')
    common.add_argument('--format', choices=['text', 'json'], default='text', help='Output format (default: text)')
    common.add_argument('--verbose', action='store_true', help='Show progress messages on the console')
    common.add_argument('--log-file', default=LOG_FILE, help=f'Log file (default: {LOG_FILE}; "" disables)')

    subparsers = parser.add_subparsers(dest='mode', help='Operation', required=True)

    # Ingest
    p = subparsers.add_parser('ingest', parents=[common], help='Build dataset, vocabulary and encoded documents',
                              description='Parse interactions and item documents into an artifact directory')
    p.add_argument('--interactions', required=True, help='user/item/rating file')
    p.add_argument('--items', required=True, help='JSON-lines item documents (item_id, text, optional title)')
    p.add_argument('--out', required=True, help='Artifact directory')
    p.add_argument('--input-format', choices=[FORMAT_TSV, FORMAT_CSV], default=FORMAT_TSV)
    p.add_argument('--binarize', choices=[MODE_RATING5, MODE_ANY_RATING], default=MODE_RATING5,
                   help=f'Positive definition (default: {MODE_RATING5})')
    p.add_argument('--min-per-user', type=int, default=DEFAULT_MIN_PER_USER)
    p.add_argument('--min-per-item', type=int, default=DEFAULT_MIN_PER_ITEM)
    p.add_argument('--min-freq', type=int, default=DEFAULT_MIN_FREQ)
    p.add_argument('--max-len', type=int, default=DEFAULT_MAX_LEN)
    p.add_argument('--window-size', type=int, default=DEFAULT_WINDOW_SIZE)
    p.add_argument('--train-frac', type=float, default=DEFAULT_TRAIN_FRAC)
    p.add_argument('--reference', choices=sorted(REFERENCE_STATS), help='Compare statistics to a public dataset')

    # Train
    p = subparsers.add_parser('train', parents=[common], help='Train a model',
                              description='Train with RMSprop on sampled quadruples; keeps the best validation MAP')
    p.add_argument('--data', required=True, help='Artifact directory from ingest')
    p.add_argument('--config', help='JSON TrainConfig file')
    p.add_argument('--out', required=True, help='Checkpoint path')
    p.add_argument('--metrics', help='Per-epoch metrics log (default: <out>.metrics.jsonl)')
    _add_config_overrides(p)

    # Evaluate
    p = subparsers.add_parser('evaluate', parents=[common], help='Held-out recall@N and MAP')
    p.add_argument('--data', required=True)
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--split', choices=[SPLIT_VALIDATION, SPLIT_TEST], default=SPLIT_TEST)
    p.add_argument('--recall-at', type=int_list, default=[50], help='Comma list of cut-offs (default: 50)')
    p.add_argument('--map-cutoff', type=int, default=DEFAULT_MAP_CUTOFF)
    p.add_argument('--ap-mode', choices=[AP_MODE_LITERAL, AP_MODE_STANDARD], default=DEFAULT_AP_MODE)
    p.add_argument('--include-validation', action='store_true',
                   help='Keep validation positives among test-time candidates')
    p.add_argument('--report', help='Write the full MetricsReport JSON here')

    # Recommend
    p = subparsers.add_parser('recommend', parents=[common], help='Top-N list for a user')
    p.add_argument('--data', required=True)
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--user', required=True)
    p.add_argument('--top', type=int, default=10)
    p.add_argument('--explain', action='store_true', help='Add "because you liked" contributors')
    p.add_argument('--top-k', type=int, default=DEFAULT_EXPLAIN_TOP_K)

    # Explain
    p = subparsers.add_parser('explain', parents=[common], help='Explain one recommendation')
    p.add_argument('--data', required=True)
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--user', required=True)
    p.add_argument('--item', required=True)
    p.add_argument('--top-k', type=int, default=DEFAULT_EXPLAIN_TOP_K)

    # Gradcheck
    p = subparsers.add_parser('gradcheck', parents=[common], help='Finite-difference gradient suite')
    p.add_argument('--variant', choices=VARIANTS, default=VARIANT_FULL)
    p.add_argument('--probes', type=int, default=GRADCHECK_PROBES)
    p.add_argument('--step', type=float, default=GRADCHECK_H)
    p.add_argument('--threshold', type=float, default=GRADCHECK_THRESHOLD)
    p.add_argument('--share-embeddings', action='store_true')

    # Synthetic data
    p = subparsers.add_parser('synth', parents=[common], help='Generate the synthetic topic-cluster dataset')
    p.add_argument('--out', required=True)
    p.add_argument('--users', type=int, default=200)
    p.add_argument('--items', type=int, default=400)
    p.add_argument('--topics', type=int, default=8)
    p.add_argument('--vocab', type=int, default=200)
    p.add_argument('--topics-per-user', type=int, default=2)
    p.add_argument('--likes-per-topic', type=int, default=8)
    p.add_argument('--doc-length', type=int, default=40)
    p.add_argument('--purity', type=float, default=0.8)

    # Compare variants
    p = subparsers.add_parser('compare', parents=[common], help='Ablation table over model variants')
    p.add_argument('--data', required=True)
    p.add_argument('--config')
    p.add_argument('--variants', default=",".join(VARIANTS), help='Comma list of variants')
    p.add_argument('--seeds', type=int_list, help='Comma list of training seeds (default: the run seed)')
    p.add_argument('--resplit', action='store_true', help='Draw a fresh split per seed and report mean/std')
    p.add_argument('--out-json', help='Write the table as JSON')
    p.add_argument('--out-text', help='Write the aligned text table')
    _add_config_overrides(p)

    # Sweep
    p = subparsers.add_parser('sweep', parents=[common], help='Validation sweep over one hyper-parameter')
    p.add_argument('--data', required=True)
    p.add_argument('--config')
    p.add_argument('--param', choices=sorted(SWEEP_GRIDS) + ['lambda'], required=True)
    p.add_argument('--values', type=number_list, help='Comma list (default: the built-in grid)')
    _add_config_overrides(p)

    # Inspect
    p = subparsers.add_parser('inspect', parents=[common], help='Show a checkpoint header without loading tensors')
    p.add_argument('--checkpoint', required=True)

    return parser


def _add_config_overrides(p):
    p.add_argument('--epochs', type=int)
    p.add_argument('--batch-size', type=int)
    p.add_argument('--learning-rate', type=float)
    p.add_argument('--variant', choices=VARIANTS)
    p.add_argument('--latent-dim', type=int)
    p.add_argument('--embedding-dim', type=int)
    p.add_argument('--num-filters', type=int)
    p.add_argument('--window-size', type=int)
    p.add_argument('--lambda-u', type=float)
    p.add_argument('--lambda-v', type=float)
    p.add_argument('--memory-size-train', type=int)
    p.add_argument('--memory-size-eval', type=int)
    p.add_argument('--patience', type=int)
    p.add_argument('--workers', type=int)


OVERRIDE_FIELDS = ('epochs', 'batch_size', 'learning_rate', 'variant', 'latent_dim', 'embedding_dim', 'num_filters',
                   'window_size', 'lambda_u', 'lambda_v', 'memory_size_train', 'memory_size_eval', 'patience',
                   'workers')


def resolve_config(args):
    """TrainConfig from --config plus flag overrides; the seed follows flag -> file -> MARS_SEED -> default"""
    from config.train_config import load_config

    overrides = {name: getattr(args, name, None) for name in OVERRIDE_FIELDS}
    config = load_config(args.config, overrides)
    config_seed = config.seed if 'seed' in config.model_fields_set else None
    return config.model_copy(update={'seed': resolve_seed(args.seed, config_seed)})


def emit(args, payload, text: Optional[str] = None):
    if args.format == 'json':
        print(canonical_json(payload, indent=2))
    elif text is not None:
        print(text)


def dispatch(args) -> int:
    quiet = args.format == 'json'

    if args.mode == 'ingest':
        from modes.ingest import run_ingest
        artifacts = run_ingest(args.interactions, args.items, args.out, fmt=args.input_format, mode=args.binarize,
                               min_per_user=args.min_per_user, min_per_item=args.min_per_item,
                               min_freq=args.min_freq, max_len=args.max_len, window_size=args.window_size,
                               train_frac=args.train_frac, seed=resolve_seed(args.seed), reference=args.reference,
                               quiet=quiet)
        emit(args, artifacts.stats)

    elif args.mode == 'train':
        from modes.training import run_training
        config = resolve_config(args)
        result = run_training(args.data, config, args.out, args.metrics, quiet=quiet)
        emit(args, {"checkpoint": args.out, "checkpoint_digest": result.checkpoint_digest,
                    "config": config.echo(), **result.info()})

    elif args.mode == 'evaluate':
        from modes.evaluation import run_evaluation
        report = run_evaluation(args.data, args.checkpoint, args.split, args.recall_at, args.map_cutoff,
                                args.ap_mode, seed=args.seed, exclude_validation=not args.include_validation,
                                report_path=args.report, quiet=quiet)
        emit(args, report.to_dict())

    elif args.mode == 'recommend':
        from modes.explain import format_recommendations, run_recommend
        artifacts, ranked, explanations = run_recommend(args.data, args.checkpoint, args.user, args.top,
                                                        seed=args.seed, with_explanations=args.explain,
                                                        top_k=args.top_k)
        payload = {"user_id": ranked.user_id,
                   "items": [{"item_id": i, "score": float(s)} for i, s in zip(ranked.item_ids, ranked.scores)]}
        if explanations:
            payload["explanations"] = [e.to_dict() for e in explanations]
        emit(args, payload, format_recommendations(ranked, artifacts, explanations))

    elif args.mode == 'explain':
        from modes.explain import format_explanation, run_explain
        artifacts, explanation = run_explain(args.data, args.checkpoint, args.user, args.item, args.top_k,
                                             seed=args.seed)
        emit(args, explanation.to_dict(), format_explanation(explanation, artifacts))

    elif args.mode == 'gradcheck':
        from modes.gradcheck import run_gradcheck
        report = run_gradcheck(args.variant, seed=resolve_seed(args.seed), probes=args.probes, h=args.step,
                               threshold=args.threshold, share_embeddings=args.share_embeddings, quiet=quiet)
        emit(args, report.to_dict())
        if not report.passed:
            print(f"Error: gradient check failed for {', '.join(report.failures())}", file=sys.stderr)
            return 2

    elif args.mode == 'synth':
        from modes.synth import run_synth
        data = run_synth(args.out, num_users=args.users, num_items=args.items, num_topics=args.topics,
                         vocab_size=args.vocab, topics_per_user=args.topics_per_user,
                         likes_per_topic=args.likes_per_topic, doc_length=args.doc_length, purity=args.purity,
                         seed=resolve_seed(args.seed), quiet=quiet)
        emit(args, {"out": args.out, "interactions": len(data.interactions), "items": len(data.documents)})

    elif args.mode == 'compare':
        from modes.evaluation import compare_variants, evaluate_repeated, format_table
        from processors.artifacts import load_artifacts
        from utils.helpers import save_json
        config = resolve_config(args)
        variants = [v.strip() for v in args.variants.split(",") if v.strip()]
        unknown = [v for v in variants if v not in VARIANTS]
        if unknown:
            raise ConfigError(f"Unknown variants: {', '.join(unknown)}")
        seeds = args.seeds or [config.seed]
        artifacts = load_artifacts(args.data)
        if args.resplit:
            runs = {v: evaluate_repeated(artifacts, config.model_copy(update={'variant': v}), seeds)
                    for v in variants}
            emit(args, runs, "\n".join(f"{v}: " + ", ".join(f"{m} {s['mean']:.4f} ± {s['std']:.4f}"
                                                           for m, s in r["aggregate"].items())
                                       for v, r in runs.items()))
            return 0
        table = compare_variants(artifacts, config, variants, seeds)
        if args.out_json:
            save_json(args.out_json, table.to_dict())
        if args.out_text:
            with open(args.out_text, 'w', encoding='utf-8') as f:
                f.write(format_table(table))
        emit(args, table.to_dict(), format_table(table).rstrip("\n"))

    elif args.mode == 'sweep':
        from modes.evaluation import sweep
        from processors.artifacts import load_artifacts
        config = resolve_config(args)
        result = sweep(load_artifacts(args.data), config, args.param, args.values)
        text = "\n".join(f"{args.param}={r['value']}: " + ", ".join(f"{k} {v:.4f}" for k, v in r.items() if k != 'value')
                         for r in result["results"]) + f"\nbest: {result['best']}"
        emit(args, result, text)

    elif args.mode == 'inspect':
        from processors.checkpoint import read_checkpoint_header
        header = read_checkpoint_header(args.checkpoint)
        text = "\n".join([f"format version: {header['format_version']}",
                          f"variant:        {header['hyper']['variant']}",
                          f"vocab digest:   {header['vocab_digest']}",
                          f"catalog digest: {header['catalog_digest']}"]
                         + [f"{name:<20} {tuple(shape)}" for name, shape in header['shapes'].items()])
        emit(args, header, text)

    return 0


def cli_main(argv: Optional[List[str]] = None) -> int:
    """
    Run one subcommand

    Args:
        argv: Arguments without the program name (defaults to sys.argv[1:])

    Returns:
        Exit code: 0 success, 1 usage/config error, 2 data/model error
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    from utils.logging_config import setup_logging
    setup_logging(args.log_file or None, verbose=args.verbose)

    try:
        return dispatch(args)
    except ConfigError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1
    except (MarsError, OSError) as e:
        logging.debug("Command failed", exc_info=True)
        print(f"Error: {' '.join(str(e).split())}", file=sys.stderr)
        return 2


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
