"""
Ingest mode: interactions + item documents -> split dataset, vocabulary and encoded documents
"""
import logging
from typing import Dict, Optional, Sequence

import colorama

from config.settings import (
    DEFAULT_MAX_LEN, DEFAULT_MIN_FREQ, DEFAULT_MIN_PER_ITEM, DEFAULT_MIN_PER_USER, DEFAULT_TRAIN_FRAC,
    DEFAULT_WINDOW_SIZE, FORMAT_TSV, MODE_RATING5, REFERENCE_STATS,
)
from processors.artifacts import Artifacts, save_artifacts
from processors.ingest import (
    InteractionDataset, binarize, filter_min_interactions, load_item_documents, parse_interactions, split_per_user,
)
from processors.stopwords import STOPWORDS
from processors.text_pipeline import DocumentTable, encode_corpus
from utils.errors import IngestError
from utils.helpers import print_banner


def build_artifacts(triples: Sequence, documents: Dict[str, dict], mode: str = MODE_RATING5,
                    min_per_user: int = DEFAULT_MIN_PER_USER, min_per_item: int = DEFAULT_MIN_PER_ITEM,
                    min_freq: int = DEFAULT_MIN_FREQ, max_len: int = DEFAULT_MAX_LEN,
                    window_size: int = DEFAULT_WINDOW_SIZE, train_frac: float = DEFAULT_TRAIN_FRAC,
                    seed: int = 0, stopwords=STOPWORDS) -> Artifacts:
    """
    Run the whole ingest pipeline in memory

    Items without a document, or whose document keeps no vocabulary token, are
    removed before the per-user/per-item thresholds are applied.

    Args:
        triples: (user, item, rating) triples
        documents: item id -> {"text": ..., "title": ...}
        mode: Binarization mode
        min_per_user: Minimum positives per user
        min_per_item: Minimum positives per item
        min_freq: Minimum token frequency
        max_len: Encoded document length
        window_size: Convolution window the documents must accommodate
        train_frac: Training fraction of each user's positives
        seed: Split seed
        stopwords: Stopword list

    Returns:
        Artifacts ready to save
    """
    pairs = binarize(triples, mode)
    referenced = sorted({item for _, item in pairs})
    texts = {item: documents[item]["text"] for item in referenced if item in documents}
    missing = len(referenced) - len(texts)
    if missing:
        logging.warning(f"{missing} rated items have no document and are dropped")
    if not texts:
        raise IngestError("No rated item has a document")

    vocab, encoded, rejected = encode_corpus(texts, min_freq=min_freq, max_len=max_len,
                                             window_size=window_size, stopwords=stopwords)
    usable = {doc.item_id for doc in encoded}
    pairs = [(u, i) for u, i in pairs if i in usable]
    pairs = filter_min_interactions(pairs, min_per_user=min_per_user, min_per_item=min_per_item)

    dataset = InteractionDataset.from_pairs(pairs)
    dataset = dataset.with_splits(split_per_user(dataset, train_frac, seed), seed=seed, train_frac=train_frac)
    table = DocumentTable.from_documents(encoded).subset(list(dataset.items))
    titles = {item: documents[item]["title"] for item in dataset.items if documents[item].get("title")}

    stats = dataset.stats()
    stats.update({
        "vocab": vocab.size - 1,
        "dropped_no_document": missing,
        "dropped_rejected_document": len(rejected),
        "min_freq": min_freq,
        "max_len": max_len,
        "binarization": mode,
        "stopword_set_id": vocab.stopword_set_id,
        "vocab_digest": vocab.digest(),
        "catalog_digest": dataset.catalog_digest(),
    })
    logging.info(f"Dataset: {stats['users']} users, {stats['items']} items, {stats['positives']} positives, "
                 f"density {stats['density']:.6f}, vocabulary {stats['vocab']}")
    return Artifacts(dataset=dataset, vocab=vocab, documents=table, titles=titles, stats=stats)


def log_reference_comparison(stats: dict, reference: Optional[str]):
    """Report how the ingested dataset compares to a public dataset's published statistics"""
    if not reference:
        return
    expected = REFERENCE_STATS.get(reference)
    if expected is None:
        logging.warning(f"No reference statistics for '{reference}' (known: {', '.join(REFERENCE_STATS)})")
        return
    for key, value in expected.items():
        logging.info(f"{reference} {key}: ingested {stats.get(key)} / reference {value}")


def run_ingest(interactions_path: str, items_path: str, out_dir: str, fmt: str = FORMAT_TSV,
               mode: str = MODE_RATING5, min_per_user: int = DEFAULT_MIN_PER_USER,
               min_per_item: int = DEFAULT_MIN_PER_ITEM, min_freq: int = DEFAULT_MIN_FREQ,
               max_len: int = DEFAULT_MAX_LEN, window_size: int = DEFAULT_WINDOW_SIZE,
               train_frac: float = DEFAULT_TRAIN_FRAC, seed: int = 0, reference: Optional[str] = None,
               quiet: bool = False) -> Artifacts:
    """
    Ingest files from disk and write the artifact directory

    Args:
        interactions_path: user/item/rating file
        items_path: JSON-lines item documents
        out_dir: Artifact directory
        fmt: 'tsv' or 'csv'
        mode: Binarization mode
        min_per_user: Minimum positives per user
        min_per_item: Minimum positives per item
        min_freq: Minimum token frequency
        max_len: Encoded document length
        window_size: Convolution window
        train_frac: Training fraction
        seed: Split seed
        reference: Public dataset name to compare statistics against
        quiet: Skip the summary banner

    Returns:
        The saved Artifacts
    """
    parsed = parse_interactions(interactions_path, fmt)
    documents = load_item_documents(items_path)
    artifacts = build_artifacts(parsed.triples, documents, mode=mode, min_per_user=min_per_user,
                                min_per_item=min_per_item, min_freq=min_freq, max_len=max_len,
                                window_size=window_size, train_frac=train_frac, seed=seed)
    artifacts.stats["malformed_lines"] = parsed.malformed
    log_reference_comparison(artifacts.stats, reference)
    save_artifacts(out_dir, artifacts)

    if not quiet:
        s = artifacts.stats
        print_banner("INGEST SUMMARY", [
            f"Users:      {s['users']}",
            f"Items:      {s['items']}",
            f"Positives:  {s['positives']}",
            f"Density:    {s['density']:.6f}",
            f"Vocabulary: {s['vocab']}",
            f"Output:     {out_dir}",
        ], color=colorama.Fore.GREEN)
    return artifacts
