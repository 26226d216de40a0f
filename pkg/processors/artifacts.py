"""
On-disk artifacts written by ingest and read by every later mode
"""
import logging
import os
import zipfile
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from config.settings import DATASET_FILE, DOCUMENTS_FILE, SPLIT_MANIFEST_FILE, STATS_FILE, TITLES_FILE, VOCAB_FILE
from processors.ingest import InteractionDataset, manifest_digest, split_manifest, splits_from_manifest
from processors.text_pipeline import DocumentTable, Vocabulary, load_vocab, save_vocab
from utils.errors import IngestError
from utils.helpers import load_json, save_json


@dataclass
class Artifacts:
    """Everything a training or evaluation run needs from an ingest directory"""
    dataset: InteractionDataset
    vocab: Vocabulary
    documents: DocumentTable
    titles: Dict[str, str] = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    @property
    def vocab_digest(self) -> str:
        return self.vocab.digest()

    @property
    def catalog_digest(self) -> str:
        return self.dataset.catalog_digest()

    @property
    def split_digest(self) -> str:
        return manifest_digest(split_manifest(self.dataset))


def save_artifacts(out_dir: str, artifacts: Artifacts):
    """
    Write dataset, split manifest, vocabulary, encoded documents, titles and stats

    Args:
        out_dir: Destination directory (created if missing)
        artifacts: What to write
    """
    os.makedirs(out_dir, exist_ok=True)
    dataset = artifacts.dataset
    save_json(os.path.join(out_dir, DATASET_FILE), dataset.to_dict())
    save_json(os.path.join(out_dir, SPLIT_MANIFEST_FILE), split_manifest(dataset))
    save_vocab(artifacts.vocab, os.path.join(out_dir, VOCAB_FILE))
    docs = artifacts.documents
    with open(os.path.join(out_dir, DOCUMENTS_FILE), 'wb') as f:
        np.savez(f, item_ids=np.array(docs.item_ids, dtype=str), indices=docs.indices, lengths=docs.lengths)
    save_json(os.path.join(out_dir, TITLES_FILE), artifacts.titles)
    save_json(os.path.join(out_dir, STATS_FILE), artifacts.stats)
    logging.info(f"Wrote ingest artifacts to {out_dir}")


def load_artifacts(data_dir: str, manifest_path: Optional[str] = None) -> Artifacts:
    """
    Read an ingest directory

    Args:
        data_dir: Directory written by save_artifacts
        manifest_path: Alternative split manifest (defaults to the one in data_dir)

    Returns:
        Artifacts with a split dataset and catalog-ordered documents
    """
    try:
        return _read_artifacts(data_dir, manifest_path)
    except (ValueError, KeyError, TypeError, AttributeError, zipfile.BadZipFile) as e:
        raise IngestError(f"{data_dir} holds unreadable artifacts: {type(e).__name__}: {e}") from e


def _read_artifacts(data_dir: str, manifest_path: Optional[str]) -> Artifacts:
    raw = load_json(os.path.join(data_dir, DATASET_FILE))
    manifest = load_json(manifest_path or os.path.join(data_dir, SPLIT_MANIFEST_FILE))
    stats_path = os.path.join(data_dir, STATS_FILE)
    stats = load_json(stats_path) if os.path.exists(stats_path) else {}
    dataset = InteractionDataset(
        users=tuple(raw["users"]),
        items=tuple(raw["items"]),
        positives={u: tuple(p) for u, p in raw["positives"].items()},
    )
    dataset = dataset.with_splits(splits_from_manifest(manifest), seed=manifest.get("seed"),
                                  train_frac=manifest.get("fractions", {}).get("train"))

    vocab = load_vocab(os.path.join(data_dir, VOCAB_FILE), stopword_id=stats.get("stopword_set_id", ""))
    with np.load(os.path.join(data_dir, DOCUMENTS_FILE), allow_pickle=False) as npz:
        table = DocumentTable([str(x) for x in npz["item_ids"]], npz["indices"], npz["lengths"])
    missing = [item for item in dataset.items if item not in table]
    if missing:
        raise IngestError(f"{len(missing)} catalog items have no encoded document (e.g. '{missing[0]}')")
    documents = table.subset(list(dataset.items))

    titles_path = os.path.join(data_dir, TITLES_FILE)
    titles = load_json(titles_path) if os.path.exists(titles_path) else {}
    return Artifacts(dataset=dataset, vocab=vocab, documents=documents, titles=titles, stats=stats)
