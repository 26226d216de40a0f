"""
Implicit-feedback ingest: parsing, binarization, filtering and per-user splits
"""
import csv
import json
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from fractions import Fraction
from math import ceil
from typing import Dict, List, Optional, Sequence, Tuple

from config.settings import (
    DEFAULT_MIN_PER_ITEM, DEFAULT_MIN_PER_USER, DEFAULT_TRAIN_FRAC, FORMAT_CSV, FORMAT_TSV,
    MAX_MALFORMED_FRACTION, MODE_ANY_RATING, MODE_RATING5,
)
from utils.errors import IngestError, InputError, SplitError, UnknownUserError
from utils.helpers import canonical_json, derived_rng, sha256_hex

Triple = Tuple[str, str, float]
Pair = Tuple[str, str]


@dataclass
class ParseResult:
    triples: List[Triple]
    malformed: int
    data_lines: int
    header_skipped: bool = False


def _is_number(value: str) -> bool:
    try:
        float(value)
        return True
    except ValueError:
        return False


def _read_lines(path: str, newline: Optional[str] = None):
    """Lines of a UTF-8 text file; undecodable bytes become an IngestError"""
    try:
        with open(path, 'r', encoding='utf-8', newline=newline) as f:
            yield from f
    except UnicodeDecodeError as e:
        raise IngestError(f"{path} is not valid UTF-8: {e.reason}") from e


def parse_interactions(path: str, fmt: str = FORMAT_TSV) -> ParseResult:
    """
    Parse a user/item/rating file

    Lines are ``user<sep>item<sep>rating[<sep>timestamp]``. A first line whose rating
    field is not numeric is treated as a header.

    Args:
        path: Interactions file
        fmt: 'tsv' or 'csv'

    Returns:
        ParseResult with the triples and the malformed-line count
    """
    if fmt not in (FORMAT_TSV, FORMAT_CSV):
        raise InputError(f"Unknown interaction format '{fmt}'")
    delimiter = '\t' if fmt == FORMAT_TSV else ','

    triples = []
    malformed = 0
    data_lines = 0
    header_skipped = False
    for line_no, row in enumerate(csv.reader(_read_lines(path, newline=''), delimiter=delimiter), start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if line_no == 1 and len(row) >= 3 and not _is_number(row[2].strip()):
            header_skipped = True
            continue
        data_lines += 1
        if len(row) < 3 or not row[0].strip() or not row[1].strip() or not _is_number(row[2].strip()):
            malformed += 1
            logging.debug(f"{path}:{line_no}: malformed interaction line {row!r}")
            continue
        triples.append((row[0].strip(), row[1].strip(), float(row[2].strip())))

    logging.info(f"Parsed {len(triples)} interactions from {path} ({malformed} malformed)")
    if data_lines and malformed / data_lines > MAX_MALFORMED_FRACTION:
        raise IngestError(f"{malformed} of {data_lines} lines in {path} are malformed (limit "
                          f"{MAX_MALFORMED_FRACTION:.0%})")
    return ParseResult(triples=triples, malformed=malformed, data_lines=data_lines, header_skipped=header_skipped)


def binarize(triples: Sequence[Triple], mode: str = MODE_RATING5) -> List[Pair]:
    """
    Turn ratings into positive (user, item) pairs

    Args:
        triples: (user, item, rating) triples
        mode: 'rating5' keeps rating == 5 only; 'any-rating' keeps every rated pair

    Returns:
        Distinct positive pairs in first-seen order
    """
    if mode == MODE_RATING5:
        kept = ((u, i) for u, i, r in triples if r == 5)
    elif mode == MODE_ANY_RATING:
        kept = ((u, i) for u, i, _ in triples)
    else:
        raise InputError(f"Unknown binarization mode '{mode}'")
    return list(dict.fromkeys(kept))


def filter_min_interactions(pairs: Sequence[Pair], min_per_user: int = DEFAULT_MIN_PER_USER,
                            min_per_item: int = DEFAULT_MIN_PER_ITEM) -> List[Pair]:
    """
    Drop users (and items) below their thresholds, repeating until nothing changes

    Args:
        pairs: Positive pairs
        min_per_user: Minimum positives per user
        min_per_item: Minimum positives per item

    Returns:
        Filtered pairs (original order)
    """
    if min_per_user < 1 or min_per_item < 1:
        raise InputError("interaction thresholds must be >= 1")
    current = list(pairs)
    rounds = 0
    while True:
        rounds += 1
        user_counts = Counter(u for u, _ in current)
        item_counts = Counter(i for _, i in current)
        kept = [(u, i) for u, i in current if user_counts[u] >= min_per_user and item_counts[i] >= min_per_item]
        if len(kept) == len(current):
            break
        current = kept
    if not current:
        raise IngestError(f"No interactions left after filtering (min_per_user={min_per_user}, "
                          f"min_per_item={min_per_item})")
    logging.info(f"Filtering reached a fixed point after {rounds} round(s): {len(current)} pairs")
    return current


@dataclass(frozen=True)
class UserSplit:
    train: Tuple[str, ...]
    validation: Tuple[str, ...]
    test: Tuple[str, ...]

    def part(self, name: str) -> Tuple[str, ...]:
        if name not in ("train", "validation", "test"):
            raise InputError(f"Unknown split '{name}'")
        return getattr(self, name)


@dataclass
class InteractionDataset:
    """Users, items and per-user positive sets, optionally split"""
    users: Tuple[str, ...]
    items: Tuple[str, ...]
    positives: Dict[str, Tuple[str, ...]]
    splits: Dict[str, UserSplit] = field(default_factory=dict)
    split_seed: Optional[int] = None
    train_frac: Optional[float] = None

    def __post_init__(self):
        self.user_index = {u: k for k, u in enumerate(self.users)}
        self.item_index = {i: k for k, i in enumerate(self.items)}

    @classmethod
    def from_pairs(cls, pairs: Sequence[Pair], items: Optional[Sequence[str]] = None) -> "InteractionDataset":
        """Build from positive pairs; the item universe is every referenced item"""
        positives: Dict[str, set] = {}
        for u, i in pairs:
            positives.setdefault(u, set()).add(i)
        referenced = {i for _, i in pairs}
        universe = sorted(set(items) | referenced) if items is not None else sorted(referenced)
        return cls(
            users=tuple(sorted(positives)),
            items=tuple(universe),
            positives={u: tuple(sorted(s)) for u, s in sorted(positives.items())},
        )

    @property
    def num_positives(self) -> int:
        return sum(len(p) for p in self.positives.values())

    @property
    def density(self) -> float:
        if not self.users or not self.items:
            return 0.0
        return self.num_positives / (len(self.users) * len(self.items))

    @property
    def num_train_positives(self) -> int:
        return sum(len(s.train) for s in self.splits.values())

    def split_of(self, user_id: str) -> UserSplit:
        if user_id not in self.user_index:
            raise UnknownUserError(user_id)
        if user_id not in self.splits:
            raise InputError("dataset has not been split")
        return self.splits[user_id]

    def with_splits(self, splits: Dict[str, UserSplit], seed: int, train_frac: float) -> "InteractionDataset":
        return replace(self, splits=splits, split_seed=seed, train_frac=train_frac)

    def stats(self) -> dict:
        return {
            "users": len(self.users),
            "items": len(self.items),
            "positives": self.num_positives,
            "density": self.density,
        }

    def to_dict(self) -> dict:
        return {"users": list(self.users), "items": list(self.items),
                "positives": {u: list(p) for u, p in self.positives.items()}}

    def digest(self) -> str:
        return sha256_hex(canonical_json(self.to_dict()).encode('utf-8'))

    def catalog_digest(self) -> str:
        return sha256_hex("\n".join(self.items).encode('utf-8'))


def train_count(n: int, train_frac: float) -> int:
    """ceil(train_frac * n) evaluated exactly"""
    return ceil(Fraction(str(train_frac)) * n)


def split_per_user(dataset: InteractionDataset, train_frac: float = DEFAULT_TRAIN_FRAC,
                   seed: int = 0) -> Dict[str, UserSplit]:
    """
    Random per-user split: ceil(train_frac * n) training items, the rest halved
    between validation and test (validation gets the odd item)

    Args:
        dataset: Unsplit dataset
        train_frac: Training fraction
        seed: Split seed

    Returns:
        user id -> UserSplit
    """
    if not 0.0 < train_frac < 1.0:
        raise InputError("train_frac must be in (0, 1)")
    splits = {}
    for user in dataset.users:
        items = list(dataset.positives[user])
        n = len(items)
        if n < 3:
            raise SplitError(user, n)
        order = derived_rng(seed, dataset.user_index[user]).permutation(n)
        shuffled = [items[k] for k in order]
        n_train = train_count(n, train_frac)
        rest = shuffled[n_train:]
        n_val = (len(rest) + 1) // 2
        splits[user] = UserSplit(
            train=tuple(sorted(shuffled[:n_train])),
            validation=tuple(sorted(rest[:n_val])),
            test=tuple(sorted(rest[n_val:])),
        )
    logging.info(f"Split {len(splits)} users with seed {seed} (train fraction {train_frac})")
    return splits


def split_manifest(dataset: InteractionDataset) -> dict:
    """JSON-ready description of the split (seed, fractions, per-user item lists)"""
    if not dataset.splits:
        raise InputError("dataset has not been split")
    return {
        "seed": dataset.split_seed,
        "fractions": {"train": dataset.train_frac, "validation": round((1.0 - dataset.train_frac) / 2, 6),
                      "test": round((1.0 - dataset.train_frac) / 2, 6)},
        "rounding": "train = ceil(train * n); validation takes the odd remaining item",
        "users": {
            u: {"train": list(s.train), "validation": list(s.validation), "test": list(s.test)}
            for u, s in sorted(dataset.splits.items())
        },
    }


def manifest_digest(manifest: dict) -> str:
    return sha256_hex(canonical_json(manifest).encode('utf-8'))


def splits_from_manifest(manifest: dict) -> Dict[str, UserSplit]:
    return {
        u: UserSplit(tuple(parts["train"]), tuple(parts["validation"]), tuple(parts["test"]))
        for u, parts in manifest["users"].items()
    }


def load_item_documents(path: str) -> Dict[str, dict]:
    """
    Read item documents from JSON-lines (``item_id``, ``text``, optional ``title``)

    Args:
        path: JSON-lines file

    Returns:
        item id -> {"text": ..., "title": ...}
    """
    documents = {}
    skipped = 0
    for line_no, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            item_id, text = str(record["item_id"]), record["text"]
            if not isinstance(text, str):
                raise TypeError("text must be a string")
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            skipped += 1
            logging.debug(f"{path}:{line_no}: skipping document line ({e})")
            continue
        documents[item_id] = {"text": text, "title": record.get("title")}
    if skipped:
        logging.warning(f"Skipped {skipped} malformed document lines in {path}")
    logging.info(f"Loaded {len(documents)} item documents from {path}")
    return documents
