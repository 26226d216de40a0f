"""
Item document preprocessing: tokenization, vocabulary, fixed-length encoding
"""
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from config.settings import DEFAULT_MAX_LEN, DEFAULT_MIN_FREQ, DEFAULT_WINDOW_SIZE, PAD_INDEX, PAD_TOKEN, VOCAB_HEADER
from processors.stopwords import STOPWORDS, stopword_set_id
from utils.errors import DocumentRejectedError, InputError, PipelineError, UnknownItemError
from utils.helpers import sha256_hex

TOKEN_SPLIT = re.compile(r'[\W_]+', re.UNICODE)


def tokenize(text: str) -> List[str]:
    """
    Lowercase and split on every non-alphanumeric run

    Args:
        text: Raw document text

    Returns:
        Token list (empty for empty text)
    """
    return [token for token in TOKEN_SPLIT.split(text.lower()) if token]


@dataclass
class Vocabulary:
    """Token <-> index map; index 0 is reserved for PAD"""
    index_to_token: List[str]
    frequencies: List[int]
    min_frequency: int
    stopword_set_id: str = ""
    token_to_index: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.token_to_index:
            self.token_to_index = {token: k for k, token in enumerate(self.index_to_token)}

    def __len__(self) -> int:
        return len(self.index_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_index and self.token_to_index[token] != PAD_INDEX

    @property
    def size(self) -> int:
        """|V| including the PAD entry"""
        return len(self.index_to_token)

    def serialize(self) -> str:
        lines = [VOCAB_HEADER.format(min_freq=self.min_frequency)]
        for index, (token, freq) in enumerate(zip(self.index_to_token, self.frequencies)):
            lines.append(f"{token}\t{index}\t{freq}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return sha256_hex(self.serialize().encode("utf-8"))


def build_vocab(corpus: Iterable[Sequence[str]], min_freq: int = DEFAULT_MIN_FREQ,
                stopwords=STOPWORDS) -> Vocabulary:
    """
    Build a vocabulary from tokenized documents

    Keeps tokens with corpus frequency >= min_freq that are not stopwords,
    ordered by descending frequency then lexicographically.

    Args:
        corpus: Token sequences, one per document
        min_freq: Minimum corpus frequency
        stopwords: Tokens never admitted

    Returns:
        Vocabulary with PAD at index 0
    """
    counts = Counter()
    documents = 0
    for tokens in corpus:
        counts.update(tokens)
        documents += 1
    if documents == 0:
        raise PipelineError("Cannot build a vocabulary from an empty corpus")

    kept = [(token, freq) for token, freq in counts.items() if freq >= min_freq and token not in stopwords]
    if not kept:
        raise PipelineError(f"Every token was filtered out (min_freq={min_freq}, {len(counts)} distinct tokens)")
    kept.sort(key=lambda pair: (-pair[1], pair[0]))

    vocab = Vocabulary(
        index_to_token=[PAD_TOKEN] + [token for token, _ in kept],
        frequencies=[0] + [freq for _, freq in kept],
        min_frequency=min_freq,
        stopword_set_id=stopword_set_id(stopwords),
    )
    logging.info(f"Built vocabulary: {len(kept)} tokens kept of {len(counts)} distinct (min_freq={min_freq})")
    return vocab


def save_vocab(vocab: Vocabulary, path: str):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(vocab.serialize())


def load_vocab(path: str, stopword_id: str = "") -> Vocabulary:
    """
    Read a vocabulary file written by save_vocab

    Args:
        path: Vocabulary TSV
        stopword_id: Stopword set id recorded alongside the vocabulary

    Returns:
        Vocabulary
    """
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().rstrip("\n")
        match = re.fullmatch(r"#mars-vocab v1 min_freq=(\d+)", header)
        if not match:
            raise PipelineError(f"{path} is not a mars vocabulary file (header {header!r})")
        tokens, freqs = [], []
        for line_no, line in enumerate(f, start=2):
            parts = line.rstrip("\n").split("\t")
            try:
                index, freq = int(parts[1]), int(parts[2])
            except (IndexError, ValueError):
                index = freq = None
            if len(parts) != 3 or index != len(tokens):
                raise PipelineError(f"{path}:{line_no}: malformed vocabulary entry")
            tokens.append(parts[0])
            freqs.append(freq)
    return Vocabulary(index_to_token=tokens, frequencies=freqs, min_frequency=int(match.group(1)),
                      stopword_set_id=stopword_id)


@dataclass
class EncodedDocument:
    """Fixed-length, PAD-right index sequence of one item document"""
    item_id: str
    indices: np.ndarray
    true_length: int

    @property
    def max_len(self) -> int:
        return int(self.indices.shape[0])


def encode_document(tokens: Sequence[str], vocab: Vocabulary, max_len: int = DEFAULT_MAX_LEN,
                    item_id: str = "", window_size: int = DEFAULT_WINDOW_SIZE) -> EncodedDocument:
    """
    Map tokens to indices, dropping unknown tokens, truncating and padding to max_len

    Args:
        tokens: Document tokens
        vocab: Vocabulary
        max_len: Output length
        item_id: Item the document belongs to (used in rejection errors)
        window_size: Convolution window; max_len must be at least this

    Returns:
        EncodedDocument
    """
    if max_len < window_size:
        raise InputError(f"max_len {max_len} is shorter than the convolution window {window_size}")
    kept = [vocab.token_to_index[token] for token in tokens if token in vocab][:max_len]
    if not kept:
        raise DocumentRejectedError(item_id)
    indices = np.full(max_len, PAD_INDEX, dtype=np.int64)
    indices[:len(kept)] = kept
    return EncodedDocument(item_id=item_id, indices=indices, true_length=len(kept))


def decode_document(doc: EncodedDocument, vocab: Vocabulary) -> List[str]:
    """Retained tokens of an encoded document, in order"""
    return [vocab.index_to_token[k] for k in doc.indices[:doc.true_length]]


class DocumentTable:
    """Encoded documents of the whole catalog, one row per item in catalog order"""

    def __init__(self, item_ids: Sequence[str], indices: np.ndarray, lengths: np.ndarray):
        if indices.ndim != 2 or indices.shape[0] != len(item_ids) or lengths.shape[0] != len(item_ids):
            raise InputError("document table arrays do not match the item list")
        self.item_ids = list(item_ids)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.lengths = np.asarray(lengths, dtype=np.int64)
        self.row_of = {item: k for k, item in enumerate(self.item_ids)}

    @classmethod
    def from_documents(cls, documents: Sequence[EncodedDocument]) -> "DocumentTable":
        if not documents:
            raise InputError("no documents")
        return cls(
            [doc.item_id for doc in documents],
            np.vstack([doc.indices for doc in documents]),
            np.array([doc.true_length for doc in documents]),
        )

    def __len__(self) -> int:
        return len(self.item_ids)

    def __contains__(self, item_id: str) -> bool:
        return item_id in self.row_of

    def rows(self, item_ids: Sequence[str]) -> np.ndarray:
        try:
            return np.array([self.row_of[item] for item in item_ids], dtype=np.int64)
        except KeyError as e:
            raise UnknownItemError(e.args[0]) from None

    def document(self, item_id: str) -> EncodedDocument:
        row = self.rows([item_id])[0]
        return EncodedDocument(item_id=item_id, indices=self.indices[row].copy(), true_length=int(self.lengths[row]))

    def subset(self, item_ids: Sequence[str]) -> "DocumentTable":
        rows = self.rows(item_ids)
        return DocumentTable(item_ids, self.indices[rows], self.lengths[rows])


def encode_corpus(texts: Dict[str, str], vocab: Optional[Vocabulary] = None, min_freq: int = DEFAULT_MIN_FREQ,
                  max_len: int = DEFAULT_MAX_LEN, window_size: int = DEFAULT_WINDOW_SIZE,
                  stopwords=STOPWORDS):
    """
    Tokenize, build the vocabulary (unless given) and encode every document

    Args:
        texts: item id -> raw text
        vocab: Existing vocabulary (built from texts when None)
        min_freq: Minimum token frequency for a new vocabulary
        max_len: Encoded document length
        window_size: Convolution window
        stopwords: Stopword list for a new vocabulary

    Returns:
        (Vocabulary, list of EncodedDocument sorted by item id, list of rejected item ids)
    """
    tokenized = {item: tokenize(text) for item, text in sorted(texts.items())}
    if vocab is None:
        vocab = build_vocab(tokenized.values(), min_freq=min_freq, stopwords=stopwords)
    documents, rejected = [], []
    for item, tokens in tokenized.items():
        try:
            documents.append(encode_document(tokens, vocab, max_len=max_len, item_id=item, window_size=window_size))
        except DocumentRejectedError:
            rejected.append(item)
    if rejected:
        logging.warning(f"Rejected {len(rejected)} documents with no in-vocabulary tokens")
    return vocab, documents, rejected
