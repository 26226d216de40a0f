"""
Tokenization, vocabulary and document encoding
"""
import numpy as np
import pytest

from config.settings import PAD_INDEX, PAD_TOKEN
from processors.stopwords import STOPWORDS, stopword_set_id
from processors.text_pipeline import (
    DocumentTable, build_vocab, decode_document, encode_corpus, encode_document, load_vocab, save_vocab, tokenize,
)
from utils.errors import DocumentRejectedError, InputError, PipelineError, UnknownItemError


def test_tokenize_lowercases_and_splits_on_punctuation():
    assert tokenize("Sleepless in SEATTLE... (1993)") == ["sleepless", "in", "seattle", "1993"]
    assert tokenize("") == []
    assert tokenize("when_harry-met sally") == ["when", "harry", "met", "sally"]


class TestBuildVocab:
    corpus = [["war", "peace", "war", "the"], ["war", "love", "peace"], ["love", "war"]]

    def test_order_is_frequency_then_lexicographic(self):
        vocab = build_vocab(self.corpus, min_freq=2)
        assert vocab.index_to_token == [PAD_TOKEN, "war", "love", "peace"]
        assert vocab.frequencies == [0, 4, 2, 2]

    def test_stopwords_and_rare_tokens_dropped(self):
        vocab = build_vocab(self.corpus, min_freq=1)
        assert "the" not in vocab
        assert "war" in vocab
        assert PAD_TOKEN not in vocab

    def test_everything_filtered(self):
        with pytest.raises(PipelineError):
            build_vocab(self.corpus, min_freq=10)

    def test_empty_corpus(self):
        with pytest.raises(PipelineError):
            build_vocab([], min_freq=1)

    def test_round_trip_through_file(self, tmp_path):
        vocab = build_vocab(self.corpus, min_freq=1)
        path = tmp_path / "vocab.tsv"
        save_vocab(vocab, str(path))
        loaded = load_vocab(str(path), stopword_id=vocab.stopword_set_id)
        assert loaded.index_to_token == vocab.index_to_token
        assert loaded.digest() == vocab.digest()

    def test_stopword_id_is_stable(self):
        assert stopword_set_id() == stopword_set_id(set(STOPWORDS))
        assert stopword_set_id() != stopword_set_id(set(STOPWORDS) | {"movie"})


class TestEncodeDocument:
    vocab = build_vocab([["alpha", "beta", "gamma", "alpha"]], min_freq=1)

    def test_pads_right(self):
        doc = encode_document(["beta", "unknown", "alpha"], self.vocab, max_len=5, item_id="x")
        assert doc.true_length == 2
        assert list(doc.indices[2:]) == [PAD_INDEX] * 3
        assert decode_document(doc, self.vocab) == ["beta", "alpha"]

    def test_truncates(self):
        doc = encode_document(["alpha"] * 10, self.vocab, max_len=4)
        assert doc.true_length == 4 and doc.max_len == 4

    def test_rejects_documents_without_known_tokens(self):
        with pytest.raises(DocumentRejectedError) as excinfo:
            encode_document(["nothing", "known"], self.vocab, max_len=5, item_id="i9")
        assert excinfo.value.item_id == "i9"

    def test_max_len_shorter_than_window(self):
        with pytest.raises(InputError):
            encode_document(["alpha"], self.vocab, max_len=2, window_size=3)


def test_encode_corpus_reports_rejections():
    texts = {"b": "alpha beta", "a": "alpha alpha", "c": "the of and"}
    vocab, docs, rejected = encode_corpus(texts, min_freq=1, max_len=4)
    assert [d.item_id for d in docs] == ["a", "b"]
    assert rejected == ["c"]
    assert vocab.size == 3


def test_document_table_rows_and_subset():
    vocab, docs, _ = encode_corpus({"a": "alpha", "b": "beta", "c": "gamma"}, min_freq=1, max_len=3)
    table = DocumentTable.from_documents(docs)
    assert list(table.rows(["c", "a"])) == [2, 0]
    sub = table.subset(["c", "a"])
    assert sub.item_ids == ["c", "a"]
    np.testing.assert_array_equal(sub.indices[0], table.indices[2])
    with pytest.raises(UnknownItemError):
        table.rows(["zzz"])
