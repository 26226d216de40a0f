"""
Recommendations and "because you liked" explanations
"""
import numpy as np
import pytest

from config.settings import VARIANT_NO_ATT
from core.model import attention, build_memory, encode_item, rank_items
from core.params import Hyper, init_params
from modes.explain import explain, format_explanation, format_recommendations, recommend
from utils.errors import InputError, UnknownItemError, UnknownUserError


@pytest.fixture
def params(toy_artifacts):
    hyper = Hyper(embedding_dim=6, num_filters=4, window_size=3, latent_dim=5, vocab_size=toy_artifacts.vocab.size,
                  num_items=len(toy_artifacts.dataset.items))
    return init_params(hyper, seed=8, init_std=0.5)


def candidate_for(artifacts, user):
    split = artifacts.dataset.split_of(user)
    return split.test[0]


def test_weights_are_the_attention_behind_the_score(params, toy_artifacts):
    user = toy_artifacts.dataset.users[0]
    item = candidate_for(toy_artifacts, user)
    result = explain(params, toy_artifacts, user, item, top_k=10)

    train = list(toy_artifacts.dataset.split_of(user).train)
    memory = build_memory(params, toy_artifacts.documents, user, train, item, memory_size=64)
    v = encode_item(toy_artifacts.documents.document(item), params)
    alpha = attention(memory, v)
    expected = dict(zip(memory.source_ids, alpha.weights))
    assert dict(result.contributors) == pytest.approx(expected, abs=1e-12)
    assert sum(w for _, w in result.contributors) == pytest.approx(1.0)


def test_score_matches_ranking(params, toy_artifacts):
    user = toy_artifacts.dataset.users[2]
    ranked = rank_items(params, toy_artifacts.dataset, toy_artifacts.documents, user)
    for item, value in zip(ranked.item_ids[:5], ranked.scores[:5]):
        assert explain(params, toy_artifacts, user, item).score == pytest.approx(value, abs=1e-12)


def test_contributors_sorted_and_capped(params, toy_artifacts):
    user = toy_artifacts.dataset.users[1]
    item = candidate_for(toy_artifacts, user)
    everything = explain(params, toy_artifacts, user, item, top_k=100)
    weights = [w for _, w in everything.contributors]
    assert weights == sorted(weights, reverse=True)
    assert len(everything.contributors) == len(toy_artifacts.dataset.split_of(user).train)
    assert explain(params, toy_artifacts, user, item, top_k=1).contributors == everything.contributors[:1]


def test_no_att_weights_are_all_one(toy_artifacts):
    hyper = Hyper(embedding_dim=6, num_filters=4, window_size=3, latent_dim=5, vocab_size=toy_artifacts.vocab.size,
                  num_items=len(toy_artifacts.dataset.items), variant=VARIANT_NO_ATT)
    user = toy_artifacts.dataset.users[0]
    result = explain(init_params(hyper, seed=1), toy_artifacts, user, candidate_for(toy_artifacts, user))
    assert all(w == 1.0 for _, w in result.contributors)
    # equal weights fall back to id order
    ids = [item for item, _ in result.contributors]
    assert ids == sorted(ids)


def test_errors(params, toy_artifacts):
    user = toy_artifacts.dataset.users[0]
    with pytest.raises(UnknownItemError):
        explain(params, toy_artifacts, user, "no-such-item")
    with pytest.raises(UnknownUserError):
        explain(params, toy_artifacts, "nobody", toy_artifacts.dataset.items[0])
    with pytest.raises(InputError):
        explain(params, toy_artifacts, user, toy_artifacts.dataset.items[0], top_k=0)


def test_recommend_with_explanations(params, toy_artifacts):
    user = toy_artifacts.dataset.users[3]
    ranked, explanations = recommend(params, toy_artifacts, user, top=4, with_explanations=True, top_k=2)
    assert len(ranked.item_ids) == 4
    assert [e.item_id for e in explanations] == ranked.item_ids
    np.testing.assert_allclose([e.score for e in explanations], ranked.scores, atol=1e-12)
    assert not set(ranked.item_ids) & set(toy_artifacts.dataset.split_of(user).train)

    text = format_recommendations(ranked, toy_artifacts, explanations)
    assert text.startswith(f"Top 4 for user {user}:")
    assert "because you liked" in text
    rendered = format_explanation(explanations[0], toy_artifacts)
    assert "Because you liked:" in rendered
    assert toy_artifacts.titles[ranked.item_ids[0]] in rendered
