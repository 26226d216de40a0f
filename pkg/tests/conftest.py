"""
Shared fixtures: a small synthetic dataset, its artifacts and a tiny training config
"""
import pytest

from config.train_config import make_config
from modes.ingest import build_artifacts
from processors.synthetic import generate_synthetic


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow training experiments")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope="session")
def toy_data():
    """12 users, 24 items, 2 topics; every user likes 6 items of a single topic"""
    return generate_synthetic(num_users=12, num_items=24, num_topics=2, vocab_size=30, topics_per_user=1,
                              likes_per_topic=6, doc_length=12, purity=0.9, seed=3)


@pytest.fixture(scope="session")
def toy_artifacts(toy_data):
    return build_artifacts(toy_data.interactions, toy_data.documents, min_freq=1, max_len=12, window_size=3, seed=0)


@pytest.fixture
def small_config():
    return make_config(epochs=2, batch_size=8, e=8, g=4, c=3, K=6, memory_size_train=3, memory_size_eval=8,
                       seed=5, patience=5, lambda_u=0.002, lambda_v=0.002)
