"""
Synthetic topic-cluster datasets with planted structure
"""
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

from utils.errors import InputError
from utils.helpers import derived_rng

INTERACTIONS_FILE = "interactions.tsv"
ITEMS_FILE = "items.jsonl"


@dataclass
class SyntheticData:
    interactions: List[Tuple[str, str, float]]
    documents: Dict[str, dict]
    item_topics: Dict[str, int] = field(default_factory=dict)
    user_topics: Dict[str, Tuple[int, ...]] = field(default_factory=dict)

    @property
    def texts(self) -> Dict[str, str]:
        return {item: doc["text"] for item, doc in self.documents.items()}


def generate_synthetic(num_users: int = 200, num_items: int = 400, num_topics: int = 8, vocab_size: int = 200,
                       topics_per_user: int = 2, likes_per_topic: int = 8, doc_length: int = 40,
                       purity: float = 0.8, seed: int = 7) -> SyntheticData:
    """
    Generate users who like items from a few disjoint topic clusters

    Items are assigned to topics round-robin. A document draws each word from its
    topic's vocabulary with probability `purity` and from a shared background
    vocabulary otherwise.

    Args:
        num_users: Number of users
        num_items: Number of items
        num_topics: Number of topic clusters
        vocab_size: Total number of distinct words (topic + background)
        topics_per_user: Distinct topics each user likes
        likes_per_topic: Liked items per chosen topic
        doc_length: Words per document
        purity: Probability that a word comes from the item's topic
        seed: Generator seed

    Returns:
        SyntheticData with rating-5 interactions and item documents
    """
    if not 1 <= topics_per_user <= num_topics:
        raise InputError("topics_per_user must be between 1 and num_topics")
    if not 0.0 <= purity <= 1.0:
        raise InputError("purity must be in [0, 1]")
    words_per_topic = vocab_size // (num_topics + 1)
    if words_per_topic < 1:
        raise InputError(f"vocab_size {vocab_size} is too small for {num_topics} topics")
    background = [f"bg{w}" for w in range(vocab_size - words_per_topic * num_topics)]
    topic_words = [[f"t{t}w{w}" for w in range(words_per_topic)] for t in range(num_topics)]

    rng = derived_rng(seed, 0)
    width = len(str(num_items - 1))
    items = [f"item{k:0{width}d}" for k in range(num_items)]
    item_topics = {item: k % num_topics for k, item in enumerate(items)}
    by_topic = [[item for item in items if item_topics[item] == t] for t in range(num_topics)]
    if min(len(group) for group in by_topic) < likes_per_topic:
        raise InputError("not enough items per topic for likes_per_topic")

    documents = {}
    for item in items:
        topic = item_topics[item]
        words = []
        for _ in range(doc_length):
            if rng.random() < purity or not background:
                words.append(topic_words[topic][rng.integers(words_per_topic)])
            else:
                words.append(background[rng.integers(len(background))])
        documents[item] = {"text": " ".join(words), "title": f"Topic {topic} item {item}"}

    interactions = []
    user_topics = {}
    uwidth = len(str(num_users - 1))
    for k in range(num_users):
        user = f"user{k:0{uwidth}d}"
        topics = tuple(sorted(int(t) for t in rng.choice(num_topics, size=topics_per_user, replace=False)))
        user_topics[user] = topics
        for t in topics:
            for idx in rng.choice(len(by_topic[t]), size=likes_per_topic, replace=False):
                interactions.append((user, by_topic[t][int(idx)], 5.0))

    logging.info(f"Generated {num_users} users, {num_items} items, {len(interactions)} likes over "
                 f"{num_topics} topics (seed {seed})")
    return SyntheticData(interactions=interactions, documents=documents, item_topics=item_topics,
                         user_topics=user_topics)


def write_synthetic(data: SyntheticData, out_dir: str) -> Tuple[str, str]:
    """
    Write interactions.tsv and items.jsonl

    Returns:
        (interactions path, items path)
    """
    os.makedirs(out_dir, exist_ok=True)
    interactions_path = os.path.join(out_dir, INTERACTIONS_FILE)
    items_path = os.path.join(out_dir, ITEMS_FILE)
    with open(interactions_path, "w", encoding="utf-8", newline="\n") as f:
        f.write("user\titem\trating\n")
        for user, item, rating in data.interactions:
            f.write(f"{user}\t{item}\t{rating:g}\n")
    with open(items_path, "w", encoding="utf-8", newline="\n") as f:
        for item, doc in sorted(data.documents.items()):
            f.write(json.dumps({"item_id": item, "text": doc["text"], "title": doc["title"]}, sort_keys=True))
            f.write("\n")
    logging.info(f"Wrote synthetic dataset to {out_dir}")
    return interactions_path, items_path
