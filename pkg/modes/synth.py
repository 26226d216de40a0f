"""
Synthetic dataset mode
"""
import colorama

from processors.synthetic import SyntheticData, generate_synthetic, write_synthetic
from utils.helpers import print_banner


def run_synth(out_dir: str, num_users: int = 200, num_items: int = 400, num_topics: int = 8,
              vocab_size: int = 200, topics_per_user: int = 2, likes_per_topic: int = 8, doc_length: int = 40,
              purity: float = 0.8, seed: int = 7, quiet: bool = False) -> SyntheticData:
    """Generate a topic-cluster dataset and write interactions.tsv / items.jsonl"""
    data = generate_synthetic(num_users=num_users, num_items=num_items, num_topics=num_topics,
                              vocab_size=vocab_size, topics_per_user=topics_per_user,
                              likes_per_topic=likes_per_topic, doc_length=doc_length, purity=purity, seed=seed)
    interactions_path, items_path = write_synthetic(data, out_dir)
    if not quiet:
        print_banner("SYNTHETIC DATASET", [
            f"Users:        {num_users}",
            f"Items:        {num_items}",
            f"Topics:       {num_topics} ({topics_per_user} per user)",
            f"Likes:        {len(data.interactions)}",
            f"Interactions: {interactions_path}",
            f"Items:        {items_path}",
        ], color=colorama.Fore.GREEN)
    return data
