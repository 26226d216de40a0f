"""
Centralized configuration for the MARS recommender
"""

# Artifact file names (inside an ingest output directory)
DATASET_FILE = "dataset.json"
SPLIT_MANIFEST_FILE = "splits.json"
VOCAB_FILE = "vocab.tsv"
DOCUMENTS_FILE = "documents.npz"
TITLES_FILE = "titles.json"
STATS_FILE = "stats.json"
LOG_FILE = "mars.log"

# Environment
SEED_ENV_VAR = "MARS_SEED"
DEFAULT_SEED = 42

# Text pipeline
PAD_TOKEN = "<pad>"
PAD_INDEX = 0
DEFAULT_MIN_FREQ = 5
DEFAULT_MAX_LEN = 300
VOCAB_HEADER = "#mars-vocab v1 min_freq={min_freq}"

# Ingest
FORMAT_TSV = "tsv"
FORMAT_CSV = "csv"
MODE_RATING5 = "rating5"  # keep rating == 5 only
MODE_ANY_RATING = "any-rating"  # every rated pair is a positive
DEFAULT_MIN_PER_USER = 3
DEFAULT_MIN_PER_ITEM = 1
DEFAULT_TRAIN_FRAC = 0.30
MAX_MALFORMED_FRACTION = 0.01

# Reference statistics of the public datasets (reported on ingest, never asserted)
REFERENCE_STATS = {
    "yahoo-movies": {"users": 7642, "items": 11915, "positives": 221367, "density": 0.0024, "vocab": 33195},
    "amazon-video-games": {"users": 2670, "items": 47063, "density": 0.00037, "vocab": 25035},
    "amazon-movies-tv": {"users": 22147, "items": 178086, "density": 0.000128, "vocab": 68919},
}

# Model variants
VARIANT_FULL = "full"
VARIANT_NO_TEXT = "no_text"  # free item vectors instead of text encoders
VARIANT_EMBED_AVG = "embed_avg"  # mean word embedding instead of the CNN
VARIANT_NO_ATT = "no_att"  # all attention weights fixed to one
VARIANTS = [VARIANT_FULL, VARIANT_NO_TEXT, VARIANT_EMBED_AVG, VARIANT_NO_ATT]

# Training defaults
DEFAULT_LEARNING_RATE = 0.001
DEFAULT_BATCH_SIZE = 512
DEFAULT_EMBEDDING_DIM = 300  # e
DEFAULT_NUM_FILTERS = 64  # g
DEFAULT_WINDOW_SIZE = 3  # c
DEFAULT_LATENT_DIM = 50  # K (70 on Amazon Video Games)
DEFAULT_LAMBDA_U = 0.002
DEFAULT_LAMBDA_V = 0.002
DEFAULT_MEMORY_TRAIN = 10
DEFAULT_MEMORY_EVAL = 64
DEFAULT_EPOCHS = 100
DEFAULT_PATIENCE = 10
DEFAULT_INIT_STD = 0.1
DEFAULT_CHUNK_SIZE = 128

# RMSprop
RMS_DECAY = 0.9
RMS_EPSILON = 1e-8

# Negative sampling pools
NEGATIVES_ALL_POSITIVES = "all_positives"  # I \ I+_i over every known positive
NEGATIVES_TRAIN_POSITIVES = "train_positives"  # I \ train positives only

# Evaluation
SPLIT_VALIDATION = "validation"
SPLIT_TEST = "test"
DEFAULT_RECALL_AT = (50,)
DEFAULT_MAP_CUTOFF = 500  # K'
AP_MODE_LITERAL = "paper-literal"  # 1/K' normalizer
AP_MODE_STANDARD = "standard"  # 1/min(|test|, K') normalizer
DEFAULT_AP_MODE = AP_MODE_LITERAL

# Explanations
DEFAULT_EXPLAIN_TOP_K = 3
WEIGHT_DECIMALS = 3

# Gradient checking
GRADCHECK_H = 1e-5
GRADCHECK_THRESHOLD = 1e-4
GRADCHECK_PROBES = 200

# Checkpoint format
CHECKPOINT_MAGIC = b"MARSCKPT"
CHECKPOINT_VERSION = 1

# Parameter sweep grids for the validation study
SWEEP_GRIDS = {
    "latent_dim": [5, 10, 20, 50, 70, 100],
    "lambda_u": [0.001, 0.002, 0.005, 0.01, 0.02, 0.05],
    "lambda_v": [0.001, 0.002, 0.005, 0.01, 0.02, 0.05],
}
