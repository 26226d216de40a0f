"""
Exception hierarchy for the MARS recommender
"""


class MarsError(Exception):
    """Base class for every error raised by this package"""


class InputError(MarsError):
    """Shape, index or precondition violation in a numeric or model operation"""


class ConfigError(MarsError):
    """Invalid training configuration"""


class PipelineError(MarsError):
    """Text pipeline failure (e.g. every token filtered out of the vocabulary)"""


class DocumentRejectedError(PipelineError):
    """A document has no in-vocabulary tokens left after filtering"""

    def __init__(self, item_id: str):
        super().__init__(f"Document for item '{item_id}' has no in-vocabulary tokens")
        self.item_id = item_id


class IngestError(MarsError):
    """Interaction data could not be turned into a usable dataset"""


class SplitError(MarsError):
    """A user cannot be split into train/validation/test"""

    def __init__(self, user_id: str, count: int):
        super().__init__(f"User '{user_id}' has {count} positives; at least 3 are needed to split")
        self.user_id = user_id


class ColdUserError(MarsError):
    """A user has no memory items and cannot be scored"""

    def __init__(self, user_id: str):
        super().__init__(f"User '{user_id}' has no usable memory items")
        self.user_id = user_id


class UnknownItemError(MarsError):
    """Item id is not part of the catalog"""

    def __init__(self, item_id: str):
        super().__init__(f"Unknown item '{item_id}'")
        self.item_id = item_id


class UnknownUserError(MarsError):
    """User id is not part of the dataset"""

    def __init__(self, user_id: str):
        super().__init__(f"Unknown user '{user_id}'")
        self.user_id = user_id


class TrainingError(MarsError):
    """Optimization failed (non-finite loss or gradient, nothing to sample)"""


class CheckpointError(MarsError):
    """Checkpoint file problem"""


class CheckpointCorruptionError(CheckpointError):
    """Checkpoint is truncated or its payload digest does not match"""


class CheckpointVersionError(CheckpointError):
    """Checkpoint was written with an unknown format version"""


class CompatibilityError(MarsError):
    """Checkpoint and dataset artifacts were built from different vocabularies or catalogs"""


class ComparisonError(MarsError):
    """Variant reports cannot be compared (different splits or seeds)"""
