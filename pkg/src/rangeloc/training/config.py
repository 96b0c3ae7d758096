"""Training configuration shared by both stages."""

from dataclasses import dataclass, field

from ..descriptor.losses import MarginConfig


@dataclass
class TrainConfig:
    seed: int = 0
    lr_transfer: float = 1e-3
    lr_descriptor: float = 1e-4
    batch_size: int = 8
    steps_transfer: int = 1500
    steps_descriptor: int = 200
    margins: MarginConfig = field(default_factory=MarginConfig)
    w_classifier: float = 0.1
    n_rotations: int = 2          # rotated tuple members mined per anchor
    n_positives: int = 2
    n_negatives: int = 2
    tuple_batch: int = 4          # tuples per descriptor step
    min_positive_dist: float = 0.5  # exclude near-identical frames from positives
    checkpoint_every: int = 0     # 0 disables intermediate checkpoints
    joint_finetune_steps: int = 0  # optional third phase, off by default
    lr_joint: float = 1e-5
    shared_descriptor_weights: bool = True

    def __post_init__(self):
        if self.lr_transfer < 0 or self.lr_descriptor < 0:
            raise ValueError("learning rates must be non-negative")
        if self.steps_transfer < 0 or self.steps_descriptor < 0:
            raise ValueError("step counts must be non-negative")
        if self.batch_size < 1 or self.tuple_batch < 1:
            raise ValueError("batch sizes must be positive")
