"""Tuple mining: anchor, rotated copies, positives within d_pos, negatives
beyond d_neg, all measured against stored ground-truth poses."""

from dataclasses import dataclass, field

import numpy as np

from ..descriptor.losses import MarginConfig

ROTATION_GRID = tuple(range(0, 360, 30))


@dataclass
class TrainingTuple:
    anchor: int
    rotated: list          # (sample id, angle degrees); id is the anchor's
    positives: list        # sample ids with ||pos - anchor|| <= d_pos
    negatives: list        # sample ids with ||pos - anchor|| >= d_neg
    domains: dict = field(default_factory=dict)  # id -> "visual" | "lidar"

    def __post_init__(self):
        if not self.positives:
            raise ValueError("positives must be non-empty")
        if not self.negatives:
            raise ValueError("negatives must be non-empty")


def mine_tuple(positions, anchor: int, margins: MarginConfig, seed: int = 0,
               n_rotations: int = 2, n_positives: int = 2, n_negatives: int = 2,
               min_positive_dist: float = 0.5) -> TrainingTuple:
    """Deterministically mine one training tuple around `anchor`.

    positions: (N, 3) ground-truth positions indexed by sample id. Rotation
    angles are sampled uniformly from the 30-degree grid; n_rotations = 0
    yields a single unrotated copy of the anchor.
    """
    positions = np.asarray(positions, dtype=np.float64)
    n = positions.shape[0]
    if not 0 <= anchor < n:
        raise ValueError("anchor id out of range")
    rng = np.random.Generator(np.random.PCG64((seed, anchor)))

    dists = np.linalg.norm(positions - positions[anchor], axis=1)
    pos_mask = (dists <= margins.d_pos) & (dists > min_positive_dist)
    pos_mask[anchor] = False
    neg_mask = dists >= margins.d_neg
    pos_ids = np.flatnonzero(pos_mask)
    neg_ids = np.flatnonzero(neg_mask)
    if pos_ids.size == 0:
        raise ValueError("no valid positive")
    if neg_ids.size == 0:
        raise ValueError("no valid negative")

    positives = rng.choice(pos_ids, size=min(n_positives, pos_ids.size),
                           replace=False).tolist()
    negatives = rng.choice(neg_ids, size=min(n_negatives, neg_ids.size),
                           replace=False).tolist()
    if n_rotations > 0:
        angles = rng.choice(ROTATION_GRID, size=n_rotations, replace=True)
        rotated = [(anchor, float(a)) for a in angles]
    else:
        rotated = [(anchor, 0.0)]
    return TrainingTuple(anchor=int(anchor), rotated=rotated,
                         positives=[int(i) for i in positives],
                         negatives=[int(i) for i in negatives])


def check_tuple(tup: TrainingTuple, positions, margins: MarginConfig,
                min_positive_dist: float = 0.5):
    """Exhaustive distance-invariant check of a mined tuple; raises on violation."""
    positions = np.asarray(positions)
    a = positions[tup.anchor]
    for i in tup.positives:
        d = np.linalg.norm(positions[i] - a)
        if not (min_positive_dist < d <= margins.d_pos):
            raise AssertionError(f"positive {i} at distance {d:.3f} violates bounds")
    for i in tup.negatives:
        d = np.linalg.norm(positions[i] - a)
        if d < margins.d_neg:
            raise AssertionError(f"negative {i} at distance {d:.3f} violates bounds")
    for sid, angle in tup.rotated:
        if sid != tup.anchor:
            raise AssertionError("rotated members must reference the anchor")
        if float(angle) % 30.0 != 0.0:
            raise AssertionError(f"rotation angle {angle} not on the 30-degree grid")
