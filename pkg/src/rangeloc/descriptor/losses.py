"""Place-learning losses: hinged hardest-pair triplets within one domain and
across the visual/range domains."""

from dataclasses import dataclass

import torch


@dataclass
class MarginConfig:
    """Margins and distance thresholds for tuple mining and place losses."""

    lam1: float = 0.5   # latent alignment margin (transfer module)
    lam2: float = 0.5   # anchor term, within-domain
    lam3: float = 1.0   # rotation term, within-domain
    lam4: float = 0.5   # anchor term, cross-domain
    lam5: float = 1.0   # rotation term, cross-domain
    d_pos: float = 5.0  # meters
    d_neg: float = 20.0  # meters

    def __post_init__(self):
        if not (0 < self.lam2 <= self.lam3):
            raise ValueError("need 0 < lam2 <= lam3")
        if not (0 < self.lam4 <= self.lam5):
            raise ValueError("need 0 < lam4 <= lam5")
        if not self.d_pos < self.d_neg:
            raise ValueError("need d_pos < d_neg")


def _as_matrix(x, name):
    t = torch.as_tensor(x)
    if t.ndim == 1:
        t = t[None]
    if t.ndim != 2 or t.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty (n, dim) stack")
    return t


def _first_max(matrix):
    """Max with lowest-flat-index tie-breaking (gradients flow to that entry)."""
    flat = matrix.reshape(-1)
    idx = int(torch.argmax(flat.detach()))
    return flat[idx]


def _hinged_hardest(anchor, rotated, positives, negatives, lam_anchor, lam_rot):
    anchor = torch.as_tensor(anchor).reshape(-1)
    rotated = _as_matrix(rotated, "rotated")
    positives = _as_matrix(positives, "positives")
    negatives = _as_matrix(negatives, "negatives")

    d_ap = (positives - anchor).norm(dim=1)          # (P,)
    d_an = (negatives - anchor).norm(dim=1)          # (Nn,)
    term_a = _first_max(torch.relu(lam_anchor + d_ap[:, None] - d_an[None, :]))

    d_rp = torch.cdist(rotated, positives)           # (K, P)
    d_rn = torch.cdist(rotated, negatives)           # (K, Nn)
    term_r = _first_max(
        torch.relu(lam_rot + d_rp[:, :, None] - d_rn[:, None, :])
    )
    return term_a + term_r


def view_loss(anchor, rotated, positives, negatives, margins: MarginConfig):
    """Within-domain place loss: hardest positive/negative pair for the anchor
    plus the hardest pair over the rotated copies."""
    return _hinged_hardest(anchor, rotated, positives, negatives,
                           margins.lam2, margins.lam3)


def domain_loss(anchor_visual, rotated_visual, positives_range, negatives_range,
                margins: MarginConfig):
    """Cross-domain place loss: anchor/rotations from the visual branch against
    positives/negatives from the range branch."""
    return _hinged_hardest(anchor_visual, rotated_visual, positives_range,
                           negatives_range, margins.lam4, margins.lam5)
