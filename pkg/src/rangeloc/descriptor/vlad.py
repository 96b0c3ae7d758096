"""VLAD aggregation: soft-assigned residuals against learned cluster centers.

The sum over cells makes the output exactly invariant to any permutation of
the spatial cells, which together with the equivariant backbone yields
yaw-invariant descriptors.
"""

import torch
import torch.nn as nn


class VladCodebook(nn.Module):
    """K cluster centers of dimension D plus soft-assignment parameters."""

    def __init__(self, n_clusters=16, dim=32, seed=0):
        super().__init__()
        if n_clusters < 1:
            raise ValueError("need at least one cluster")
        gen = torch.Generator().manual_seed(seed)
        self.centers = nn.Parameter(torch.randn(n_clusters, dim, generator=gen) * 0.5)
        self.assign_weight = nn.Parameter(torch.randn(n_clusters, dim, generator=gen))
        self.assign_bias = nn.Parameter(torch.zeros(n_clusters))

    @property
    def n_clusters(self):
        return self.centers.shape[0]

    @property
    def dim(self):
        return self.centers.shape[1]


def vlad_aggregate(field: torch.Tensor, codebook: VladCodebook) -> torch.Tensor:
    """Aggregate a (N, cells, D) feature field to (N, K*D) residual vectors.

    For each cluster k: sum over cells of a_k(cell) * (feature - center_k),
    with a = softmax over clusters of an affine score.
    """
    if field.ndim == 2:
        field = field[None]
    if field.shape[-1] != codebook.dim:
        raise ValueError(
            f"feature dim {field.shape[-1]} does not match codebook dim {codebook.dim}"
        )
    scores = field @ codebook.assign_weight.T + codebook.assign_bias  # (N, cells, K)
    assign = torch.softmax(scores, dim=-1)
    # sum_c a[c,k] * (f[c] - center[k])
    weighted = assign.transpose(1, 2) @ field                  # (N, K, D)
    totals = assign.sum(dim=1)                                 # (N, K)
    residuals = weighted - totals[:, :, None] * codebook.centers[None]
    return residuals.reshape(field.shape[0], -1)
