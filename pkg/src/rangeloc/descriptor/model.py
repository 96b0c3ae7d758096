"""Global place descriptors: backbone field -> VLAD -> projection -> L2 norm."""

import numpy as np
import torch
import torch.nn as nn

from .backbone import FIELD_DIM, SphericalBackbone
from .vlad import VladCodebook, vlad_aggregate

DESCRIPTOR_DIM = 256
ZERO_NORM_GUARD = 1e-8


class PlaceDescriptorNet(nn.Module):
    def __init__(self, channels=(6, 12, FIELD_DIM), n_clusters=16, seed=0):
        super().__init__()
        self.backbone = SphericalBackbone(channels=channels, seed=seed)
        self.vlad = VladCodebook(n_clusters=n_clusters, dim=FIELD_DIM, seed=seed + 10)
        gen = torch.Generator().manual_seed(seed + 20)
        self.projection = nn.Linear(n_clusters * FIELD_DIM, DESCRIPTOR_DIM, bias=False)
        with torch.no_grad():
            self.projection.weight.copy_(
                torch.randn(DESCRIPTOR_DIM, n_clusters * FIELD_DIM, generator=gen)
                / (n_clusters * FIELD_DIM) ** 0.5
            )

    def forward(self, y):
        field = self.backbone(y)
        raw = vlad_aggregate(field, self.vlad)
        return l2_normalize(self.projection(raw))


def l2_normalize(v: torch.Tensor) -> torch.Tensor:
    """Unit-normalize rows; rows with norm below the guard collapse to zero."""
    norm = v.norm(dim=-1, keepdim=True)
    return torch.where(norm > ZERO_NORM_GUARD, v / norm.clamp_min(ZERO_NORM_GUARD),
                       torch.zeros_like(v))


def describe(range_images, net: PlaceDescriptorNet, batch_size: int = 16,
             grad: bool = False) -> torch.Tensor:
    """Descriptors for one (H, W) range image or a stack (N, H, W)."""
    t = range_images
    if not torch.is_tensor(t):
        t = torch.as_tensor(np.asarray(t), dtype=torch.float32)
    t = t.float()
    single = t.ndim == 2
    if single:
        t = t[None]
    if grad:
        out = net(t)
    else:
        with torch.no_grad():
            chunks = [net(t[i:i + batch_size]) for i in range(0, t.shape[0], batch_size)]
            out = torch.cat(chunks, dim=0)
    return out[0] if single else out
