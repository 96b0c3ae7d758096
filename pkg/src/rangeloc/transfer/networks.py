"""Cross-domain transfer network: image encoder with a split
geometry/condition latent, range decoder, range encoder, image decoder,
discriminator, and condition classifier.

All convolutions pad the azimuth (width) axis circularly and the polar
(height) axis by replication, so grid-aligned yaw shifts of the input
propagate as exact column shifts wherever strides permit.
"""

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

GEO_CHANNELS = 64
GEO_SPATIAL = 8
COND_DIM = 32


@dataclass
class LatentCode:
    """Split latent: spatial geometry map (N,64,8,8) + condition vector (N,32)."""

    geometry: torch.Tensor
    condition: torch.Tensor


@dataclass
class TransferOutput:
    latent: LatentCode
    range_pred: torch.Tensor      # (N, 1, 64, 64) in [0, 1]
    geo_from_range: torch.Tensor  # (N, 64, 8, 8), re-encoded from range_pred
    image_recon: torch.Tensor     # (N, 3, 64, 64) in [0, 1]
    cond_logits: torch.Tensor     # (N, n_conditions)


class CircConv2d(nn.Module):
    """Conv2d with circular width padding and replicated height padding."""

    def __init__(self, cin, cout, kernel, stride=1):
        super().__init__()
        self.pad = (kernel - stride) // 2 if stride > 1 else (kernel - 1) // 2
        self.conv = nn.Conv2d(cin, cout, kernel, stride=stride, padding=0)

    def forward(self, x):
        p = self.pad
        if p:
            x = F.pad(x, (p, p, 0, 0), mode="circular")
            x = F.pad(x, (0, 0, p, p), mode="replicate")
        return self.conv(x)


class UpConv2d(nn.Module):
    """Transposed convolution (zero-stuffing + conv) with circular azimuth."""

    def __init__(self, cin, cout):
        super().__init__()
        self.conv = CircConv2d(cin, cout, 3, stride=1)

    def forward(self, x):
        n, c, h, w = x.shape
        up = x.new_zeros(n, c, 2 * h, 2 * w)
        up[:, :, ::2, ::2] = x
        return self.conv(up)


def _block(cin, cout, kernel, stride):
    return nn.Sequential(
        CircConv2d(cin, cout, kernel, stride),
        nn.GroupNorm(4, cout),
        nn.LeakyReLU(0.2),
    )


class ImageEncoder(nn.Module):
    """Strided trunk 64 -> 8 whose output splits into disjoint geometry and
    condition channel slices."""

    def __init__(self, base=16):
        super().__init__()
        self.trunk = nn.Sequential(
            _block(3, base, 4, 2),          # 64 -> 32
            _block(base, 2 * base, 4, 2),   # 32 -> 16
            _block(2 * base, 4 * base, 4, 2),  # 16 -> 8
            CircConv2d(4 * base, GEO_CHANNELS + COND_DIM, 3, 1),
        )
        self.cond_head = nn.Sequential(
            nn.Linear(COND_DIM, 64), nn.LeakyReLU(0.2), nn.Linear(64, COND_DIM)
        )

    def forward(self, x) -> LatentCode:
        feats = self.trunk(x)
        geometry = feats[:, :GEO_CHANNELS]
        cond = feats[:, GEO_CHANNELS:].mean(dim=(2, 3))
        return LatentCode(geometry, self.cond_head(cond))


class RangeEncoder(nn.Module):
    """Range image -> geometry latent (no condition head)."""

    def __init__(self, base=16):
        super().__init__()
        self.trunk = nn.Sequential(
            _block(1, base, 4, 2),
            _block(base, 2 * base, 4, 2),
            _block(2 * base, 4 * base, 4, 2),
            CircConv2d(4 * base, GEO_CHANNELS, 3, 1),
        )

    def forward(self, y):
        return self.trunk(y)


class Decoder(nn.Module):
    def __init__(self, cin, cout, base=16):
        super().__init__()
        self.net = nn.Sequential(
            CircConv2d(cin, 4 * base, 3, 1),
            nn.GroupNorm(4, 4 * base),
            nn.LeakyReLU(0.2),
            UpConv2d(4 * base, 2 * base),   # 8 -> 16
            nn.GroupNorm(4, 2 * base),
            nn.LeakyReLU(0.2),
            UpConv2d(2 * base, base),       # 16 -> 32
            nn.GroupNorm(4, base),
            nn.LeakyReLU(0.2),
            UpConv2d(base, base),           # 32 -> 64
            nn.LeakyReLU(0.2),
            CircConv2d(base, cout, 3, 1),
        )

    def forward(self, z):
        return torch.sigmoid(self.net(z))


class Discriminator(nn.Module):
    """Strided conv net scoring range images with a single sigmoid output."""

    def __init__(self, base=12):
        super().__init__()
        self.features = nn.Sequential(
            _block(1, base, 4, 2),
            _block(base, 2 * base, 4, 2),
            _block(2 * base, 4 * base, 4, 2),
            CircConv2d(4 * base, 4 * base, 3, 1),
            nn.LeakyReLU(0.2),
        )
        self.head = nn.Linear(4 * base, 1)

    def forward(self, y):
        f = self.features(y).mean(dim=(2, 3))
        return torch.sigmoid(self.head(f)).squeeze(-1)


class ConditionClassifier(nn.Module):
    """Two-layer perceptron over the condition latent."""

    def __init__(self, n_conditions=4):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(COND_DIM, 64), nn.LeakyReLU(0.2), nn.Linear(64, n_conditions)
        )

    def forward(self, z_c):
        return self.net(z_c)


class TransferNet(nn.Module):
    """Full transfer module; the frozen random projection used by the latent
    alignment loss is stored as a buffer so checkpoints reproduce it."""

    def __init__(self, n_conditions=4, base=16, seed=0):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        self.image_encoder = ImageEncoder(base)
        self.range_decoder = Decoder(GEO_CHANNELS, 1, base)
        self.range_encoder = RangeEncoder(base)
        self.image_decoder = Decoder(GEO_CHANNELS + COND_DIM, 3, base)
        self.discriminator = Discriminator()
        self.condition_classifier = ConditionClassifier(n_conditions)
        geo_flat = GEO_CHANNELS * GEO_SPATIAL * GEO_SPATIAL
        proj = torch.randn(COND_DIM, geo_flat, generator=gen) / geo_flat**0.5
        self.register_buffer("mutual_projection", proj)

    def decode_image(self, geometry, condition):
        cond_map = condition[:, :, None, None].expand(
            -1, -1, GEO_SPATIAL, GEO_SPATIAL
        )
        return self.image_decoder(torch.cat([geometry, cond_map], dim=1))

    def forward(self, x) -> TransferOutput:
        latent = self.image_encoder(x)
        range_pred = self.range_decoder(latent.geometry)
        geo_from_range = self.range_encoder(range_pred)
        image_recon = self.decode_image(geo_from_range, latent.condition)
        cond_logits = self.condition_classifier(latent.condition)
        return TransferOutput(latent, range_pred, geo_from_range, image_recon, cond_logits)


def as_image_batch(x, channels=3):
    """Accept (H, W, C), (N, H, W, C), or (N, C, H, W) arrays/tensors in [0,1]."""
    t = torch.as_tensor(x, dtype=torch.float32) if not torch.is_tensor(x) else x.float()
    if t.ndim == 2:
        t = t[None, None]
    elif t.ndim == 3:
        t = t.permute(2, 0, 1)[None] if t.shape[-1] == channels else t[:, None]
    elif t.ndim == 4 and t.shape[-1] == channels:
        t = t.permute(0, 3, 1, 2)
    if t.shape[1] != channels:
        raise ValueError(f"expected {channels} channels, got shape {tuple(t.shape)}")
    return t


def transfer_forward(x, net: TransferNet, mode: str = "eval") -> TransferOutput:
    """Run the full transfer forward pass on an equirect image batch."""
    if mode not in ("train", "eval"):
        raise ValueError("mode must be 'train' or 'eval'")
    x = as_image_batch(x, channels=3)
    if x.shape[-2:] != (64, 64):
        raise ValueError(f"expected 64x64 input, got {tuple(x.shape[-2:])}")
    net.train(mode == "train")
    if mode == "eval":
        with torch.no_grad():
            return net(x)
    return net(x)
