"""Losses of the transfer module: reconstruction, adversarial pair, latent
alignment (hinged), condition classification, and their weighted total."""

from dataclasses import dataclass

import torch
import torch.nn.functional as F

SCORE_EPS = 1e-6


@dataclass
class TransferLossReport:
    recon: torch.Tensor
    gan_g: torch.Tensor
    gan_d: torch.Tensor
    mutual: torch.Tensor
    classifier: torch.Tensor
    total: torch.Tensor

    def as_floats(self):
        return {k: float(getattr(self, k)) for k in
                ("recon", "gan_g", "gan_d", "mutual", "classifier", "total")}


def recon_loss(x, x_hat):
    """Mean absolute error between input and reconstruction."""
    x = torch.as_tensor(x)
    x_hat = torch.as_tensor(x_hat)
    if x.shape != x_hat.shape:
        raise ValueError(f"shape mismatch {tuple(x.shape)} vs {tuple(x_hat.shape)}")
    return (x - x_hat).abs().mean()


def gan_loss(real_scores, fake_scores):
    """Discriminator and (non-saturating) generator losses from score lists.

    Scores are clamped to [eps, 1-eps] so both terms stay finite.
    """
    real = torch.as_tensor(real_scores).reshape(-1)
    fake = torch.as_tensor(fake_scores).reshape(-1)
    if real.numel() == 0 or fake.numel() == 0:
        raise ValueError("empty score list")
    real = real.clamp(SCORE_EPS, 1 - SCORE_EPS)
    fake = fake.clamp(SCORE_EPS, 1 - SCORE_EPS)
    gan_d = -real.log().mean() - (1 - fake).log().mean()
    gan_g = -fake.log().mean()
    return gan_d, gan_g


def mutual_latent_loss(geometry, geo_from_range, condition, projection, margin=0.5):
    """Hinged triplet pulling the image geometry latent toward its range
    re-encoding and away from the condition latent:
    max(0, margin + d(z_g, z_g_hat) - d(proj(z_g), z_c)).

    `projection` is the frozen random map from the flattened geometry latent
    to the condition latent's dimension.
    """
    zg = torch.as_tensor(geometry)
    zh = torch.as_tensor(geo_from_range)
    zc = torch.as_tensor(condition)
    if zg.shape != zh.shape:
        raise ValueError("geometry latent shape mismatch")
    batched = zg.ndim == 4
    if not batched:
        zg, zh, zc = zg[None], zh[None], zc[None]
    flat_g = zg.reshape(zg.shape[0], -1)
    flat_h = zh.reshape(zh.shape[0], -1)
    d_align = (flat_g - flat_h).norm(dim=1)
    d_cond = (flat_g @ projection.T.to(flat_g.dtype) - zc).norm(dim=1)
    loss = F.relu(margin + d_align - d_cond)
    return loss.mean() if batched else loss[0]


def classifier_loss(cond_logits, labels):
    """Cross-entropy over condition labels."""
    logits = torch.as_tensor(cond_logits)
    if logits.ndim == 1:
        logits = logits[None]
    labels = torch.as_tensor(labels, dtype=torch.long).reshape(-1)
    if labels.min() < 0 or labels.max() >= logits.shape[-1]:
        raise ValueError("label out of range")
    return F.cross_entropy(logits, labels)


def transfer_loss(recon, gan_g, gan_d, mutual, classifier,
                  w_recon=1.0, w_gan=1.0, w_mutual=1.0, w_classifier=0.1):
    """Weighted generator-side total; the discriminator term is reported only."""
    as_t = lambda v: torch.as_tensor(v, dtype=torch.float64) if not torch.is_tensor(v) else v
    recon, gan_g, gan_d, mutual, classifier = map(as_t, (recon, gan_g, gan_d, mutual, classifier))
    total = w_recon * recon + w_gan * gan_g + w_mutual * mutual + w_classifier * classifier
    return TransferLossReport(recon, gan_g, gan_d, mutual, classifier, total)
