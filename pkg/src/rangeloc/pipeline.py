"""High-level glue: turning dataset samples into descriptors for each branch."""

import numpy as np
import torch

from .descriptor.model import PlaceDescriptorNet, describe
from .geometry.projection import yaw_shift_equirect
from .transfer.networks import TransferNet, as_image_batch


def compute_range_descriptors(range_images, desc_net: PlaceDescriptorNet,
                              batch_size: int = 16) -> np.ndarray:
    """Descriptors of true range projections (the database branch)."""
    stack = torch.as_tensor(np.asarray(range_images, dtype=np.float32))
    return describe(stack, desc_net, batch_size=batch_size).numpy().astype(np.float64)


def images_to_range_predictions(images, transfer_net: TransferNet,
                                batch_size: int = 32) -> np.ndarray:
    """Map (N, H, W, 3) images through the transfer module to range predictions."""
    x = as_image_batch(np.asarray(images, dtype=np.float32))
    preds = []
    transfer_net.eval()
    with torch.no_grad():
        for i in range(0, x.shape[0], batch_size):
            out = transfer_net.range_decoder(
                transfer_net.image_encoder(x[i:i + batch_size]).geometry
            )
            preds.append(out[:, 0])
    return torch.cat(preds).numpy().astype(np.float64)


def compute_visual_descriptors(images, transfer_net, desc_net,
                               source: str = "transfer",
                               rotations_deg=None,
                               batch_size: int = 16) -> np.ndarray:
    """Descriptors of the visual branch.

    source="transfer" runs images through the transfer module first;
    source="raw" feeds grayscale panoramas directly (the ablated pipeline).
    Optional per-image yaw rotations are applied before everything else.
    """
    imgs = np.asarray(images, dtype=np.float64)
    if rotations_deg is not None:
        imgs = np.stack([
            yaw_shift_equirect(img, float(a)) for img, a in zip(imgs, rotations_deg)
        ])
    if source == "raw":
        inputs = imgs.mean(axis=-1).astype(np.float32)
    elif source == "transfer":
        inputs = images_to_range_predictions(imgs, transfer_net).astype(np.float32)
    else:
        raise ValueError(f"unknown visual source {source!r}")
    return describe(torch.as_tensor(inputs), desc_net,
                    batch_size=batch_size).numpy().astype(np.float64)
