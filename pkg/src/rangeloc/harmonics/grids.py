"""Equiangular sampling grids and quadrature weights for band-limited
spherical analysis.

A bandwidth-B signal is sampled on a 2B x 2B grid with
theta_j = (2j+1) pi / 4B and phi_k = 2 pi k / 2B. The polar quadrature
weights make sums over the grid exact for integrands of polar band-limit
< 2B, which is what the forward transforms rely on.
"""

from functools import lru_cache

import numpy as np
import torch


def theta_samples(n_beta: int) -> np.ndarray:
    return (2 * np.arange(n_beta) + 1) * np.pi / (2 * n_beta)


def phi_samples(n_alpha: int) -> np.ndarray:
    return 2 * np.pi * np.arange(n_alpha) / n_alpha


@lru_cache(maxsize=None)
def _quadrature_weights_np(n_beta: int) -> np.ndarray:
    b = n_beta // 2
    if 2 * b != n_beta:
        raise ValueError("number of polar samples must be even")
    theta = theta_samples(n_beta)
    k = np.arange(b)
    # w_j = (2/B) sin(theta_j) * sum_k sin((2k+1) theta_j)/(2k+1)
    s = np.sin(np.outer(theta, 2 * k + 1)) @ (1.0 / (2 * k + 1))
    return (2.0 / b) * np.sin(theta) * s


def quadrature_weights(n_beta: int, dtype=torch.float64, device="cpu") -> torch.Tensor:
    return torch.as_tensor(_quadrature_weights_np(n_beta), dtype=dtype, device=device)
