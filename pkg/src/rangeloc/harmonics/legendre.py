"""Normalized associated Legendre tables.

Q[l][m](theta) is the polar part of the orthonormal spherical harmonic
Y_l^m = Q_l^m(theta) e^{i m phi}, Condon-Shortley phase included, so that
integral |Y_l^m|^2 over the sphere is 1. Negative orders follow
Q_l^{-m} = (-1)^m Q_l^m.
"""

from functools import lru_cache

import numpy as np
import torch


def _legendre_table_np(l_max: int, thetas) -> np.ndarray:
    """Dense table Q[l, m + L - 1, j] for 0 <= l < L over the given angles."""
    thetas = np.asarray(thetas, dtype=np.float64)
    nj = thetas.size
    ct, st = np.cos(thetas), np.sin(thetas)
    out = np.zeros((l_max, 2 * l_max - 1, nj))

    for m in range(l_max):
        # seed Q_m^m, then the standard upward three-term recurrence in l
        qmm = np.full(nj, 1.0 / np.sqrt(4 * np.pi))
        for i in range(1, m + 1):
            qmm = qmm * (-1.0) * np.sqrt((2 * i + 1) / (2.0 * i)) * st
        prev2 = np.zeros(nj)
        prev1 = qmm
        for l in range(m, l_max):
            if l == m:
                q = qmm
            elif l == m + 1:
                q = np.sqrt(2 * m + 3.0) * ct * qmm
            else:
                a = np.sqrt((4.0 * l * l - 1) / (l * l - m * m))
                bb = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1) ** 2 - 1))
                q = a * (ct * prev1 - bb * prev2)
            out[l, m + l_max - 1] = q
            if m > 0:
                out[l, -m + l_max - 1] = (-1.0) ** m * q
            prev2, prev1 = prev1, q
    return out


@lru_cache(maxsize=None)
def _legendre_cached(l_max: int, n_beta: int, dtype_str: str):
    from .grids import theta_samples

    table = _legendre_table_np(l_max, theta_samples(n_beta))
    return torch.as_tensor(table, dtype=getattr(torch, dtype_str))


def legendre_table(l_max: int, n_beta: int, dtype=torch.float64) -> torch.Tensor:
    """Q on the standard polar grid with n_beta samples; shape (L, 2L-1, n_beta)."""
    return _legendre_cached(l_max, n_beta, str(dtype).removeprefix("torch."))
