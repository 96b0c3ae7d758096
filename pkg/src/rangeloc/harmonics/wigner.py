"""Wigner d-matrices d^l_{m'm}(beta).

Computed as matrix exponentials of the angular-momentum generator: with the
real antisymmetric matrix A_l coupling adjacent orders via
c_m = sqrt(l(l+1) - m(m+1)), d^l(beta) = exp(beta/2 * A_l). The
eigendecomposition of the Hermitian i*A_l is done once per degree and reused
for every angle. Row/column index i corresponds to order m = i - l.
"""

from functools import lru_cache

import numpy as np
import torch


@lru_cache(maxsize=None)
def _generator_eig(l: int):
    dim = 2 * l + 1
    m = np.arange(-l, l)
    c = np.sqrt(l * (l + 1.0) - m * (m + 1.0))
    a = np.zeros((dim, dim))
    idx = np.arange(dim - 1)
    a[idx, idx + 1] = c
    a[idx + 1, idx] = -c
    lam, v = np.linalg.eigh(1j * a)
    return lam, v


def _d_matrices_np(l: int, betas) -> np.ndarray:
    """Stack of d^l(beta) with shape (len(betas), 2l+1, 2l+1)."""
    betas = np.atleast_1d(np.asarray(betas, dtype=np.float64))
    if l == 0:
        return np.ones((betas.size, 1, 1))
    lam, v = _generator_eig(l)
    # exp(beta/2 A) = V diag(exp(-i beta/2 lam)) V^H, real up to rounding
    phase = np.exp(-0.5j * np.outer(betas, lam))
    out = np.einsum("mk,bk,nk->bmn", v, phase, v.conj())
    return np.ascontiguousarray(out.real)


@lru_cache(maxsize=None)
def _d_dense_cached(l_max: int, n_beta: int, dtype_str: str):
    from .grids import theta_samples

    betas = theta_samples(n_beta)
    dense = np.zeros((l_max, n_beta, 2 * l_max - 1, 2 * l_max - 1))
    for l in range(l_max):
        sl = slice(l_max - 1 - l, l_max + l)
        dense[l, :, sl, sl] = _d_matrices_np(l, betas)
    return torch.as_tensor(dense, dtype=getattr(torch, dtype_str))


def d_dense_table(l_max: int, n_beta: int, dtype=torch.float64) -> torch.Tensor:
    """Dense padded d-table on the standard polar grid: (L, n_beta, 2L-1, 2L-1),
    order index m -> m + L - 1, zero outside |m|,|n| <= l."""
    return _d_dense_cached(l_max, n_beta, str(dtype).removeprefix("torch."))


def d_matrices(l_max: int, betas, dtype=torch.float64):
    """List of per-degree stacks [d^0, ..., d^{L-1}] at arbitrary angles."""
    return [
        torch.as_tensor(_d_matrices_np(l, betas), dtype=dtype) for l in range(l_max)
    ]
