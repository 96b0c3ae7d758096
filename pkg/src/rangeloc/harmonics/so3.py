"""Transforms and convolutions on the rotation group.

SO(3) signals are sampled on the ZYZ Euler grid alpha_a = 2 pi a / n_alpha,
beta_j = (2j+1) pi / (2 n_beta), gamma_c = 2 pi c / n_gamma (standard grids
use n_alpha = n_beta = n_gamma = 2B). The orthonormal basis is
T^l_{mn}(R) = sqrt((2l+1)/(8 pi^2)) D^l_{mn}(R) with
D^l_{mn}(alpha, beta, gamma) = e^{-i m alpha} d^l_{mn}(beta) e^{-i n gamma},
so analysis is F^l_{mn} = integral f conj(T^l_{mn}) dR over the unnormalized
Haar measure and synthesis is f = sum F^l_{mn} T^l_{mn}.

Correlation/convolution identities used below (verified against direct
quadrature oracles in the test suite):

* s2_correlate(f, h)(R) = <L_R h, f> has Wigner coefficients
    G^l_{uv} = sqrt(8 pi^2/(2l+1)) (-1)^{u-v} fhat[l,-u] conj(hhat[l,-v])
* so3_convolve(f, h)(R) = integral f(R^-1 Q) h(Q) dQ has coefficients
    OUT^l = sqrt(8 pi^2/(2l+1)) H^l @ flip(F^l)^T,
    flip(F)[v, n] = (-1)^{v+n} F[-v, -n]  (= conj(F) for real signals).
"""

from dataclasses import dataclass

import numpy as np
import torch

from .grids import quadrature_weights
from .sht import (HarmonicCoeffs, SphericalSignal, _complex_dtype,
                  _real_dtype, sht_forward_raw)
from .wigner import d_dense_table


@dataclass
class SO3Signal:
    """Samples on the Euler grid, axes (alpha, beta, gamma)."""

    samples: torch.Tensor
    bandwidth: int

    def __post_init__(self):
        self.samples = torch.as_tensor(self.samples)
        n = 2 * self.bandwidth
        if self.samples.shape[-3:] != (n, n, n):
            raise ValueError(
                f"grid must be {n}x{n}x{n} for bandwidth {self.bandwidth}, "
                f"got {tuple(self.samples.shape[-3:])}"
            )


@dataclass
class WignerCoeffs:
    """Dense coefficients (..., L, 2L-1, 2L-1); zero outside |m|,|n| <= l."""

    coeffs: torch.Tensor
    bandwidth: int

    def __post_init__(self):
        self.coeffs = torch.as_tensor(self.coeffs)
        b = self.bandwidth
        if self.coeffs.shape[-3:] != (b, 2 * b - 1, 2 * b - 1):
            raise ValueError("malformed Wigner coefficient layout")

    def at(self, l: int, m: int, n: int):
        b = self.bandwidth
        if l >= b or abs(m) > l or abs(n) > l:
            raise IndexError("(l, m, n) out of range")
        return self.coeffs[..., l, m + b - 1, n + b - 1]


def _ortho_scale(l_max, dtype, device):
    ls = torch.arange(l_max, dtype=_real_dtype(dtype), device=device)
    return torch.sqrt((2 * ls + 1) / (8 * np.pi**2))


from functools import lru_cache


@lru_cache(maxsize=None)
def _dft_matrix(l_max: int, n_grid: int, analysis: bool, dtype_str: str):
    """Synthesis matrix W[m_idx, a] = e^{-i m phi_a} for orders |m| < l_max, or
    its analysis adjoint W[a, m_idx] = e^{+i m phi_a} * (2 pi / n_grid)."""
    ms = np.arange(-(l_max - 1), l_max)
    ang = 2 * np.pi * np.arange(n_grid) / n_grid
    w = np.exp(-1j * np.outer(ms, ang))
    if analysis:
        w = w.conj().T * (2 * np.pi / n_grid)
    return torch.as_tensor(w, dtype=getattr(torch, dtype_str))


def _beta_bmm(d_dense, x, contract_j: bool):
    """Contract the dense d-table with x per (m, n) via batched real matmuls.

    d_dense: (L, J, M, N) real. x: (batch, L, M, N) for synthesis
    (contract_j=False, returns (batch, J, M, N)) or (batch, J, M, N) for
    analysis (contract_j=True, returns (batch, L, M, N)).
    """
    l_dim, j_dim, m_dim, n_dim = d_dense.shape
    dmat = d_dense.permute(2, 3, 1, 0).reshape(m_dim * n_dim, j_dim, l_dim)
    if contract_j:
        dmat = dmat.transpose(1, 2)  # (MN, L, J)
        k_in, k_out = j_dim, l_dim
    else:
        k_in, k_out = l_dim, j_dim

    batch = x.shape[0]
    xr = torch.view_as_real(x) if x.is_complex() else x[..., None]
    parts = xr.shape[-1]
    # (batch, K_in, M, N, parts) -> (MN, K_in, batch*parts)
    xr = xr.permute(2, 3, 1, 0, 4).reshape(m_dim * n_dim, k_in, batch * parts)
    out = torch.bmm(dmat, xr)  # (MN, K_out, batch*parts)
    out = out.reshape(m_dim, n_dim, k_out, batch, parts).permute(3, 2, 0, 1, 4)
    if parts == 2:
        return torch.view_as_complex(out.contiguous())
    return out[..., 0]


def _slice_gamma_orders(d_dense, l_max, gamma_orders):
    if gamma_orders == l_max:
        return d_dense
    c = l_max - 1
    return d_dense[:, :, :, c - (gamma_orders - 1): c + gamma_orders]


def so3_synthesize_jag(coeffs: torch.Tensor, l_max: int,
                       n_alpha: int = None, n_beta: int = None, n_gamma: int = None,
                       gamma_orders: int = None):
    """Evaluate Wigner coefficients (..., L, 2L-1, 2G'-1) on an Euler grid,
    returning samples in (beta, alpha, gamma) axis order.

    The alpha/gamma syntheses are direct DFT matmuls (the order counts are
    small), which keeps everything on fast contiguous GEMM paths.
    `gamma_orders` G' caps the gamma-side order range (defaults to l_max).
    """
    b = l_max
    g_ord = gamma_orders or b
    n_alpha = n_alpha or 2 * b
    n_beta = n_beta or 2 * b
    n_gamma = n_gamma or 2 * b
    if n_alpha < 2 * b - 1 or n_gamma < 2 * g_ord - 1:
        raise ValueError("alpha/gamma grid too small for the band-limit")
    cdtype = _complex_dtype(coeffs.dtype)
    dtype_str = str(cdtype).removeprefix("torch.")
    dev = coeffs.device

    lead = coeffs.shape[:-3]
    x = coeffs.reshape((-1,) + coeffs.shape[-3:]).to(cdtype)
    scale = _ortho_scale(b, cdtype, dev)
    x = x * scale[:, None, None]

    d_dense = _slice_gamma_orders(
        d_dense_table(b, n_beta, dtype=_real_dtype(cdtype)), b, g_ord
    ).to(dev)
    t = _beta_bmm(d_dense, x, contract_j=False)  # (batch, J, M, N)

    w_g = _dft_matrix(g_ord, n_gamma, False, dtype_str).to(dev)  # (N, G)
    w_a = _dft_matrix(b, n_alpha, False, dtype_str).to(dev)      # (M, A)
    batch, j_dim, m_dim, n_dim = t.shape
    x1 = t.reshape(-1, n_dim) @ w_g  # contract gamma orders
    x1 = x1.reshape(batch, j_dim, m_dim, n_gamma)
    x2 = x1.transpose(-2, -1).reshape(-1, m_dim) @ w_a  # contract m -> alpha
    out = x2.reshape(batch, j_dim, n_gamma, n_alpha).transpose(-2, -1)
    return out.reshape(lead + (n_beta, n_alpha, n_gamma))


def so3_analyze_jag(samples: torch.Tensor, l_max: int, gamma_orders: int = None):
    """Project (beta, alpha, gamma)-ordered Euler samples onto Wigner coefficients."""
    b = l_max
    g_ord = gamma_orders or b
    n_beta, n_alpha, n_gamma = samples.shape[-3:]
    if n_alpha < 2 * b - 1 or n_gamma < 2 * g_ord - 1 or n_beta < 2 * b:
        raise ValueError("grid too small for the requested band-limit")
    cdtype = _complex_dtype(samples.dtype)
    rdtype = _real_dtype(samples.dtype)
    dtype_str = str(cdtype).removeprefix("torch.")
    dev = samples.device

    lead = samples.shape[:-3]
    x = samples.reshape((-1,) + samples.shape[-3:]).to(cdtype)
    batch = x.shape[0]
    w_a = _dft_matrix(b, n_alpha, True, dtype_str).to(dev)      # (A, M)
    w_g = _dft_matrix(g_ord, n_gamma, True, dtype_str).to(dev)  # (G, N)
    g1 = x.transpose(-2, -1).reshape(-1, n_alpha) @ w_a         # contract alpha
    g1 = g1.reshape(batch, n_beta, n_gamma, 2 * b - 1).transpose(-2, -1)
    g2 = g1.reshape(-1, n_gamma) @ w_g                          # contract gamma
    g = g2.reshape(batch, n_beta, 2 * b - 1, 2 * g_ord - 1)     # (batch, J, M, N)

    w = quadrature_weights(n_beta, dtype=rdtype, device=dev)
    g = g * w[None, :, None, None]
    d_dense = _slice_gamma_orders(
        d_dense_table(b, n_beta, dtype=rdtype), b, g_ord
    ).to(dev)
    coeffs = _beta_bmm(d_dense, g, contract_j=True)  # (batch, L, M, N)
    coeffs = coeffs * _ortho_scale(b, cdtype, dev)[:, None, None]
    return coeffs.reshape(lead + coeffs.shape[-3:])


def so3_synthesize_raw(coeffs: torch.Tensor, l_max: int,
                       n_alpha: int = None, n_beta: int = None, n_gamma: int = None):
    """As so3_synthesize_jag but returning the public (alpha, beta, gamma) order."""
    out = so3_synthesize_jag(coeffs, l_max, n_alpha, n_beta, n_gamma)
    return out.transpose(-3, -2)


def so3_analyze_raw(samples: torch.Tensor, l_max: int):
    """Project Euler-grid samples (..., A, J, C) onto Wigner coefficients."""
    return so3_analyze_jag(samples.transpose(-3, -2), l_max)


def so3_fft(sig: SO3Signal) -> WignerCoeffs:
    return WignerCoeffs(so3_analyze_raw(sig.samples, sig.bandwidth), sig.bandwidth)


def so3_ifft(coeffs: WignerCoeffs) -> SO3Signal:
    out = so3_synthesize_raw(coeffs.coeffs, coeffs.bandwidth)
    return SO3Signal(out, coeffs.bandwidth)


def _flip_grid(c: torch.Tensor) -> torch.Tensor:
    """flip(F)[.., v, n] = (-1)^{v+n} F[.., -v, -n] on dense (.., M, N) blocks."""
    b = (c.shape[-1] + 1) // 2
    ms = torch.arange(-(b - 1), b, device=c.device)
    sign = ((-1.0) ** (ms[:, None] + ms[None, :])).to(c.real.dtype)
    return torch.flip(c, dims=(-2, -1)) * sign


def s2_correlate_coeffs(f_coeffs: torch.Tensor, h_coeffs: torch.Tensor,
                        l_out: int = None) -> torch.Tensor:
    """Wigner coefficients of the correlation from two sets of (..., L, W)
    spherical coefficients (optionally truncated to l < l_out).

    The operands may carry different order widths W = 2*cap-1 (e.g. a
    gamma-order-capped kernel); the output inherits (W_f, W_h) as its
    (alpha, gamma) order ranges.
    """
    b = f_coeffs.shape[-2]
    l_out = l_out or b
    if h_coeffs.shape[-2] != b:
        raise ValueError("bandwidth mismatch")
    cdtype = _complex_dtype(torch.promote_types(f_coeffs.dtype, h_coeffs.dtype))

    def prep(x):
        x = x.to(cdtype)[..., :l_out, :]
        cap = (x.shape[-1] + 1) // 2
        if cap > l_out:
            c = cap - 1
            x = x[..., c - (l_out - 1): c + l_out]
            cap = l_out
        return x, cap

    f, cap_f = prep(f_coeffs)
    h, cap_h = prep(h_coeffs)

    ls = torch.arange(l_out, dtype=_real_dtype(cdtype), device=f.device)
    scale = torch.sqrt(8 * np.pi**2 / (2 * ls + 1))
    ms_f = torch.arange(-(cap_f - 1), cap_f, device=f.device)
    ms_h = torch.arange(-(cap_h - 1), cap_h, device=f.device)
    sign = ((-1.0) ** (ms_f[:, None] - ms_h[None, :])).to(_real_dtype(cdtype))

    f_neg = torch.flip(f, dims=(-1,))  # index u -> fhat[l, -u]
    h_neg = torch.flip(h, dims=(-1,))
    out = f_neg.unsqueeze(-1) * h_neg.conj().unsqueeze(-2)
    return out * sign * scale[:, None, None]


def s2_correlate(f: SphericalSignal, h: SphericalSignal) -> SO3Signal:
    """Correlation g(R) = <rotate_s2(h, R), f> for all grid rotations."""
    if f.bandwidth != h.bandwidth:
        raise ValueError("bandwidth mismatch")
    b = f.bandwidth
    fc = sht_forward_raw(f.samples, b)
    hc = sht_forward_raw(h.samples, b)
    g = so3_synthesize_raw(s2_correlate_coeffs(fc, hc), b)
    if not (f.samples.is_complex() or h.samples.is_complex()):
        g = g.real
    return SO3Signal(g, b)


def so3_convolve_coeffs(f_coeffs: torch.Tensor, h_coeffs: torch.Tensor) -> torch.Tensor:
    """Wigner coefficients of integral f(R^-1 Q) h(Q) dQ (per-degree matmuls)."""
    b = f_coeffs.shape[-3]
    if h_coeffs.shape[-3] != b:
        raise ValueError("bandwidth mismatch")
    cdtype = _complex_dtype(torch.promote_types(f_coeffs.dtype, h_coeffs.dtype))
    f = _flip_grid(f_coeffs.to(cdtype))
    h = h_coeffs.to(cdtype)
    ls = torch.arange(b, dtype=_real_dtype(cdtype), device=f.device)
    scale = torch.sqrt(8 * np.pi**2 / (2 * ls + 1))
    out = torch.einsum("...lun,...lvn->...luv", h, f)
    return out * scale[:, None, None]


def so3_convolve(f: SO3Signal, h: SO3Signal) -> SO3Signal:
    if f.bandwidth != h.bandwidth:
        raise ValueError("bandwidth mismatch")
    b = f.bandwidth
    fc = so3_analyze_raw(f.samples, b)
    hc = so3_analyze_raw(h.samples, b)
    g = so3_synthesize_raw(so3_convolve_coeffs(fc, hc), b)
    if not (f.samples.is_complex() or h.samples.is_complex()):
        g = g.real
    return SO3Signal(g, b)
