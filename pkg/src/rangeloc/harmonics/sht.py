"""Spherical harmonic transforms on the equiangular grid.

Conventions: orthonormal harmonics Y_l^m = Q_l^m(theta) e^{i m phi} with
Condon-Shortley phase; coefficients are stored dense as (..., L, 2L-1) with
order m at index m + L - 1. Rotations act as (L_R f)(w) = f(R^{-1} w), which
on coefficients is c'[l, m'] = sum_m D^l_{m'm}(R) c[l, m] with
D^l_{m'm}(alpha, beta, gamma) = e^{-i m' alpha} d^l_{m'm}(beta) e^{-i m gamma}.
"""

import struct
from dataclasses import dataclass

import numpy as np
import torch

from .grids import quadrature_weights
from .legendre import legendre_table
from .rotation import RotationZYZ
from .wigner import d_matrices

COEFF_MAGIC = b"I3DHC1"


def _complex_dtype(dtype):
    return torch.complex64 if dtype in (torch.float32, torch.complex64) else torch.complex128


def _real_dtype(dtype):
    return torch.float32 if dtype in (torch.float32, torch.complex64) else torch.float64


@dataclass
class SphericalSignal:
    """Samples on the 2B x 2B grid, axes (theta row, phi column)."""

    samples: torch.Tensor
    bandwidth: int

    def __post_init__(self):
        self.samples = torch.as_tensor(self.samples)
        n = 2 * self.bandwidth
        if self.samples.shape[-2:] != (n, n):
            raise ValueError(
                f"grid must be {n}x{n} for bandwidth {self.bandwidth}, got {tuple(self.samples.shape[-2:])}"
            )


@dataclass
class HarmonicCoeffs:
    """Dense coefficients (..., L, 2L-1); zero outside |m| <= l."""

    coeffs: torch.Tensor
    bandwidth: int

    def __post_init__(self):
        self.coeffs = torch.as_tensor(self.coeffs)
        b = self.bandwidth
        if self.coeffs.shape[-2:] != (b, 2 * b - 1):
            raise ValueError(
                f"coefficient layout must be (L, 2L-1) = ({b}, {2*b-1}), got {tuple(self.coeffs.shape[-2:])}"
            )

    def at(self, l: int, m: int):
        if abs(m) > l or l >= self.bandwidth:
            raise IndexError("(l, m) out of range")
        return self.coeffs[..., l, m + self.bandwidth - 1]


def sht_forward_raw(samples: torch.Tensor, bandwidth: int) -> torch.Tensor:
    """Forward transform of (..., 2B, 2B) samples to (..., B, 2B-1) coefficients."""
    b = bandwidth
    n = 2 * b
    if samples.shape[-2:] != (n, n):
        raise ValueError(f"grid size must be {n}x{n}")
    cdtype = _complex_dtype(samples.dtype)
    rdtype = _real_dtype(samples.dtype)
    dev = samples.device

    g = torch.fft.fft(samples.to(cdtype), dim=-1)  # (..., j, m bins)
    # gather bins for m = -(B-1) .. B-1
    ms = torch.arange(-(b - 1), b, device=dev) % n
    g = g[..., ms]  # (..., j, 2B-1)

    w = quadrature_weights(n, dtype=rdtype, device=dev)
    leg = legendre_table(b, n, dtype=rdtype).to(dev)
    gw = g * w[:, None]
    coeffs = torch.einsum("lmj,...jm->...lm", leg.to(cdtype), gw)
    return coeffs * (2 * np.pi / n)


def sht_inverse_raw(coeffs: torch.Tensor, bandwidth: int) -> torch.Tensor:
    """Inverse transform of (..., B, 2B-1) coefficients to (..., 2B, 2B) samples."""
    b = bandwidth
    n = 2 * b
    if coeffs.shape[-2:] != (b, 2 * b - 1):
        raise ValueError("malformed coefficient layout")
    cdtype = _complex_dtype(coeffs.dtype)
    rdtype = _real_dtype(coeffs.dtype)
    dev = coeffs.device

    leg = legendre_table(b, n, dtype=rdtype).to(dev)
    g = torch.einsum("lmj,...lm->...jm", leg.to(cdtype), coeffs.to(cdtype))
    spec = g.new_zeros(g.shape[:-1] + (n,))
    ms = torch.arange(-(b - 1), b, device=dev) % n
    spec[..., ms] = g
    return torch.fft.ifft(spec, dim=-1) * n


def sht_forward(sig: SphericalSignal) -> HarmonicCoeffs:
    return HarmonicCoeffs(sht_forward_raw(sig.samples, sig.bandwidth), sig.bandwidth)


def sht_inverse(coeffs: HarmonicCoeffs) -> SphericalSignal:
    return SphericalSignal(sht_inverse_raw(coeffs.coeffs, coeffs.bandwidth), coeffs.bandwidth)


def wigner_D_blocks(rotation: RotationZYZ, l_max: int, dtype=torch.complex128, device="cpu"):
    """Per-degree Wigner D matrices [D^0, ..., D^{L-1}] for one rotation."""
    ds = d_matrices(l_max, np.array([rotation.beta]), dtype=_real_dtype(dtype))
    blocks = []
    for l, d in enumerate(ds):
        m = torch.arange(-l, l + 1, dtype=_real_dtype(dtype), device=device)
        em = torch.exp(-1j * m * rotation.alpha).to(dtype)
        en = torch.exp(-1j * m * rotation.gamma).to(dtype)
        blocks.append(em[:, None] * d[0].to(device).to(dtype) * en[None, :])
    return blocks


def rotate_coeffs_raw(coeffs: torch.Tensor, bandwidth: int, rotation: RotationZYZ) -> torch.Tensor:
    b = bandwidth
    cdtype = _complex_dtype(coeffs.dtype)
    coeffs = coeffs.to(cdtype)
    blocks = wigner_D_blocks(rotation, b, dtype=cdtype, device=coeffs.device)
    out = torch.zeros_like(coeffs)
    for l in range(b):
        sl = slice(b - 1 - l, b + l)
        out[..., l, sl] = torch.einsum("nm,...m->...n", blocks[l], coeffs[..., l, sl])
    return out


def rotate_s2(sig: SphericalSignal, rotation: RotationZYZ) -> SphericalSignal:
    """Spectral rotation: forward transform, per-degree Wigner-D multiply, inverse."""
    was_real = not sig.samples.is_complex()
    c = sht_forward_raw(sig.samples, sig.bandwidth)
    c = rotate_coeffs_raw(c, sig.bandwidth, rotation)
    out = sht_inverse_raw(c, sig.bandwidth)
    if was_real:
        out = out.real
    return SphericalSignal(out, sig.bandwidth)


def save_coeffs(path, coeffs: HarmonicCoeffs):
    """Debug dump: magic, u32 B, u32 channels, interleaved complex float32 in
    canonical (l, m = -l..l) order per channel."""
    b = coeffs.bandwidth
    arr = coeffs.coeffs.detach().cpu().numpy()
    if arr.ndim == 2:
        arr = arr[None]
    channels = int(np.prod(arr.shape[:-2]))
    arr = arr.reshape(channels, b, 2 * b - 1)
    with open(path, "wb") as f:
        f.write(COEFF_MAGIC)
        f.write(struct.pack("<II", b, channels))
        for c in range(channels):
            for l in range(b):
                row = arr[c, l, b - 1 - l : b + l].astype(np.complex64)
                f.write(np.ascontiguousarray(row).view(np.float32).tobytes())


def load_coeffs(path) -> HarmonicCoeffs:
    with open(path, "rb") as f:
        magic = f.read(6)
        if magic != COEFF_MAGIC:
            raise ValueError(f"bad coefficient magic {magic!r}")
        b, channels = struct.unpack("<II", f.read(8))
        out = np.zeros((channels, b, 2 * b - 1), dtype=np.complex64)
        for c in range(channels):
            for l in range(b):
                raw = np.frombuffer(f.read((2 * l + 1) * 8), dtype=np.float32)
                out[c, l, b - 1 - l : b + l] = raw.view(np.complex64)
    coeffs = torch.as_tensor(out.astype(np.complex128))
    if channels == 1:
        coeffs = coeffs[0]
    return HarmonicCoeffs(coeffs, b)
