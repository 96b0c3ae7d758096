"""Spherical-harmonic convolutional backbone.

Layer stack: one spherical correlation layer lifting the range image to a
rotation-group feature map, then two rotation-group convolution layers, with
spatial ReLUs between layers, finished by max-pooling over the gamma axis
(and paired beta rows) into a local feature field.

Kernels live directly in the harmonic domain with the reality-symmetry
constraints baked in, so every layer is exactly equivariant to grid-aligned
yaw shifts of the input: the azimuth axis is sampled at the full input width
(64 columns) at every spatial stage, which makes a one-column input shift an
exact one-sample alpha roll all the way to the feature field. The gamma axis
carries no yaw information, so kernels are order-capped there and the gamma
grid is kept at half resolution to cut compute.
"""

import numpy as np
import torch
import torch.nn as nn

from ..harmonics.so3 import (s2_correlate_coeffs, so3_analyze_jag,
                             so3_synthesize_jag)
from ..harmonics.sht import sht_forward_raw

FIELD_DIM = 32
INTERNAL_BAND = 16
GAMMA_ORDERS = 8


def _s2_symmetry_maps(l_max, m_cap):
    """Index/sign/conj maps expanding packed (l, 0 <= m < m_cap) slots to the
    dense (L, 2*m_cap-1) layout under c[l,-m] = (-1)^m conj(c[l,m])."""
    slots = {}
    k = 0
    for l in range(l_max):
        for m in range(min(l, m_cap - 1) + 1):
            slots[(l, m)] = k
            k += 1
    src = np.zeros((l_max, 2 * m_cap - 1), dtype=np.int64)
    sign = np.zeros((l_max, 2 * m_cap - 1))
    conj = np.zeros((l_max, 2 * m_cap - 1), dtype=bool)
    for l in range(l_max):
        for mi in range(2 * m_cap - 1):
            m = mi - (m_cap - 1)
            if abs(m) > min(l, m_cap - 1):
                continue
            src[l, mi] = slots[(l, abs(m))]
            sign[l, mi] = (-1.0) ** m if m < 0 else 1.0
            conj[l, mi] = m < 0
    return k, src, sign, conj


def _so3_symmetry_maps(l_max, m_cap, n_cap):
    """Same expansion for Wigner coefficients under
    F[l,-m,-n] = (-1)^{m-n} conj(F[l,m,n]), with order caps on both axes."""
    slots = {}
    k = 0
    for l in range(l_max):
        mm, nn = min(l, m_cap - 1), min(l, n_cap - 1)
        for m in range(0, mm + 1):
            for n in range(-nn, nn + 1):
                if m == 0 and n < 0:
                    continue
                slots[(l, m, n)] = k
                k += 1
    wm, wn = 2 * m_cap - 1, 2 * n_cap - 1
    src = np.zeros((l_max, wm, wn), dtype=np.int64)
    sign = np.zeros((l_max, wm, wn))
    conj = np.zeros((l_max, wm, wn), dtype=bool)
    for l in range(l_max):
        for mi in range(wm):
            for ni in range(wn):
                m, n = mi - (m_cap - 1), ni - (n_cap - 1)
                if abs(m) > min(l, m_cap - 1) or abs(n) > min(l, n_cap - 1):
                    continue
                if (l, m, n) in slots:
                    src[l, mi, ni] = slots[(l, m, n)]
                    sign[l, mi, ni] = 1.0
                else:
                    src[l, mi, ni] = slots[(l, -m, -n)]
                    sign[l, mi, ni] = (-1.0) ** (m - n)
                    conj[l, mi, ni] = True
    return k, src, sign, conj


class SpectralKernel(nn.Module):
    """Packed real parameters for a bank of real-signal harmonic kernels."""

    def __init__(self, c_out, c_in, l_max, kind, m_cap=None, n_cap=None,
                 init_std=0.05, seed=None):
        super().__init__()
        m_cap = m_cap or l_max
        if kind == "s2":
            n_slots, src, sign, conj = _s2_symmetry_maps(l_max, m_cap)
        else:
            n_slots, src, sign, conj = _so3_symmetry_maps(l_max, m_cap, n_cap or l_max)
        gen = torch.Generator().manual_seed(seed) if seed is not None else None
        self.weight = nn.Parameter(
            torch.randn(c_out, c_in, n_slots, 2, generator=gen) * init_std
        )
        sign_t = torch.from_numpy(sign).float()
        conj_t = torch.from_numpy(conj)
        self.register_buffer("src", torch.from_numpy(src))
        self.register_buffer("sign_re", sign_t)
        self.register_buffer("sign_im", torch.where(conj_t, -sign_t, sign_t))

    def dense(self):
        re = self.weight[..., 0][..., self.src] * self.sign_re
        im = self.weight[..., 1][..., self.src] * self.sign_im
        return torch.complex(re, im)


class SphericalBackbone(nn.Module):
    """Range image (N, 64, 64) -> local feature field (N, cells, FIELD_DIM).

    The feature field has 16 polar bands x 64 azimuth columns = 1024 cells,
    each holding a FIELD_DIM-vector obtained by max-pooling the last
    rotation-group feature map over gamma and over beta pairs.
    """

    def __init__(self, channels=(4, 8, FIELD_DIM), input_band=32, seed=0):
        super().__init__()
        self.input_band = input_band
        self.l_max = INTERNAL_BAND
        self.g_ord = GAMMA_ORDERS
        self.n_alpha = 2 * input_band
        self.n_beta = 2 * INTERNAL_BAND
        self.n_gamma = 2 * GAMMA_ORDERS
        c1, c2, c3 = channels
        if c3 != FIELD_DIM:
            raise ValueError(f"final channel count must be {FIELD_DIM}")
        self.kernel1 = SpectralKernel(c1, 1, self.l_max, "s2", m_cap=self.g_ord,
                                      init_std=0.3, seed=seed)
        self.kernel2 = SpectralKernel(c2, c1, self.l_max, "so3", m_cap=self.g_ord,
                                      n_cap=self.g_ord, init_std=0.05, seed=seed + 1)
        self.kernel3 = SpectralKernel(c3, c2, self.l_max, "so3", m_cap=self.g_ord,
                                      n_cap=self.g_ord, init_std=0.05, seed=seed + 2)
        self.bias1 = nn.Parameter(torch.zeros(c1))
        self.bias2 = nn.Parameter(torch.zeros(c2))
        self.bias3 = nn.Parameter(torch.zeros(c3))
        self.act = nn.ReLU()

    def _synth(self, coeffs):
        # internal feature layout is (batch, ch, beta, alpha, gamma)
        out = so3_synthesize_jag(
            coeffs, self.l_max, n_alpha=self.n_alpha, n_beta=self.n_beta,
            n_gamma=self.n_gamma, gamma_orders=self.g_ord,
        )
        return out.real

    def _conv_layer(self, feats, kernel: SpectralKernel, bias):
        """Rotation-group convolution with the features in the equivariant slot."""
        fc = so3_analyze_jag(feats, self.l_max, gamma_orders=self.g_ord)
        k = kernel.dense()  # (Cout, Cin, L, 2*cap-1, 2*cap-1)
        cap = self.g_ord
        ms = torch.arange(-(cap - 1), cap, device=feats.device)
        flip_sign = ((-1.0) ** (ms[:, None] + ms[None, :])).to(fc.dtype)
        kf = torch.flip(k, dims=(-2, -1)) * flip_sign

        # OUT^l[b,o,u,v] = scale_l * sum_{c,n} feats^l[b,c,u,n] kf^l[o,c,v,n],
        # one tight GEMM per degree on the populated blocks
        b = self.l_max
        nb, cin = fc.shape[0], fc.shape[1]
        cout = kf.shape[0]
        cm, ck = b - 1, cap - 1  # dense centers: feature m-axis, kernel axes
        out = fc.new_zeros(nb, cout, b, 2 * b - 1, 2 * cap - 1)
        for l in range(b):
            du = min(l, b - 1)
            dv = min(l, cap - 1)
            su = slice(cm - du, cm + du + 1)
            sv = slice(ck - dv, ck + dv + 1)
            wu, wv = 2 * du + 1, 2 * dv + 1
            scale = float(np.sqrt(8 * np.pi**2 / (2 * l + 1)))
            a = fc[:, :, l, su, sv].permute(0, 2, 1, 3).reshape(nb * wu, cin * wv)
            kk = kf[:, :, l, sv, sv].permute(0, 2, 1, 3).reshape(cout * wv, cin * wv)
            prod = (a @ kk.T).reshape(nb, wu, cout, wv).permute(0, 2, 1, 3)
            out[:, :, l, su, sv] = prod * scale
        return self.act(self._synth(out) + bias[None, :, None, None, None])

    def forward(self, y):
        """y: (N, 2B, 2B) real range images at the input bandwidth."""
        if y.ndim == 2:
            y = y[None]
        n = y.shape[0]
        b_in = self.input_band
        if y.shape[-2:] != (2 * b_in, 2 * b_in):
            raise ValueError(f"expected {2*b_in}x{2*b_in} input, got {tuple(y.shape[-2:])}")

        fc = sht_forward_raw(y, b_in)  # (N, B_in, 2B_in-1)
        sl = slice(b_in - self.l_max, b_in + self.l_max - 1)
        fc = fc[..., : self.l_max, sl]  # truncate to internal band

        k1 = self.kernel1.dense()  # (C1, 1, L, 2*cap-1)
        # broadcast (N, 1, L, M) x (1, C1, L, Mk) -> (N, C1, L, M, Mk)
        g = s2_correlate_coeffs(fc[:, None], k1[:, 0][None])
        feats = self.act(self._synth(g) + self.bias1[None, :, None, None, None])
        feats = self._conv_layer(feats, self.kernel2, self.bias2)
        feats = self._conv_layer(feats, self.kernel3, self.bias3)

        # pool gamma entirely and beta in pairs; keep full alpha resolution
        field = feats.amax(dim=-1)  # (N, C3, J, A)
        j, a = field.shape[-2], field.shape[-1]
        field = field.reshape(n, FIELD_DIM, j // 2, 2, a).amax(dim=3)
        # cells enumerated beta-band major, azimuth minor
        field = field.permute(0, 2, 3, 1).reshape(n, (j // 2) * a, FIELD_DIM)
        return field
