from .grids import phi_samples, quadrature_weights, theta_samples
from .legendre import legendre_table
from .rotation import RotationZYZ
from .sht import (HarmonicCoeffs, SphericalSignal, load_coeffs, rotate_s2,
                  save_coeffs, sht_forward, sht_forward_raw, sht_inverse,
                  sht_inverse_raw, wigner_D_blocks)
from .so3 import (SO3Signal, WignerCoeffs, s2_correlate, s2_correlate_coeffs,
                  so3_analyze_raw, so3_convolve, so3_convolve_coeffs, so3_fft,
                  so3_ifft, so3_synthesize_raw)
from .wigner import d_dense_table, d_matrices
