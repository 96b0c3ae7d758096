"""Appearance-condition transforms standing in for illumination/weather/season."""

import numpy as np
from matplotlib.colors import hsv_to_rgb, rgb_to_hsv

from .types import ConditionSpec, check_equirect

FOG_COLOR = np.array([0.78, 0.80, 0.82])

CONDITION_PRESETS = {
    "clear": dict(brightness=1.0, hue_shift=0.0, noise_sigma=0.0, fog_density=0.0),
    "dim": dict(brightness=0.45, hue_shift=-15.0, noise_sigma=0.02, fog_density=0.0),
    "warm": dict(brightness=1.25, hue_shift=40.0, noise_sigma=0.01, fog_density=0.05),
    "fog": dict(brightness=0.75, hue_shift=10.0, noise_sigma=0.03, fog_density=0.5),
    "night": dict(brightness=0.25, hue_shift=-30.0, noise_sigma=0.04, fog_density=0.1),
}


def make_conditions(names, base_seed: int = 0):
    """Build labeled ConditionSpecs from a list of preset names."""
    specs = []
    for i, name in enumerate(names):
        if name not in CONDITION_PRESETS:
            raise ValueError(
                f"unknown condition preset {name!r}; known: {sorted(CONDITION_PRESETS)}"
            )
        specs.append(ConditionSpec(label=i, seed=base_seed * 1000 + i,
                                   **CONDITION_PRESETS[name]))
    return specs


def apply_condition(img, cond: ConditionSpec):
    """Apply a condition spec to an equirect image; deterministic per (img, cond).

    Only appearance channels change; pixel geometry is untouched. The output
    is clipped to [0, 1].
    """
    img = check_equirect(img).astype(np.float64)
    if cond.is_identity():
        return img.copy()

    out = img
    if cond.brightness != 1.0:
        out = out * cond.brightness
    if cond.hue_shift != 0.0:
        hsv = rgb_to_hsv(np.clip(out, 0.0, 1.0))
        hsv[..., 0] = (hsv[..., 0] + cond.hue_shift / 360.0) % 1.0
        out = hsv_to_rgb(hsv)
    if cond.fog_density != 0.0:
        t = np.exp(-cond.fog_density)
        out = out * t + FOG_COLOR * (1.0 - t)
    if cond.noise_sigma != 0.0:
        rng = np.random.Generator(np.random.PCG64(cond.seed))
        out = out + rng.normal(0.0, cond.noise_sigma, size=out.shape)
    return np.clip(out, 0.0, 1.0)
