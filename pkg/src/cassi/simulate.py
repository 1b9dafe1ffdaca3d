"""Synthetic masks, scenes, and shot noise.

Everything here is a pure function of (parameters, seed).  The generator is
numpy's Philox (counter-based), so draws are reproducible across platforms
and runs; the seed-to-stream mapping is part of the compatibility contract
because golden files depend on it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CodedAperture, HSICube, Measurement, SceneConfig
from .errors import CropTooLarge, NegativeMeasurement


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True)
class NoiseSpec:
    """Shot-noise model: detector bit depth plus the draw seed.

    ``full_scale`` optionally fixes the photon count mapped to intensity 1.0
    instead of scaling to the per-measurement maximum.
    """

    shot_bits: int
    seed: int
    full_scale: float | None = None

    def __post_init__(self):
        if not 1 <= self.shot_bits <= 16:
            raise ValueError(f"shot_bits must be in [1, 16], got {self.shot_bits}")
        if self.full_scale is not None and self.full_scale <= 0:
            raise ValueError("full_scale must be positive")


def gen_mask(height: int, width: int, density: float, seed: int) -> CodedAperture:
    """I.i.d. Bernoulli(density) binary mask, reproducible per seed."""
    if not 0.0 < density <= 1.0:
        raise ValueError(f"density must be in (0, 1], got {density}")
    draws = _rng(seed).random((height, width))
    return CodedAperture(height, width, (draws < density).astype(np.float64))


def crop_mask(mask: CodedAperture, size: int, seed: int) -> CodedAperture:
    """Uniformly random axis-aligned size x size window from a larger mask."""
    if size > min(mask.height, mask.width):
        raise CropTooLarge(
            f"crop {size} exceeds mask {mask.height}x{mask.width}"
        )
    rng = _rng(seed)
    r0 = int(rng.integers(0, mask.height - size + 1))
    c0 = int(rng.integers(0, mask.width - size + 1))
    return CodedAperture(size, size, mask.data[r0 : r0 + size, c0 : c0 + size])


def repair_mask(mask: CodedAperture, config: SceneConfig) -> CodedAperture:
    """Flip the fewest zero entries to one so every detector pixel gets energy.

    Random binary masks almost surely starve the detector columns that only
    a single band reaches (the first and last d*(C-1) columns), which makes
    operator construction fail.  For each starved detector pixel this sets
    the entry of the highest contributing band to one; flips only add
    energy, so one pass suffices.  Deterministic, no seed.
    """
    h, w, nc, d = config.geometry
    wp = config.measurement_width()
    data = mask.data.copy()
    sigma = np.zeros((h, wp))
    for c in range(nc):
        sigma[:, d * c : d * c + w] += data * data
    for u, v in np.argwhere(sigma == 0.0):
        c_hi = min(int(v) // d, nc - 1)
        if v - d * c_hi >= w:
            continue  # no band reaches this column (d > W); unfixable here
        data[u, v - d * c_hi] = 1.0
    return CodedAperture(mask.height, mask.width, data)


def gen_scene(config: SceneConfig, complexity: int, seed: int) -> HSICube:
    """Piecewise-smooth cube in [0, 1]: random rectangles painted over a
    constant background, each with a low-order polynomial spectral profile.
    """
    if complexity < 0:
        raise ValueError("complexity must be >= 0")
    h, w, nc, _ = config.geometry
    rng = _rng(seed)
    background = 0.1 + 0.2 * rng.random()
    cube = np.full((nc, h, w), background)
    t = np.arange(nc) / max(nc - 1, 1)
    for _ in range(complexity):
        u0 = int(rng.integers(0, h))
        u1 = int(rng.integers(u0 + 1, h + 1))
        v0 = int(rng.integers(0, w))
        v1 = int(rng.integers(v0 + 1, w + 1))
        a0 = rng.random()
        a1, a2 = rng.uniform(-0.5, 0.5, size=2)
        profile = np.clip(a0 + a1 * t + a2 * t * t, 0.02, 0.98)
        cube[:, u0:u1, v0:v1] = profile[:, None, None]
    return HSICube(config, np.clip(cube, 0.0, 1.0))


def add_shot_noise(meas: Measurement, spec: NoiseSpec) -> Measurement:
    """Poisson photon noise at the given bit depth.

    The measurement is scaled so its peak maps to ``2**shot_bits - 1``
    counts (or to ``full_scale`` counts at intensity 1.0 when given), one
    Poisson draw is taken per pixel, and the result is scaled back, so the
    expectation equals the input.
    """
    if (meas.data < 0.0).any():
        raise NegativeMeasurement("shot noise requires a nonnegative measurement")
    peak_counts = float(2**spec.shot_bits - 1)
    if spec.full_scale is not None:
        scale = peak_counts / spec.full_scale
    else:
        peak = float(meas.data.max())
        if peak == 0.0:
            return Measurement._adopt(meas.config, meas.data.copy())
        scale = peak_counts / peak
    counts = _rng(spec.seed).poisson(meas.data * scale)
    return Measurement._adopt(meas.config, counts.astype(np.float64) / scale)


def bundled_suite(
    n_scenes: int = 10,
) -> tuple[SceneConfig, CodedAperture, list[HSICube]]:
    """The fixed synthetic evaluation suite used by tests and scripts.

    Ten piecewise-smooth 32x32x8 scenes with shift step 2, plus a
    full-rank-repaired Bernoulli(0.5) mask.  All seeds are pinned.
    """
    config = SceneConfig(height=32, width=32, bands=8, shift_step=2)
    mask = repair_mask(gen_mask(32, 32, 0.5, seed=424242), config)
    scenes = [gen_scene(config, complexity=6, seed=1000 + i) for i in range(n_scenes)]
    return config, mask, scenes
