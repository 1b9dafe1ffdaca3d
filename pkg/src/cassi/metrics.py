"""Reference image-quality metrics: PSNR and SSIM, per band then averaged.

Both cubes are clamped to [0, 1] before comparison (peak 1.0).  SSIM uses
the classical 11x11 Gaussian window with sigma 1.5 and stabilizers
(0.01)^2 and (0.03)^2; window statistics are computed on the valid interior
only (no padding), so bands must be at least 11x11.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .core import HSICube
from .errors import DimensionMismatch

PSNR_CAP_DB = 100.0

_SSIM_C1 = 0.01**2
_SSIM_C2 = 0.03**2


@dataclass(frozen=True)
class MetricReport:
    """Per-band and averaged quality numbers for one cube pair."""

    psnr_db: float
    ssim: float
    per_band_psnr: tuple[float, ...]
    per_band_ssim: tuple[float, ...]
    mse: float


def _clamped_pair(reference: HSICube, test: HSICube) -> tuple[np.ndarray, np.ndarray]:
    if reference.data.shape != test.data.shape:
        raise DimensionMismatch(
            f"cube shapes differ: {reference.data.shape} vs {test.data.shape}"
        )
    return np.clip(reference.data, 0.0, 1.0), np.clip(test.data, 0.0, 1.0)


def psnr_bands(reference: HSICube, test: HSICube) -> np.ndarray:
    """Per-band PSNR in dB against peak 1.0; a zero-MSE band reports the
    100 dB cap."""
    a, b = _clamped_pair(reference, test)
    out = np.empty(a.shape[0])
    for c in range(a.shape[0]):
        mse = float(np.mean((a[c] - b[c]) ** 2))
        out[c] = PSNR_CAP_DB if mse == 0.0 else 10.0 * np.log10(1.0 / mse)
    return out


def psnr(reference: HSICube, test: HSICube) -> float:
    """Mean of per-band PSNR."""
    return float(np.mean(psnr_bands(reference, test)))


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    offsets = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(offsets**2) / (2.0 * sigma**2))
    win = np.outer(g, g)
    return win / win.sum()


_WINDOW = _gaussian_window()


def _ssim_plane(a: np.ndarray, b: np.ndarray) -> float:
    win = _WINDOW
    mu_a = convolve2d(a, win, mode="valid")
    mu_b = convolve2d(b, win, mode="valid")
    var_a = convolve2d(a * a, win, mode="valid") - mu_a * mu_a
    var_b = convolve2d(b * b, win, mode="valid") - mu_b * mu_b
    cov = convolve2d(a * b, win, mode="valid") - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + _SSIM_C1) * (2.0 * cov + _SSIM_C2)
    den = (mu_a * mu_a + mu_b * mu_b + _SSIM_C1) * (var_a + var_b + _SSIM_C2)
    return float(np.mean(num / den))


def ssim_bands(reference: HSICube, test: HSICube) -> np.ndarray:
    """Per-band structural similarity (valid-region 11x11 Gaussian window)."""
    a, b = _clamped_pair(reference, test)
    if a.shape[1] < 11 or a.shape[2] < 11:
        raise DimensionMismatch(
            f"bands of shape {a.shape[1:]} are smaller than the 11x11 ssim window"
        )
    return np.array([_ssim_plane(a[c], b[c]) for c in range(a.shape[0])])


def ssim(reference: HSICube, test: HSICube) -> float:
    """Mean of per-band SSIM."""
    return float(np.mean(ssim_bands(reference, test)))


def evaluate(reference: HSICube, test: HSICube) -> MetricReport:
    """Full report: per-band PSNR/SSIM, their means, and whole-cube MSE."""
    a, b = _clamped_pair(reference, test)
    p = psnr_bands(reference, test)
    s = ssim_bands(reference, test)
    return MetricReport(
        psnr_db=float(np.mean(p)),
        ssim=float(np.mean(s)),
        per_band_psnr=tuple(float(x) for x in p),
        per_band_ssim=tuple(float(x) for x in s),
        mse=float(np.mean((a - b) ** 2)),
    )
