"""Matrix-free sensing operator: shift, forward model, adjoint, pseudo-inverse.

The sensing matrix of a dispersive snapshot imager is a row of per-band
diagonal blocks, so its Gram matrix is diagonal: ``sigma(u, v)`` is the sum
of squared shifted-mask values across bands.  Every operation here is a
couple of element-wise passes over band planes; the dense matrix (hundreds
of GB at full scale) is never formed outside the test oracle.

All operations allocate fresh outputs and are pure; the operator itself is
immutable and shareable across threads.  Per-pixel sums over bands always
run in increasing band order, so results are bitwise reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import CodedAperture, HSICube, Measurement, SceneConfig, ShiftedCube
from .errors import DimensionMismatch, MaskDegenerate


def shift_mask(mask: CodedAperture, config: SceneConfig) -> ShiftedCube:
    """Per-band copies of the mask, band c translated right by d*c columns."""
    h, w, nc, d = config.geometry
    if (mask.height, mask.width) != (h, w):
        raise DimensionMismatch(
            f"mask is {mask.height}x{mask.width}, config wants {h}x{w}"
        )
    out = np.zeros((nc, h, config.measurement_width()))
    for c in range(nc):
        out[c, :, d * c : d * c + w] = mask.data
    return ShiftedCube._adopt(config, out)


def shift_cube(cube: HSICube) -> ShiftedCube:
    """Disperse a scene cube: band c translated right by d*c columns."""
    h, w, nc, d = cube.config.geometry
    out = np.zeros((nc, h, cube.config.measurement_width()))
    for c in range(nc):
        out[c, :, d * c : d * c + w] = cube.data[c]
    return ShiftedCube._adopt(cube.config, out)


def unshift_cube(shifted: ShiftedCube) -> HSICube:
    """Extract the on-support H x W region of every band (inverse of shift)."""
    h, w, nc, d = shifted.config.geometry
    out = np.empty((nc, h, w))
    for c in range(nc):
        out[c] = shifted.data[c, :, d * c : d * c + w]
    return HSICube._adopt(shifted.config, out)


@dataclass(frozen=True)
class SensingOperator:
    """Geometry plus the shifted mask and the precomputed Gram diagonal.

    ``sigma`` is the diagonal of the operator Gram matrix, strictly positive
    everywhere (construction raises :class:`MaskDegenerate` otherwise).  Its
    reciprocal is precomputed because every solver iteration reuses it.
    """

    config: SceneConfig
    shifted_mask: ShiftedCube
    sigma: np.ndarray = field(init=False)
    inv_sigma: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.shifted_mask.config.geometry != self.config.geometry:
            raise DimensionMismatch("shifted mask geometry disagrees with config")
        m = self.shifted_mask.data
        sigma = np.zeros(m.shape[1:])
        for c in range(self.config.bands):
            sigma += m[c] * m[c]
        if not (sigma > 0.0).all():
            u, v = np.argwhere(sigma == 0.0)[0]
            raise MaskDegenerate(int(u), int(v))
        sigma.setflags(write=False)
        inv_sigma = 1.0 / sigma
        inv_sigma.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "inv_sigma", inv_sigma)

    def _check_cube(self, cube: HSICube) -> None:
        if cube.config.geometry != self.config.geometry:
            raise DimensionMismatch("cube geometry disagrees with operator")

    def _check_meas(self, meas: Measurement) -> None:
        if meas.config.geometry != self.config.geometry:
            raise DimensionMismatch("measurement geometry disagrees with operator")

    def forward(self, cube: HSICube) -> Measurement:
        """Detector image: per band, shift, modulate by the mask, accumulate."""
        self._check_cube(cube)
        h, w, nc, d = self.config.geometry
        m = self.shifted_mask.data
        y = np.zeros((h, self.config.measurement_width()))
        for c in range(nc):
            lo = d * c
            y[:, lo : lo + w] += cube.data[c] * m[c, :, lo : lo + w]
        return Measurement._adopt(self.config, y)

    def _adjoint_array(self, y: np.ndarray) -> np.ndarray:
        h, w, nc, d = self.config.geometry
        m = self.shifted_mask.data
        out = np.empty((nc, h, w))
        for c in range(nc):
            lo = d * c
            out[c] = m[c, :, lo : lo + w] * y[:, lo : lo + w]
        return out

    def adjoint(self, meas: Measurement) -> HSICube:
        """Transpose of :meth:`forward`: mask-modulated backprojection."""
        self._check_meas(meas)
        return HSICube._adopt(self.config, self._adjoint_array(meas.data))

    def pinv(self, meas: Measurement) -> HSICube:
        """Minimum-norm solution of forward(x) = meas.

        Two element-wise passes: divide by the Gram diagonal, then
        backproject.  Equals the Moore-Penrose pseudo-inverse because the
        Gram matrix is diagonal and strictly positive.
        """
        self._check_meas(meas)
        return HSICube._adopt(
            self.config, self._adjoint_array(meas.data * self.inv_sigma)
        )

    def range_project(self, cube: HSICube) -> HSICube:
        """Orthogonal projection onto the row space of the operator."""
        return self.pinv(self.forward(cube))

    def null_project(self, cube: HSICube) -> HSICube:
        """Orthogonal projection onto the null space of the operator."""
        self._check_cube(cube)
        proj = self.range_project(cube)
        return HSICube._adopt(self.config, cube.data - proj.data)

    def rnd_combine(self, meas: Measurement, q: HSICube) -> HSICube:
        """Data-consistent combination: pinv(meas) plus the null part of q.

        For any candidate q the result reproduces ``meas`` under
        :meth:`forward` up to rounding.
        """
        self._check_meas(meas)
        self._check_cube(q)
        out = self._adjoint_array(meas.data * self.inv_sigma)
        out += q.data
        out -= self.range_project(q).data
        return HSICube._adopt(self.config, out)

    def nbytes(self) -> int:
        """Bytes held by the operator's precomputed arrays."""
        return (
            self.shifted_mask.data.nbytes
            + self.sigma.nbytes
            + self.inv_sigma.nbytes
        )


def build_operator(mask: CodedAperture, config: SceneConfig) -> SensingOperator:
    """Precompute the shifted mask and Gram diagonal for a mask/geometry pair.

    Raises MaskDegenerate if any detector pixel receives no mask energy
    across all bands (the operator would not have full row rank).
    """
    return SensingOperator(config, shift_mask(mask, config))
