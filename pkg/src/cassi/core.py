"""Core value types and index conventions.

Every 3-D tensor is stored band-major as a C-contiguous ``(bands, height,
width)`` float64 array: band is the slowest axis, then row, then column, so
each band plane is a contiguous 2-D slice.  All types are immutable after
construction (frozen dataclasses holding read-only arrays) and safe to share
across threads.

The *mathematical* vectorization used by the dense oracle is different from
the memory layout: within a band the columns are stacked (column-major), and
bands are concatenated.  ``flatten_index`` is the single definition of that
ordering; nothing outside the dense oracle depends on it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange, NonFiniteValue


@dataclass(frozen=True)
class SceneConfig:
    """Geometry shared by a scene, its sensing operator, and its measurement.

    ``shift_step`` is the horizontal pixel displacement per band introduced
    by the dispersive element; band 0 is the unshifted base band.
    ``wavelengths`` is optional metadata (nm per band) and never enters any
    computation.
    """

    height: int
    width: int
    bands: int
    shift_step: int
    wavelengths: tuple[float, ...] | None = None

    def __post_init__(self):
        for name in ("height", "width", "bands", "shift_step"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
            if value < 1:
                raise ValueError(f"{name} must be >= 1, got {value}")
            object.__setattr__(self, name, int(value))
        if self.wavelengths is not None:
            wl = tuple(float(w) for w in self.wavelengths)
            if len(wl) != self.bands:
                raise ValueError(
                    f"wavelengths has {len(wl)} entries for {self.bands} bands"
                )
            object.__setattr__(self, "wavelengths", wl)

    def measurement_width(self) -> int:
        """Detector width: scene width plus the dispersion span d*(C-1)."""
        return self.width + self.shift_step * (self.bands - 1)

    @property
    def geometry(self) -> tuple[int, int, int, int]:
        """(height, width, bands, shift_step) without metadata."""
        return (self.height, self.width, self.bands, self.shift_step)


def _checked_array(data, shape: tuple[int, ...], what: str) -> np.ndarray:
    """Defensive-copy ``data`` to a read-only float64 array of ``shape``."""
    arr = np.array(data, dtype=np.float64, order="C")
    if arr.shape != shape:
        raise DimensionMismatch(f"{what}: expected shape {shape}, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise NonFiniteValue(f"{what} contains NaN or Inf")
    arr.setflags(write=False)
    return arr


def _adopt_readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class HSICube:
    """A spectral cube in scene coordinates, stored as (bands, H, W).

    Scene content is conventionally in [0, 1] but the library never clamps;
    clamping happens only inside metrics and image export.
    """

    config: SceneConfig
    data: np.ndarray

    def __post_init__(self):
        h, w, c, _ = self.config.geometry
        object.__setattr__(
            self, "data", _checked_array(self.data, (c, h, w), "HSICube")
        )

    @classmethod
    def _adopt(cls, config: SceneConfig, data: np.ndarray) -> "HSICube":
        """Wrap a freshly allocated, correctly shaped array without copying."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "config", config)
        object.__setattr__(obj, "data", _adopt_readonly(data))
        return obj


@dataclass(frozen=True)
class ShiftedCube:
    """A measurement-width tensor, stored as (bands, H, W').

    Tensors produced by shifting a scene or mask have band c supported on
    columns [d*c, d*c + W) with zeros elsewhere; initialization tensors for
    the solver may legitimately carry data outside that support, so the
    constructor checks shape and finiteness only.
    """

    config: SceneConfig
    data: np.ndarray

    def __post_init__(self):
        h, _, c, _ = self.config.geometry
        wp = self.config.measurement_width()
        object.__setattr__(
            self, "data", _checked_array(self.data, (c, h, wp), "ShiftedCube")
        )

    @classmethod
    def _adopt(cls, config: SceneConfig, data: np.ndarray) -> "ShiftedCube":
        obj = object.__new__(cls)
        object.__setattr__(obj, "config", config)
        object.__setattr__(obj, "data", _adopt_readonly(data))
        return obj


@dataclass(frozen=True)
class CodedAperture:
    """The 2-D modulation mask in front of the scene.

    Binary masks are the common case but any finite nonnegative values are
    legal (gray masks model partial transmission).
    """

    height: int
    width: int
    data: np.ndarray

    def __post_init__(self):
        arr = _checked_array(self.data, (self.height, self.width), "CodedAperture")
        if (arr < 0.0).any():
            raise ValueError("CodedAperture values must be >= 0")
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, data) -> "CodedAperture":
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim != 2:
            raise DimensionMismatch(f"mask must be 2-D, got shape {arr.shape}")
        return cls(arr.shape[0], arr.shape[1], arr)


@dataclass(frozen=True)
class Measurement:
    """A single detector image, stored as (H, W')."""

    config: SceneConfig
    data: np.ndarray

    def __post_init__(self):
        h = self.config.height
        wp = self.config.measurement_width()
        object.__setattr__(
            self, "data", _checked_array(self.data, (h, wp), "Measurement")
        )

    @classmethod
    def _adopt(cls, config: SceneConfig, data: np.ndarray) -> "Measurement":
        obj = object.__new__(cls)
        object.__setattr__(obj, "config", config)
        object.__setattr__(obj, "data", _adopt_readonly(data))
        return obj


def validate(config: SceneConfig, obj) -> None:
    """Check that ``obj``'s dimensions match ``config`` and values are finite.

    Raises DimensionMismatch or NonFiniteValue; returns None on success.
    """
    h, w, c, _ = config.geometry
    wp = config.measurement_width()
    if isinstance(obj, HSICube):
        expected = (c, h, w)
    elif isinstance(obj, ShiftedCube):
        expected = (c, h, wp)
    elif isinstance(obj, Measurement):
        expected = (h, wp)
    elif isinstance(obj, CodedAperture):
        expected = (h, w)
    else:
        raise TypeError(f"cannot validate object of type {type(obj).__name__}")
    if obj.data.shape != expected:
        raise DimensionMismatch(
            f"{type(obj).__name__}: expected shape {expected}, got {obj.data.shape}"
        )
    if not np.isfinite(obj.data).all():
        raise NonFiniteValue(f"{type(obj).__name__} contains NaN or Inf")


def flatten_index(u: int, v: int, c: int, config: SceneConfig) -> int:
    """Vector position of (row u, column v, band c) in shifted coordinates.

    Columns are stacked within a band (column-major) and bands are
    concatenated, so the detector-plane pixel (u, v) sits at ``v*H + u``
    inside band c's block of size ``H * W'``.
    """
    h = config.height
    wp = config.measurement_width()
    nc = config.bands
    if not (0 <= u < h and 0 <= v < wp and 0 <= c < nc):
        raise IndexOutOfRange(
            f"(u={u}, v={v}, c={c}) outside ({h}, {wp}, {nc})"
        )
    return c * h * wp + v * h + u


def unflatten_index(i: int, config: SceneConfig) -> tuple[int, int, int]:
    """Inverse of :func:`flatten_index`."""
    h = config.height
    wp = config.measurement_width()
    nc = config.bands
    if not 0 <= i < h * wp * nc:
        raise IndexOutOfRange(f"linear index {i} outside [0, {h * wp * nc})")
    c, rem = divmod(i, h * wp)
    v, u = divmod(rem, h)
    return u, v, c
