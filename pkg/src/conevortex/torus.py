"""Discrete calculus on a flat rectangular torus.

Fields are sampled at ``(ix * hx, iy * hy)`` and stored as ``(ny, nx)`` arrays
(row index is ``iy``). Two derivative backends are available: ``"spectral"``
(FFT, the default and the authoritative one) and ``"stencil"`` (second-order
finite differences, used for cross-validation).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np

from .errors import NonZeroMean

BACKENDS = ("spectral", "stencil")


def _check_backend(backend: str) -> None:
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")


@dataclass(frozen=True)
class TorusGrid:
    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        for n in (self.nx, self.ny):
            if int(n) != n or n < 8 or n % 2:
                raise ValueError(f"grid sizes must be even integers >= 8, got {n}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("periods must be positive")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))
        object.__setattr__(self, "lx", float(self.lx))
        object.__setattr__(self, "ly", float(self.ly))

    @classmethod
    def square(cls, n: int, period: float = 1.0) -> "TorusGrid":
        return cls(n, n, period, period)

    @property
    def vol(self) -> float:
        return self.lx * self.ly

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid ``(X, Y)`` of sample positions, each of shape ``(ny, nx)``."""
        x = np.arange(self.nx) * self.hx
        y = np.arange(self.ny) * self.hy
        return np.meshgrid(x, y)

    # Cached wavenumber arrays; TorusGrid is hashable so this is safe.
    @cached_property
    def _k(self):
        kx = 2 * np.pi * np.fft.fftfreq(self.nx, d=self.hx)
        ky = 2 * np.pi * np.fft.fftfreq(self.ny, d=self.hy)
        KX, KY = np.meshgrid(kx, ky)
        return KX, KY

    @property
    def kx(self) -> np.ndarray:
        return self._k[0]

    @property
    def ky(self) -> np.ndarray:
        return self._k[1]

    @property
    def k2(self) -> np.ndarray:
        KX, KY = self._k
        return KX**2 + KY**2

    @cached_property
    def k2_stencil(self) -> np.ndarray:
        """Eigenvalues of the 5-point (positive) Laplacian on Fourier modes."""
        KX, KY = self._k
        return (4 / self.hx**2) * np.sin(KX * self.hx / 2) ** 2 + (
            4 / self.hy**2
        ) * np.sin(KY * self.hy / 2) ** 2

    def symbol(self, backend: str = "spectral") -> np.ndarray:
        _check_backend(backend)
        return self.k2 if backend == "spectral" else self.k2_stencil

    def to_dict(self) -> dict:
        return {"nx": self.nx, "ny": self.ny, "lx": self.lx, "ly": self.ly}


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.array(values, copy=True)
    values.flags.writeable = False
    return values


@dataclass(frozen=True, eq=False)
class RealField:
    grid: TorusGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", _frozen(v))

    @classmethod
    def constant(cls, grid: TorusGrid, c: float) -> "RealField":
        return cls(grid, np.full(grid.shape, float(c)))

    @classmethod
    def from_function(cls, grid: TorusGrid, fn) -> "RealField":
        X, Y = grid.coords()
        return cls(grid, np.broadcast_to(fn(X, Y), grid.shape))

    def _other(self, other):
        if isinstance(other, RealField):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return RealField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return RealField(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return RealField(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return RealField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return RealField(self.grid, -self.values)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def mean(self) -> float:
        return integrate(self) / self.grid.vol

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())


@dataclass(frozen=True, eq=False)
class ComplexField:
    grid: TorusGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != self.grid.shape:
            raise ValueError(f"shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def real(self) -> RealField:
        return RealField(self.grid, self.values.real)

    @property
    def imag(self) -> RealField:
        return RealField(self.grid, self.values.imag)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))


Field = Union[RealField, ComplexField]


def integrate(f: RealField) -> float:
    """Rectangle rule; spectrally accurate for smooth periodic integrands."""
    g = f.grid
    return float(g.hx * g.hy * np.sum(f.values))


# --- array-level kernels (shared with the other modules) -------------------


def laplacian_array(v: np.ndarray, grid: TorusGrid, backend: str = "spectral") -> np.ndarray:
    _check_backend(backend)
    if backend == "spectral":
        out = np.fft.ifft2(grid.k2 * np.fft.fft2(v))
        return out.real if np.isrealobj(v) else out
    return -(
        (np.roll(v, -1, axis=1) - 2 * v + np.roll(v, 1, axis=1)) / grid.hx**2
        + (np.roll(v, -1, axis=0) - 2 * v + np.roll(v, 1, axis=0)) / grid.hy**2
    )


def dx_array(v: np.ndarray, grid: TorusGrid, backend: str = "spectral", *, nyquist: bool = True) -> np.ndarray:
    """x-derivative along rows (axis 1); periodic in x is required.

    ``nyquist=False`` zeroes the Nyquist wavenumber so that real input gives a
    real result; with ``nyquist=True`` repeated application composes exactly
    with :func:`laplacian_array`.
    """
    if backend == "spectral":
        k = 2 * np.pi * np.fft.fftfreq(grid.nx, d=grid.hx)
        if not nyquist:
            k[grid.nx // 2] = 0.0
        out = np.fft.ifft(1j * k * np.fft.fft(v, axis=1), axis=1)
        return out.real if (np.isrealobj(v) and not nyquist) else out
    _check_backend(backend)
    return (np.roll(v, -1, axis=1) - np.roll(v, 1, axis=1)) / (2 * grid.hx)


def dy_array(v: np.ndarray, grid: TorusGrid, backend: str = "spectral", *, nyquist: bool = True) -> np.ndarray:
    if backend == "spectral":
        k = 2 * np.pi * np.fft.fftfreq(grid.ny, d=grid.hy)
        if not nyquist:
            k[grid.ny // 2] = 0.0
        out = np.fft.ifft(1j * k[:, None] * np.fft.fft(v, axis=0), axis=0)
        return out.real if (np.isrealobj(v) and not nyquist) else out
    _check_backend(backend)
    return (np.roll(v, -1, axis=0) - np.roll(v, 1, axis=0)) / (2 * grid.hy)


def gradient(f: RealField, backend: str = "spectral") -> tuple[RealField, RealField]:
    """Real gradient ``(f_x, f_y)``."""
    g = f.grid
    return (
        RealField(g, dx_array(f.values, g, backend, nyquist=False)),
        RealField(g, dy_array(f.values, g, backend, nyquist=False)),
    )


def inverse_helmholtz_array(v: np.ndarray, grid: TorusGrid, c: float, backend: str = "spectral") -> np.ndarray:
    """Apply ``(laplacian + c)^{-1}`` for ``c > 0`` by division in Fourier space."""
    if c <= 0:
        raise ValueError("shift must be positive")
    out = np.fft.ifft2(np.fft.fft2(v) / (grid.symbol(backend) + c))
    return out.real if np.isrealobj(v) else out


# --- public field operations ------------------------------------------------


def laplacian(f: RealField, backend: str = "spectral") -> RealField:
    """Positive-definite Laplacian ``-(f_xx + f_yy)``."""
    return RealField(f.grid, laplacian_array(f.values, f.grid, backend))


def poisson_solve(rhs: RealField, feas_tol: float | None = None, backend: str = "spectral") -> RealField:
    """Zero-mean ``g`` with ``laplacian(g) = rhs``.

    Raises :class:`NonZeroMean` when ``|mean(rhs)|`` exceeds ``feas_tol``
    (default ``1e-10 * max(1, sup|rhs|)``).
    """
    if feas_tol is None:
        feas_tol = 1e-10 * max(1.0, rhs.sup())
    m = rhs.mean()
    if abs(m) > feas_tol:
        raise NonZeroMean(f"mean(rhs) = {m:.3e} exceeds {feas_tol:.3e}")
    g = rhs.grid
    sym = g.symbol(backend).copy()
    sym[0, 0] = 1.0
    hat = np.fft.fft2(rhs.values) / sym
    hat[0, 0] = 0.0
    return RealField(g, np.fft.ifft2(hat).real)


def dbar(f: Field, backend: str = "spectral") -> ComplexField:
    """``(f_x + i f_y) / 2``, the dz-bar coefficient."""
    v = np.asarray(f.values, dtype=complex)
    g = f.grid
    return ComplexField(g, 0.5 * (dx_array(v, g, backend) + 1j * dy_array(v, g, backend)))


def pdel(f: Field, backend: str = "spectral") -> ComplexField:
    """``(f_x - i f_y) / 2``, the dz coefficient."""
    v = np.asarray(f.values, dtype=complex)
    g = f.grid
    return ComplexField(g, 0.5 * (dx_array(v, g, backend) - 1j * dy_array(v, g, backend)))


def random_smooth_field(grid: TorusGrid, rng: np.random.Generator, modes: int = 4, amplitude: float = 1.0) -> RealField:
    """Random trigonometric polynomial with ``|k|, |m| <= modes``; zero mean."""
    X, Y = grid.coords()
    v = np.zeros(grid.shape)
    for k in range(-modes, modes + 1):
        for m in range(0, modes + 1):
            if m == 0 and k <= 0:
                continue
            a, b = rng.normal(size=2) / (1 + k * k + m * m)
            phase = 2 * np.pi * (k * X / grid.lx + m * Y / grid.ly)
            v += a * np.cos(phase) + b * np.sin(phase)
    return RealField(grid, amplitude * v)
