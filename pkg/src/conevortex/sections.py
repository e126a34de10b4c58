"""Line bundles, theta sections and divisors on the flat torus.

A degree-``d`` bundle is realized in a fixed trivialization over the sampling
window. Section values are stored in the holomorphic frame; the fiber metric
is ``exp(metric_weight)`` with ``metric_weight = -a y'^2`` where
``a = 2 pi d / vol`` and ``(x', y') = (x - x0, y - y0)`` are coordinates
relative to the bundle origin. Multiplying by ``exp(metric_weight / 2)``
gives the unitary-frame value ``phi``, which satisfies

    phi(x + lx, y) = phi(x, y),
    phi(x, y + ly) = exp(-2 pi i d x' / lx) phi(x, y).

In the unitary frame the background (Chern) connection is ``d + i a y' dx``
with constant curvature scalar ``a``. A :class:`UnitaryConnection` stores the
periodic correction ``(a_x, a_y)`` on top of that background.

Covariant x-derivatives are taken on ``phi`` (periodic in x). Covariant
y-derivatives are taken after the gauge change ``phi -> exp(i a x' y') phi``,
which is periodic in y, so both directions admit FFT differentiation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BundleMismatch, EdgeZero, NonIntegralDegree, NotHolomorphic
from .torus import ComplexField, RealField, TorusGrid, dx_array, dy_array, integrate

# Bundle origin as fractions of the periods. Chosen so that the zeros of the
# theta basis avoid grid lines for the usual power-of-two resolutions.
DEFAULT_ORIGIN = (0.0123, 0.0371)


@dataclass(frozen=True)
class LineBundle:
    degree: int
    grid: TorusGrid
    origin: tuple[float, float] = DEFAULT_ORIGIN

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 1:
            raise ValueError("degree must be a positive integer")
        object.__setattr__(self, "degree", int(self.degree))
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def a(self) -> float:
        """Background curvature density ``2 pi d / vol``."""
        return 2 * math.pi * self.degree / self.grid.vol

    def local_coords(self, X=None, Y=None) -> tuple[np.ndarray, np.ndarray]:
        if X is None:
            X, Y = self.grid.coords()
        return X - self.origin[0] * self.grid.lx, Y - self.origin[1] * self.grid.ly

    @property
    def metric_weight(self) -> RealField:
        _, Yp = self.local_coords()
        return RealField(self.grid, -self.a * Yp**2)

    def y_transition(self, X=None) -> np.ndarray:
        """Unitary-frame factor relating ``phi(x, y + ly)`` to ``phi(x, y)``."""
        if X is None:
            X = np.arange(self.grid.nx) * self.grid.hx
        xp = X - self.origin[0] * self.grid.lx
        return np.exp(-2j * math.pi * self.degree * xp / self.grid.lx)

    def tensor(self, other: "LineBundle") -> "LineBundle":
        if other.grid != self.grid or other.origin != self.origin:
            raise BundleMismatch("bundles must share grid and origin")
        return LineBundle(self.degree + other.degree, self.grid, self.origin)

    def to_dict(self) -> dict:
        g = self.grid
        return {
            "degree": self.degree,
            "metric": "gaussian-y",
            "periods": [g.lx, g.ly],
            "grid": g.to_dict(),
            "origin": list(self.origin),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LineBundle":
        g = d["grid"]
        return cls(d["degree"], TorusGrid(g["nx"], g["ny"], g["lx"], g["ly"]), tuple(d["origin"]))


@dataclass(frozen=True, eq=False)
class ComplexSection:
    bundle: LineBundle
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=complex, copy=True)
        if v.shape != self.bundle.grid.shape:
            raise ValueError("section shape does not match grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("section contains non-finite values")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_unitary(cls, bundle: LineBundle, phi: np.ndarray) -> "ComplexSection":
        return cls(bundle, phi * np.exp(-0.5 * bundle.metric_weight.values))

    @property
    def grid(self) -> TorusGrid:
        return self.bundle.grid

    def unitary(self) -> np.ndarray:
        return self.values * np.exp(0.5 * self.bundle.metric_weight.values)

    def pointwise_norm2(self) -> RealField:
        return RealField(self.grid, np.abs(self.unitary()) ** 2)

    def scale(self, c) -> "ComplexSection":
        """Multiply by a complex constant or by a (real or complex) field/array."""
        if isinstance(c, (RealField, ComplexField)):
            c = c.values
        return ComplexSection(self.bundle, self.values * c)

    def __add__(self, other: "ComplexSection") -> "ComplexSection":
        if other.bundle != self.bundle:
            raise BundleMismatch("sections live on different bundles")
        return ComplexSection(self.bundle, self.values + other.values)

    def __mul__(self, other: "ComplexSection") -> "ComplexSection":
        """Tensor product of sections (degrees add)."""
        return ComplexSection(self.bundle.tensor(other.bundle), self.values * other.values)


@dataclass(frozen=True, eq=False)
class UnitaryConnection:
    """Background Chern connection of ``bundle`` plus ``i (a_x dx + a_y dy)``.

    ``a_x`` and ``a_y`` are periodic; ``curvature`` is the scalar
    ``i Lambda F_A``.
    """

    bundle: LineBundle
    a_x: RealField
    a_y: RealField
    curvature: RealField

    @classmethod
    def from_potential(cls, bundle: LineBundle, a_x: RealField, a_y: RealField) -> "UnitaryConnection":
        g = bundle.grid
        curl = dy_array(a_x.values, g, nyquist=False) - dx_array(a_y.values, g, nyquist=False)
        return cls(bundle, a_x, a_y, RealField(g, bundle.a + curl))

    def curvature_scalar(self, backend: str = "spectral") -> RealField:
        if backend == "spectral":
            return self.curvature
        g = self.bundle.grid
        curl = dy_array(self.a_x.values, g, backend) - dx_array(self.a_y.values, g, backend)
        return RealField(g, self.bundle.a + curl)

    def gauge(self, chi: RealField) -> "UnitaryConnection":
        """Connection seen by ``exp(i chi) s``: ``a -> a - d chi``."""
        g = self.bundle.grid
        cx = dx_array(chi.values, g, nyquist=False)
        cy = dy_array(chi.values, g, nyquist=False)
        return UnitaryConnection(self.bundle, self.a_x - cx, self.a_y - cy, self.curvature)


def background_connection(d: int | LineBundle, grid: TorusGrid | None = None) -> UnitaryConnection:
    bundle = d if isinstance(d, LineBundle) else LineBundle(d, grid)
    zero = RealField.constant(bundle.grid, 0.0)
    return UnitaryConnection(bundle, zero, zero, RealField.constant(bundle.grid, bundle.a))


# --- theta sections ---------------------------------------------------------


def theta_unitary(bundle: LineBundle, j: int, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Unitary-frame value of the j-th theta section at arbitrary points.

    ``phi_j = sum_{N = j mod d} exp(-pi (N ly + d y')^2 / (d lx ly)) exp(2 pi i N x' / lx)``;
    terms below ``exp(-40)`` (relative to the leading term) are dropped.
    """
    d = bundle.degree
    g = bundle.grid
    Xp, Yp = bundle.local_coords(np.asarray(X, float), np.asarray(Y, float))
    width = math.sqrt(40.0 * d * g.lx * g.ly / math.pi)
    n_lo = math.floor((-d * Yp.max() - width) / g.ly) - 1
    n_hi = math.ceil((-d * Yp.min() + width) / g.ly) + 1
    out = np.zeros(np.broadcast(Xp, Yp).shape, dtype=complex)
    for N in range(n_lo, n_hi + 1):
        if N % d != j % d:
            continue
        gauss = np.exp(-math.pi * (N * g.ly + d * Yp) ** 2 / (d * g.lx * g.ly))
        out += gauss * np.exp(2j * math.pi * N * Xp / g.lx)
    return out


def theta_basis(d: int, grid: TorusGrid, origin: tuple[float, float] = DEFAULT_ORIGIN) -> list[ComplexSection]:
    bundle = LineBundle(d, grid, origin)
    X, Y = grid.coords()
    return [ComplexSection.from_unitary(bundle, theta_unitary(bundle, j, X, Y)) for j in range(d)]


def section_from_coeffs(coeffs, d: int, grid: TorusGrid, origin: tuple[float, float] = DEFAULT_ORIGIN) -> ComplexSection:
    coeffs = np.asarray(coeffs, dtype=complex).ravel()
    if coeffs.size != d:
        raise ValueError(f"need {d} coefficients, got {coeffs.size}")
    basis = theta_basis(d, grid, origin)
    values = sum(c * s.values for c, s in zip(coeffs, basis))
    return ComplexSection(basis[0].bundle, values)


def quasi_periodicity_defect(bundle: LineBundle, j: int) -> float:
    """Relative sup mismatch of the j-th theta section across both cuts."""
    g = bundle.grid
    x = np.arange(g.nx) * g.hx
    y = np.arange(g.ny) * g.hy
    bottom = theta_unitary(bundle, j, x, np.zeros_like(x))
    top = theta_unitary(bundle, j, x, np.full_like(x, g.ly))
    left = theta_unitary(bundle, j, np.zeros_like(y), y)
    right = theta_unitary(bundle, j, np.full_like(y, g.lx), y)
    scale = max(np.abs(bottom).max(), np.abs(left).max())
    dy_defect = np.abs(top - bundle.y_transition(x) * bottom).max()
    dx_defect = np.abs(right - left).max()
    return float(max(dy_defect, dx_defect) / scale)


def gram_matrix(sections: list[ComplexSection]) -> np.ndarray:
    """L^2 pairing ``integral(phi_i conj(phi_j))`` with the bundle metric."""
    g = sections[0].grid
    phis = [s.unitary() for s in sections]
    return np.array([[g.hx * g.hy * np.sum(p * np.conj(q)) for q in phis] for p in phis])


# --- covariant derivatives --------------------------------------------------


def covariant_derivatives(phi: np.ndarray, A: UnitaryConnection, backend: str = "spectral") -> tuple[np.ndarray, np.ndarray]:
    """``(D_x phi, D_y phi)`` for a unitary-frame array ``phi``."""
    b = A.bundle
    g = b.grid
    Xp, Yp = b.local_coords()
    dxphi = dx_array(phi, g, backend)
    landau = np.exp(1j * b.a * Xp * Yp)
    dyphi = np.conj(landau) * dy_array(landau * phi, g, backend) - 1j * b.a * Xp * phi
    Dx = dxphi + 1j * (b.a * Yp + A.a_x.values) * phi
    Dy = dyphi + 1j * A.a_y.values * phi
    return Dx, Dy


def dbar_A_unitary(phi: np.ndarray, A: UnitaryConnection, backend: str = "spectral") -> np.ndarray:
    Dx, Dy = covariant_derivatives(phi, A, backend)
    return 0.5 * (Dx + 1j * Dy)


def dbar_A(s: ComplexSection, A: UnitaryConnection, backend: str = "spectral") -> ComplexSection:
    """dz-bar component of ``D_A s``, returned in the storage frame of ``s``."""
    if s.bundle != A.bundle:
        raise BundleMismatch("section and connection live on different bundles")
    return ComplexSection.from_unitary(s.bundle, dbar_A_unitary(s.unitary(), A, backend))


def dbar_residual(s: ComplexSection, A: UnitaryConnection, backend: str = "spectral") -> float:
    """``sup |dbar_A s|`` measured in the bundle metric."""
    if s.bundle != A.bundle:
        raise BundleMismatch("section and connection live on different bundles")
    return float(np.abs(dbar_A_unitary(s.unitary(), A, backend)).max())


def degree(A: UnitaryConnection, tol: float = 1e-6) -> int:
    q = integrate(A.curvature) / (2 * math.pi)
    k = round(q)
    if abs(q - k) > tol:
        raise NonIntegralDegree(f"(1/2pi) * integral of curvature = {q!r}")
    return int(k)


# --- divisors ---------------------------------------------------------------


@dataclass(frozen=True)
class Divisor:
    points: tuple[tuple[float, float], ...]
    multiplicities: tuple[int, ...]

    def __post_init__(self):
        if len(self.points) != len(self.multiplicities):
            raise ValueError("points and multiplicities differ in length")
        if any(m <= 0 for m in self.multiplicities):
            raise ValueError("effective divisors have positive multiplicities")

    @property
    def degree(self) -> int:
        return int(sum(self.multiplicities))

    def to_dict(self) -> dict:
        return {
            "points": [[float(x), float(y)] for x, y in self.points],
            "multiplicities": [int(m) for m in self.multiplicities],
            "degree": self.degree,
        }


def _extended_phases(phi: np.ndarray, bundle: LineBundle) -> np.ndarray:
    ny, nx = phi.shape
    ext = np.empty((ny + 1, nx + 1), dtype=complex)
    ext[:ny, :nx] = phi
    ext[ny, :nx] = bundle.y_transition() * phi[0, :]
    ext[:, nx] = ext[:, 0]
    return ext


def plaquette_windings(s: ComplexSection, edge_tol: float = 1e-9) -> np.ndarray:
    """Integer winding of ``arg s`` around every plaquette, shape ``(ny, nx)``.

    Plaquette ``(iy, ix)`` has lower-left corner at sample ``(ix, iy)``.
    """
    phi = s.unitary()
    mag = np.abs(phi)
    if mag.min() <= edge_tol * mag.max():
        iy, ix = np.unravel_index(np.argmin(mag), mag.shape)
        raise EdgeZero(f"section (numerically) vanishes at grid vertex ({ix}, {iy})")
    e = _extended_phases(phi, s.bundle)
    right = np.angle(e[:-1, 1:] * np.conj(e[:-1, :-1]))  # bottom edge, left -> right
    up = np.angle(e[1:, :] * np.conj(e[:-1, :]))  # vertical edges, upward
    top = np.angle(e[1:, 1:] * np.conj(e[1:, :-1]))
    limit = math.pi * (1 - 1e-9)
    if max(np.abs(right).max(), np.abs(up).max(), np.abs(top).max()) > limit:
        raise EdgeZero("phase jump of pi across an edge: a zero sits on a grid edge")
    total = right + up[:, 1:] - top - up[:, :-1]
    w = total / (2 * math.pi)
    wi = np.rint(w)
    if np.abs(w - wi).max() > 1e-6:
        raise EdgeZero("non-integral plaquette winding")
    return wi.astype(int)


def _refine(e: np.ndarray, iy: int, ix: int) -> tuple[float, float] | None:
    """Zero of the bilinear interpolant on one plaquette, in cell units."""
    c00, c10, c01, c11 = e[iy, ix], e[iy, ix + 1], e[iy + 1, ix], e[iy + 1, ix + 1]
    xi = eta = 0.5
    for _ in range(20):
        val = c00 * (1 - xi) * (1 - eta) + c10 * xi * (1 - eta) + c01 * (1 - xi) * eta + c11 * xi * eta
        dxi = (c10 - c00) * (1 - eta) + (c11 - c01) * eta
        deta = (c01 - c00) * (1 - xi) + (c11 - c10) * xi
        J = np.array([[dxi.real, deta.real], [dxi.imag, deta.imag]])
        try:
            step = np.linalg.solve(J, [-val.real, -val.imag])
        except np.linalg.LinAlgError:
            return None
        xi += step[0]
        eta += step[1]
        if abs(step[0]) + abs(step[1]) < 1e-12:
            break
    if -0.5 <= xi <= 1.5 and -0.5 <= eta <= 1.5:
        return xi, eta
    return None


def divisor_extract(s: ComplexSection, edge_tol: float = 1e-9, refine: bool = True) -> Divisor:
    """Zeros of ``s`` with multiplicities, from plaquette winding numbers.

    Points are plaquette centers, moved to the zero of the local bilinear
    interpolant when that zero lies near the plaquette.
    """
    w = plaquette_windings(s, edge_tol)
    if (w < 0).any():
        raise NotHolomorphic("negative winding: section is not holomorphic")
    return divisor_from_windings(s, w, refine)


def divisor_from_windings(s: ComplexSection, w: np.ndarray, refine: bool = True) -> Divisor:
    g = s.grid
    e = _extended_phases(s.unitary(), s.bundle)
    points, mults = [], []
    for iy, ix in zip(*np.nonzero(w)):
        xi, eta = 0.5, 0.5
        if refine and w[iy, ix] == 1:
            loc = _refine(e, iy, ix)
            if loc is not None:
                xi, eta = loc
        points.append((((ix + xi) * g.hx) % g.lx, ((iy + eta) * g.hy) % g.ly))
        mults.append(int(w[iy, ix]))
    return Divisor(tuple(points), tuple(mults))


def torus_distance(p: tuple[float, float], q: tuple[float, float], grid: TorusGrid) -> float:
    dx = (p[0] - q[0] + grid.lx / 2) % grid.lx - grid.lx / 2
    dy = (p[1] - q[1] + grid.ly / 2) % grid.ly - grid.ly / 2
    return math.hypot(dx, dy)
