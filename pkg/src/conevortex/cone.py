"""Kähler cone over the Sasakian sphere S^{2n-1}, i.e. C^n minus the origin.

The circle acts with integer weights. The generator is oriented so that the
all-ones action has fundamental field equal to the Reeb field ``-i p``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

HOMOGENEITY_TOL = 1e-12


@dataclass(frozen=True)
class WeightedCircleAction:
    weights: tuple[int, ...]

    def __post_init__(self):
        w = tuple(int(x) for x in self.weights)
        if len(w) < 1:
            raise ValueError("need at least one weight")
        if any(x == 0 for x in w) or any(int(x) != x for x in self.weights):
            raise ValueError("weights must be nonzero integers")
        object.__setattr__(self, "weights", w)

    @classmethod
    def reeb(cls, n: int) -> "WeightedCircleAction":
        return cls((1,) * n)

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def is_reeb(self) -> bool:
        return all(w == 1 for w in self.weights)

    def w(self) -> np.ndarray:
        return np.array(self.weights, dtype=float)

    def fundamental_field(self, p: "ConePoint") -> np.ndarray:
        return -1j * self.w() * p.z

    def act(self, t: float, p: "ConePoint") -> "ConePoint":
        """The unitary circle action ``z_k -> exp(i w_k t) z_k``."""
        return ConePoint(np.exp(1j * self.w() * t) * p.z)


@dataclass(frozen=True, eq=False)
class ConePoint:
    z: np.ndarray

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.z, dtype=complex)).copy()
        if z.ndim != 1:
            raise ValueError("a cone point is a vector in C^n")
        if not np.all(np.isfinite(z)) or not np.any(z != 0):
            raise ValueError("cone points must be finite and exclude the apex")
        z.flags.writeable = False
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return self.z.size

    @property
    def r(self) -> float:
        return float(np.linalg.norm(self.z))

    @property
    def s(self) -> np.ndarray:
        return self.z / self.r


def reeb_field(p: ConePoint) -> np.ndarray:
    return -1j * p.s


def contact_form(s: np.ndarray, v: np.ndarray) -> float:
    """Contact form at ``s`` applied to ``v``: the metric dual of ``-i s``.

    In real coordinates this is ``sum(y_k dx_k - x_k dy_k)``.
    """
    return float(np.real(np.vdot(-1j * s, v)))


def sasakian_moment(action: WeightedCircleAction, p: ConePoint) -> float:
    s = p.s
    _check_dim(action, p)
    return contact_form(s, -1j * action.w() * s)


def kahler_potential(p: ConePoint) -> float:
    return 0.5 * p.r**2


def cone_moment(action: WeightedCircleAction, p: ConePoint) -> float:
    _check_dim(action, p)
    return kahler_potential(p) * sasakian_moment(action, p)


def cone_moment_direct(action: WeightedCircleAction, z: np.ndarray) -> float:
    """``1/2 sum w_k |z_k|^2`` without normalization; valid at the apex too."""
    return 0.5 * float(np.sum(action.w() * np.abs(np.asarray(z)) ** 2))


def flat_kahler_form(u: np.ndarray, v: np.ndarray) -> float:
    """``omega_0(u, v) = sum(du_x dv_y - du_y dv_x) = Im(conj(u) . v)``."""
    return float(np.imag(np.vdot(u, v)))


def complex_gauge_flow(action: WeightedCircleAction, f: float, p: ConePoint) -> ConePoint:
    _check_dim(action, p)
    return ConePoint(np.exp(action.w() * f) * p.z)


def homogeneity_check(action: WeightedCircleAction, samples: Iterable[tuple[float, ConePoint]]) -> dict:
    """Largest relative gap in ``mu(e^f p) = e^{2f} mu(p)`` over the samples."""
    gap = 0.0
    count = 0
    for f, p in samples:
        lhs = cone_moment(action, complex_gauge_flow(action, f, p))
        rhs = np.exp(2 * f) * cone_moment(action, p)
        gap = max(gap, abs(lhs - rhs) / max(1.0, abs(rhs)))
        count += 1
    return {
        "n": action.n,
        "weights": list(action.weights),
        "samples": count,
        "max_gap": gap,
        "verdict": "PASS" if gap <= HOMOGENEITY_TOL else "FAIL",
    }


def moment_identity_gap(action: WeightedCircleAction, p: ConePoint, v: np.ndarray, step: float = 1e-4) -> float:
    """``|d mu(v) - omega_0(K, v)|`` with a central difference for ``d mu``."""
    v = np.asarray(v, dtype=complex)
    mu_plus = cone_moment_direct(action, p.z + step * v)
    mu_minus = cone_moment_direct(action, p.z - step * v)
    dmu = (mu_plus - mu_minus) / (2 * step)
    return abs(dmu - flat_kahler_form(action.fundamental_field(p), v))


def _check_dim(action: WeightedCircleAction, p: ConePoint) -> None:
    if action.n != p.n:
        raise ValueError(f"action has {action.n} weights but point lives in C^{p.n}")


def random_points(rng: np.random.Generator, n: int, count: int) -> list[ConePoint]:
    pts = rng.normal(size=(count, n)) + 1j * rng.normal(size=(count, n))
    return [ConePoint(z) for z in pts]


def weights_of(ws: Sequence[int] | WeightedCircleAction) -> WeightedCircleAction:
    return ws if isinstance(ws, WeightedCircleAction) else WeightedCircleAction(tuple(ws))
