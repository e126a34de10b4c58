"""Solver for ``laplacian(f) + B exp(2f) = w`` on the flat torus.

For ``B >= 0`` not identically zero and ``integral(w) > 0`` the solution
exists and is unique. It is the minimizer of the strictly convex energy

    E(f) = integral( 1/2 |grad f|^2 + 1/2 B exp(2f) - w f ),

whose gradient is the residual and whose Hessian ``laplacian + 2 B exp(2f)``
is symmetric positive definite. :func:`kw_solve` runs a damped Newton method
on ``E``; :func:`kw_solve_picard` is an independent fixed-point iteration used
to cross-check it.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .conventions import DEFAULT_KW_TOL
from .errors import InfeasibleProblem, MaxIterationsExceeded
from .torus import (
    RealField,
    TorusGrid,
    inverse_helmholtz_array,
    laplacian_array,
)

log = logging.getLogger(__name__)

NON_POSITIVE_MEAN_W = "NonPositiveMeanW"
DEGENERATE_B = "DegenerateB"


@dataclass(frozen=True, eq=False)
class KWProblem:
    B: RealField
    w: RealField

    def __post_init__(self):
        if self.B.grid != self.w.grid:
            raise ValueError("B and w must share a grid")
        if self.B.min() < -1e-12:
            raise ValueError(f"B must be nonnegative (min B = {self.B.min():.3e})")
        if self.B.min() < 0:
            object.__setattr__(self, "B", RealField(self.B.grid, np.maximum(self.B.values, 0.0)))

    @property
    def grid(self) -> TorusGrid:
        return self.B.grid

    def scaled(self, c2: float) -> "KWProblem":
        return KWProblem(self.B * c2, self.w)


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    reason: str | None = None
    mean_w: float = 0.0
    max_B: float = 0.0

    def __bool__(self):
        return self.feasible


@dataclass(eq=False)
class KWSolution:
    f: RealField
    residual_sup: float
    iterations: int
    method: str
    backend: str
    energy_trace: list[float] = field(default_factory=list)
    residual_trace: list[float] = field(default_factory=list)
    cross_residual_sup: float | None = None
    stagnated: bool = False

    def certificate(self) -> dict:
        return {
            "residual_sup": self.residual_sup,
            "iterations": self.iterations,
            "method": self.method,
            "backend": self.backend,
            "cross_residual_sup": self.cross_residual_sup,
            "stagnated": self.stagnated,
        }


def kw_feasibility(p: KWProblem) -> Feasibility:
    """Discrete version of the solvability hypotheses.

    ``B`` counts as positive off a null set when it exceeds
    ``1e-12 * max(1, sup|w|)`` on at least one grid cell.
    """
    scale = max(1.0, p.w.sup())
    mean_w = p.w.mean()
    max_b = p.B.max()
    # A strictly positive integral, guarded against pure roundoff.
    if not mean_w > 1e-14 * scale:
        return Feasibility(False, NON_POSITIVE_MEAN_W, mean_w, max_b)
    if not max_b > 1e-12 * scale:
        return Feasibility(False, DEGENERATE_B, mean_w, max_b)
    return Feasibility(True, None, mean_w, max_b)


def _residual(f: np.ndarray, p: KWProblem, backend: str) -> np.ndarray:
    with np.errstate(over="ignore"):
        return laplacian_array(f, p.grid, backend) + p.B.values * np.exp(2 * f) - p.w.values


def kw_residual(f: RealField, p: KWProblem, backend: str = "spectral") -> RealField:
    return RealField(p.grid, _residual(f.values, p, backend))


def _energy(f: np.ndarray, p: KWProblem, backend: str) -> float:
    g = p.grid
    with np.errstate(over="ignore"):
        dens = 0.5 * f * laplacian_array(f, g, backend) + 0.5 * p.B.values * np.exp(2 * f) - p.w.values * f
    return float(g.hx * g.hy * np.sum(dens))


def kw_energy(f: RealField, p: KWProblem, backend: str = "spectral") -> float:
    """``integral(1/2 |grad f|^2 + 1/2 B e^{2f} - w f)``.

    The Dirichlet term is evaluated as ``1/2 integral(f laplacian(f))``, which
    equals ``1/2 integral |grad f|^2`` and keeps the gradient of the discrete
    energy exactly equal to the discrete residual.
    """
    return _energy(f.values, p, backend)


def initial_guess(p: KWProblem) -> RealField:
    mean_b = p.B.mean()
    mean_w = p.w.mean()
    if mean_b > 0 and mean_w > 0:
        return RealField.constant(p.grid, 0.5 * math.log(mean_w / mean_b))
    return RealField.constant(p.grid, 0.0)


def pcg(
    apply_a: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    precond: Callable[[np.ndarray], np.ndarray],
    rtol: float = 1e-12,
    max_iter: int = 500,
) -> tuple[np.ndarray, int]:
    """Preconditioned conjugate gradients for SPD ``apply_a``; starts from 0."""
    x = np.zeros_like(b)
    r = b.copy()
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return x, 0
    z = precond(r)
    d = z.copy()
    rz = float(np.vdot(r, z).real)
    for k in range(1, max_iter + 1):
        ad = apply_a(d)
        alpha = rz / float(np.vdot(d, ad).real)
        x += alpha * d
        r -= alpha * ad
        if np.linalg.norm(r) <= rtol * bnorm:
            return x, k
        z = precond(r)
        rz_new = float(np.vdot(r, z).real)
        d = z + (rz_new / rz) * d
        rz = rz_new
    log.warning("pcg hit max_iter=%d (relative residual %.2e)", max_iter, np.linalg.norm(r) / bnorm)
    return x, max_iter


def _require_feasible(p: KWProblem) -> None:
    feas = kw_feasibility(p)
    if not feas:
        raise InfeasibleProblem(
            feas.reason, f"mean(w)={feas.mean_w:.6g}, max(B)={feas.max_B:.6g}"
        )


def _other(backend: str) -> str:
    return "stencil" if backend == "spectral" else "spectral"


def kw_solve(
    p: KWProblem,
    tol: float = DEFAULT_KW_TOL,
    max_iter: int = 50,
    backend: str = "spectral",
    f0: RealField | None = None,
) -> KWSolution:
    """Damped Newton on the convex energy with Armijo backtracking.

    Each step solves ``(laplacian + 2 B e^{2f}) delta = -residual`` by
    conjugate gradients preconditioned with ``(laplacian + mean(2 B e^{2f}))^{-1}``.
    Raises :class:`InfeasibleProblem` before iterating when the hypotheses
    fail, and :class:`MaxIterationsExceeded` (best iterate attached) when the
    residual does not reach ``tol``.
    """
    _require_feasible(p)
    g = p.grid
    f = (f0 if f0 is not None else initial_guess(p)).values.astype(float).copy()
    B = p.B.values
    dA = g.hx * g.hy
    energies: list[float] = []
    residuals: list[float] = []

    for it in range(max_iter + 1):
        res = _residual(f, p, backend)
        E = _energy(f, p, backend)
        res_sup = float(np.max(np.abs(res))) if np.all(np.isfinite(res)) else math.inf
        energies.append(E)
        residuals.append(res_sup)
        log.debug("newton it=%d E=%.16e |F|=%.3e", it, E, res_sup)
        if res_sup <= tol:
            return _finish(f, p, res_sup, it, "newton", backend, energies, residuals)
        if _stagnated(residuals, tol):
            sol = _finish(f, p, res_sup, it, "newton", backend, energies, residuals)
            sol.stagnated = True
            return sol
        if it == max_iter:
            break

        D = 2 * B * np.exp(2 * f)
        shift = float(np.mean(D))
        delta, _ = pcg(
            lambda v: laplacian_array(v, g, backend) + D * v,
            -res,
            lambda v: inverse_helmholtz_array(v, g, shift, backend),
            rtol=1e-12,
        )
        slope = float(np.sum(res * delta)) * dA
        t = 1.0
        while True:
            trial = f + t * delta
            E_trial = _energy(trial, p, backend)
            # Below ~roundoff in E the Armijo test is meaningless: take the step.
            if abs(slope) * t <= 1e-13 * max(1.0, abs(E)):
                break
            if math.isfinite(E_trial) and E_trial <= E + 1e-4 * t * slope:
                break
            t *= 0.5
            if t < 1e-12:
                raise MaxIterationsExceeded(
                    "line search failed", best=_partial(f, p, res_sup, it, backend, energies, residuals)
                )
        f = trial

    raise MaxIterationsExceeded(
        f"Newton did not reach tol={tol:g} in {max_iter} iterations (residual {residuals[-1]:.3e})",
        best=_partial(f, p, residuals[-1], max_iter, backend, energies, residuals),
    )


def kw_solve_picard(
    p: KWProblem,
    tol: float = DEFAULT_KW_TOL,
    max_iter: int = 5000,
    theta: float = 1.0,
    backend: str = "spectral",
    f0: RealField | None = None,
) -> KWSolution:
    """Damped fixed-point iteration ``f += theta (laplacian + c)^{-1} (w - B e^{2f} - laplacian f)``.

    ``c = 2 max(B e^{2f})`` is refreshed every sweep.
    """
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    _require_feasible(p)
    g = p.grid
    f = (f0 if f0 is not None else initial_guess(p)).values.astype(float).copy()
    residuals: list[float] = []
    for it in range(max_iter + 1):
        res = _residual(f, p, backend)
        res_sup = float(np.max(np.abs(res)))
        residuals.append(res_sup)
        if res_sup <= tol:
            return _finish(f, p, res_sup, it, "picard", backend, [], residuals)
        if it == max_iter:
            break
        c = 2 * float(np.max(p.B.values * np.exp(2 * f)))
        f = f - theta * inverse_helmholtz_array(res, g, c, backend)
    raise MaxIterationsExceeded(
        f"Picard did not reach tol={tol:g} in {max_iter} sweeps (residual {residuals[-1]:.3e})",
        best=_partial(f, p, residuals[-1], max_iter, backend, [], residuals, "picard"),
    )


def _stagnated(residuals: list[float], tol: float) -> bool:
    """Residual within 100 tol and no longer decreasing: FFT roundoff floor.

    The spectral Laplacian amplifies roundoff by the largest squared
    wavenumber, so on fine grids with large ``|f|`` the attainable residual
    can sit slightly above very small tolerances.
    """
    if len(residuals) < 4 or residuals[-1] > 100 * tol:
        return False
    return min(residuals[-3:]) > 0.5 * min(residuals[:-3])


def _partial(f, p, res_sup, it, backend, energies, residuals, method="newton") -> KWSolution:
    return KWSolution(RealField(p.grid, f), res_sup, it, method, backend, list(energies), list(residuals))


def _finish(f, p, res_sup, it, method, backend, energies, residuals) -> KWSolution:
    sol = _partial(f, p, res_sup, it, backend, energies, residuals, method)
    sol.cross_residual_sup = float(np.max(np.abs(_residual(f, p, _other(backend)))))
    return sol
