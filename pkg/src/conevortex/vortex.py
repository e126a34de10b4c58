"""Symplectic vortices into C^n (the cone over S^{2n-1}) and tau-vortices.

Master sign convention: with real ``tau`` the moment equation reads
``i Lambda F_A = tau - mu(u)``, where ``mu(u) = 1/2 sum_k |u_k|^2``.

The construction of solutions is a single complex gauge transformation: for a
holomorphic pair ``(u0, A0)`` with ``mu(u0)`` not identically zero, solving

    laplacian(f) + mu(u0) exp(2f) = tau - i Lambda F_{A0}

and applying ``exp(f)`` yields a solution, provided ``tau`` exceeds
``2 pi deg / vol``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .cone import WeightedCircleAction
from .conventions import DEFAULT_KW_TOL, DEFAULT_KW_TOL_STENCIL, THRESHOLD_MARGIN_REL
from .errors import (
    BelowThreshold,
    BundleMismatch,
    ConnectionMismatch,
    InfeasibleProblem,
    NonReebAction,
    NotCertified,
    NotHolomorphic,
    Unstable,
    ZeroSection,
)
from .kazdan_warner import KWProblem, KWSolution, kw_solve
from .sections import (
    ComplexSection,
    Divisor,
    UnitaryConnection,
    background_connection,
    covariant_derivatives,
    dbar_A_unitary,
    dbar_residual,
    degree,
    divisor_extract,
    divisor_from_windings,
    plaquette_windings,
    section_from_coeffs,
    DEFAULT_ORIGIN,
)
from .torus import RealField, TorusGrid, dx_array, dy_array, integrate, laplacian

log = logging.getLogger(__name__)

CERT_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Configuration:
    u: tuple[ComplexSection, ...]
    A: UnitaryConnection
    tau: float

    def __post_init__(self):
        u = tuple(self.u)
        if not u:
            raise ValueError("a configuration needs at least one component")
        for s in u:
            if s.bundle != self.A.bundle:
                raise BundleMismatch("all components must live on the connection's bundle")
        if not math.isfinite(self.tau):
            raise ValueError("tau must be finite")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "tau", float(self.tau))

    @property
    def n(self) -> int:
        return len(self.u)

    @property
    def grid(self) -> TorusGrid:
        return self.A.bundle.grid

    def unitary_gauge(self, phase: complex) -> "Configuration":
        """Constant unitary gauge transformation."""
        if not math.isclose(abs(phase), 1.0, rel_tol=1e-14):
            raise ValueError("a unitary gauge has modulus 1")
        return Configuration(tuple(s.scale(phase) for s in self.u), self.A, self.tau)


@dataclass(frozen=True)
class SVResidual:
    dbar_sup: float
    moment_sup: float
    f02_sup: float = 0.0  # F^{0,2} vanishes identically over a Riemann surface.

    def within(self, tol: float = CERT_TOL) -> bool:
        return self.dbar_sup <= tol and self.moment_sup <= tol

    def to_dict(self) -> dict:
        return {"dbar_sup": self.dbar_sup, "moment_sup": self.moment_sup, "f02_sup": self.f02_sup}


def threshold(A: UnitaryConnection) -> float:
    """``2 pi deg / vol``, the existence threshold for tau."""
    return 2 * math.pi * degree(A) / A.bundle.grid.vol


def check_threshold(tau: float, A: UnitaryConnection) -> float:
    """Return the margin ``tau - threshold``; raise if it is numerically void."""
    thr = threshold(A)
    margin = tau - thr
    if margin < THRESHOLD_MARGIN_REL * max(1.0, abs(tau)):
        raise BelowThreshold(tau, thr)
    return margin


def mu_of(u, action: WeightedCircleAction | None = None) -> RealField:
    """``1/2 sum_k |u_k|^2`` in the bundle metric.

    Only the all-weights-one action is supported: for other weights the
    homogeneity ``mu(e^f u) = e^{2f} mu(u)`` fails and the reduction to a
    scalar equation is unavailable.
    """
    u = tuple(u)
    if action is not None and (not action.is_reeb or action.n != len(u)):
        raise NonReebAction(f"weights {action.weights} do not give the Reeb action on C^{len(u)}")
    g = u[0].grid
    total = np.zeros(g.shape)
    for s in u:
        total += np.abs(s.unitary()) ** 2
    return RealField(g, 0.5 * total)


def sv_residual(cfg: Configuration, backend: str = "spectral") -> SVResidual:
    dbar_sup = max(dbar_residual(s, cfg.A, backend) for s in cfg.u)
    moment = cfg.A.curvature_scalar(backend).values - cfg.tau + mu_of(cfg.u).values
    return SVResidual(dbar_sup, float(np.abs(moment).max()), 0.0)


def apply_complex_gauge(f: RealField, cfg: Configuration, backend: str = "spectral") -> Configuration:
    """Act by ``exp(f)`` for real ``f``.

    Sections are multiplied by ``exp(f)``; the connection gains the real
    1-form ``(-f_y, f_x)`` and its curvature scalar gains ``laplacian(f)``.
    """
    g = cfg.grid
    e = np.exp(f.values)
    fx = dx_array(f.values, g, backend, nyquist=False)
    fy = dy_array(f.values, g, backend, nyquist=False)
    A = cfg.A
    A_new = UnitaryConnection(
        A.bundle,
        A.a_x - fy,
        A.a_y + fx,
        A.curvature + laplacian(f, backend),
    )
    return Configuration(tuple(s.scale(e) for s in cfg.u), A_new, cfg.tau)


@dataclass(eq=False)
class GaugeFixResult:
    cfg: Configuration
    f: RealField
    kw: KWSolution
    residual: SVResidual
    input_dbar_sup: float
    threshold_margin: float
    certified: bool

    def certificate(self) -> dict:
        return {
            **self.residual.to_dict(),
            "kw_iterations": self.kw.iterations,
            "kw_residual_sup": self.kw.residual_sup,
            "threshold_margin": self.threshold_margin,
            "input_dbar_sup": self.input_dbar_sup,
            "certified": self.certified,
        }


def hk_gauge_fix(
    u0,
    A0: UnitaryConnection,
    tau: float,
    *,
    tol: float | None = None,
    holo_tol: float = 1e-6,
    backend: str = "spectral",
    max_iter: int = 50,
    action: WeightedCircleAction | None = None,
) -> GaugeFixResult:
    """Move a holomorphic pair onto the solution set by a real complex gauge.

    Raises :class:`BelowThreshold` when ``tau`` does not exceed
    ``2 pi deg / vol`` (then the mean of ``w`` is not positive),
    :class:`Unstable` when ``mu(u0)`` vanishes identically and
    :class:`NotHolomorphic` when some component fails ``dbar_A u = 0``.
    """
    u0 = tuple(u0)
    if tol is None:
        tol = DEFAULT_KW_TOL if backend == "spectral" else DEFAULT_KW_TOL_STENCIL
    cfg0 = Configuration(u0, A0, tau)
    margin = check_threshold(tau, A0)

    in_dbar = 0.0
    for k, s in enumerate(u0):
        r = dbar_residual(s, A0)
        scale = max(1.0, float(np.abs(s.unitary()).max()))
        if r > holo_tol * scale:
            raise NotHolomorphic(f"component {k}: sup|dbar_A u| = {r:.3e}")
        in_dbar = max(in_dbar, r)

    B = mu_of(u0, action)
    if B.max() <= 0.0:
        raise Unstable("mu(u0) vanishes identically")
    w = tau - A0.curvature
    problem = KWProblem(B, w)
    try:
        kw = kw_solve(problem, tol=tol, max_iter=max_iter, backend=backend)
    except InfeasibleProblem as exc:
        if exc.reason == "NonPositiveMeanW":
            raise BelowThreshold(tau, threshold(A0)) from exc
        raise
    cfg = apply_complex_gauge(kw.f, cfg0, backend)
    res = sv_residual(cfg, backend)
    certified = res.moment_sup <= (CERT_TOL if backend == "spectral" else 1e3 * tol) and res.dbar_sup <= max(
        10 * in_dbar, CERT_TOL
    )
    return GaugeFixResult(cfg, kw.f, kw, res, in_dbar, margin, certified)


@dataclass(eq=False)
class TauVortex:
    phi: ComplexSection
    A: UnitaryConnection
    tau: float
    phi0: ComplexSection
    gauge_fix: GaugeFixResult

    @property
    def cfg(self) -> Configuration:
        return self.gauge_fix.cfg

    def integral_identity(self) -> dict:
        """Compare ``integral |phi|^2`` with ``2 (tau vol - 2 pi d)``."""
        g = self.phi.grid
        measured = integrate(self.phi.pointwise_norm2())
        predicted = 2 * (self.tau * g.vol - 2 * math.pi * self.phi.bundle.degree)
        return {
            "integral_phi2": measured,
            "predicted": predicted,
            "rel_err": abs(measured - predicted) / abs(predicted),
        }


def tau_vortex_solve(
    coeffs,
    d: int,
    tau: float,
    grid: TorusGrid,
    *,
    origin: tuple[float, float] = DEFAULT_ORIGIN,
    tol: float | None = None,
    backend: str = "spectral",
) -> TauVortex:
    """tau-vortex with zero divisor of ``sum coeffs_j theta_j`` on a degree-d bundle."""
    coeffs = np.asarray(coeffs, dtype=complex).ravel()
    if not np.any(coeffs != 0):
        raise ZeroSection("all theta coefficients vanish")
    phi0 = section_from_coeffs(coeffs, d, grid, origin)
    A0 = background_connection(phi0.bundle)
    res = hk_gauge_fix((phi0,), A0, tau, tol=tol, backend=backend)
    return TauVortex(res.cfg.u[0], res.cfg.A, float(tau), phi0, res)


def _same_connection(A: UnitaryConnection, B: UnitaryConnection, tol: float = 1e-12) -> bool:
    if A is B:
        return True
    if A.bundle != B.bundle:
        return False
    return all(
        np.allclose(p.values, q.values, rtol=0, atol=tol * max(1.0, p.sup()))
        for p, q in ((A.a_x, B.a_x), (A.a_y, B.a_y), (A.curvature, B.curvature))
    )


def correspondence_check(cfg: Configuration, phi: ComplexSection, A: UnitaryConnection | None = None) -> dict:
    """Diagnostics for the pointwise identity ``mu(u) = |phi|^2 / 2``.

    The real pairing is normalized as ``<a, b>_R = 2 Re(conj(a) b)`` so that
    ``d(|phi|^2 / 2) = <phi, D_A phi>_R / 2``.
    """
    if A is None:
        A = cfg.A
    if phi.bundle != A.bundle or not _same_connection(cfg.A, A):
        raise ConnectionMismatch("the symplectic vortex and the tau-vortex must share A")
    g = cfg.grid
    mu = mu_of(cfg.u).values
    p = phi.unitary()
    half_phi2 = 0.5 * np.abs(p) ** 2
    Dx, Dy = covariant_derivatives(p, A)
    pair_x = np.real(np.conj(p) * Dx)
    pair_y = np.real(np.conj(p) * Dy)
    dmu_x = dx_array(mu, g, nyquist=False)
    dmu_y = dy_array(mu, g, nyquist=False)
    holo = 2 * np.real(np.conj(p) * dbar_A_unitary(p, A))
    return {
        "mu_vs_half_phi2": float(np.abs(mu - half_phi2).max()),
        "mu_vs_tau_minus_curvature": float(np.abs(mu - (cfg.tau - A.curvature.values)).max()),
        "dmu_vs_pairing": float(max(np.abs(dmu_x - pair_x).max(), np.abs(dmu_y - pair_y).max())),
        "phi_dbar_pairing": float(np.abs(holo).max()),
    }


@dataclass(eq=False)
class PiResult:
    modulus_sq: RealField
    divisor: Divisor | None
    min_mu: float
    max_mu: float
    n: int

    @property
    def has_divisor(self) -> bool:
        return self.divisor is not None

    def to_dict(self) -> dict:
        if self.divisor is not None:
            return {"kind": "divisor", "n": self.n, **self.divisor.to_dict(), "min_mu": self.min_mu}
        return {
            "kind": "NoDivisor",
            "n": self.n,
            "min_mu": self.min_mu,
            "max_mu": self.max_mu,
            "note": "mu(u) has no zeros: the components of u have no common zero",
        }


def pi_map(cfg: Configuration, *, tol: float = CERT_TOL, check: bool = True) -> PiResult:
    """Image of a solution under the moduli map: ``|phi|^2 = 2 mu(u)`` and its zeros.

    For ``n = 1`` the divisor is the zero divisor of ``u_1``. For ``n >= 2``
    the zeros of ``mu(u)`` are the common zeros of the components; when there
    are none the result carries no divisor and reports ``min mu(u)``.
    """
    if check:
        res = sv_residual(cfg)
        if not res.within(tol):
            raise NotCertified(f"residuals {res.to_dict()} exceed {tol:g}")
    mu = mu_of(cfg.u)
    modulus = RealField(cfg.grid, 2 * mu.values)
    if cfg.n == 1:
        div = divisor_extract(cfg.u[0])
        return PiResult(modulus, div, mu.min(), mu.max(), 1)

    live = [s for s in cfg.u if np.abs(s.unitary()).max() > 0]
    windings = []
    for s in live:
        w = plaquette_windings(s)
        if (w < 0).any():
            raise NotHolomorphic("negative winding in a component")
        windings.append(w)
    common = np.minimum.reduce(windings)
    if common.sum() == 0:
        return PiResult(modulus, None, mu.min(), mu.max(), cfg.n)
    strongest = max(live, key=lambda s: float(np.abs(s.unitary()).max()))
    return PiResult(modulus, divisor_from_windings(strongest, common), mu.min(), mu.max(), cfg.n)


@dataclass(eq=False)
class FiberSample:
    cfg: Configuration
    coeffs: np.ndarray
    residual: SVResidual


def fiber_sample(
    phi: ComplexSection,
    A: UnitaryConnection,
    tau: float,
    n: int,
    count: int,
    seed: int = 0,
    coeffs=None,
) -> list[FiberSample]:
    """Solutions ``u = (a_1 phi, ..., a_n phi)`` with ``|a| = 1`` over the same vortex.

    ``coeffs`` (shape ``(count, n)``) overrides the random unit vectors drawn
    from ``numpy.random.default_rng(seed)``.
    """
    if n < 1 or count < 0:
        raise ValueError("need n >= 1 and count >= 0")
    if coeffs is None:
        rng = np.random.default_rng(seed)
        coeffs = rng.normal(size=(count, n)) + 1j * rng.normal(size=(count, n))
    coeffs = np.asarray(coeffs, dtype=complex).reshape(count, n)
    coeffs = coeffs / np.linalg.norm(coeffs, axis=1, keepdims=True)
    out = []
    for a in coeffs:
        cfg = Configuration(tuple(phi.scale(ak) for ak in a), A, tau)
        out.append(FiberSample(cfg, a, sv_residual(cfg)))
    return out
