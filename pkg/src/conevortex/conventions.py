"""Sign and normalization conventions used throughout conevortex.

Base surface
    A flat rectangular torus ``[0, lx) x [0, ly)`` with Kähler form
    ``dx ^ dy``, so the contraction ``Lambda`` of ``dx ^ dy`` is 1 and
    ``Vol = lx * ly``.

Laplacian
    Positive definite everywhere: ``laplacian(f) = -(f_xx + f_yy)``. A Fourier
    mode ``exp(2 pi i (k x / lx + m y / ly))`` is multiplied by
    ``4 pi^2 (k^2 / lx^2 + m^2 / ly^2) >= 0``. The classical Kazdan-Warner
    literature uses the opposite sign.

Dolbeault pieces
    ``dbar f = (f_x + i f_y) / 2`` and ``pdel f = (f_x - i f_y) / 2`` (the
    ``dz-bar`` and ``dz`` coefficients). With these,
    ``Lambda(dbar pdel f) = -(i/2) laplacian(f)``.

Connections
    A unitary connection is ``d + i (a_x dx + a_y dy)`` with real ``a_x, a_y``.
    Its curvature scalar is ``i Lambda F_A = d_y a_x - d_x a_y`` and
    ``(1 / 2 pi) * integral = degree``.

Vortex equations
    With real ``tau`` the moment equation is ``i Lambda F_A = tau - mu(u)``.
    The real complex gauge ``exp(f)`` maps ``u -> exp(f) u`` and adds
    ``(-f_y, f_x)`` to ``(a_x, a_y)``, which adds ``laplacian(f)`` to the
    curvature scalar. Gauge fixing therefore solves
    ``laplacian(f) + B exp(2 f) = tau - i Lambda F_A``.

Target cone
    ``C^n \\ {0}`` with flat form ``omega_0 = sum dx_k ^ dy_k``. The weight-w
    circle generator has fundamental field ``K(z) = -i w z`` (weight 1 gives
    the Reeb field ``-i p``), and ``mu = 1/2 sum w_k |z_k|^2`` satisfies
    ``d mu = iota_K omega_0``.
"""

DEFAULT_KW_TOL = 1e-10
DEFAULT_KW_TOL_STENCIL = 1e-8
THRESHOLD_MARGIN_REL = 1e-8
