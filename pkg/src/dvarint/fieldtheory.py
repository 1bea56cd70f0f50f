"""Discrete field theory on a (time x periodic space) lattice.

Index convention: ``i`` is time, ``j`` is space. Rows are arrays over the
periodic spatial index ``j``; Bridges-form rows carry a trailing component axis
of length ``d``.

Scalar Lagrangian and canonical runs use the Lorentzian density
``L = (Δ_t u)^2/2 - (Δ_x u)^2/2 - V(u)``; the Euclidean density with both
signs positive is available through :func:`field_del_residual` for
verification only.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .series import ResidualSeries
from .solvers import DEFAULT_SETTINGS, SolverSettings, fd_jacobian, newton

logger = logging.getLogger(__name__)

Array = np.ndarray


class CFLWarning(RuntimeWarning):
    """Explicit leapfrog run with ``tau / h > 1``."""


def _fd_check(name, analytic, f, x, rtol=1e-6):
    h = 1e-6 * (1.0 + np.abs(x))
    numeric = (f(x + h) - f(x - h)) / (2 * h)
    err = np.abs(analytic - numeric)
    if np.any(err > rtol * (1.0 + np.abs(analytic))):
        raise ValueError(f"{name} disagrees with finite differences (max error {err.max():.2e})")


@dataclass(frozen=True)
class DiscreteFieldLagrangian:
    """Scalar density ``L(u, v_t, v_x)`` with its three partials, vectorized.

    ``potential_grad`` marks the standard Lorentzian family
    ``v_t^2/2 - v_x^2/2 - V(u)``; the Euler-Lagrange step is then the explicit
    leapfrog.
    """

    eval: Callable[[Array, Array, Array], Array]
    d_u: Callable[[Array, Array, Array], Array]
    d_vt: Callable[[Array, Array, Array], Array]
    d_vx: Callable[[Array, Array, Array], Array]
    potential_grad: Callable[[Array], Array] | None = None
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        if not self.validate:
            return
        rng = np.random.default_rng(99)
        u, a, b = rng.normal(size=(3, 5))
        _fd_check("d_u", self.d_u(u, a, b), lambda x: self.eval(x, a, b), u)
        _fd_check("d_vt", self.d_vt(u, a, b), lambda x: self.eval(u, x, b), a)
        _fd_check("d_vx", self.d_vx(u, a, b), lambda x: self.eval(u, a, x), b)


@dataclass(frozen=True)
class DiscreteFieldHamiltonian:
    """Density ``H(u, pi, u_x)`` from the field Legendre transform, vectorized.

    ``pi`` is the momentum at the next time level. ``separable`` promises that
    ``d_u`` and ``d_ux`` do not depend on ``pi``.
    """

    eval: Callable[[Array, Array, Array], Array]
    d_u: Callable[[Array, Array, Array], Array]
    d_pi: Callable[[Array, Array, Array], Array]
    d_ux: Callable[[Array, Array, Array], Array]
    separable: bool = False
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        if not self.validate:
            return
        rng = np.random.default_rng(98)
        u, a, b = rng.normal(size=(3, 5))
        _fd_check("d_u", self.d_u(u, a, b), lambda x: self.eval(x, a, b), u)
        _fd_check("d_pi", self.d_pi(u, a, b), lambda x: self.eval(u, x, b), a)
        _fd_check("d_ux", self.d_ux(u, a, b), lambda x: self.eval(u, a, x), b)


@dataclass(frozen=True)
class HamiltonianPDESystem:
    """``M Z_t + eps K Z_x = grad S(Z)`` with antisymmetric ``M`` and ``K``.

    ``grad_S`` and ``hessian_S`` must accept arrays with a trailing axis of
    length ``dim`` and broadcast over the leading axes.
    """

    dim: int
    M: Array
    K: Array
    epsilon: int
    S: Callable[[Array], Array]
    grad_S: Callable[[Array], Array]
    hessian_S: Callable[[Array], Array] | None = None
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        M, K = np.asarray(self.M, dtype=float), np.asarray(self.K, dtype=float)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "K", K)
        d = self.dim
        if M.shape != (d, d) or K.shape != (d, d):
            raise ValueError(f"M and K must be {d}x{d}")
        if np.max(np.abs(M + M.T)) > 1e-14 or np.max(np.abs(K + K.T)) > 1e-14:
            raise ValueError("M and K must be antisymmetric")
        if self.epsilon not in (1, -1):
            raise ValueError("epsilon must be +1 or -1")
        if not self.validate:
            return
        rng = np.random.default_rng(97)
        for _ in range(3):
            z = rng.normal(size=d)
            g = np.asarray(self.grad_S(z))
            num = np.array([
                (self.S(z + e) - self.S(z - e)) / (2 * e[k])
                for k, e in enumerate(np.diag(1e-6 * (1.0 + np.abs(z))))
            ])
            err = np.abs(g - num)
            if np.any(err > 1e-6 * (1.0 + np.abs(g))):
                raise ValueError(f"grad_S disagrees with finite differences (max error {err.max():.2e})")
            if self.hessian_S is not None:
                Hs = np.asarray(self.hessian_S(z))
                if np.max(np.abs(Hs - Hs.T)) > 1e-12:
                    raise ValueError("hessian_S is not symmetric")

    def hess(self, Z: Array) -> Array:
        """Hessian of S at each row of ``Z`` (shape ``(..., d, d)``)."""
        if self.hessian_S is not None:
            return np.asarray(self.hessian_S(Z), dtype=float)
        Z = np.asarray(Z, dtype=float)
        flat = Z.reshape(-1, self.dim)
        out = np.array([fd_jacobian(self.grad_S, z, 1e-6) for z in flat])
        return out.reshape(*Z.shape, self.dim)


# ---------------------------------------------------------------------------
# Lagrangian and canonical steppers for scalar fields


def _bwd(a: Array) -> Array:
    return a - np.roll(a, 1, axis=0)


def _fwd(a: Array) -> Array:
    return np.roll(a, -1, axis=0) - a


def row_del_residual(L: DiscreteFieldLagrangian, u_prev: Array, u_cur: Array, u_next: Array, tau: float, h: float) -> Array:
    """Field Euler-Lagrange residual along a periodic row ``i``.

    ``dL/du(i,j) - Δ_t[dL/dv_t at (i-1,j)] - Δ_x[dL/dv_x at (i,j-1)]``.
    """
    vt_cur = (u_next - u_cur) / tau
    vx_cur = _fwd(u_cur) / h
    vt_prev = (u_cur - u_prev) / tau
    vx_prev = _fwd(u_prev) / h
    p_cur = L.d_vt(u_cur, vt_cur, vx_cur)
    p_prev = L.d_vt(u_prev, vt_prev, vx_prev)
    flux = L.d_vx(u_cur, vt_cur, vx_cur)
    return L.d_u(u_cur, vt_cur, vx_cur) - (p_cur - p_prev) / tau - _bwd(flux) / h


def field_del_residual(L: DiscreteFieldLagrangian, patch: Array, steps: tuple[float, float]) -> float:
    """Euler-Lagrange residual at the centre of a 3x3 patch ``u[i-1:i+2, j-1:j+2]``.

    Only the five-point cross enters for densities whose slots decouple; the
    corners ``(i-1, j+1)`` and ``(i+1, j-1)`` matter for general densities.
    """
    patch = np.asarray(patch, dtype=float)
    if patch.shape != (3, 3):
        raise ValueError("patch must be 3x3")
    tau, h = steps
    # On a 3-node periodic row, node 1 sees exactly its patch neighbours.
    return float(row_del_residual(L, patch[0], patch[1], patch[2], tau, h)[1])


def field_del_step(
    L: DiscreteFieldLagrangian,
    u_prev: Array,
    u_cur: Array,
    tau: float,
    h: float,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> Array:
    """Next time row from the field Euler-Lagrange equations.

    The standard Lorentzian family gives the explicit leapfrog
    ``u+ = 2u - u- + (tau/h)^2 (u_{j+1} - 2u + u_{j-1}) - tau^2 V'(u)``.
    """
    u_prev, u_cur = np.asarray(u_prev, dtype=float), np.asarray(u_cur, dtype=float)
    if tau / h > 1:
        warnings.warn(f"tau/h = {tau / h:.3g} > 1 violates the leapfrog CFL bound", CFLWarning, stacklevel=2)
    if L.potential_grad is not None:
        lap = np.roll(u_cur, -1) - 2 * u_cur + np.roll(u_cur, 1)
        return 2 * u_cur - u_prev + (tau / h) ** 2 * lap - tau**2 * L.potential_grad(u_cur)
    seed = 2 * u_cur - u_prev
    return newton(lambda x: row_del_residual(L, u_prev, u_cur, x, tau, h), seed, settings=settings)


def field_canonical_step(
    Hd: DiscreteFieldHamiltonian,
    u: Array,
    pi: Array,
    tau: float,
    h: float,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> tuple[Array, Array]:
    """Discrete canonical field equations; returns ``(u_next, pi_next)``.

    ``pi+ = pi - tau dH/du + tau Δ_x[dH/du_x at (i, j-1)]`` with ``H`` evaluated
    at ``(u, pi+, Δ_x u)``, then ``u+ = u + tau dH/dpi``.
    """
    u, pi = np.asarray(u, dtype=float), np.asarray(pi, dtype=float)
    ux = _fwd(u) / h

    def force(pn):
        return -Hd.d_u(u, pn, ux) + _bwd(Hd.d_ux(u, pn, ux)) / h

    if Hd.separable:
        pi_next = pi + tau * force(pi)
    else:
        pi_next = newton(lambda pn: pn - pi - tau * force(pn), pi + tau * force(pi), settings=settings)
    u_next = u + tau * Hd.d_pi(u, pi_next, ux)
    return u_next, pi_next


# ---------------------------------------------------------------------------
# Midpoint box scheme


def box_residual(sys: HamiltonianPDESystem, Z0: Array, Z1: Array, tau: float, h: float) -> Array:
    """Per-cell box residual for rows ``Z0 = Z^(i,.)`` and ``Z1 = Z^(i+1,.)``.

    Cell ``j`` spans nodes ``j, j+1`` (periodic) and returns
    ``M Δ_t Z^(i,j+1/2) + eps K Δ_x Z^(i+1/2,j) - grad S(Z^(i+1/2,j+1/2))``.
    """
    Z0, Z1 = np.asarray(Z0, dtype=float), np.asarray(Z1, dtype=float)
    Z0n, Z1n = np.roll(Z0, -1, axis=0), np.roll(Z1, -1, axis=0)
    dt = 0.5 * (Z1 + Z1n - Z0 - Z0n) / tau
    dx = 0.5 * (Z0n + Z1n - Z0 - Z1) / h
    centre = 0.25 * (Z0 + Z0n + Z1 + Z1n)
    return dt @ sys.M.T + sys.epsilon * dx @ sys.K.T - sys.grad_S(centre)


def box_jacobians(sys: HamiltonianPDESystem, Z0: Array, Z1: Array, tau: float, h: float) -> tuple[Array, Array]:
    """Dense Jacobians of the stacked row residual w.r.t. ``Z1`` and ``Z0``.

    Both are cyclic block-bidiagonal: cell ``j`` couples nodes ``j`` and ``j+1``.
    """
    N, d = Z0.shape
    Z0n, Z1n = np.roll(Z0, -1, axis=0), np.roll(Z1, -1, axis=0)
    Hs = sys.hess(0.25 * (Z0 + Z0n + Z1 + Z1n))
    Mt, Kx = sys.M / (2 * tau), sys.epsilon * sys.K / (2 * h)
    J1 = np.zeros((N * d, N * d))
    J0 = np.zeros((N * d, N * d))
    for j in range(N):
        r = slice(j * d, (j + 1) * d)
        c_here = slice(j * d, (j + 1) * d)
        jn = (j + 1) % N
        c_next = slice(jn * d, (jn + 1) * d)
        Hq = 0.25 * Hs[j]
        J1[r, c_here] += Mt - Kx - Hq
        J1[r, c_next] += Mt + Kx - Hq
        J0[r, c_here] += -Mt - Kx - Hq
        J0[r, c_next] += -Mt + Kx - Hq
    return J1, J0


BOX_SETTINGS = SolverSettings(least_squares=True)


def box_step_row(
    sys: HamiltonianPDESystem,
    row: Array,
    tau: float,
    h: float,
    settings: SolverSettings = BOX_SETTINGS,
) -> Array:
    """Advance one time row of the midpoint box scheme.

    Newton on all ``N d`` unknowns of the next row at once, seeded with the
    current row. The default settings solve each Newton system by least
    squares: Bridges forms with a singular ``K`` on an even periodic grid have
    a structural null mode (a spatial checkerboard in ker K) that the residual
    never sees. The minimum-norm update leaves that mode at its seed value.
    An inconsistent singular system raises :class:`SingularSystemError`.
    """
    if not (tau > 0 and h > 0):
        raise ValueError("tau and h must be positive")
    Z0 = np.asarray(row, dtype=float)
    if Z0.ndim != 2 or Z0.shape[1] != sys.dim:
        raise ValueError(f"row must have shape (N, {sys.dim})")
    shape = Z0.shape
    F = lambda x: box_residual(sys, Z0, x.reshape(shape), tau, h).ravel()  # noqa: E731
    jac = lambda x: box_jacobians(sys, Z0, x.reshape(shape), tau, h)[0]  # noqa: E731
    return newton(F, Z0.ravel(), jac, settings).reshape(shape)


def box_tangent_row(sys: HamiltonianPDESystem, Z0: Array, Z1: Array, dZ0: Array, tau: float, h: float) -> Array:
    """Linearized box step: solve ``J1 dZ1 = -J0 dZ0`` (minimum-norm)."""
    J1, J0 = box_jacobians(sys, np.asarray(Z0, dtype=float), np.asarray(Z1, dtype=float), tau, h)
    rhs = -J0 @ np.asarray(dZ0, dtype=float).ravel()
    sol = np.linalg.lstsq(J1, rhs, rcond=None)[0]
    return sol.reshape(np.shape(Z0))


@dataclass
class BoxRun:
    rows: Array
    tangents: Array  # (n_tangents, steps + 1, N, d)
    tau: float
    h: float


def box_integrate(
    sys: HamiltonianPDESystem,
    row0: Array,
    tau: float,
    h: float,
    steps: int,
    tangents0: Array | None = None,
    settings: SolverSettings = BOX_SETTINGS,
    on_step: Callable[[int, Array], None] | None = None,
) -> BoxRun:
    """Run the box scheme, propagating optional tangent rows alongside."""
    row0 = np.asarray(row0, dtype=float)
    t0 = np.zeros((0, *row0.shape)) if tangents0 is None else np.asarray(tangents0, dtype=float)
    rows = np.empty((steps + 1, *row0.shape))
    tans = np.empty((t0.shape[0], steps + 1, *row0.shape))
    rows[0], tans[:, 0] = row0, t0
    if on_step is not None:
        on_step(0, row0)
    for i in range(steps):
        rows[i + 1] = box_step_row(sys, rows[i], tau, h, settings)
        for m in range(t0.shape[0]):
            tans[m, i + 1] = box_tangent_row(sys, rows[i], rows[i + 1], tans[m, i], tau, h)
        if on_step is not None:
            on_step(i + 1, rows[i + 1])
    return BoxRun(rows, tans, tau, h)


def omega_time(sys: HamiltonianPDESystem, xi: Array, eta: Array) -> Array:
    """``omega^0`` on the time edges ``(i, j+1/2)`` of each row: ``-xi^T M eta``."""
    xb = 0.5 * (xi + np.roll(xi, -1, axis=-2))
    eb = 0.5 * (eta + np.roll(eta, -1, axis=-2))
    return -np.einsum("...a,ab,...b->...", xb, sys.M, eb)


def omega_space(sys: HamiltonianPDESystem, xi: Array, eta: Array) -> Array:
    """``omega^1`` on the space edges ``(i+1/2, j)`` between consecutive rows."""
    xb = 0.5 * (xi[:-1] + xi[1:])
    eb = 0.5 * (eta[:-1] + eta[1:])
    return -np.einsum("...a,ab,...b->...", xb, sys.K, eb)


def multisymplectic_residual(sys: HamiltonianPDESystem, xi: Array, eta: Array, tau: float, h: float) -> ResidualSeries:
    """Discrete conservation law ``Δ_t omega^0 + eps Δ_x omega^1`` per cell.

    ``xi`` and ``eta`` are tangent row sequences of shape ``(steps+1, N, d)``.
    The 2-forms are constant-coefficient, so the base rows do not enter.
    """
    xi, eta = np.asarray(xi, dtype=float), np.asarray(eta, dtype=float)
    w0 = omega_time(sys, xi, eta)
    w1 = omega_space(sys, xi, eta)
    r = (w0[1:] - w0[:-1]) / tau + sys.epsilon * (np.roll(w1, -1, axis=1) - w1) / h
    return ResidualSeries(r, label="multisymplectic")


def omega_time_totals(sys: HamiltonianPDESystem, xi: Array, eta: Array) -> Array:
    """``sum_j omega^0_(i,j)`` per time row; invariant for the box scheme."""
    return omega_time(sys, np.asarray(xi, dtype=float), np.asarray(eta, dtype=float)).sum(axis=-1)


def sine_gordon_pair_row(N: int, length: float, speed: float = 0.0, separation: float | None = None) -> tuple[Array, float]:
    """Kink / antikink pair on a periodic domain as a Bridges row ``(u, u_t, u_x)``.

    Returns ``(row, h)``. The kink moves with ``+speed`` and the antikink with
    ``-speed``; the pair is periodic up to exponentially small tails.
    """
    h = length / N
    x = -length / 2 + h * np.arange(N)
    a = -(separation if separation is not None else length / 2) / 2
    b = -a
    g = 1.0 / np.sqrt(1.0 - speed**2)

    def kink(s, sign):
        e = np.exp(g * s)
        u = 4 * np.arctan(e)
        du = 4 * g * e / (1 + e**2)
        return sign * u, sign * du

    uk, dk = kink(x - a, 1.0)
    ua, da = kink(x - b, -1.0)
    u = uk + ua
    ux = dk + da
    # u(x - c t) moving right has u_t = -c u_x; antikink moves left.
    ut = -speed * dk + speed * da
    return np.stack([u, ut, ux], axis=-1), h
