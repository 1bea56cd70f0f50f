"""Discrete variational mechanics.

Phase points are flat arrays ``z = (p_1..p_n, q_1..q_n)`` and the symplectic
matrix is ``J = [[0, I], [-I, 0]]`` in that ordering, so Hamilton's equations
read ``dz/dt = J^{-1} grad_z H`` with ``dq/dt = H_p`` and ``dp/dt = -H_q``.

Lagrangian runs advance a configuration window ``(q_{k-1}, q_k)``; the
discrete Legendre transform ``p_k = dL/dv(q_{k-1}, (q_k - q_{k-1})/tau)`` maps
a window to a phase point.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .lattice import Grid1D
from .solvers import DEFAULT_SETTINGS, ConvergenceError, SolverSettings, fd_jacobian, newton

logger = logging.getLogger(__name__)

Vector = np.ndarray

SCHEMES = ("del", "canonical", "midpoint", "order4", "explicit_euler")


def symplectic_matrix(n: int) -> np.ndarray:
    """``J = [[0, I], [-I, 0]]`` for ``z = (p, q)``."""
    eye, zero = np.eye(n), np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


def split(z: Vector) -> tuple[Vector, Vector]:
    """``(p, q)`` halves of a phase point."""
    z = np.asarray(z, dtype=float)
    n = z.shape[-1] // 2
    return z[..., :n], z[..., n:]


def phase_point(p, q) -> Vector:
    return np.concatenate([np.atleast_1d(np.asarray(p, dtype=float)), np.atleast_1d(np.asarray(q, dtype=float))])


def _as_vec(x, n):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (n,):
        raise ValueError(f"expected a vector of length {n}, got shape {x.shape}")
    return x


def _fd_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h * (1.0 + abs(x[k]))
        g[k] = (f(x + e) - f(x - e)) / (2 * e[k])
    return g


def _check_gradient(name, analytic, numeric, rtol=1e-6):
    err = np.abs(analytic - numeric)
    if np.any(err > rtol * (1.0 + np.abs(analytic))):
        raise ValueError(f"{name} disagrees with finite differences (max error {err.max():.2e})")


@dataclass(frozen=True)
class DiscreteLagrangian:
    """``L_D(q, v)`` with ``v`` standing for the forward difference of ``q``.

    ``potential_grad`` and ``mass`` may be given when ``L = m v^2 / 2 - V(q)``;
    the Euler-Lagrange step then uses the closed-form two-step recursion.
    """

    dim: int
    eval: Callable[[Vector, Vector], float]
    grad_q: Callable[[Vector, Vector], Vector]
    grad_v: Callable[[Vector, Vector], Vector]
    potential_grad: Callable[[Vector], Vector] | None = None
    mass: float = 1.0
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        if self.validate:
            rng = np.random.default_rng(1234)
            n = self.dim
            for _ in range(3):
                q, v = rng.normal(size=n), rng.normal(size=n)
                _check_gradient("grad_q", self.grad_q(q, v), _fd_grad(lambda x: self.eval(x, v), q))
                _check_gradient("grad_v", self.grad_v(q, v), _fd_grad(lambda x: self.eval(q, x), v))


@dataclass(frozen=True)
class HamiltonianSystem:
    """``H(q, p)`` with gradients and an optional Hessian in ``z = (p, q)`` order.

    ``separable`` promises that ``grad_q`` does not depend on ``p``, which makes
    the canonical step explicit.
    """

    dim: int
    eval: Callable[[Vector, Vector], float]
    grad_q: Callable[[Vector, Vector], Vector]
    grad_p: Callable[[Vector, Vector], Vector]
    hessian: Callable[[Vector, Vector], np.ndarray] | None = None
    separable: bool = False
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        if not self.validate:
            return
        rng = np.random.default_rng(4321)
        n = self.dim
        for _ in range(3):
            q, p = rng.normal(size=n), rng.normal(size=n)
            _check_gradient("grad_q", self.grad_q(q, p), _fd_grad(lambda x: self.eval(x, p), q))
            _check_gradient("grad_p", self.grad_p(q, p), _fd_grad(lambda x: self.eval(q, x), p))
            if self.hessian is not None:
                Hzz = np.asarray(self.hessian(q, p))
                if Hzz.shape != (2 * n, 2 * n):
                    raise ValueError(f"hessian must be {2 * n}x{2 * n}")
                if np.max(np.abs(Hzz - Hzz.T)) > 1e-12:
                    raise ValueError("hessian is not symmetric")
                z = phase_point(p, q)
                numeric = fd_jacobian(lambda w: self.grad_z(w), z, 1e-6)
                _check_gradient("hessian", Hzz, numeric, rtol=1e-5)

    def H(self, z: Vector) -> float:
        p, q = split(z)
        return float(self.eval(q, p))

    def grad_z(self, z: Vector) -> Vector:
        p, q = split(z)
        return np.concatenate([np.atleast_1d(self.grad_p(q, p)), np.atleast_1d(self.grad_q(q, p))])

    def hess_z(self, z: Vector) -> np.ndarray:
        if self.hessian is None:
            raise ValueError("this Hamiltonian has no hessian")
        p, q = split(z)
        return np.asarray(self.hessian(q, p), dtype=float)

    def vector_field(self, z: Vector) -> Vector:
        """``J^{-1} grad H = (-H_q, H_p)``."""
        p, q = split(z)
        return np.concatenate([-np.atleast_1d(self.grad_q(q, p)), np.atleast_1d(self.grad_p(q, p))])


@dataclass
class Trajectory:
    """Phase states on a time grid plus tangent vectors propagated alongside.

    ``states`` has shape ``(n_nodes, 2n)``; ``tangents`` (if any) has shape
    ``(n_tangents, n_nodes, 2n)`` and holds phase-space variations.
    """

    grid: Grid1D
    states: np.ndarray
    tangents: np.ndarray | None = None

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        if self.states.shape[0] != self.grid.n_nodes:
            raise ValueError("states length must equal n_nodes")
        if self.tangents is not None:
            self.tangents = np.asarray(self.tangents, dtype=float)
            if self.tangents.shape[1:] != self.states.shape:
                raise ValueError("each tangent sequence must match the states' shape")

    @property
    def times(self) -> np.ndarray:
        return self.grid.nodes()


# ---------------------------------------------------------------------------
# Lagrangian side


def del_residual(L: DiscreteLagrangian, q_prev, q_cur, q_next, tau: float) -> Vector:
    """Discrete Euler-Lagrange residual at node ``k``.

    ``dL/dq(q_k, v_k) - [dL/dv(q_k, v_k) - dL/dv(q_{k-1}, v_{k-1})] / tau`` with
    forward differences ``v_k = (q_{k+1} - q_k)/tau``.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    q_prev, q_cur, q_next = (_as_vec(x, L.dim) for x in (q_prev, q_cur, q_next))
    v_prev = (q_cur - q_prev) / tau
    v_cur = (q_next - q_cur) / tau
    return np.asarray(L.grad_q(q_cur, v_cur)) - (np.asarray(L.grad_v(q_cur, v_cur)) - np.asarray(L.grad_v(q_prev, v_prev))) / tau


def del_step(L: DiscreteLagrangian, q_prev, q_cur, tau: float, settings: SolverSettings = DEFAULT_SETTINGS) -> Vector:
    """Solve the discrete Euler-Lagrange equation for ``q_{k+1}``."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    q_prev, q_cur = _as_vec(q_prev, L.dim), _as_vec(q_cur, L.dim)
    if L.potential_grad is not None:
        return 2 * q_cur - q_prev - tau**2 * np.asarray(L.potential_grad(q_cur)) / L.mass
    seed = 2 * q_cur - q_prev
    return newton(lambda x: del_residual(L, q_prev, q_cur, x, tau), seed, settings=settings)


def discrete_legendre(L: DiscreteLagrangian, q_cur, q_next, tau: float) -> Vector:
    """Momentum ``p_{k+1} = dL/dv(q_k, (q_{k+1} - q_k)/tau)``."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    q_cur, q_next = _as_vec(q_cur, L.dim), _as_vec(q_next, L.dim)
    return np.asarray(L.grad_v(q_cur, (q_next - q_cur) / tau), dtype=float)


def hamiltonian_from_lagrangian(L: DiscreteLagrangian, q_cur, q_next, tau: float) -> float:
    """``H_D = p_{k+1} . v_k - L_D(q_k, v_k)``."""
    q_cur, q_next = _as_vec(q_cur, L.dim), _as_vec(q_next, L.dim)
    v = (q_next - q_cur) / tau
    p = discrete_legendre(L, q_cur, q_next, tau)
    return float(p @ v - L.eval(q_cur, v))


def inverse_legendre(L: DiscreteLagrangian, q_cur, p_cur, tau: float, settings: SolverSettings = DEFAULT_SETTINGS) -> Vector:
    """``q_{k-1}`` such that ``discrete_legendre(q_{k-1}, q_k) = p_k``."""
    q_cur, p_cur = _as_vec(q_cur, L.dim), _as_vec(p_cur, L.dim)
    if L.potential_grad is not None:
        return q_cur - tau * p_cur / L.mass
    F = lambda x: discrete_legendre(L, x, q_cur, tau) - p_cur  # noqa: E731
    return newton(F, q_cur - tau * p_cur, settings=settings)


# ---------------------------------------------------------------------------
# Hamiltonian steppers


def canonical_step(H: HamiltonianSystem, q_cur, p_cur, tau: float, settings: SolverSettings = DEFAULT_SETTINGS):
    """Discrete canonical equations with ``H_D = H(q_k, p_{k+1})``.

    ``p_{k+1} = p_k - tau H_q(q_k, p_{k+1})`` then ``q_{k+1} = q_k + tau H_p(q_k, p_{k+1})``.
    Returns ``(q_next, p_next)``.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    q, p = _as_vec(q_cur, H.dim), _as_vec(p_cur, H.dim)
    n = H.dim
    if H.separable:
        p_next = p - tau * np.asarray(H.grad_q(q, p))
    else:
        F = lambda x: x - p + tau * np.asarray(H.grad_q(q, x))  # noqa: E731
        jac = None
        if H.hessian is not None:
            jac = lambda x: np.eye(n) + tau * H.hessian(q, x)[n:, :n]  # noqa: E731
        p_next = newton(F, p - tau * np.asarray(H.grad_q(q, p)), jac, settings)
    q_next = q + tau * np.asarray(H.grad_p(q, p_next))
    return q_next, p_next


def canonical_residual(H: HamiltonianSystem, window: Vector, tau: float) -> Vector:
    """``(Δq - H_p, -Δp - H_q)`` at ``(q_k, p_{k+1})`` for window ``(z_k, z_{k+1})``."""
    n = H.dim
    p0, q0, p1, q1 = np.split(np.asarray(window, dtype=float), 4)
    assert p0.size == n
    return np.concatenate([
        (q1 - q0) / tau - np.atleast_1d(H.grad_p(q0, p1)),
        -(p1 - p0) / tau - np.atleast_1d(H.grad_q(q0, p1)),
    ])


def explicit_euler_step(H: HamiltonianSystem, z_cur: Vector, tau: float) -> Vector:
    """Non-symplectic control map ``z + tau J^{-1} grad H(z)``."""
    z = np.asarray(z_cur, dtype=float)
    return z + tau * H.vector_field(z)


def midpoint_residual(H: HamiltonianSystem, z_cur: Vector, z_next: Vector, tau: float, grad=None) -> Vector:
    """``J Δz - grad H(z_mid)``; zero on the implicit midpoint scheme."""
    z0, z1 = np.asarray(z_cur, dtype=float), np.asarray(z_next, dtype=float)
    grad = H.grad_z if grad is None else grad
    J = symplectic_matrix(H.dim)
    return J @ (z1 - z0) / tau - grad(0.5 * (z0 + z1))


def _midpoint_solve(H, z0, tau, grad, hess, settings):
    n = H.dim
    Jinv = -symplectic_matrix(n)
    F = lambda z1: z1 - z0 - tau * (Jinv @ grad(0.5 * (z0 + z1)))  # noqa: E731
    jac = None
    if hess is not None:
        jac = lambda z1: np.eye(2 * n) - 0.5 * tau * Jinv @ hess(0.5 * (z0 + z1))  # noqa: E731
    seed = z0 + tau * (Jinv @ grad(z0))
    return newton(F, seed, jac, settings)


def midpoint_step(H: HamiltonianSystem, z_cur: Vector, tau: float, settings: SolverSettings = DEFAULT_SETTINGS) -> Vector:
    """Implicit midpoint ``Δz = J^{-1} grad H((z_k + z_{k+1})/2)``.

    With a Hessian the Newton Jacobian is exact, so linear ``grad H`` converges
    in one direct solve.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    z0 = _as_vec(z_cur, 2 * H.dim)
    hess = H.hess_z if H.hessian is not None else None
    return _midpoint_solve(H, z0, tau, H.grad_z, hess, settings)


def modified_hamiltonian(H: HamiltonianSystem, z: Vector, tau: float) -> float:
    """``H - (tau^2/24) (grad H)^T J H_zz J grad H``."""
    if H.hessian is None:
        raise ValueError("modified_hamiltonian needs a hessian")
    z = np.asarray(z, dtype=float)
    J = symplectic_matrix(H.dim)
    g = H.grad_z(z)
    return H.H(z) - tau**2 / 24.0 * float(g @ J @ H.hess_z(z) @ J @ g)


def correction_term(H: HamiltonianSystem, z: Vector) -> float:
    """``alpha(z) = (grad H)^T J H_zz J grad H``, the exact-form potential."""
    J = symplectic_matrix(H.dim)
    g = H.grad_z(z)
    return float(g @ J @ H.hess_z(z) @ J @ g)


def modified_gradient(H: HamiltonianSystem, z: Vector, tau: float, step: float = 1e-3) -> Vector:
    """Gradient of the modified Hamiltonian by fourth-order central differences.

    Needs only H, grad H and H_zz; the analytic gradient would need third
    derivatives.
    """
    z = np.asarray(z, dtype=float)
    h = step * (1.0 + np.linalg.norm(z))
    g = np.zeros_like(z)
    for k in range(z.size):
        e = np.zeros_like(z)
        e[k] = h
        f = [modified_hamiltonian(H, z + c * e, tau) for c in (2, 1, -1, -2)]
        g[k] = (-f[0] + 8 * f[1] - 8 * f[2] + f[3]) / (12 * h)
    return g


def fourth_order_step(H: HamiltonianSystem, z_cur: Vector, tau: float, settings: SolverSettings = DEFAULT_SETTINGS) -> Vector:
    """Implicit midpoint applied to the modified Hamiltonian.

    The Newton Jacobian uses H_zz only (quasi-Newton); the dropped term is
    O(tau^3) so convergence stays fast.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    if H.hessian is None:
        raise ValueError("fourth_order_step needs a hessian")
    z0 = _as_vec(z_cur, 2 * H.dim)
    return _midpoint_solve(H, z0, tau, lambda z: modified_gradient(H, z, tau), H.hess_z, settings)


def symplectic_area(xi: Vector, eta: Vector) -> float:
    """``xi^T J eta``: the 2-form ``(1/2) dz^T ^ J dz`` on the pair ``(xi, eta)``."""
    xi, eta = np.asarray(xi, dtype=float), np.asarray(eta, dtype=float)
    if xi.shape != eta.shape or xi.ndim != 1 or xi.size % 2:
        raise ValueError("symplectic_area needs two vectors of equal even length")
    p1, q1 = split(xi)
    p2, q2 = split(eta)
    return float(p1 @ q2 - q1 @ p2)


# ---------------------------------------------------------------------------
# Step maps and their linearization


def step_map(scheme: str, system, tau: float, settings: SolverSettings = DEFAULT_SETTINGS) -> Callable[[Vector], Vector]:
    """One step of ``scheme`` as a map on its state vector.

    Hamiltonian schemes act on ``z``; ``"del"`` acts on the window
    ``(q_{k-1}, q_k)`` of a :class:`DiscreteLagrangian`.
    """
    if scheme == "del":
        n = system.dim

        def phi(s):
            q_prev, q_cur = s[:n], s[n:]
            return np.concatenate([q_cur, del_step(system, q_prev, q_cur, tau, settings)])

        return phi
    if scheme == "canonical":
        def phi(z):
            p, q = split(z)
            q1, p1 = canonical_step(system, q, p, tau, settings)
            return phase_point(p1, q1)

        return phi
    if scheme == "midpoint":
        return lambda z: midpoint_step(system, z, tau, settings)
    if scheme == "order4":
        return lambda z: fourth_order_step(system, z, tau, settings)
    if scheme == "explicit_euler":
        return lambda z: explicit_euler_step(system, z, tau)
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


def _analytic_tangent(scheme, H: HamiltonianSystem, z0, z1, dz, tau):
    n = H.dim
    Jinv = -symplectic_matrix(n)
    if scheme == "midpoint":
        A = 0.5 * tau * Jinv @ H.hess_z(0.5 * (z0 + z1))
        return np.linalg.solve(np.eye(2 * n) - A, dz + A @ dz)
    if scheme == "explicit_euler":
        return dz + tau * Jinv @ H.hess_z(z0) @ dz
    if scheme == "canonical":
        _, q0 = split(z0)
        p1, _ = split(z1)
        Hzz = H.hessian(q0, p1)
        Hpp, Hpq, Hqp, Hqq = Hzz[:n, :n], Hzz[:n, n:], Hzz[n:, :n], Hzz[n:, n:]
        dp0, dq0 = split(dz)
        dp1 = np.linalg.solve(np.eye(n) + tau * Hqp, dp0 - tau * Hqq @ dq0)
        dq1 = dq0 + tau * (Hpq @ dq0 + Hpp @ dp1)
        return phase_point(dp1, dq1)
    raise ValueError(f"no analytic linearization for scheme {scheme!r}")


def tangent_step(
    scheme: str,
    system,
    state: Vector,
    next_state: Vector,
    dz: Vector,
    tau: float,
    mode: str = "auto",
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> Vector:
    """Propagate a variation through the linearization of one scheme step.

    ``mode="analytic"`` uses the Hessian (midpoint, canonical, explicit Euler);
    ``"fd"`` differentiates the step map centrally with step ``~1e-6 * scale``;
    ``"auto"`` picks analytic when possible. ``next_state`` is the already
    computed image of ``state`` (the base window).
    """
    dz = np.asarray(dz, dtype=float)
    state = np.asarray(state, dtype=float)
    if tau == 0:
        return dz.copy()
    analytic_ok = scheme in ("midpoint", "canonical", "explicit_euler") and getattr(system, "hessian", None) is not None
    if mode == "auto":
        mode = "analytic" if analytic_ok else "fd"
    if mode == "analytic":
        if not analytic_ok:
            raise ValueError(f"analytic tangents unavailable for {scheme!r} without a hessian")
        return _analytic_tangent(scheme, system, state, np.asarray(next_state, dtype=float), dz, tau)
    if mode != "fd":
        raise ValueError(f"unknown tangent mode {mode!r}")
    norm = np.linalg.norm(dz)
    if norm == 0:
        return np.zeros_like(dz)
    phi = step_map(scheme, system, tau, settings)
    h = 1e-6 * (1.0 + np.linalg.norm(state)) / norm
    return (phi(state + h * dz) - phi(state - h * dz)) / (2 * h)


def legendre_phase(L: DiscreteLagrangian, window: Vector, tau: float) -> Vector:
    """Phase point ``(p_k, q_k)`` of a configuration window ``(q_{k-1}, q_k)``."""
    n = L.dim
    return phase_point(discrete_legendre(L, window[:n], window[n:], tau), window[n:])


def _legendre_tangent(L, window, dw, tau):
    if not np.any(dw):
        return np.zeros_like(dw)
    h = 1e-6 * (1.0 + np.linalg.norm(window)) / np.linalg.norm(dw)
    return (legendre_phase(L, window + h * dw, tau) - legendre_phase(L, window - h * dw, tau)) / (2 * h)


def integrate(
    scheme: str,
    system,
    z0: Vector,
    tau: float,
    steps: int,
    n_tangents: int = 0,
    rng: np.random.Generator | None = None,
    tangent_mode: str = "auto",
    settings: SolverSettings = DEFAULT_SETTINGS,
    on_step: Callable[[int, Vector], None] | None = None,
) -> Trajectory:
    """Run ``steps`` steps from phase point ``z0`` and return the trajectory.

    For ``"del"`` the system is a :class:`DiscreteLagrangian`; the initial
    window is recovered from ``z0`` by inverting the discrete Legendre map and
    every recorded state is the Legendre image of the current window.

    Tangents: the first two start as the canonical pair ``(e_{p_1}, e_{q_1})``
    (unit symplectic area), any further ones are drawn from ``rng``.
    If a step fails, the raised :class:`ConvergenceError` gets a ``partial``
    attribute holding the trajectory up to the failure.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    z0 = np.asarray(z0, dtype=float)
    n = z0.size // 2
    rng = np.random.default_rng(0) if rng is None else rng
    t0 = np.zeros((n_tangents, 2 * n))
    for k in range(n_tangents):
        if k == 0:
            t0[k, 0] = 1.0
        elif k == 1:
            t0[k, n] = 1.0
        else:
            t0[k] = rng.normal(size=2 * n)
    if scheme == "del":
        def window(z):
            p, q = split(z)
            return np.concatenate([inverse_legendre(system, q, p, tau, settings), q])

        state = window(z0)
        # push the phase-space tangents into window coordinates
        h = 1e-6 * (1.0 + np.linalg.norm(z0))
        t0 = np.array([(window(z0 + h * d) - window(z0 - h * d)) / (2 * h) for d in t0]).reshape(n_tangents, 2 * n)
    else:
        state = z0.copy()
    dim = state.size
    phi = step_map(scheme, system, tau, settings)
    states = np.empty((steps + 1, dim))
    tangents = np.empty((n_tangents, steps + 1, dim))
    states[0] = state
    tangents[:, 0] = t0
    if on_step is not None:
        on_step(0, state)
    done = 0
    try:
        for k in range(steps):
            states[k + 1] = phi(states[k])
            for m in range(n_tangents):
                tangents[m, k + 1] = tangent_step(scheme, system, states[k], states[k + 1], tangents[m, k], tau, tangent_mode, settings)
            done = k + 1
            if on_step is not None:
                on_step(k + 1, states[k + 1])
    except ConvergenceError as exc:
        logger.info("step %d failed: %s", done + 1, exc)
        exc.partial = _finish(scheme, system, states[: done + 1], tangents[:, : done + 1], tau)
        raise
    return _finish(scheme, system, states, tangents, tau)


def _finish(scheme, system, states, tangents, tau):
    if scheme == "del":
        phase = np.array([legendre_phase(system, s, tau) for s in states])
        tans = np.array([[_legendre_tangent(system, s, d, tau) for s, d in zip(states, seq)] for seq in tangents])
        states, tangents = phase, tans.reshape(tangents.shape[0], *phase.shape)
    grid = Grid1D(tau, states.shape[0])
    return Trajectory(grid, states, tangents if tangents.shape[0] else None)
