"""Euler-Lagrange 1-forms, their exterior derivatives and the closedness identities.

A form is evaluated on a *window* (the variables of one step or one cell)
and a *variation* of the same length:

* mechanics: ``(p_k, q_k, p_{k+1}, q_{k+1})`` in ``R^{4n}``;
* box cell: corners ``(Z^{i,j}, Z^{i,j+1}, Z^{i+1,j}, Z^{i+1,j+1})`` in ``R^{4d}``.

Each form also carries the boundary term ``B(w, xi, eta)`` with
``dE(xi, eta) + B = 0`` identically; for mechanics ``B`` is the symplectic
area difference divided by ``tau``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fieldtheory import HamiltonianPDESystem
from .mechanics import HamiltonianSystem, modified_gradient, split, symplectic_area, symplectic_matrix, Trajectory
from .series import ResidualSeries

__all__ = [
    "ELForm",
    "ResidualSeries",
    "midpoint_form",
    "canonical_form",
    "fourth_order_form",
    "box_form",
    "exact_form",
    "el_form_value",
    "el_form_exterior_derivative",
    "cohomology_identity_residual",
    "sample_identity_residuals",
    "symplectic_residual_series",
    "symplectic_growth",
    "energy_series",
]

Evaluator = Callable[[np.ndarray, np.ndarray], float]


@dataclass(frozen=True)
class ELForm:
    """A 1-form on window space.

    ``derivative(w, xi, eta)`` (optional) is the analytic directional
    derivative ``D_xi[E(eta)]``; ``boundary(w, xi, eta)`` is the structure
    term that the exterior derivative must cancel.
    """

    scheme: str
    size: int
    evaluator: Evaluator
    boundary: Callable[[np.ndarray, np.ndarray, np.ndarray], float] | None = None
    derivative: Callable[[np.ndarray, np.ndarray, np.ndarray], float] | None = None

    def check(self, *vectors) -> list[np.ndarray]:
        out = []
        for v in vectors:
            v = np.asarray(v, dtype=float)
            if v.shape != (self.size,):
                raise ValueError(f"{self.scheme} form expects vectors of length {self.size}, got shape {v.shape}")
            out.append(v)
        return out

    def __add__(self, other: "ELForm") -> "ELForm":
        if self.size != other.size:
            raise ValueError("forms live on different window layouts")
        deriv = None
        if self.derivative is not None and other.derivative is not None:
            deriv = lambda w, x, y: self.derivative(w, x, y) + other.derivative(w, x, y)  # noqa: E731
        return ELForm(
            f"{self.scheme}+{other.scheme}",
            self.size,
            lambda w, x: self.evaluator(w, x) + other.evaluator(w, x),
            self.boundary,
            deriv,
        )


def _halves(v):
    a, b = np.split(np.asarray(v, dtype=float), 2)
    return a, b


def _mechanics_boundary(tau):
    def boundary(w, xi, eta):
        x0, x1 = _halves(xi)
        e0, e1 = _halves(eta)
        return (symplectic_area(x1, e1) - symplectic_area(x0, e0)) / tau

    return boundary


def _midpoint_like(scheme, H, tau, grad, hess):
    J = symplectic_matrix(H.dim)

    def evaluator(w, xi):
        z0, z1 = _halves(w)
        x0, x1 = _halves(xi)
        return float(0.5 * (x0 + x1) @ (J @ (z1 - z0) / tau - grad(0.5 * (z0 + z1))))

    derivative = None
    if hess is not None:
        def derivative(w, xi, eta):
            z0, z1 = _halves(w)
            x0, x1 = _halves(xi)
            e0, e1 = _halves(eta)
            return float(0.5 * (e0 + e1) @ (J @ (x1 - x0) / tau - hess(0.5 * (z0 + z1)) @ (0.5 * (x0 + x1))))

    return ELForm(scheme, 4 * H.dim, evaluator, _mechanics_boundary(tau), derivative)


def midpoint_form(H: HamiltonianSystem, tau: float) -> ELForm:
    """``E(xi) = xi_mid^T (J Δz - grad H(z_mid))``; null exactly on midpoint steps."""
    hess = H.hess_z if H.hessian is not None else None
    return _midpoint_like("midpoint", H, tau, H.grad_z, hess)


def fourth_order_form(H: HamiltonianSystem, tau: float) -> ELForm:
    """Midpoint form of the modified Hamiltonian (finite-difference mode only)."""
    return _midpoint_like("order4", H, tau, lambda z: modified_gradient(H, z, tau), None)


def canonical_form(H: HamiltonianSystem, tau: float) -> ELForm:
    """Form of the canonical step, evaluated at ``(q_k, p_{k+1})``.

    ``E(xi) = xi_{p,k+1} (Δq - H_p) - xi_{q,k} (Δp + H_q)``.
    """
    n = H.dim

    def parts(w):
        p0, q0, p1, q1 = np.split(np.asarray(w, dtype=float), 4)
        return p0, q0, p1, q1

    def evaluator(w, xi):
        p0, q0, p1, q1 = parts(w)
        _, xq0, xp1, _ = parts(xi)
        rq = (q1 - q0) / tau - np.atleast_1d(H.grad_p(q0, p1))
        rp = (p1 - p0) / tau + np.atleast_1d(H.grad_q(q0, p1))
        return float(xp1 @ rq - xq0 @ rp)

    derivative = None
    if H.hessian is not None:
        def derivative(w, xi, eta):
            p0, q0, p1, _ = parts(w)
            xp0, xq0, xp1, xq1 = parts(xi)
            _, eq0, ep1, _ = parts(eta)
            Hzz = H.hessian(q0, p1)
            Hpp, Hpq, Hqp, Hqq = Hzz[:n, :n], Hzz[:n, n:], Hzz[n:, :n], Hzz[n:, n:]
            drq = (xq1 - xq0) / tau - Hpq @ xq0 - Hpp @ xp1
            drp = (xp1 - xp0) / tau + Hqq @ xq0 + Hqp @ xp1
            return float(ep1 @ drq - eq0 @ drp)

    return ELForm("canonical", 4 * n, evaluator, _mechanics_boundary(tau), derivative)


def box_form(sys: HamiltonianPDESystem, tau: float, h: float) -> ELForm:
    """Box-cell form ``E(xi) = xi_centre^T R``, ``R`` the cell residual.

    Boundary term: ``-(Δ_t omega^0 + eps Δ_x omega^1)`` over the cell edges.
    """
    d, M, K, eps = sys.dim, sys.M, sys.K, sys.epsilon

    def corners(v):
        return np.split(np.asarray(v, dtype=float), 4)

    def evaluator(w, xi):
        z00, z01, z10, z11 = corners(w)
        x = sum(corners(xi)) / 4
        dt = 0.5 * (z10 + z11 - z00 - z01) / tau
        dx = 0.5 * (z01 + z11 - z00 - z10) / h
        return float(x @ (M @ dt + eps * K @ dx - sys.grad_S(0.25 * (z00 + z01 + z10 + z11))))

    def pair(A, xa, xb, ea, eb):
        return -float(0.5 * (xa + xb) @ A @ (0.5 * (ea + eb)))

    def boundary(w, xi, eta):
        x00, x01, x10, x11 = corners(xi)
        e00, e01, e10, e11 = corners(eta)
        d_t = (pair(M, x10, x11, e10, e11) - pair(M, x00, x01, e00, e01)) / tau
        d_x = (pair(K, x01, x11, e01, e11) - pair(K, x00, x10, e00, e10)) / h
        return -(d_t + eps * d_x)

    derivative = None
    if sys.hessian_S is not None:
        def derivative(w, xi, eta):
            z = corners(w)
            x00, x01, x10, x11 = corners(xi)
            e = sum(corners(eta)) / 4
            dt = 0.5 * (x10 + x11 - x00 - x01) / tau
            dx = 0.5 * (x01 + x11 - x00 - x10) / h
            Hs = sys.hess(sum(z) / 4)
            return float(e @ (M @ dt + eps * K @ dx - Hs @ (0.25 * (x00 + x01 + x10 + x11))))

    return ELForm("box", 4 * d, evaluator, boundary, derivative)


def exact_form(alpha: Callable[[np.ndarray], float], size: int, step: float = 1e-5) -> ELForm:
    """Coboundary ``d alpha`` with the gradient taken by central differences."""

    def grad(w):
        g = np.zeros(size)
        hh = step * (1.0 + np.linalg.norm(w))
        for k in range(size):
            e = np.zeros(size)
            e[k] = hh
            g[k] = (alpha(w + e) - alpha(w - e)) / (2 * hh)
        return g

    return ELForm("exact", size, lambda w, xi: float(grad(np.asarray(w, dtype=float)) @ xi), lambda w, x, y: 0.0)


def el_form_value(form: ELForm, window, xi) -> float:
    window, xi = form.check(window, xi)
    return float(form.evaluator(window, xi))


def el_form_exterior_derivative(form: ELForm, window, xi, eta, step: float = 1e-5, mode: str = "fd") -> float:
    """``dE(xi, eta) = D_xi[E(eta)] - D_eta[E(xi)]``.

    ``mode="fd"`` uses central differences with step ``step * (1 + |w|)``;
    ``mode="analytic"`` uses the form's second-derivative callable.
    """
    window, xi, eta = form.check(window, xi, eta)
    if mode == "analytic":
        if form.derivative is None:
            raise ValueError(f"{form.scheme} form has no analytic derivative")
        return form.derivative(window, xi, eta) - form.derivative(window, eta, xi)
    if mode != "fd":
        raise ValueError(f"unknown mode {mode!r}")
    if not step > 0:
        raise ValueError("fd step must be positive")
    hh = step * (1.0 + np.linalg.norm(window))

    def directional(a, b):
        return (form.evaluator(window + hh * a, b) - form.evaluator(window - hh * a, b)) / (2 * hh)

    return float(directional(xi, eta) - directional(eta, xi))


def cohomology_identity_residual(form: ELForm, window, xi, eta, step: float = 1e-5, mode: str = "fd") -> float:
    """``dE(xi, eta) + B(xi, eta)``; zero on every window, solution or not."""
    if form.boundary is None:
        raise ValueError(f"{form.scheme} form carries no boundary term")
    window, xi, eta = form.check(window, xi, eta)
    return el_form_exterior_derivative(form, window, xi, eta, step, mode) + form.boundary(window, xi, eta)


def sample_identity_residuals(form: ELForm, rng: np.random.Generator, count: int, mode: str = "fd", scale: float = 1.0) -> np.ndarray:
    """Identity residuals on ``count`` random windows and variation pairs."""
    out = np.empty(count)
    for k in range(count):
        w, xi, eta = scale * rng.normal(size=(3, form.size))
        out[k] = cohomology_identity_residual(form, w, xi, eta, mode=mode)
    return out


def _pair_areas(traj: Trajectory, pair: tuple[int, int]) -> np.ndarray:
    if traj.tangents is None or traj.tangents.shape[0] <= max(pair):
        raise ValueError("trajectory lacks the requested tangent sequences")
    a, b = traj.tangents[pair[0]], traj.tangents[pair[1]]
    return np.array([symplectic_area(x, y) for x, y in zip(a, b)])


def symplectic_residual_series(traj: Trajectory, pair: tuple[int, int] = (0, 1)) -> ResidualSeries:
    """``r_k = omega_{k+1} - omega_k`` for one tangent pair."""
    return ResidualSeries(np.diff(_pair_areas(traj, pair)), traj.grid, "symplectic")


def symplectic_growth(traj: Trajectory, pair: tuple[int, int] = (0, 1)) -> np.ndarray:
    """``omega_k / omega_0`` along the trajectory."""
    w = _pair_areas(traj, pair)
    if w[0] == 0:
        raise ValueError("initial symplectic area is zero")
    return w / w[0]


def energy_series(traj: Trajectory, H: HamiltonianSystem) -> ResidualSeries:
    """``H(z_k) - H(z_0)`` with least-squares trend slope."""
    e = np.array([H.H(z) for z in traj.states])
    return ResidualSeries(e - e[0], traj.grid, "energy")
