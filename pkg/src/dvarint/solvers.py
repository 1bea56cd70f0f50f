"""Newton iteration shared by the implicit steppers."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

logger = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    """Raised when Newton iteration fails; carries the last residual norm."""

    def __init__(self, message: str, residual_norm: float, iterations: int):
        super().__init__(f"{message} (residual norm {residual_norm:.3e} after {iterations} iterations)")
        self.residual_norm = residual_norm
        self.iterations = iterations


class SingularSystemError(ConvergenceError):
    """Raised when a Newton linear system is singular and inconsistent."""


@dataclass(frozen=True)
class SolverSettings:
    tol: float = 1e-12
    max_iter: int = 50
    fd_step: float = 1e-7
    # lstsq lets rank-deficient but consistent systems through (structural
    # null modes of the box scheme); dense LU is used otherwise.
    least_squares: bool = False


DEFAULT_SETTINGS = SolverSettings()


def fd_jacobian(F: Callable[[np.ndarray], np.ndarray], x: np.ndarray, step: float = 1e-7) -> np.ndarray:
    """Central-difference Jacobian of ``F`` at ``x``."""
    x = np.asarray(x, dtype=float)
    h = step * (1.0 + np.abs(x))
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h[k]
        cols.append((F(x + e) - F(x - e)) / (2 * h[k]))
    return np.column_stack(cols) if cols else np.zeros((0, 0))


def _linear_solve(A, b, least_squares):
    if least_squares:
        sol, _, rank, sv = np.linalg.lstsq(A, b, rcond=None)
        mismatch = np.linalg.norm(A @ sol - b)
        if mismatch > 1e-8 * (1.0 + np.linalg.norm(b)):
            raise SingularSystemError(
                f"inconsistent singular Newton system (rank {rank} of {A.shape[1]}, "
                f"smallest singular value {sv[-1]:.3e})",
                float(np.linalg.norm(b)),
                0,
            )
        return sol
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"singular Newton system: {exc}", float(np.linalg.norm(b)), 0) from exc


def newton(
    F: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    jac: Callable[[np.ndarray], np.ndarray] | None = None,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> np.ndarray:
    """Solve ``F(x) = 0`` from ``x0``; stops once ``||F|| <= settings.tol``.

    Without ``jac`` the Jacobian is formed by central differences.
    """
    x = np.array(x0, dtype=float)
    r = F(x)
    norm = float(np.linalg.norm(r))
    for it in range(settings.max_iter):
        if norm <= settings.tol:
            logger.debug("newton converged in %d iterations (|F| = %.2e)", it, norm)
            return x
        if not np.isfinite(norm):
            break
        A = jac(x) if jac is not None else fd_jacobian(F, x, settings.fd_step)
        try:
            dx = _linear_solve(A, -r, settings.least_squares)
        except SingularSystemError as exc:
            raise SingularSystemError(str(exc).split(" (residual")[0], norm, it) from None
        x = x + dx
        r = F(x)
        norm = float(np.linalg.norm(r))
    if norm <= settings.tol:
        return x
    raise ConvergenceError("Newton iteration did not converge", norm, settings.max_iter)
