"""Benchmark systems: one-degree-of-freedom mechanics and 1+1 field models.

Parameter keys are part of the config-file contract:

============================  =====================================
model                         parameters (defaults)
============================  =====================================
``harmonic``                  ``omega`` (1.0)
``pendulum``                  none
``quartic``                   none
``nonlinear_wave``            ``m2`` (1.0), ``lam`` (1.0), ``euclidean`` (0)
``sine_gordon_bridges``       none
``linear_wave_bridges``       ``m2`` (1.0)
============================  =====================================
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .fieldtheory import DiscreteFieldHamiltonian, DiscreteFieldLagrangian, HamiltonianPDESystem
from .mechanics import DiscreteLagrangian, HamiltonianSystem

MECHANICS_MODELS = {"harmonic": {"omega": 1.0}, "pendulum": {}, "quartic": {}}
FIELD_MODELS = {
    "nonlinear_wave": {"m2": 1.0, "lam": 1.0, "euclidean": 0.0},
    "sine_gordon_bridges": {},
    "linear_wave_bridges": {"m2": 1.0},
}


def _resolve(name: str, params: dict | None, registry: dict) -> dict[str, float]:
    if name not in registry:
        raise ValueError(f"unknown model {name!r}; expected one of {sorted(registry)}")
    params = dict(params or {})
    unknown = set(params) - set(registry[name])
    if unknown:
        raise ValueError(f"model {name!r} takes no parameter(s) {sorted(unknown)}")
    out = dict(registry[name])
    out.update({k: float(v) for k, v in params.items()})
    return out


@dataclass(frozen=True)
class ModelSpec:
    name: str
    parameters: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.name in MECHANICS_MODELS:
            _resolve(self.name, self.parameters, MECHANICS_MODELS)
        elif self.name in FIELD_MODELS:
            _resolve(self.name, self.parameters, FIELD_MODELS)
        else:
            raise ValueError(f"unknown model {self.name!r}")

    @property
    def kind(self) -> str:
        return "mechanics" if self.name in MECHANICS_MODELS else "field"


def _potential(name: str, p: dict[str, float]) -> tuple[Callable, Callable, Callable]:
    if name == "harmonic":
        w2 = p["omega"] ** 2
        return (lambda q: 0.5 * w2 * q @ q), (lambda q: w2 * q), (lambda q: w2 * np.eye(q.size))
    if name == "pendulum":
        return (lambda q: -np.sum(np.cos(q))), np.sin, (lambda q: np.diag(np.cos(q)))
    return (lambda q: 0.25 * np.sum(q**4)), (lambda q: q**3), (lambda q: np.diag(3 * q**2))


def make_mechanics(name: str, params: dict | None = None) -> tuple[DiscreteLagrangian, HamiltonianSystem]:
    """``L_D = v^2/2 - V(q)`` and ``H = p^2/2 + V(q)`` for one degree of freedom."""
    p = _resolve(name, params, MECHANICS_MODELS)
    V, dV, d2V = _potential(name, p)
    L = DiscreteLagrangian(
        dim=1,
        eval=lambda q, v: float(0.5 * v @ v - V(q)),
        grad_q=lambda q, v: -dV(q),
        grad_v=lambda q, v: np.array(v, dtype=float),
        potential_grad=dV,
    )

    def hessian(q, p_):
        n = q.size
        return np.block([[np.eye(n), np.zeros((n, n))], [np.zeros((n, n)), d2V(q)]])

    H = HamiltonianSystem(
        dim=1,
        eval=lambda q, p_: float(0.5 * p_ @ p_ + V(q)),
        grad_q=lambda q, p_: dV(q),
        grad_p=lambda q, p_: np.array(p_, dtype=float),
        hessian=hessian,
        separable=True,
    )
    return L, H


@dataclass(frozen=True)
class FieldModel:
    """Whatever representations a field model provides (others are ``None``)."""

    name: str
    lagrangian: DiscreteFieldLagrangian | None = None
    hamiltonian: DiscreteFieldHamiltonian | None = None
    pde: HamiltonianPDESystem | None = None
    potential: Callable[[np.ndarray], np.ndarray] | None = None


def make_field(name: str, params: dict | None = None) -> FieldModel:
    p = _resolve(name, params, FIELD_MODELS)
    if name == "nonlinear_wave":
        m2, lam = p["m2"], p["lam"]
        V = lambda u: 0.5 * m2 * u**2 + 0.25 * lam * u**4  # noqa: E731
        dV = lambda u: m2 * u + lam * u**3  # noqa: E731
        if p["euclidean"]:
            # Both difference slots enter with a plus sign; verification only.
            lag = DiscreteFieldLagrangian(
                eval=lambda u, a, b: 0.5 * a**2 + 0.5 * b**2 - V(u),
                d_u=lambda u, a, b: -dV(u),
                d_vt=lambda u, a, b: a,
                d_vx=lambda u, a, b: b,
            )
        else:
            lag = DiscreteFieldLagrangian(
                eval=lambda u, a, b: 0.5 * a**2 - 0.5 * b**2 - V(u),
                d_u=lambda u, a, b: -dV(u),
                d_vt=lambda u, a, b: a,
                d_vx=lambda u, a, b: -b,
                potential_grad=dV,
            )
        ham = DiscreteFieldHamiltonian(
            eval=lambda u, pi, ux: 0.5 * pi**2 + 0.5 * ux**2 + V(u),
            d_u=lambda u, pi, ux: dV(u),
            d_pi=lambda u, pi, ux: pi,
            d_ux=lambda u, pi, ux: ux,
            separable=True,
        )
        return FieldModel(name, lag, ham, None, V)

    # Bridges form for Z = (u, v, w) with v = u_t, w = u_x:
    #   row 0: -v_t + w_x = dS/du
    #   row 1:  u_t       = dS/dv = v
    #   row 2: -u_x       = dS/dw = -w
    # so u_tt - u_xx = -dS/du; sine-Gordon has dS/du = sin u.
    M = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    K = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
    if name == "sine_gordon_bridges":
        def S(Z):
            Z = np.asarray(Z)
            return 0.5 * (Z[..., 1] ** 2 - Z[..., 2] ** 2) - np.cos(Z[..., 0])

        def grad_S(Z):
            Z = np.asarray(Z)
            return np.stack([np.sin(Z[..., 0]), Z[..., 1], -Z[..., 2]], axis=-1)

        def hessian_S(Z):
            Z = np.asarray(Z)
            out = np.zeros((*Z.shape[:-1], 3, 3))
            out[..., 0, 0] = np.cos(Z[..., 0])
            out[..., 1, 1] = 1.0
            out[..., 2, 2] = -1.0
            return out

        return FieldModel(name, pde=HamiltonianPDESystem(3, M, K, 1, S, grad_S, hessian_S), potential=lambda u: 1.0 - np.cos(u))

    m2 = p["m2"]
    A = np.diag([m2, 1.0, -1.0])

    def S_lin(Z):
        Z = np.asarray(Z)
        return 0.5 * np.einsum("...a,ab,...b->...", Z, A, Z)

    return FieldModel(
        name,
        pde=HamiltonianPDESystem(
            3, M, K, 1, S_lin, lambda Z: np.asarray(Z) @ A, lambda Z: np.broadcast_to(A, (*np.shape(Z)[:-1], 3, 3)).copy()
        ),
        potential=lambda u: 0.5 * m2 * u**2,
    )
