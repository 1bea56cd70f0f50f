import numpy as np
import pytest

from dvarint.mechanics import hamiltonian_from_lagrangian, phase_point
from dvarint.models import ModelSpec, make_field, make_mechanics


def test_harmonic_energy():
    _, H = make_mechanics("harmonic", {"omega": 1.0})
    assert H.H(phase_point(0.0, 1.0)) == 0.5
    _, H2 = make_mechanics("harmonic", {"omega": 2.0})
    assert H2.H(phase_point(0.0, 1.0)) == 2.0


def test_pendulum_equilibrium():
    _, H = make_mechanics("pendulum")
    assert H.grad_q(np.zeros(1), np.zeros(1))[0] == 0.0


def test_quartic_gradients_match_fd():
    L, H = make_mechanics("quartic")
    rng = np.random.default_rng(0)
    for q, p in rng.normal(size=(10, 2)):
        e = 1e-6
        fd = (H.eval(np.array([q + e]), np.array([p])) - H.eval(np.array([q - e]), np.array([p]))) / (2 * e)
        assert H.grad_q(np.array([q]), np.array([p]))[0] == pytest.approx(fd, rel=1e-6)


@pytest.mark.parametrize("name", ["harmonic", "pendulum", "quartic"])
def test_legendre_pairs_are_consistent(name):
    L, H = make_mechanics(name)
    tau = 0.1
    rng = np.random.default_rng(1)
    for q0, q1 in rng.normal(size=(10, 2)):
        p = (q1 - q0) / tau
        assert hamiltonian_from_lagrangian(L, [q0], [q1], tau) == pytest.approx(H.H(phase_point(p, q0)), abs=1e-12)


def test_unknown_model_and_parameter():
    with pytest.raises(ValueError, match="unknown model"):
        make_mechanics("kepler")
    with pytest.raises(ValueError, match="no parameter"):
        make_mechanics("pendulum", {"omega": 2.0})
    with pytest.raises(ValueError, match="unknown model"):
        make_field("burgers")
    with pytest.raises(ValueError):
        ModelSpec("kepler")


def test_model_spec_kind():
    assert ModelSpec("harmonic", {"omega": 3.0}).kind == "mechanics"
    assert ModelSpec("sine_gordon_bridges").kind == "field"


def test_sine_gordon_matrices():
    pde = make_field("sine_gordon_bridges").pde
    assert np.array_equal(pde.M, -pde.M.T) and np.array_equal(pde.K, -pde.K.T)
    assert pde.epsilon == 1


def test_sine_gordon_continuum_identity_on_kink():
    """The travelling kink solves u_tt - u_xx = -sin u; its (u, u_t, u_x) solves the Bridges form."""
    pde = make_field("sine_gordon_bridges").pde
    c = 0.6
    g = 1 / np.sqrt(1 - c**2)

    def Z(t, x):
        s = g * (x - c * t)
        e = np.exp(s)
        u = 4 * np.arctan(e)
        ux = 4 * g * e / (1 + e**2)
        return np.array([u, -c * ux, ux])

    e = 1e-5
    for t, x in [(0.0, 0.1), (0.3, -0.5), (1.0, 0.7)]:
        Zt = (Z(t + e, x) - Z(t - e, x)) / (2 * e)
        Zx = (Z(t, x + e) - Z(t, x - e)) / (2 * e)
        res = pde.M @ Zt + pde.epsilon * pde.K @ Zx - pde.grad_S(Z(t, x))
        np.testing.assert_allclose(res, 0.0, atol=1e-8)


def test_linear_wave_hessian_constant():
    pde = make_field("linear_wave_bridges", {"m2": 0.5}).pde
    z1, z2 = np.random.default_rng(2).normal(size=(2, 3))
    np.testing.assert_array_equal(pde.hess(z1), pde.hess(z2))
    np.testing.assert_allclose(pde.grad_S(z1 + z2), pde.grad_S(z1) + pde.grad_S(z2))


def test_nonlinear_wave_representations():
    m = make_field("nonlinear_wave")
    assert m.lagrangian.potential_grad is not None
    assert m.hamiltonian.separable
    e = make_field("nonlinear_wave", {"euclidean": 1})
    assert e.lagrangian.potential_grad is None
