"""End-to-end acceptance checks, one test per criterion.

Each test prints a ``[criterion N] PASS|FAIL`` line with the measured numbers
before asserting, so ``pytest -s`` or the captured report shows the outcome
even when everything is green.
"""

from itertools import combinations

import numpy as np
import pytest

from dvarint.cli import main
from dvarint.fieldtheory import (
    box_integrate,
    box_step_row,
    field_canonical_step,
    field_del_step,
    multisymplectic_residual,
    omega_time_totals,
    sine_gordon_pair_row,
)
from dvarint.lattice import (
    Grid1D,
    Grid2D,
    LatticeForm,
    NodeFunction,
    discrete_integral,
    exterior_derivative,
    forward_difference,
    laplacian,
    product_difference,
    wedge,
)
from dvarint.mechanics import correction_term, integrate
from dvarint.models import make_field, make_mechanics
from dvarint.solvers import SolverSettings
from dvarint.verify import (
    box_form,
    canonical_form,
    el_form_value,
    energy_series,
    exact_form,
    fourth_order_form,
    midpoint_form,
    sample_identity_residuals,
    symplectic_growth,
    symplectic_residual_series,
)

from test_fieldtheory import dense_box_oracle, quadratic_system


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, detail

    return emit


def random_form(grid, degree, rng):
    return LatticeForm(grid, degree, {I: rng.normal(size=grid.shape) for I in combinations(range(grid.ndim), degree)})


def negate(form):
    return LatticeForm(form.grid, form.degree, {I: -c for I, c in form.coefficients.items()}, form.shape)


def common_max_diff(a, b):
    shape = tuple(min(x, y) for x, y in zip(a.shape, b.shape))
    window = tuple(slice(0, s) for s in shape)
    return max(float(np.max(np.abs(a[I][window] - b[I][window]), initial=0.0)) for I in a.coefficients)


def test_criterion_1_nilpotency_and_leibniz(report):
    rng = np.random.default_rng(2024)
    grid = Grid2D((1.0, 1.0), (16, 16), (True, True))
    d2 = leib = 0.0
    for k in range(100):
        p, q = [(0, 0), (0, 1), (1, 0)][k % 3]
        a, b = random_form(grid, p, rng), random_form(grid, q, rng)
        d2 = max(d2, exterior_derivative(exterior_derivative(random_form(grid, k % 2, rng))).max_abs())
        second = wedge(a, exterior_derivative(b))
        rhs = wedge(exterior_derivative(a), b) + (negate(second) if p % 2 else second)
        leib = max(leib, common_max_diff(exterior_derivative(wedge(a, b)), rhs))
    fam = 0.0
    line = Grid1D(1.0, 32)
    for a in rng.uniform(0, 1, 20):
        f, g = NodeFunction(line, rng.normal(size=32)), NodeFunction(line, rng.normal(size=32))
        fam = max(fam, np.max(np.abs(product_difference(f, g, a).values - forward_difference(f * g).values)))
    u = rng.normal(size=grid.shape)
    stencil = sum(np.roll(u, -1, ax) - 2 * u + np.roll(u, 1, ax) for ax in (0, 1))
    lap = np.max(np.abs(laplacian(NodeFunction(grid, u)).values - stencil))
    worst = max(d2, leib, fam, lap)
    report(1, worst <= 1e-13, f"d^2={d2:.2e} leibniz={leib:.2e} a-family={fam:.2e} laplacian={lap:.2e}")


def test_criterion_2_telescoping(report):
    rng = np.random.default_rng(7)
    bad = 0
    for _ in range(100):
        n = int(rng.integers(1, 200))
        v = rng.normal(scale=10.0 ** rng.integers(-3, 6), size=n)
        bad += discrete_integral(NodeFunction(Grid1D(float(rng.uniform(0.01, 2)), n), v)) != v[-1] - v[0]
    report(2, bad == 0, f"{bad}/100 inexact")


def test_criterion_3_lagrangian_hamiltonian_agree(report):
    L, H = make_mechanics("pendulum")
    z0 = np.array([0.1, 1.0])
    a = integrate("del", L, z0, 0.05, 1000).states
    b = integrate("canonical", H, z0, 0.05, 1000).states
    mech = float(np.max(np.abs(a - b)))

    model = make_field("nonlinear_wave")
    N, tau, h = 64, 0.1, 0.25
    x = h * np.arange(N)
    u0 = np.sin(2 * np.pi * x / (N * h)) + 0.3 * np.cos(6 * np.pi * x / (N * h))
    prev, cur = u0.copy(), u0.copy()
    u, pi = u0.copy(), np.zeros(N)
    field = 0.0
    for _ in range(200):
        prev, cur = cur, field_del_step(model.lagrangian, prev, cur, tau, h)
        u, pi = field_canonical_step(model.hamiltonian, u, pi, tau, h)
        field = max(field, float(np.max(np.abs(u - cur))))
    report(3, mech <= 1e-12 and field <= 1e-11, f"mechanics={mech:.2e} field={field:.2e}")


def test_criterion_4_symplecticity_on_solutions(report):
    _, H = make_mechanics("pendulum")
    settings = SolverSettings(tol=1e-12)
    worst = {}
    for scheme in ("midpoint", "canonical"):
        traj = integrate(scheme, H, np.array([0.0, 2.0]), 0.05, 10_000, n_tangents=4, rng=np.random.default_rng(1), settings=settings)
        worst[scheme] = max(symplectic_residual_series(traj, pair).max for pair in [(0, 1), (2, 3)])
    ok = max(worst.values()) <= 1e-10
    report(4, ok, " ".join(f"{k}={v:.2e}" for k, v in worst.items()))


def test_criterion_5_identity_in_function_space(report):
    rng = np.random.default_rng(11)
    pend, osc = make_mechanics("pendulum")[1], make_mechanics("harmonic")[1]
    fd = max(
        float(np.max(np.abs(sample_identity_residuals(form, rng, 100))))
        for form in (midpoint_form(pend, 0.1), canonical_form(pend, 0.1), fourth_order_form(pend, 0.1))
    )
    analytic = max(
        float(np.max(np.abs(sample_identity_residuals(form, rng, 100, mode="analytic"))))
        for form in (midpoint_form(osc, 0.1), canonical_form(osc, 0.1))
    )
    report(5, fd <= 5e-6 and analytic <= 1e-12, f"fd={fd:.2e} analytic={analytic:.2e}")


def test_criterion_6_explicit_euler_area_growth(report):
    tau = 0.1
    traj = integrate("explicit_euler", make_mechanics("harmonic")[1], np.array([0.0, 1.0]), tau, 100, n_tangents=2)
    growth = symplectic_growth(traj)
    rel = float(np.max(np.abs(growth / (1 + tau**2) ** np.arange(101) - 1)))
    report(6, rel <= 1e-8, f"max relative deviation from (1+tau^2)^k = {rel:.2e}")


def test_criterion_7_orders_and_exact_form(report, tmp_path):
    orders = {}
    for scheme in ("midpoint", "order4"):
        out = tmp_path / f"{scheme}.csv"
        assert main(["order", "--scheme", scheme, "--taus", "0.2,0.1,0.05,0.025", "--time", "10", "--output", str(out)]) == 0
        orders[scheme] = [float(r.split(",")[3]) for r in out.read_text().strip().split("\n")[2:]]
    H, tau = make_mechanics("pendulum")[1], 0.2
    shift = exact_form(lambda w: tau**2 / 24 * correction_term(H, 0.5 * (w[:2] + w[2:])), 4)
    rng = np.random.default_rng(13)
    gap = 0.0
    for _ in range(50):
        w, xi = rng.normal(size=(2, 4))
        diff = el_form_value(fourth_order_form(H, tau), w, xi) - el_form_value(midpoint_form(H, tau), w, xi)
        gap = max(gap, abs(diff - el_form_value(shift, w, xi)))
    ok = all(1.9 <= o <= 2.1 for o in orders["midpoint"]) and all(3.7 <= o <= 4.3 for o in orders["order4"]) and gap <= 1e-8
    report(7, ok, f"midpoint orders={np.round(orders['midpoint'], 4)} order4 orders={np.round(orders['order4'], 4)} exact-form gap={gap:.2e}")


def test_criterion_8_multisymplectic_box_run(report):
    sys_ = make_field("sine_gordon_bridges").pde
    row, h = sine_gordon_pair_row(64, 40.0, speed=0.5)
    tau = h / 2
    t0 = np.random.default_rng(8).normal(size=(2, 64, 3))
    run = box_integrate(sys_, row, tau, h, 200, t0)
    res = multisymplectic_residual(sys_, run.tangents[0], run.tangents[1], tau, h).max
    totals = omega_time_totals(sys_, run.tangents[0], run.tangents[1])
    drift = float(np.max(np.abs(np.diff(totals))))
    report(8, res <= 1e-8 and drift <= 1e-10, f"multisymplectic residual={res:.2e} omega0 row-sum step change={drift:.2e}")


def test_criterion_9_field_identity(report):
    rng = np.random.default_rng(9)
    sg = make_field("sine_gordon_bridges").pde
    worst = max(
        float(np.max(np.abs(sample_identity_residuals(box_form(sys_, 0.2, 0.4), rng, 100))))
        for sys_ in (sg, make_field("linear_wave_bridges").pde)
    )
    report(9, worst <= 5e-6, f"max identity residual={worst:.2e}")


def test_criterion_10_box_dense_oracle(report):
    sys_, A, c = quadratic_system()
    rng = np.random.default_rng(10)
    worst = 0.0
    for tau, h in [(0.3, 0.5), (0.1, 0.2), (0.5, 0.25)]:
        Z0 = rng.normal(size=(4, 2))
        A1, rhs = dense_box_oracle(sys_.M, sys_.K, 1, A, c, Z0, tau, h)
        oracle = np.linalg.solve(A1, rhs).reshape(4, 2)
        worst = max(worst, float(np.max(np.abs(box_step_row(sys_, Z0, tau, h) - oracle))))
    report(10, worst <= 1e-12, f"max deviation from dense solve={worst:.2e}")


def test_criterion_11_energy_behaviour(report):
    osc, pend = make_mechanics("harmonic")[1], make_mechanics("pendulum")[1]
    z0 = np.array([0.0, 2.0])
    quad = integrate("midpoint", osc, z0, 0.1, 1000)
    per_step = float(np.max(np.abs(np.diff([osc.H(z) for z in quad.states]))))
    mid = energy_series(integrate("midpoint", pend, z0, 0.05, 10_000), pend)
    euler = energy_series(integrate("explicit_euler", pend, z0, 0.05, 10_000), pend)
    ok = per_step <= 1e-12 and abs(mid.slope) <= 1e-8 and euler.slope > 0
    report(11, ok, f"quadratic dH/step={per_step:.2e} midpoint slope={mid.slope:.2e} (oscillation {mid.max:.2e}) euler slope={euler.slope:.2e}")


def test_criterion_12_cli_contract(report, tmp_path):
    same = True
    for fmt in ("csv", "json"):
        for cmd in (["run", "--model", "pendulum", "--tangents", "4"], ["residuals", "--model", "quartic"]):
            outs = []
            for k in range(2):
                path = tmp_path / f"{cmd[0]}{fmt}{k}"
                assert main([*cmd, "--seed", "5", "--steps", "50", "--format", fmt, "--output", str(path)]) == 0
                outs.append(path.read_bytes())
            same &= outs[0] == outs[1]
    codes = {
        "bad pairing": main(["run", "--model", "harmonic", "--scheme", "box", "--output", str(tmp_path / "a")]),
        "newton failure": main(["run", "--model", "pendulum", "--tau", "1e6", "--output", str(tmp_path / "b")]),
        "unwritable": main(["run", "--output", str(tmp_path / "no" / "c")]),
        "ok": main(["run", "--output", str(tmp_path / "d")]),
    }
    expected = {"bad pairing": 1, "newton failure": 2, "unwritable": 3, "ok": 0}
    report(12, same and codes == expected, f"byte-identical={same} exit codes={codes}")
