"""The ten acceptance criteria, each at its stated tolerance.

Every test records a one-line verdict; the lines are printed together at the
end of the session (see ``pytest_terminal_summary`` in conftest.py).
"""
import math

import numpy as np
import pytest

from conftest import ACCEPTANCE, TOY_RHO0, toy_qubit
from coherence_control.dynamics import ControlGrid, GridGenerators, integrate_backward, integrate_forward
from coherence_control.models import DEFAULT_RHO0, QutritParams, build_qutrit, paper_defaults, qutrit_channel
from coherence_control.operators import (
    DecoherenceChannel,
    coherence,
    hermiticity_error,
    random_density_matrix,
    random_hermitian,
    unital_defect,
)
from coherence_control.pmp import (
    SingularControlDirection,
    boundary_control,
    coherence_squared_path,
    control_gradient,
    cost,
    phi_delta,
    pontryagin_hamiltonian,
    stationarity_residual,
    stationary_control,
    sweep,
)

P01 = [(0, 1)]


def record(n, label, ok, detail):
    ACCEPTANCE[n] = (label, bool(ok), detail)
    print(f"[{'PASS' if ok else 'FAIL'}] {n}. {label}: {detail}")
    assert ok, f"criterion {n} ({label}) failed: {detail}"


@pytest.fixture(scope="module")
def model():
    return build_qutrit(QutritParams())


@pytest.fixture(scope="module")
def free_final(model):
    traj = integrate_forward(model, DEFAULT_RHO0, ControlGrid.constant(0, 20, 1000))
    return traj


def test_1_initial_coherence():
    c0 = coherence(DEFAULT_RHO0, P01)
    record(1, "initial coherence", abs(c0 - 0.5515) <= 5e-4, f"C(rho0) = {c0:.6f}")


def test_2_free_decay(free_final):
    c0 = coherence(DEFAULT_RHO0, P01)
    ratio = coherence(free_final.states[-1], P01) / c0
    err = abs(ratio - math.exp(-0.2))
    record(2, "free-decay oracle", err <= 2e-3, f"C(20)/C(0) = {ratio:.9f}, |ratio - e^-0.2| = {err:.2e}")


def test_3_trace_and_hermiticity(free_final, model):
    const = integrate_forward(model, DEFAULT_RHO0, ControlGrid.constant(0, 20, 1000, 0.1))
    trace_err = max(
        np.max(np.abs(np.trace(t.states, axis1=1, axis2=2) - 1)) for t in (free_final, const)
    )
    herm_err = max(hermiticity_error(r) for t in (free_final, const) for r in t.states)
    record(
        3,
        "trace/Hermiticity conservation",
        trace_err <= 1e-6 and herm_err <= 1e-10,
        f"max |Tr - 1| = {trace_err:.2e}, max Hermiticity drift = {herm_err:.2e}",
    )


def test_4_non_unitality():
    defect = unital_defect(qutrit_channel(QutritParams()))
    err = np.max(np.abs(defect - np.diag([0.1, 0.001, -0.101])))
    rng = np.random.default_rng(4)
    herm = DecoherenceChannel(np.array([random_hermitian(3, rng) for _ in range(3)]), [0.1, 0.2, 0.3])
    herm_defect = np.max(np.abs(unital_defect(herm)))
    record(
        4,
        "non-unital qutrit channel",
        err <= 1e-14 and np.max(np.abs(defect)) > 0 and herm_defect <= 1e-14,
        f"|defect - diag(0.1, 0.001, -0.101)| = {err:.1e}, Hermitian-channel defect = {herm_defect:.1e}",
    )


def test_5_convexity(model):
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(100):
        rho, pi = random_density_matrix(3, rng), random_hermitian(3, rng)
        mu, t, u = rng.normal(scale=3), rng.uniform(0, 20), rng.normal()
        h = 1.0
        H = [pontryagin_hamiltonian(model, rho, pi, u + s * h, mu, P01, t) for s in (-1, 0, 1)]
        worst = max(worst, abs((H[0] - 2 * H[1] + H[2]) / h**2 - 2))
    record(5, "Hamiltonian convexity", worst <= 1e-10, f"max |second difference - 2| = {worst:.1e} over 100 tuples")


def test_6_stationarity(model):
    rng = np.random.default_rng(6)
    fd_err = zero_err = 0.0
    for _ in range(100):
        rho, pi = random_density_matrix(3, rng), random_hermitian(3, rng)
        mu, t, u = rng.normal(scale=3), rng.uniform(0, 20), rng.normal()
        h = 1e-4
        fd = (
            pontryagin_hamiltonian(model, rho, pi, u + h, mu, P01, t)
            - pontryagin_hamiltonian(model, rho, pi, u - h, mu, P01, t)
        ) / (2 * h)
        fd_err = max(fd_err, abs(stationarity_residual(model, rho, pi, mu, P01, t, u) - fd))
        us = stationary_control(model, rho, pi, mu, P01, t)
        zero_err = max(zero_err, abs(stationarity_residual(model, rho, pi, mu, P01, t, us)))
    record(
        6,
        "stationarity consistency",
        fd_err <= 1e-8 and zero_err <= 1e-12,
        f"max |residual - FD| = {fd_err:.1e}, max |residual(u*)| = {zero_err:.1e}",
    )


def _toy_gradient(mu):
    model = toy_qubit()
    grid = ControlGrid(0, 2, np.random.default_rng(7).normal(scale=0.5, size=10))
    mu_path = np.full(10, mu)

    def j_aug(u):
        g = grid.with_controls(u)
        return cost(g) + 0.5 * mu * coherence_squared_path(integrate_forward(model, TOY_RHO0, g), P01)[-1]

    gens = GridGenerators.for_grid(model, grid)
    traj = integrate_forward(model, TOY_RHO0, grid, gens)
    adj = integrate_backward(model, traj, mu_path, P01, grid, gens)
    adjoint = grid.dt * control_gradient(gens, traj, adj, grid, mu_path, P01)
    h = 1e-6
    fd = np.array([(j_aug(grid.u + h * e) - j_aug(grid.u - h * e)) / (2 * h) for e in np.eye(10)])
    return np.max(np.abs(adjoint - fd)) / np.max(np.abs(fd))


def test_7_adjoint_gradient():
    err0 = _toy_gradient(0.0)
    err_mu = _toy_gradient(0.8)
    record(
        7,
        "adjoint gradient check",
        err0 <= 1e-2 and err_mu <= 1e-2,
        f"relative error {err0:.1e} (mu = 0), {err_mu:.1e} (mu = 0.8)",
    )


def test_8_feasibility_identities(model):
    grid = ControlGrid.constant(0, 20, 1000, 0.1)
    traj = integrate_forward(model, DEFAULT_RHO0, grid)
    c2 = coherence_squared_path(traj, P01)
    fd = (c2[2:] - c2[:-2]) / (2 * grid.dt)
    pd = np.array([phi_delta(model, r, P01, t) for r, t in zip(traj.states[1:-1], grid.times[1:-1])])
    rate_err = np.max(np.abs(fd - (pd[:, 0] * 0.1 + pd[:, 1])))

    rng = np.random.default_rng(8)
    bc_err = 0.0
    for _ in range(50):
        rho, t = random_density_matrix(3, rng), rng.uniform(0, 20)
        phi, delta = phi_delta(model, rho, P01, t)
        bc_err = max(bc_err, abs(phi * boundary_control(model, rho, P01, t) + delta))
    try:
        boundary_control(model, np.diag([0.3, 0.6, 0.1]), P01, 1.0)
        singular = False
    except SingularControlDirection:
        singular = True
    record(
        8,
        "feasibility identities",
        rate_err <= 1e-4 and bc_err <= 1e-12 and singular,
        f"max |FD dC^2/dt - (phi u + delta)| = {rate_err:.1e}, max |phi u_b + delta| = {bc_err:.1e}, "
        f"diagonal state singular: {singular}",
    )


def test_9_constrained_solve():
    cfg = paper_defaults()
    res = sweep(cfg.model(), np.asarray(cfg.rho0), cfg.grid.control_grid(), cfg.solver)
    c = res.coherence_path
    in_band = np.all(c >= 0.550 - 1e-3) and np.all(c <= 0.553 + 1e-3)
    pi_zero = bool(np.all(res.adjoint.costates[-1] == 0))
    hist = res.convergence_history
    decreasing = hist[-1] < hist[0]
    record(
        9,
        "constrained solve",
        res.converged and in_band and pi_zero and decreasing and math.isfinite(res.cost),
        f"converged in {res.iterations} iterations, C in [{c.min():.5f}, {c.max():.5f}], "
        f"pi(tf) = 0: {pi_zero}, metric {hist[0]:.2e} -> {hist[-1]:.2e}, J = {res.cost:.4f}",
    )


def test_10_integrator_order(model, free_final):
    fine = integrate_forward(model, DEFAULT_RHO0, ControlGrid.constant(0, 20, 2000))
    diff = abs(coherence(fine.states[-1], P01) - coherence(free_final.states[-1], P01))
    record(10, "integrator order", diff <= 1e-6, f"|C_2000(20) - C_1000(20)| = {diff:.1e}")
