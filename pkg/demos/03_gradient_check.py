"""
Checking the costate against finite differences
===============================================

The control gradient built from the costate should match a brute-force
finite difference of the discretised cost. Take a driven qubit, ten control
intervals and a constant multiplier mu; with mu fixed, the multiplier term of
the Hamiltonian integrates to (mu / 2) C^2(tf) plus a constant.
"""

import numpy as np

from coherence_control import ControlGrid, DecoherenceChannel, SystemModel, integrate_backward, integrate_forward
from coherence_control.dynamics import GridGenerators
from coherence_control.pmp import coherence_squared_path, control_gradient, cost

sx = np.array([[0, 1], [1, 0]], dtype=complex)
sz = np.diag([1.0, -1.0]).astype(complex)
lower = np.array([[0, 1], [0, 0]], dtype=complex)

model = SystemModel(
    0.5 * sz,
    DecoherenceChannel(np.array([lower, sz]), [0.2, 0.05]),
    lambda t: np.cos(0.7 * t) * sx,
)
rho0 = np.array([[0.6, 0.2 - 0.1j], [0.2 + 0.1j, 0.4]])
pairs = [(0, 1)]
rng = np.random.default_rng(0)


def compare(T, mu, steps=10):
    grid = ControlGrid(0, T, rng.normal(scale=0.5, size=steps))
    mu_path = np.full(steps, mu)

    def j_aug(u):
        g = grid.with_controls(u)
        return cost(g) + 0.5 * mu * coherence_squared_path(integrate_forward(model, rho0, g), pairs)[-1]

    gens = GridGenerators.for_grid(model, grid)
    traj = integrate_forward(model, rho0, grid, gens)
    adj = integrate_backward(model, traj, mu_path, pairs, grid, gens)
    grad = grid.dt * control_gradient(gens, traj, adj, grid, mu_path, pairs)
    h = 1e-6
    fd = np.array([(j_aug(grid.u + h * e) - j_aug(grid.u - h * e)) / (2 * h) for e in np.eye(steps)])
    return grad, fd


grad, fd = compare(2.0, 0.8)
print(" m    costate      finite diff")
for m, (a, b) in enumerate(zip(grad, fd)):
    print(f"{m:2d}  {a:+.6e}  {b:+.6e}")

# The mismatch is discretisation error: it shrinks roughly as dt^2.
for T in (2.0, 1.0, 0.5):
    grad, fd = compare(T, 0.8)
    print(f"dt = {T / 10:.3f}   max error / max gradient = {np.max(np.abs(grad - fd)) / np.max(np.abs(fd)):.2e}")
