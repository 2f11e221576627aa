"""Minimum-energy coherence control via Pontryagin's principle with state constraints.

The constraint ``alpha <= C^2(rho) <= beta`` enters the Pontryagin Hamiltonian
through a scalar multiplier path ``mu = 2 (mu1 - mu2)`` (Gamkrelidze form).
:func:`sweep` runs the forward-backward fixed-point iteration: integrate the
state, integrate the costate, update the multipliers, move the controls
toward the pointwise minimiser of the Hamiltonian, and repeat until the
iterates stop moving.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .dynamics import (
    AdjointTrajectory,
    ControlGrid,
    GridGenerators,
    NonFiniteIterate,
    StateTrajectory,
    SystemModel,
    integrate_backward,
    integrate_forward,
    lindblad_rhs,
)
from .operators import (
    ConstraintSpec,
    _square,
    coherence_ops,
    coherence_squared,
    commutator,
    dissipator,
    expectation,
    weight_operator,
)

logger = logging.getLogger(__name__)

IMAG_ATOL = 1e-10


class SingularControlDirection(ArithmeticError):
    """The control has (numerically) no first-order effect on C^2 at this state."""


class InfeasibleStart(ValueError):
    """The initial state violates the coherence band."""


def _real(z: complex, what: str, scale: float = 1.0) -> float:
    if abs(z.imag) > IMAG_ATOL * max(1.0, scale):
        raise ArithmeticError(f"{what} has imaginary part {z.imag:.3e}; expected a real value")
    return float(z.real)


# -- pointwise quantities ----------------------------------------------------


def cost(grid: ControlGrid) -> float:
    """Control energy ``sum_m u_m^2 dt``."""
    return float(np.sum(grid.u**2) * grid.dt)


def _costate_weight(rho, pi, mu, pairs):
    return _square(pi) + mu * weight_operator(rho, pairs)


def pontryagin_hamiltonian(model: SystemModel, rho, pi, u: float, mu: float, pairs, t: float) -> float:
    x = _costate_weight(rho, pi, mu, pairs)
    f = lindblad_rhs(model, rho, t, u)
    z = complex(np.trace(x.conj().T @ f)) + u * u
    return _real(z, "Pontryagin Hamiltonian", float(np.abs(x).max() * np.abs(f).max()))


def _control_sensitivity(model, rho, pi, mu, pairs, t) -> float:
    """``dH/du - 2u``: the costate part of the control gradient."""
    rho = _square(rho)
    x = _costate_weight(rho, pi, mu, pairs)
    dfdu = (-1j / model.hbar) * commutator(model.control_operator(t), rho)
    z = complex(np.trace(x.conj().T @ dfdu))
    return _real(z, "control sensitivity", float(np.abs(x).max()))


def stationarity_residual(model: SystemModel, rho, pi, mu: float, pairs, t: float, u: float) -> float:
    """``dH/du`` at ``u``; zero at the pointwise Hamiltonian minimiser."""
    return _control_sensitivity(model, rho, pi, mu, pairs, t) + 2.0 * u


def stationary_control(model: SystemModel, rho, pi, mu: float, pairs, t: float) -> float:
    """Unique minimiser in ``u`` of the Hamiltonian (it is quadratic in ``u``)."""
    return -0.5 * _control_sensitivity(model, rho, pi, mu, pairs, t)


def phi_delta(model: SystemModel, rho, pairs, t: float) -> tuple[float, float]:
    """Split ``dC^2/dt = phi * u + delta`` into control gain and drift."""
    rho = _square(rho)
    hc = model.control_operator(t)
    k = -1j / model.hbar
    lrho = dissipator(model.channel, rho)
    phi = 0j
    delta = 0j
    for d in coherence_ops(pairs, model.dim):
        e = expectation(d, rho).real
        phi += e * expectation(commutator(d, hc), rho)
        delta += e * np.trace(k * commutator(d, model.h0) @ rho + d @ lrho)
    return _real(2 * k * phi, "phi"), _real(2 * delta, "delta")


def boundary_control(model: SystemModel, rho, pairs, t: float, eps_phi: float = 1e-10) -> float:
    """Control that freezes C^2 to first order: solves ``phi * u + delta = 0``."""
    phi, delta = phi_delta(model, rho, pairs, t)
    if abs(phi) < eps_phi:
        raise SingularControlDirection(
            f"|phi| = {abs(phi):.3e} < {eps_phi:.1e} at t = {t}: "
            "the control Hamiltonian does not move the coherence here"
        )
    return -delta / phi


# -- trajectory-wide helpers -------------------------------------------------


def coherence_squared_path(traj: StateTrajectory, pairs) -> np.ndarray:
    ops = coherence_ops(pairs, traj.states.shape[-1])
    e = np.einsum("mij,kji->mk", traj.states, ops).real
    return np.sum(e * e, axis=1)


def control_sensitivities(model: SystemModel, hc, states, costates, mu, pairs) -> np.ndarray:
    """Vectorised ``dH/du - 2u`` over a stack of nodes.

    ``hc`` holds the control envelope sampled at the same nodes.
    """
    ops = coherence_ops(pairs, model.dim)
    e = np.einsum("mij,kji->mk", states, ops).real
    x = costates + np.asarray(mu, dtype=float)[:, None, None] * np.einsum("mk,kij->mij", e, ops)
    dfdu = (-1j / model.hbar) * (hc @ states - states @ hc)
    z = np.einsum("mji,mji->m", x.conj(), dfdu)
    scale = max(1.0, float(np.abs(x).max()))
    if np.max(np.abs(z.imag)) > IMAG_ATOL * scale:
        raise ArithmeticError(f"control sensitivity has imaginary part {np.max(np.abs(z.imag)):.3e}")
    return z.real


def stationary_controls(gens: GridGenerators, traj: StateTrajectory, adj: AdjointTrajectory, mu_path, pairs) -> np.ndarray:
    """Hamiltonian minimiser at the left node of every interval."""
    return -0.5 * control_sensitivities(
        gens.model, gens.hc_nodes[:-1], traj.states[:-1], adj.costates[:-1], mu_path, pairs
    )


def control_gradient(gens: GridGenerators, traj: StateTrajectory, adj: AdjointTrajectory, grid: ControlGrid, mu_path, pairs) -> np.ndarray:
    """``dH/du`` averaged over each interval (trapezoid on its two end nodes).

    Times ``dt``, this approximates the derivative of the augmented cost
    ``J + int mu Tr(W drho/dt) dt`` with respect to the held control ``u_m``.
    """
    model = gens.model
    mu = np.asarray(mu_path, dtype=float)
    g_left = control_sensitivities(model, gens.hc_nodes[:-1], traj.states[:-1], adj.costates[:-1], mu, pairs)
    g_right = control_sensitivities(model, gens.hc_nodes[1:], traj.states[1:], adj.costates[1:], mu, pairs)
    return 0.5 * (g_left + g_right) + 2.0 * grid.u


def hamiltonian_path(model: SystemModel, traj: StateTrajectory, adj: AdjointTrajectory, grid: ControlGrid, mu_path, pairs) -> np.ndarray:
    """Pontryagin Hamiltonian at the left node of every interval."""
    return np.array(
        [
            pontryagin_hamiltonian(model, traj.states[m], adj.costates[m], grid.u[m], mu_path[m], pairs, grid.times[m])
            for m in range(grid.steps)
        ]
    )


# -- multipliers and convergence ---------------------------------------------


@dataclass(frozen=True)
class MultiplierPath:
    """Upper/lower-bound multipliers per interval, with ``mu = 2 (mu1 - mu2)``."""

    mu1: np.ndarray
    mu2: np.ndarray

    def __post_init__(self):
        mu1 = np.array(self.mu1, dtype=float).reshape(-1)
        mu2 = np.array(self.mu2, dtype=float).reshape(-1)
        if mu1.shape != mu2.shape:
            raise ValueError("mu1 and mu2 must have the same length")
        if np.any(mu1 < 0) or np.any(mu2 < 0):
            raise ValueError("multipliers must be non-negative")
        mu1.setflags(write=False)
        mu2.setflags(write=False)
        object.__setattr__(self, "mu1", mu1)
        object.__setattr__(self, "mu2", mu2)

    @classmethod
    def zeros(cls, steps: int) -> "MultiplierPath":
        return cls(np.zeros(steps), np.zeros(steps))

    @property
    def mu(self) -> np.ndarray:
        return 2.0 * (self.mu1 - self.mu2)


@dataclass(frozen=True)
class SolverConfig:
    """Sweep parameters.

    ``boundary_phi_floor`` and ``restoring_rate`` govern the boundary control
    applied while a bound is active: it is skipped where ``|phi|`` is below
    the floor, and it steers C^2 back toward the band at ``restoring_rate``
    (per unit time) if the discrete steps let it slip out.
    """

    constraint: ConstraintSpec
    eta_i: float = 1.0
    eta_d: float = 1.0
    zeta1: float = 0.1
    eps_rho: float = 1e-6
    eps_pi: float = 1e-6
    eps_u: float = 1e-6
    eps_mu: float = 1e-6
    eps: float = 1e-6
    eps_active: float = 1e-4
    eps_phi: float = 1e-10
    max_iters: int = 500
    multiplier_memory: Literal["reset", "warm"] = "reset"
    boundary_phi_floor: float = 3e-3
    restoring_rate: float = 1.0

    def __post_init__(self):
        if not (0 < self.zeta1 <= 1):
            raise ValueError(f"zeta1 must lie in (0, 1], got {self.zeta1}")
        if not (self.eta_i > 0 and self.eta_d > 0):
            raise ValueError("learning rates eta_i and eta_d must be positive")
        for name in ("eps_rho", "eps_pi", "eps_u", "eps_mu", "eps", "eps_active", "eps_phi"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if int(self.max_iters) != self.max_iters or self.max_iters < 0:
            raise ValueError("max_iters must be a non-negative integer")
        if self.multiplier_memory not in ("reset", "warm"):
            raise ValueError(f"multiplier_memory must be 'reset' or 'warm', got {self.multiplier_memory!r}")
        if self.boundary_phi_floor < self.eps_phi:
            raise ValueError("boundary_phi_floor must be at least eps_phi")
        if self.restoring_rate < 0:
            raise ValueError("restoring_rate must be non-negative")

    @property
    def zeta2(self) -> float:
        return 1.0 - self.zeta1


def update_multipliers(coherence_sq_path, prev: MultiplierPath, cfg: SolverConfig) -> MultiplierPath:
    """One pass of the bound-activity multiplier update along the time grid.

    ``coherence_sq_path[m]`` is C^2 at the left node of interval ``m``.
    Interior intervals carry the previous interval's values; an active upper
    bound moves ``mu1`` by ``eta_i`` times the local change of C^2, an active
    lower bound moves ``mu2`` by ``-eta_d`` times it. With ``warm`` memory the
    increments accumulate on top of ``prev``; with ``reset`` they start from 0.
    """
    steps = prev.mu1.size
    c2 = np.asarray(coherence_sq_path, dtype=float)
    if c2.size < steps:
        raise ValueError(f"need {steps} coherence samples, got {c2.size}")
    c2 = c2[:steps]
    alpha, beta = cfg.constraint.alpha, cfg.constraint.beta
    if cfg.multiplier_memory == "warm":
        base1, base2 = prev.mu1, prev.mu2
    else:
        base1 = base2 = np.zeros(steps)
    mu1 = np.empty(steps)
    mu2 = np.empty(steps)
    run1 = run2 = 0.0  # increments accumulated along time
    for m in range(steps):
        dc2 = c2[m] - c2[m - 1] if m > 0 else 0.0
        if c2[m] >= beta - cfg.eps_active:
            run1 += cfg.eta_i * dc2
        elif c2[m] <= alpha + cfg.eps_active:
            run2 -= cfg.eta_d * dc2
        mu1[m] = max(base1[m] + run1, 0.0)
        mu2[m] = max(base2[m] + run2, 0.0)
        run1 = mu1[m] - base1[m]
        run2 = mu2[m] - base2[m]
    return MultiplierPath(mu1, mu2)


@dataclass(frozen=True)
class Iterate:
    states: np.ndarray
    costates: np.ndarray
    u: np.ndarray
    mu: np.ndarray


def convergence_metric(prev: Iterate, curr: Iterate) -> float:
    """Largest entrywise change of state, costate, control or multiplier."""
    return float(
        max(
            np.max(np.abs(curr.states - prev.states)),
            np.max(np.abs(curr.costates - prev.costates)),
            np.max(np.abs(curr.u - prev.u)),
            np.max(np.abs(curr.mu - prev.mu)),
        )
    )


def _converged(prev: Iterate, curr: Iterate, cfg: SolverConfig) -> bool:
    return (
        np.max(np.abs(curr.states - prev.states)) < cfg.eps_rho
        and np.max(np.abs(curr.costates - prev.costates)) < cfg.eps_pi
        and np.max(np.abs(curr.u - prev.u)) < cfg.eps_u
        and np.max(np.abs(curr.mu - prev.mu)) < cfg.eps_mu
        and convergence_metric(prev, curr) < cfg.eps
    )


# -- forward pass with boundary arcs -------------------------------------------


def integrate_forward_bounded(
    gens: GridGenerators,
    rho0,
    grid: ControlGrid,
    cfg: SolverConfig,
) -> tuple[StateTrajectory, np.ndarray, np.ndarray]:
    """Forward RK4 pass that keeps C^2 in the band on active intervals.

    At the left node of each interval, if C^2 sits within ``eps_active`` of a
    bound and the scheduled control would push it out, the control is
    replaced by the boundary control (the smallest change that holds the
    rate of C^2 at its restoring target). That replacement is the minimiser
    of the Hamiltonian over the controls that respect the bound.

    Returns the trajectory, the controls actually applied, and a mask of the
    intervals where the boundary control was used.
    """
    model = gens.model
    n = model.dim
    steps, h = grid.steps, grid.dt
    pairs = cfg.constraint.pairs
    lo_level = cfg.constraint.alpha + cfg.eps_active
    hi_level = cfg.constraint.beta - cfg.eps_active
    dh = coherence_ops(pairs, n).reshape(-1, n * n).conj()  # rows d_a^H
    dh_ctrl = dh @ gens.ctrl_nodes[:-1]
    dh_drift = dh @ gens.drift
    prop = gens.transfers(grid.u, h)
    u = np.array(grid.u, dtype=float)
    active = np.zeros(steps, dtype=bool)
    states = np.empty((steps + 1, n, n), dtype=complex)
    r = np.asarray(rho0, dtype=complex).reshape(-1)
    states[0] = r.reshape(n, n)
    for m in range(steps):
        e = (dh @ r).real
        c2 = e @ e
        step = prop[m]
        if c2 <= lo_level or c2 >= hi_level:
            phi = 2.0 * e @ (dh_ctrl[m] @ r).real
            delta = 2.0 * e @ (dh_drift @ r).real
            level = lo_level if c2 <= lo_level else hi_level
            target = cfg.restoring_rate * (level - c2)
            rate = phi * u[m] + delta
            outward = rate < target if c2 <= lo_level else rate > target
            if outward and abs(phi) >= cfg.boundary_phi_floor:
                u[m] = (target - delta) / phi
                active[m] = True
                step = gens.transfer(m, u[m], h)
        r = step @ r
        x = r.reshape(n, n)
        x = 0.5 * (x + x.conj().T)
        if not np.all(np.isfinite(x)):
            raise NonFiniteIterate("state", m + 1)
        states[m + 1] = x
        r = x.reshape(-1)
    return StateTrajectory(grid.times, states), u, active


# -- the sweep ---------------------------------------------------------------


@dataclass
class SweepResult:
    trajectory: StateTrajectory
    adjoint: AdjointTrajectory
    controls: ControlGrid
    multipliers: MultiplierPath
    cost: float
    coherence_path: np.ndarray
    convergence_history: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    boundary_active: np.ndarray | None = None
    hamiltonian: np.ndarray | None = None


def sweep(model: SystemModel, rho0, grid0: ControlGrid, cfg: SolverConfig, callback=None) -> SweepResult:
    """Forward-backward sweep for the coherence-constrained minimum-energy problem.

    Each iteration: update the multipliers from the current C^2 path,
    integrate the costate, form the Hamiltonian minimiser, blend it with the
    current controls (``zeta1`` / ``zeta2``), and re-integrate the state with
    boundary arcs enforced. Stops when every component of the change between
    consecutive iterates drops below its tolerance, or after ``max_iters``.
    """
    pairs = cfg.constraint.pairs
    rho0 = np.asarray(rho0, dtype=complex)
    c2_0 = coherence_squared(rho0, pairs)
    alpha, beta = cfg.constraint.alpha, cfg.constraint.beta
    if not (alpha <= c2_0 <= beta):
        raise InfeasibleStart(
            f"C^2(rho0) = {c2_0:.6g} lies outside [alpha, beta] = [{alpha:.6g}, {beta:.6g}]"
        )
    gens = GridGenerators.for_grid(model, grid0)
    grid = grid0
    mult = MultiplierPath.zeros(grid.steps)
    active = np.zeros(grid.steps, dtype=bool)
    traj = integrate_forward(model, rho0, grid, gens)
    adj = integrate_backward(model, traj, mult.mu, pairs, grid, gens)
    prev = Iterate(traj.states, adj.costates, grid.u, mult.mu)
    history: list[float] = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        mult = update_multipliers(coherence_squared_path(traj, pairs), mult, cfg)
        adj = integrate_backward(model, traj, mult.mu, pairs, grid, gens)
        u_star = stationary_controls(gens, traj, adj, mult.mu, pairs)
        u_next = cfg.zeta1 * u_star + cfg.zeta2 * grid.u
        if not np.all(np.isfinite(u_next)):
            raise NonFiniteIterate("control", it)
        traj, u_applied, active = integrate_forward_bounded(gens, rho0, grid.with_controls(u_next), cfg)
        grid = grid.with_controls(u_applied)
        adj = integrate_backward(model, traj, mult.mu, pairs, grid, gens)
        curr = Iterate(traj.states, adj.costates, grid.u, mult.mu)
        metric = convergence_metric(prev, curr)
        history.append(metric)
        logger.debug("iteration %d: metric %.3e, %d boundary intervals", it, metric, int(active.sum()))
        if callback is not None:
            callback(it, metric, grid, traj)
        done = _converged(prev, curr, cfg)
        prev = curr
        if done:
            converged = True
            break
    return SweepResult(
        trajectory=traj,
        adjoint=adj,
        controls=grid,
        multipliers=mult,
        cost=cost(grid),
        coherence_path=np.sqrt(coherence_squared_path(traj, pairs)),
        convergence_history=history,
        iterations=it,
        converged=converged,
        boundary_active=active,
        hamiltonian=hamiltonian_path(model, traj, adj, grid, mult.mu, pairs),
    )
