"""Lindblad dynamics, the adjoint generator, and fixed-step RK4 sweeps.

Pointwise right-hand sides (:func:`lindblad_rhs`, :func:`chi`,
:func:`adjoint_rhs`) work directly on matrices. The integrators use the
same generators in superoperator form (row-major ``vec``) and build all RK4
transfer matrices of a grid in one batched pass, which is what keeps a
few hundred forward-backward sweeps affordable.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .operators import (
    DecoherenceChannel,
    DimensionError,
    _square,
    coherence_ops,
    commutator,
    dagger,
    dissipator,
    dissipator_l0,
    expectation,
    hermitian_part,
    hermiticity_error,
)


class NonFiniteIterate(FloatingPointError):
    """A state or costate became NaN/inf during integration."""

    def __init__(self, what: str, step: int):
        super().__init__(f"non-finite {what} encountered at step {step}")
        self.step = step


def _zero_envelope(dim):
    z = np.zeros((dim, dim), dtype=complex)
    return lambda t: z


@dataclass(frozen=True)
class SystemModel:
    """Drift Hamiltonian, control envelope ``H_c(t)`` and dissipation.

    The full Hamiltonian is ``H(t) = h0 + u(t) * hc_envelope(t)``.
    """

    h0: np.ndarray
    channel: DecoherenceChannel
    hc_envelope: Callable[[float], np.ndarray] | None = None
    hbar: float = 1.0

    def __post_init__(self):
        h0 = _square(self.h0, "h0").copy()
        if hermiticity_error(h0) > 1e-12:
            raise ValueError("drift Hamiltonian must be Hermitian")
        if self.channel.dim != h0.shape[0]:
            raise DimensionError(
                f"channel acts on dimension {self.channel.dim}, Hamiltonian on {h0.shape[0]}"
            )
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")
        h0.setflags(write=False)
        object.__setattr__(self, "h0", h0)
        if self.hc_envelope is None:
            object.__setattr__(self, "hc_envelope", _zero_envelope(h0.shape[0]))

    @property
    def dim(self) -> int:
        return self.h0.shape[0]

    def control_operator(self, t: float) -> np.ndarray:
        hc = np.asarray(self.hc_envelope(t), dtype=complex)
        if hc.shape != self.h0.shape:
            raise DimensionError(f"hc_envelope returned shape {hc.shape}, expected {self.h0.shape}")
        return hc


@dataclass(frozen=True)
class ControlGrid:
    """Uniform grid on ``[t0, tf]`` with one held control sample per interval."""

    t0: float
    tf: float
    u: np.ndarray

    def __post_init__(self):
        u = np.array(self.u, dtype=float).reshape(-1)
        if u.size < 1:
            raise ValueError("control grid needs at least one interval")
        if not self.tf > self.t0:
            raise ValueError(f"need tf > t0, got t0={self.t0}, tf={self.tf}")
        if not np.all(np.isfinite(u)):
            raise ValueError("control samples must be finite")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)

    @classmethod
    def constant(cls, t0: float, tf: float, steps: int, value: float = 0.0) -> "ControlGrid":
        return cls(t0, tf, np.full(int(steps), float(value)))

    @property
    def steps(self) -> int:
        return self.u.size

    @property
    def dt(self) -> float:
        return (self.tf - self.t0) / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t0, self.tf, self.steps + 1)

    def with_controls(self, u) -> "ControlGrid":
        return replace(self, u=u)


@dataclass(frozen=True)
class StateTrajectory:
    times: np.ndarray
    states: np.ndarray  # (steps + 1, N, N)

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class AdjointTrajectory:
    times: np.ndarray
    costates: np.ndarray  # (steps + 1, N, N), costates[-1] == 0

    def __len__(self):
        return len(self.times)


# -- pointwise right-hand sides ---------------------------------------------


def hamiltonian(model: SystemModel, t: float, u: float) -> np.ndarray:
    return model.h0 + u * model.control_operator(t)


def lindblad_rhs(model: SystemModel, rho, t: float, u: float) -> np.ndarray:
    rho = _square(rho)
    h = hamiltonian(model, t, u)
    return (-1j / model.hbar) * commutator(h, rho) + dissipator(model.channel, rho)


def chi(model: SystemModel, phi, t: float, u: float) -> np.ndarray:
    """Heisenberg-picture generator: the Hilbert-Schmidt adjoint of :func:`lindblad_rhs`."""
    phi = _square(phi)
    h = hamiltonian(model, t, u)
    return (
        (-1j / model.hbar) * commutator(phi, h)
        + dissipator(model.channel, phi)
        + dissipator_l0(model.channel, phi)
    )


def adjoint_rhs(model: SystemModel, pi, rho, mu: float, pairs, t: float, u: float) -> np.ndarray:
    """``d pi / dt = -dH/d rho`` for the constraint-extended Pontryagin Hamiltonian."""
    pi, rho = _square(pi), _square(rho)
    grad = chi(model, dagger(pi), t, u)
    if mu != 0.0:
        for d in coherence_ops(pairs, model.dim):
            cd = chi(model, dagger(d), t, u)
            grad = grad + mu * (d * expectation(cd, rho) + expectation(d, rho) * cd)
    return -grad


# -- superoperator form ------------------------------------------------------


def commutator_superop(h: np.ndarray) -> np.ndarray:
    """Matrix of ``X -> [h, X]`` acting on row-major ``vec(X)``; batched over leading axes."""
    h = np.asarray(h, dtype=complex)
    n = h.shape[-1]
    eye = np.eye(n)
    left = np.einsum("...ij,kl->...ikjl", h, eye)
    right = np.einsum("ij,...lk->...ikjl", eye, h)
    return (left - right).reshape(*h.shape[:-2], n * n, n * n)


def dissipator_superop(channel: DecoherenceChannel) -> np.ndarray:
    n = channel.dim
    out = np.zeros((n * n, n * n), dtype=complex)
    eye = np.eye(n)
    for g, L in zip(channel.rates, channel.ops):
        ldl = dagger(L) @ L
        out += g * (np.kron(L, L.conj()) - 0.5 * np.kron(ldl, eye) - 0.5 * np.kron(eye, ldl.T))
    return out


def _rk4_transfer(a1, a2, a3, h):
    """Batched RK4 propagator of ``y' = A(t) y`` over one step.

    ``a1``, ``a2``, ``a3`` are the generator at the start, midpoint and end.
    """
    eye = np.eye(a1.shape[-1])
    k1 = a1
    k2 = a2 @ (eye + 0.5 * h * k1)
    k3 = a2 @ (eye + 0.5 * h * k2)
    k4 = a3 @ (eye + h * k3)
    return eye + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _rk4_forced(a1, a2, a3, b1, b2, b3, h):
    """Batched RK4 step of ``y' = A(t) y + b(t)`` from ``y = 0``."""
    k1 = b1
    k2 = np.einsum("...ij,...j->...i", a2, 0.5 * h * k1) + b2
    k3 = np.einsum("...ij,...j->...i", a2, 0.5 * h * k2) + b2
    k4 = np.einsum("...ij,...j->...i", a3, h * k3) + b3
    return (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


@dataclass
class GridGenerators:
    """Superoperator samples of a model on a fixed time grid.

    The control envelope is sampled once at every node and interval midpoint;
    generators for any control sequence are then ``drift + u_m * control``.
    """

    model: SystemModel
    times: np.ndarray
    drift: np.ndarray = field(init=False)
    hc_nodes: np.ndarray = field(init=False)
    ctrl_nodes: np.ndarray = field(init=False)
    ctrl_mid: np.ndarray = field(init=False)

    def __post_init__(self):
        m = self.model
        self.times = np.asarray(self.times, dtype=float)
        k = -1j / m.hbar
        self.drift = k * commutator_superop(m.h0) + dissipator_superop(m.channel)
        mids = 0.5 * (self.times[:-1] + self.times[1:])
        self.hc_nodes = np.array([m.control_operator(t) for t in self.times])
        hc_mid = np.array([m.control_operator(t) for t in mids])
        self.ctrl_nodes = k * commutator_superop(self.hc_nodes)
        self.ctrl_mid = k * commutator_superop(hc_mid)

    @classmethod
    def for_grid(cls, model: SystemModel, grid: ControlGrid) -> "GridGenerators":
        return cls(model, grid.times)

    def matches(self, model: SystemModel, grid: ControlGrid) -> bool:
        return model is self.model and len(self.times) == grid.steps + 1 and np.allclose(self.times, grid.times)

    def stage_generators(self, u):
        """Generators at interval start, midpoint and end, each ``(steps, n^2, n^2)``."""
        u = np.asarray(u, dtype=float)[:, None, None]
        a1 = self.drift + u * self.ctrl_nodes[:-1]
        a2 = self.drift + u * self.ctrl_mid
        a3 = self.drift + u * self.ctrl_nodes[1:]
        return a1, a2, a3

    def transfers(self, u, h: float) -> np.ndarray:
        """RK4 one-step propagators for every interval under held controls ``u``."""
        return _rk4_transfer(*self.stage_generators(u), h)

    def transfer(self, m: int, u: float, h: float) -> np.ndarray:
        """RK4 propagator of interval ``m`` alone."""
        return _rk4_transfer(
            self.drift + u * self.ctrl_nodes[m],
            self.drift + u * self.ctrl_mid[m],
            self.drift + u * self.ctrl_nodes[m + 1],
            h,
        )


def _generators(model, grid, cache):
    if cache is None or not cache.matches(model, grid):
        cache = GridGenerators.for_grid(model, grid)
    return cache


def integrate_forward(model: SystemModel, rho0, grid: ControlGrid, cache: GridGenerators | None = None) -> StateTrajectory:
    """RK4 solution of the master equation with zero-order-hold control."""
    rho0 = _square(np.asarray(rho0), "rho0")
    n = model.dim
    if rho0.shape != (n, n):
        raise DimensionError(f"rho0 has shape {rho0.shape}, model dimension is {n}")
    gens = _generators(model, grid, cache)
    prop = gens.transfers(grid.u, grid.dt)
    states = np.empty((grid.steps + 1, n, n), dtype=complex)
    states[0] = rho0
    rho = rho0.reshape(-1)
    for m in range(grid.steps):
        rho = prop[m] @ rho
        r = rho.reshape(n, n)
        r = 0.5 * (r + r.conj().T)
        if not np.all(np.isfinite(r)):
            raise NonFiniteIterate("state", m + 1)
        states[m + 1] = r
        rho = r.reshape(-1)
    return StateTrajectory(grid.times, states)


def constraint_gradient_superop(gens: GridGenerators, u, pairs):
    """Stage matrices ``M`` with ``vec(sum_a d_a <chi(d_a)> + <d_a> chi(d_a)) = M vec(rho)``."""
    n = gens.model.dim
    d = coherence_ops(pairs, n).reshape(-1, n * n).T  # (n^2, 2P)
    out = []
    for a in gens.stage_generators(u):
        c = np.swapaxes(a.conj(), -1, -2) @ d  # chi(d_a) = G^H d_a
        out.append(d @ np.swapaxes(c.conj(), -1, -2) + c @ d.conj().T)
    return out


def integrate_backward(
    model: SystemModel,
    traj: StateTrajectory,
    mu_path,
    pairs,
    grid: ControlGrid,
    cache: GridGenerators | None = None,
) -> AdjointTrajectory:
    """RK4 solution of the costate equation from ``pi(tf) = 0`` back to ``t0``.

    States between grid nodes are linearly interpolated.
    """
    n = model.dim
    steps = grid.steps
    if len(traj) != steps + 1:
        raise DimensionError(f"trajectory has {len(traj)} samples, grid needs {steps + 1}")
    mu = np.asarray(mu_path, dtype=float).reshape(-1)
    if mu.size != steps:
        raise DimensionError(f"multiplier path has {mu.size} samples, grid has {steps} intervals")
    gens = _generators(model, grid, cache)
    h = grid.dt
    # Backward in time: with s = tf - t, dpi/ds = G^H pi + mu M rho.
    a1, a2, a3 = (np.swapaxes(a.conj(), -1, -2) for a in gens.stage_generators(grid.u))
    # RK4 stages run from t_{m+1} to t_m, so the "start" generator is a3.
    prop = _rk4_transfer(a3, a2, a1, h)
    costates = np.zeros((steps + 1, n, n), dtype=complex)
    if np.any(mu != 0.0):
        m1, m2, m3 = constraint_gradient_superop(gens, grid.u, pairs)
        rv = traj.states.reshape(steps + 1, -1)
        r_left, r_right = rv[:-1], rv[1:]
        r_mid = 0.5 * (r_left + r_right)
        mm = mu[:, None]
        b_start = mm * np.einsum("mij,mj->mi", m3, r_right)
        b_mid = mm * np.einsum("mij,mj->mi", m2, r_mid)
        b_end = mm * np.einsum("mij,mj->mi", m1, r_left)
        forcing = _rk4_forced(a3, a2, a1, b_start, b_mid, b_end, h)
    else:
        forcing = np.zeros((steps, n * n), dtype=complex)
    pi = costates[-1].reshape(-1)
    for m in range(steps - 1, -1, -1):
        pi = prop[m] @ pi + forcing[m]
        p = pi.reshape(n, n)
        p = 0.5 * (p + p.conj().T)
        if not np.all(np.isfinite(p)):
            raise NonFiniteIterate("costate", m)
        costates[m] = p
        pi = p.reshape(-1)
    return AdjointTrajectory(grid.times, costates)


def rk4_reference(rhs, y0, times):
    """Plain RK4 of a matrix ODE ``y' = rhs(t, y)`` on the given nodes.

    Slow; kept as an independent cross-check of the batched integrators.
    """
    ys = [np.asarray(y0, dtype=complex)]
    for t, t1 in zip(times[:-1], times[1:]):
        h = t1 - t
        y = ys[-1]
        k1 = rhs(t, y, 0)
        k2 = rhs(t + h / 2, y + h / 2 * k1, 1)
        k3 = rhs(t + h / 2, y + h / 2 * k2, 1)
        k4 = rhs(t1, y + h * k3, 2)
        ys.append(hermitian_part(y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)))
    return np.array(ys)
