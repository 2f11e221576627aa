"""Dense matrix algebra for N-level open quantum systems.

Everything here works on small dense complex arrays (N of order 10 at most).
Functions accept plain ``numpy`` arrays; :class:`DensityMatrix` is a thin
validated wrapper that coerces back to an array wherever one is expected.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, NamedTuple

import numpy as np

HERMITIAN_ATOL = 1e-10
TRACE_ATOL = 1e-8
PSD_FLOOR = -1e-8


class DimensionError(ValueError):
    """Raised when matrix operands do not share a square shape."""


def _square(a, name="matrix") -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    return a


def _same_dim(*mats) -> int:
    dims = {m.shape for m in mats}
    if len(dims) != 1:
        raise DimensionError(f"dimension mismatch: {sorted(dims)}")
    return mats[0].shape[0]


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + dagger(a))


def hermiticity_error(a: np.ndarray) -> float:
    """Max-norm of ``a - a^dagger``."""
    a = np.asarray(a)
    return float(np.max(np.abs(a - dagger(a))))


@dataclass(frozen=True)
class DensityMatrix:
    """A validated quantum state: Hermitian, PSD, unit trace."""

    data: np.ndarray
    hermitian_atol: float = field(default=HERMITIAN_ATOL, repr=False)
    trace_atol: float = field(default=TRACE_ATOL, repr=False)
    psd_floor: float = field(default=PSD_FLOOR, repr=False)

    def __post_init__(self):
        data = _square(self.data, "density matrix").copy()
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        herr = hermiticity_error(data)
        if herr > self.hermitian_atol:
            raise ValueError(f"density matrix is not Hermitian (max |rho - rho^H| = {herr:.3e})")
        tr = np.trace(data)
        if abs(tr - 1.0) > self.trace_atol:
            raise ValueError(f"density matrix trace is {tr.real:.12g}, expected 1")
        lam_min = float(np.linalg.eigvalsh(hermitian_part(data))[0])
        if lam_min < self.psd_floor:
            raise ValueError(f"density matrix is not positive semidefinite (min eigenvalue {lam_min:.3e})")

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.data
        return self.data.astype(dtype)


class CoherencePair(NamedTuple):
    """Ordered index pair ``(j, k)`` with ``j < k``."""

    j: int
    k: int

    def check(self, dim: int) -> "CoherencePair":
        if not (0 <= self.j < self.k < dim):
            raise IndexError(f"coherence pair {tuple(self)} invalid for dimension {dim}")
        return self


def all_pairs(dim: int) -> list[CoherencePair]:
    return [CoherencePair(j, k) for j, k in combinations(range(dim), 2)]


def _as_pairs(pairs: Iterable, dim: int) -> list[CoherencePair]:
    return [CoherencePair(*p).check(dim) for p in pairs]


@dataclass(frozen=True)
class DecoherenceChannel:
    """Lindblad operators ``ops[k]`` with non-negative rates ``rates[k]``."""

    ops: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        ops = np.asarray(self.ops, dtype=complex)
        rates = np.asarray(self.rates, dtype=float).reshape(-1)
        if ops.size == 0:
            ops = ops.reshape(0, *(ops.shape[-2:] if ops.ndim == 3 else (0, 0)))
        if ops.ndim != 3 or ops.shape[1] != ops.shape[2]:
            raise DimensionError(f"Lindblad operators must have shape (K, N, N), got {ops.shape}")
        if ops.shape[0] != rates.shape[0]:
            raise ValueError(f"{ops.shape[0]} operators but {rates.shape[0]} rates")
        if np.any(rates < 0) or not np.all(np.isfinite(rates)):
            raise ValueError(f"decay rates must be finite and non-negative, got {rates}")
        ops.setflags(write=False)
        rates.setflags(write=False)
        object.__setattr__(self, "ops", ops)
        object.__setattr__(self, "rates", rates)

    @classmethod
    def empty(cls, dim: int) -> "DecoherenceChannel":
        return cls(np.zeros((0, dim, dim), dtype=complex), np.zeros(0))

    @property
    def dim(self) -> int:
        return self.ops.shape[1]

    def __len__(self):
        return self.ops.shape[0]


@dataclass(frozen=True)
class ConstraintSpec:
    """Band ``alpha <= C^2(rho) <= beta`` over the selected coherence pairs."""

    alpha: float
    beta: float
    pairs: tuple = (CoherencePair(0, 1),)

    def __post_init__(self):
        if not (0 <= self.alpha < self.beta):
            raise ValueError(f"need 0 <= alpha < beta, got alpha={self.alpha}, beta={self.beta}")
        object.__setattr__(self, "pairs", tuple(CoherencePair(*p) for p in self.pairs))

    @classmethod
    def from_coherence_bounds(cls, c_low: float, c_high: float, pairs=((0, 1),)) -> "ConstraintSpec":
        """Build the squared band from bounds on C itself."""
        return cls(c_low**2, c_high**2, tuple(pairs))


def commutator(a, b) -> np.ndarray:
    a, b = _square(a), _square(b)
    _same_dim(a, b)
    return a @ b - b @ a


def anticommutator(a, b) -> np.ndarray:
    a, b = _square(a), _square(b)
    _same_dim(a, b)
    return a @ b + b @ a


def expectation(op, rho) -> complex:
    """``Tr(rho @ op)``."""
    op, rho = _square(op), _square(rho)
    _same_dim(op, rho)
    # Tr(rho op) = sum_ij rho_ij op_ji
    return complex(np.sum(rho * op.T))


def coherence_pair_ops(pair, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Real- and imaginary-part coherence operators for the pair ``(j, k)``."""
    j, k = CoherencePair(*pair).check(dim)
    d_re = np.zeros((dim, dim), dtype=complex)
    d_im = np.zeros((dim, dim), dtype=complex)
    d_re[j, k] = d_re[k, j] = 1.0
    d_im[j, k] = -1j
    d_im[k, j] = 1j
    return d_re, d_im


def coherence_ops(pairs, dim: int) -> np.ndarray:
    """Stack of coherence operators, shape ``(2 * len(pairs), dim, dim)``.

    Ordered ``[re_0, im_0, re_1, im_1, ...]``.
    """
    out = []
    for p in _as_pairs(pairs, dim):
        out.extend(coherence_pair_ops(p, dim))
    return np.array(out, dtype=complex).reshape(-1, dim, dim)


def coherence_expectations(rho, pairs) -> np.ndarray:
    """Real expectations ``[<re_0>, <im_0>, ...]`` of the coherence operators."""
    rho = _square(rho)
    ops = coherence_ops(pairs, rho.shape[0])
    return np.einsum("ij,kji->k", rho, ops).real


def coherence_squared(rho, pairs=None) -> float:
    rho = _square(rho)
    if pairs is None:
        pairs = all_pairs(rho.shape[0])
    e = coherence_expectations(rho, pairs)
    return float(np.dot(e, e))


def coherence(rho, pairs=None) -> float:
    return float(np.sqrt(coherence_squared(rho, pairs)))


def dissipator(channel: DecoherenceChannel, rho) -> np.ndarray:
    """``sum_k g_k (L rho L^H - 1/2 {L^H L, rho})``."""
    rho = _square(rho)
    if len(channel) == 0:
        _same_dim(rho, np.empty((channel.dim, channel.dim)))
        return np.zeros_like(rho)
    _same_dim(rho, channel.ops[0])
    L = channel.ops
    Ld = dagger(L)
    LdL = Ld @ L
    g = channel.rates[:, None, None]
    terms = L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL)
    return np.sum(g * terms, axis=0)


def dissipator_l0(channel: DecoherenceChannel, phi) -> np.ndarray:
    """``sum_k g_k (L^H phi L - L phi L^H)``; vanishes for Hermitian ``L``."""
    phi = _square(phi)
    if len(channel) == 0:
        _same_dim(phi, np.empty((channel.dim, channel.dim)))
        return np.zeros_like(phi)
    _same_dim(phi, channel.ops[0])
    L = channel.ops
    Ld = dagger(L)
    g = channel.rates[:, None, None]
    return np.sum(g * (Ld @ phi @ L - L @ phi @ Ld), axis=0)


def unital_defect(channel: DecoherenceChannel) -> np.ndarray:
    """``sum_k g_k [L_k, L_k^H]``, i.e. the dissipator applied to the identity.

    Zero exactly when the channel is unital.
    """
    if len(channel) == 0:
        return np.zeros((channel.dim, channel.dim), dtype=complex)
    L = channel.ops
    Ld = dagger(L)
    g = channel.rates[:, None, None]
    return np.sum(g * (L @ Ld - Ld @ L), axis=0)


def weight_operator(rho, pairs) -> np.ndarray:
    """``sum_pairs <re> re + <im> im``; half the gradient of C^2 in rho."""
    rho = _square(rho)
    ops = coherence_ops(pairs, rho.shape[0])
    e = np.einsum("ij,kji->k", rho, ops).real
    return np.tensordot(e, ops, axes=1)


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random mixed state from a Ginibre matrix ``G G^H / Tr``."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ dagger(g)
    return rho / np.trace(rho)


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * hermitian_part(a)
