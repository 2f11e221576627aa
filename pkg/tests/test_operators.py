import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coherence_control.models import DEFAULT_RHO0, QutritParams, qutrit_channel
from coherence_control.operators import (
    CoherencePair,
    ConstraintSpec,
    DecoherenceChannel,
    DensityMatrix,
    DimensionError,
    all_pairs,
    coherence,
    coherence_expectations,
    coherence_pair_ops,
    coherence_squared,
    commutator,
    dissipator,
    dissipator_l0,
    expectation,
    hermiticity_error,
    random_density_matrix,
    random_hermitian,
    unital_defect,
    weight_operator,
)

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(2, 5)


def random_channel(rng, dim, k=None):
    k = rng.integers(1, 4) if k is None else k
    ops = rng.normal(size=(k, dim, dim)) + 1j * rng.normal(size=(k, dim, dim))
    return DecoherenceChannel(ops, rng.uniform(0, 1, size=k))


# -- DensityMatrix ---------------------------------------------------------------


def test_density_matrix_accepts_default_state():
    rho = DensityMatrix(DEFAULT_RHO0)
    assert rho.dim == 3
    assert np.asarray(rho) is rho.data
    assert np.trace(rho.data).real == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize(
    "bad, match",
    [
        (np.array([[0.5, 0.1], [0.2, 0.5]]), "Hermitian"),
        (np.diag([0.5, 0.6]), "trace"),
        (np.diag([1.5, -0.5]), "positive semidefinite"),
        (np.ones((2, 3)), "square"),
    ],
)
def test_density_matrix_rejects(bad, match):
    with pytest.raises(ValueError, match=match):
        DensityMatrix(bad)


def test_density_matrix_is_read_only():
    rho = DensityMatrix(np.eye(2) / 2)
    with pytest.raises(ValueError):
        rho.data[0, 0] = 1.0


def test_default_state_is_psd():
    # 2x2 coherent block: eigenvalues 0.495 +- sqrt(0.285^2 + 2 * 0.195^2)
    lam = np.linalg.eigvalsh(DEFAULT_RHO0)
    assert lam[0] >= 0
    block = 0.495 - np.hypot(0.285, 0.195 * np.sqrt(2))
    assert sorted(lam)[:2] == pytest.approx(sorted([block, 0.01]), abs=1e-12)


# -- pairs, channels, constraints ----------------------------------------------


def test_pair_validation():
    assert CoherencePair(0, 2).check(3) == (0, 2)
    for bad in [(1, 0), (0, 3), (-1, 1), (1, 1)]:
        with pytest.raises(IndexError):
            CoherencePair(*bad).check(3)


def test_all_pairs_order():
    assert all_pairs(3) == [(0, 1), (0, 2), (1, 2)]


def test_channel_validation():
    with pytest.raises(ValueError, match="non-negative"):
        DecoherenceChannel(np.zeros((1, 2, 2)), [-0.1])
    with pytest.raises(ValueError, match="rates"):
        DecoherenceChannel(np.zeros((2, 2, 2)), [0.1])
    with pytest.raises(DimensionError):
        DecoherenceChannel(np.zeros((1, 2, 3)), [0.1])
    assert len(DecoherenceChannel.empty(4)) == 0


def test_constraint_spec():
    c = ConstraintSpec.from_coherence_bounds(0.550, 0.553)
    assert (c.alpha, c.beta) == (0.550**2, 0.553**2)
    assert c.pairs == ((0, 1),)
    with pytest.raises(ValueError):
        ConstraintSpec(0.6, 0.5)
    with pytest.raises(ValueError):
        ConstraintSpec(-0.1, 0.5)


# -- algebra -----------------------------------------------------------------


def test_commutator_examples():
    d_re, d_im = coherence_pair_ops((0, 1), 2)
    np.testing.assert_allclose(commutator(d_re, d_im), 2j * np.diag([1, -1]), atol=1e-15)
    a = np.diag([1.0, 2.0])
    np.testing.assert_array_equal(commutator(a, np.diag([3.0, -1.0])), 0)
    np.testing.assert_array_equal(commutator(d_im, d_im), 0)
    with pytest.raises(DimensionError):
        commutator(np.eye(2), np.eye(3))


def test_expectation_default_state():
    d_re, d_im = coherence_pair_ops((0, 1), 3)
    assert expectation(np.eye(3), DEFAULT_RHO0) == pytest.approx(1.0, abs=1e-15)
    assert expectation(d_re, DEFAULT_RHO0) == pytest.approx(0.39, abs=1e-15)
    assert expectation(d_im, DEFAULT_RHO0) == pytest.approx(0.39, abs=1e-15)


def test_coherence_operators_written_out():
    d_re, d_im = coherence_pair_ops((0, 1), 2)
    np.testing.assert_array_equal(d_re, [[0, 1], [1, 0]])
    np.testing.assert_array_equal(d_im, [[0, -1j], [1j, 0]])
    d_re, _ = coherence_pair_ops((0, 2), 3)
    expected = np.zeros((3, 3))
    expected[0, 2] = expected[2, 0] = 1
    np.testing.assert_array_equal(d_re, expected)


@pytest.mark.parametrize("pair", all_pairs(4))
def test_coherence_operators_hermitian_traceless(pair):
    for d in coherence_pair_ops(pair, 4):
        assert hermiticity_error(d) == 0
        assert np.trace(d) == 0


def test_coherence_examples():
    assert coherence_squared(DEFAULT_RHO0, [(0, 1)]) == pytest.approx(0.3042, abs=1e-15)
    assert coherence(DEFAULT_RHO0, [(0, 1)]) == pytest.approx(0.39 * np.sqrt(2), abs=1e-15)
    assert coherence_squared(0.5 * np.ones((2, 2)), [(0, 1)]) == pytest.approx(1.0)
    plus = np.zeros((3, 1))
    plus[:2] = 1 / np.sqrt(2)
    assert coherence(plus @ plus.T) == pytest.approx(1.0, abs=1e-15)
    assert coherence(np.diag([0.2, 0.3, 0.5])) == 0


def test_dissipator_examples():
    ch = qutrit_channel(QutritParams())
    out = dissipator(ch, DEFAULT_RHO0)
    assert out[2, 2] == pytest.approx(-0.101 * 0.01, abs=1e-16)
    zero = DecoherenceChannel(ch.ops, np.zeros(3))
    np.testing.assert_array_equal(dissipator(zero, DEFAULT_RHO0), 0)
    assert dissipator(DecoherenceChannel.empty(3), DEFAULT_RHO0).shape == (3, 3)


def test_unital_defect_examples():
    ch = qutrit_channel(QutritParams())
    np.testing.assert_allclose(unital_defect(ch), np.diag([0.1, 0.001, -0.101]), atol=1e-14, rtol=0)
    np.testing.assert_allclose(dissipator_l0(ch, np.eye(3)), np.diag([-0.1, -0.001, 0.101]), atol=1e-14, rtol=0)
    single = DecoherenceChannel(np.array([[[0, 1], [0, 0]]]), [1.0])
    np.testing.assert_array_equal(unital_defect(single), np.diag([1.0, -1.0]))


def test_weight_operator_default_state():
    d_re, d_im = coherence_pair_ops((0, 1), 3)
    np.testing.assert_allclose(weight_operator(DEFAULT_RHO0, [(0, 1)]), 0.39 * d_re + 0.39 * d_im, atol=1e-15)
    np.testing.assert_array_equal(weight_operator(np.diag([0.5, 0.5, 0.0]), all_pairs(3)), 0)


# -- properties ----------------------------------------------------------------


@settings(max_examples=120, deadline=None)
@given(seeds, dims)
def test_dissipator_trace_free_and_hermitian(seed, dim):
    rng = np.random.default_rng(seed)
    ch = random_channel(rng, dim)
    rho = random_density_matrix(dim, rng)
    out = dissipator(ch, rho)
    assert abs(np.trace(out)) <= 1e-12
    assert hermiticity_error(out) <= 1e-12
    assert hermiticity_error(dissipator_l0(ch, random_hermitian(dim, rng))) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(seeds, dims)
def test_unital_defect_identities(seed, dim):
    rng = np.random.default_rng(seed)
    ch = random_channel(rng, dim)
    eye = np.eye(dim)
    brute = sum(g * commutator(L, L.conj().T) for g, L in zip(ch.rates, ch.ops))
    np.testing.assert_allclose(unital_defect(ch), dissipator(ch, eye), atol=1e-14, rtol=0)
    np.testing.assert_allclose(unital_defect(ch), brute, atol=1e-14, rtol=0)
    np.testing.assert_allclose(dissipator_l0(ch, eye), -unital_defect(ch), atol=1e-14, rtol=0)


@settings(max_examples=60, deadline=None)
@given(seeds, dims)
def test_hermitian_channel_is_unital(seed, dim):
    rng = np.random.default_rng(seed)
    ops = np.array([random_hermitian(dim, rng) for _ in range(3)])
    ch = DecoherenceChannel(ops, rng.uniform(0, 1, 3))
    np.testing.assert_allclose(unital_defect(ch), 0, atol=1e-14)
    np.testing.assert_allclose(dissipator_l0(ch, random_hermitian(dim, rng)), 0, atol=1e-13)


@settings(max_examples=100, deadline=None)
@given(seeds, dims)
def test_coherence_closed_form(seed, dim):
    rng = np.random.default_rng(seed)
    rho = random_density_matrix(dim, rng)
    pairs = all_pairs(dim)
    closed = 4 * sum(abs(rho[j, k]) ** 2 for j, k in pairs)
    assert coherence_squared(rho, pairs) == pytest.approx(closed, abs=1e-12)
    e = coherence_expectations(rho, pairs)
    np.testing.assert_allclose(e[0::2], [2 * rho[j, k].real for j, k in pairs], atol=1e-12)
    np.testing.assert_allclose(e[1::2], [-2 * rho[j, k].imag for j, k in pairs], atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(seeds, dims, st.floats(0, 1))
def test_weight_operator_affine(seed, dim, a):
    rng = np.random.default_rng(seed)
    r1, r2 = random_density_matrix(dim, rng), random_density_matrix(dim, rng)
    pairs = all_pairs(dim)
    w = weight_operator(a * r1 + (1 - a) * r2, pairs)
    np.testing.assert_allclose(w, a * weight_operator(r1, pairs) + (1 - a) * weight_operator(r2, pairs), atol=1e-12)
    assert hermiticity_error(w) == 0
    assert abs(np.trace(w)) <= 1e-15


@settings(max_examples=60, deadline=None)
@given(seeds, dims)
def test_weight_operator_is_half_gradient(seed, dim):
    # directional derivative of C^2 along X equals 2 Tr(W X) for Hermitian X
    rng = np.random.default_rng(seed)
    rho, x = random_density_matrix(dim, rng), random_hermitian(dim, rng)
    pairs = all_pairs(dim)
    h = 1e-6
    fd = (coherence_squared(rho + h * x, pairs) - coherence_squared(rho - h * x, pairs)) / (2 * h)
    assert fd == pytest.approx(2 * expectation(weight_operator(rho, pairs), x).real, abs=1e-8)
