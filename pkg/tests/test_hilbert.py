import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcompress.hilbert import (
    DensityMatrix,
    Projector,
    RegisterLayout,
    StateVector,
    apply_local,
    eig_hermitian,
    mat_fn_on_support,
    maximally_entangled,
    partial_trace,
    ptrace_array,
    random_density,
    random_projective_measurement,
    reduced_from_vector,
    reorder,
    tensor,
)
from qcompress.oracles import naive_partial_trace


def test_tensor_identities():
    i2 = np.eye(2)
    np.testing.assert_array_equal(tensor(i2, i2), np.eye(4))
    v = tensor(StateVector.basis(0, RegisterLayout.of(("A", 2))), StateVector.basis(1, RegisterLayout.of(("B", 2))))
    np.testing.assert_array_equal(v.amplitudes, StateVector.basis(1, 4).amplitudes)


def test_tensor_kronecker_by_hand():
    a = DensityMatrix(np.diag([1.0, 0.0]), RegisterLayout.of(("A", 2)))
    b = DensityMatrix(np.diag([0.5, 0.5]), RegisterLayout.of(("B", 2)))
    ab = tensor(a, b)
    np.testing.assert_allclose(ab.matrix, np.diag([0.5, 0.5, 0, 0]))
    assert ab.layout.names == ("A", "B")


def test_tensor_kind_mismatch():
    with pytest.raises(TypeError):
        tensor(DensityMatrix(np.eye(2) / 2), StateVector.basis(0, 2))


def test_layout_rejects_duplicates():
    with pytest.raises(ValueError):
        RegisterLayout.of(("A", 2), ("A", 3))
    assert RegisterLayout.of(("A", 2), ("B", 3)).dim == 6


def test_partial_trace_bell_and_product(rng):
    layout = RegisterLayout.of(("A", 2), ("B", 2))
    bell = StateVector(np.array([1, 0, 0, 1]) / np.sqrt(2), layout)
    np.testing.assert_allclose(partial_trace(bell.density(), ["A"]).matrix, np.eye(2) / 2, atol=1e-15)
    np.testing.assert_allclose(partial_trace(bell, ["B"]).matrix, np.eye(2) / 2, atol=1e-15)
    rho = random_density(2, None, rng, RegisterLayout.of(("A", 2)))
    sigma = random_density(3, None, rng, RegisterLayout.of(("B", 3)))
    np.testing.assert_allclose(partial_trace(tensor(rho, sigma), ["A"]).matrix, rho.matrix, atol=1e-12)


def test_partial_trace_matches_loop_oracle(rng):
    layout = RegisterLayout.of(("A", 2), ("B", 3), ("C", 2))
    state = random_density(12, None, rng, layout)
    for k, name in enumerate(layout.names):
        fast = partial_trace(state, [name]).matrix
        slow = naive_partial_trace(state.matrix, layout.dims, k)
        np.testing.assert_allclose(fast, slow, atol=1e-12)


def test_partial_trace_unknown_register():
    state = DensityMatrix(np.eye(4) / 4, RegisterLayout.of(("A", 2), ("B", 2)))
    with pytest.raises(KeyError):
        partial_trace(state, ["Q"])


def test_partial_trace_all_is_scalar_trace(rng):
    layout = RegisterLayout.of(("A", 2), ("B", 3))
    state = random_density(6, None, rng, layout)
    full = partial_trace(state, ["A", "B"])
    np.testing.assert_allclose(full.matrix, state.matrix, atol=1e-12)
    assert abs(ptrace_array(state.matrix, layout.dims, []).item() - 1) < 1e-12


def test_reduced_from_vector_matches_density(rng):
    dims = (2, 3, 2)
    v = rng.standard_normal(12) + 1j * rng.standard_normal(12)
    v /= np.linalg.norm(v)
    rho = np.outer(v, v.conj())
    for keep in ([0], [1, 2], [0, 2]):
        np.testing.assert_allclose(reduced_from_vector(v, dims, keep), ptrace_array(rho, dims, keep), atol=1e-12)


def test_apply_local_matches_kron(rng):
    dims = (2, 3, 2)
    v = rng.standard_normal(12) + 1j * rng.standard_normal(12)
    op = rng.standard_normal((3, 3))
    full = np.kron(np.kron(np.eye(2), op), np.eye(2))
    np.testing.assert_allclose(apply_local(v, op, dims, [1]), full @ v, atol=1e-12)
    op2 = rng.standard_normal((4, 4))
    full2 = np.kron(op2, np.eye(3))
    # registers 0 and 2 act jointly: permute to (0, 2, 1) and back
    got = apply_local(v, op2, dims, [0, 2])
    t = v.reshape(dims).transpose(0, 2, 1).reshape(-1)
    want = (full2 @ t).reshape(2, 2, 3).transpose(0, 2, 1).reshape(-1)
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_reorder_round_trip(rng):
    layout = RegisterLayout.of(("A", 2), ("B", 3))
    a = random_density(2, None, rng, RegisterLayout.of(("A", 2)))
    b = random_density(3, None, rng, RegisterLayout.of(("B", 3)))
    ba = reorder(tensor(a, b), ["B", "A"])
    np.testing.assert_allclose(ba.matrix, np.kron(b.matrix, a.matrix), atol=1e-14)
    assert reorder(ba, ["A", "B"]).layout == layout


def test_eig_hermitian_examples():
    vals, _ = eig_hermitian(np.diag([0.25, 0.75]))
    np.testing.assert_allclose(vals, [0.75, 0.25])
    vals, vecs = eig_hermitian(np.array([[0, 1], [1, 0]]))
    np.testing.assert_allclose(vals, [1, -1])
    np.testing.assert_allclose(np.abs(vecs), np.full((2, 2), 1 / np.sqrt(2)), atol=1e-12)


def test_eig_hermitian_rejects_non_hermitian():
    with pytest.raises(ValueError):
        eig_hermitian(np.array([[0, 1], [0, 0]]))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**31))
def test_eig_reconstruction(n, seed):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    h = g + g.conj().T
    vals, vecs = eig_hermitian(h)
    assert np.all(np.diff(vals) <= 1e-12)
    np.testing.assert_allclose((vecs * vals) @ vecs.conj().T, h, atol=1e-9)
    np.testing.assert_allclose(vecs.conj().T @ vecs, np.eye(n), atol=1e-10)


def test_mat_fn_examples():
    np.testing.assert_allclose(mat_fn_on_support(np.diag([0.25, 0.75]), "sqrt").real,
                               np.diag([0.5, np.sqrt(0.75)]), atol=1e-12)
    np.testing.assert_allclose(mat_fn_on_support(np.diag([0.5, 0.5]), "log2").real, -np.eye(2), atol=1e-12)
    np.testing.assert_allclose(mat_fn_on_support(np.diag([0.5, 0.5, 0.0]), "log2").real,
                               np.diag([-1, -1, 0]), atol=1e-12)


def test_density_validation():
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([0.5, 0.6]))
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([1.5, -0.5]))
    with pytest.raises(ValueError):
        DensityMatrix(np.array([[0.5, 0.1], [0.2, 0.5]]))
    with pytest.raises(ValueError):
        StateVector(np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        Projector(np.diag([0.5, 1.0]))


def test_random_density_contract(rng):
    for rank in (1, 2, 4):
        rho = random_density(4, rank, rng)
        assert abs(np.trace(rho.matrix) - 1) < 1e-10
        assert rho.eigenvalues.min() >= 0
        assert rho.rank == rank
    with pytest.raises(ValueError):
        random_density(3, 4, rng)


def test_eigenvalue_clamp_trace_change(rng):
    rho = random_density(5, 2, rng)
    raw = np.linalg.eigvalsh(rho.matrix)
    assert abs(rho.eigenvalues.sum() - raw.sum()) <= 5 * 1e-10


def test_random_measurement_contract(rng):
    ms = random_projective_measurement(4, 2, rng)
    np.testing.assert_allclose(sum(m.matrix for m in ms), np.eye(4), atol=1e-10)
    for i, a in enumerate(ms):
        for j, b in enumerate(ms):
            np.testing.assert_allclose(a.matrix @ b.matrix, a.matrix if i == j else 0, atol=1e-10)
    with pytest.raises(ValueError):
        random_projective_measurement(3, 4, rng)


def test_random_measurement_inside_support(rng):
    support = np.diag([1.0, 1.0, 1.0, 0.0, 0.0])
    ms = random_projective_measurement(5, 3, rng, support=support)
    np.testing.assert_allclose(sum(m.matrix for m in ms), np.eye(5), atol=1e-10)
    for m in ms:
        np.testing.assert_allclose(m.matrix @ support, support @ m.matrix, atol=1e-10)


def test_seed_determinism():
    a = random_density(4, 3, 42).matrix
    b = random_density(4, 3, 42).matrix
    assert a.tobytes() == b.tobytes()
    ma = random_projective_measurement(4, 2, 42)
    mb = random_projective_measurement(4, 2, 42)
    assert all(x.matrix.tobytes() == y.matrix.tobytes() for x, y in zip(ma, mb))


@pytest.mark.parametrize("N", [2, 3, 5])
def test_transpose_rule_on_maximally_entangled(rng, N):
    m = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    phi = maximally_entangled(N)
    left = np.kron(m, np.eye(N)) @ phi
    right = np.kron(np.eye(N), m.T) @ phi
    assert np.max(np.abs(left - right)) <= 1e-12
