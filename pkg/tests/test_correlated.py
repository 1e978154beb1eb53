import numpy as np
import pytest

from qcompress.compression import tol_disc
from qcompress.correlated import (
    agreement_bound,
    agreement_probability,
    cs_projectors,
    exact_joint_output,
    marginal_errors,
    mc_sample,
    theta_agreement,
    theta_overlap,
)
from qcompress.hilbert import DensityMatrix, haar_unitary, random_density, random_projective_measurement
from qcompress.oracles import dense_joint_tau, shared_state
from qcompress.quantities import fidelity

from conftest import diag_state, random_pair


def measurement(out, w, rng):
    return random_projective_measurement(out.N * out.K, w, rng, support=out.p_alice_idx)


def dense_agreement(tau, M):
    e = sum(np.kron(m.matrix, m.matrix.conj()) for m in M)
    return float(np.trace(e @ tau).real)


def test_projector_ranks(rng):
    N = 3
    mixed = DensityMatrix(np.eye(N) / N)
    pa, pb = cs_projectors(mixed, mixed, N)
    assert pa.rank == pb.rank == N
    rho, sigma = random_pair(rng, N)
    pa, pb = cs_projectors(rho, sigma, 16)
    assert pb.rank == sum(int(np.ceil(16 * b)) for b in sigma.eigenvalues)
    pure = DensityMatrix(np.diag([1.0, 0, 0]))
    assert cs_projectors(pure, sigma, 16)[0].rank == 16


def test_alice_rate_matches_dense(rng):
    N, K = 2, 16
    rho, sigma = random_pair(rng, N)
    out = exact_joint_output(rho, sigma, K)
    s = shared_state(N, K).reshape(N * K, N * K)
    dense_q = float(np.trace(s.conj().T @ out.p_alice_idx @ s).real)
    assert out.q_alice == pytest.approx(dense_q, abs=1e-12)
    assert out.q_alice == pytest.approx(sum(np.ceil(K * rho.eigenvalues - 1e-9)) / (K * N), abs=1e-12)


@pytest.mark.parametrize("N,K", [(2, 8), (2, 16), (3, 8)])
def test_tau_matches_dense_collapse(rng, N, K):
    for _ in range(3):
        rho, sigma = random_pair(rng, N)
        out = exact_joint_output(rho, sigma, K)
        np.testing.assert_allclose(out.tau_dense().matrix, dense_joint_tau(rho, sigma, K), atol=1e-12)


def test_integral_caps_give_exact_marginal():
    rho = diag_state(0.75, 0.25)
    out = exact_joint_output(rho, rho, 8)
    ea, eb = marginal_errors(out, rho, rho)
    assert ea <= 1e-10 and eb <= 1e-10


@pytest.mark.parametrize("K", [16, 32, 64])
def test_marginals_within_discretization(rng, K):
    for _ in range(60):
        N = int(rng.integers(2, 5))
        rho, sigma = random_pair(rng, N)
        ea, eb = marginal_errors(exact_joint_output(rho, sigma, K), rho, sigma)
        assert max(ea, eb) <= tol_disc(N, K)


def test_tau_dominates_same_index_term(rng):
    for K in [8] * 20 + [16] * 2:
        rho, sigma = random_pair(rng, 2)
        out = exact_joint_output(rho, sigma, K)
        resid = out.tau_dense().matrix - out.same_index_term()
        assert np.linalg.eigvalsh(resid).min() >= -1e-9


def test_agreement_matches_dense(rng):
    for _ in range(5):
        rho, sigma = random_pair(rng, 2)
        out = exact_joint_output(rho, sigma, 8)
        M = measurement(out, 3, rng)
        assert agreement_probability(out, M) == pytest.approx(dense_agreement(out.tau_dense().matrix, M), abs=1e-12)


def test_bound_reference_value():
    rho, sigma = diag_state(0.75, 0.25), diag_state(0.5, 0.5)
    assert agreement_bound(rho, sigma) == pytest.approx((1 - np.sqrt(0.4375)) ** 3, abs=1e-12)
    assert agreement_bound(rho, sigma) == pytest.approx(0.03881, abs=1e-5)
    assert agreement_bound(diag_state(1, 0), diag_state(0, 1)) == pytest.approx(0.0, abs=1e-12)


def test_reference_pair_exceeds_bound(rng):
    rho, sigma = diag_state(0.75, 0.25), diag_state(0.5, 0.5)
    out = exact_joint_output(rho, sigma, 8)
    bound = agreement_bound(rho, sigma)
    tau = out.tau_dense().matrix
    for k in range(50):
        M = measurement(out, int(rng.integers(2, 5)), rng)
        p = agreement_probability(out, M)
        if k < 10:
            assert p == pytest.approx(dense_agreement(tau, M), abs=1e-12)
        assert p >= bound


def test_orthogonal_states_run():
    out = exact_joint_output(diag_state(1, 0), diag_state(0, 1), 8)
    M = measurement(out, 2, np.random.default_rng(0))
    assert agreement_probability(out, M) >= 0.0


def test_equal_states_always_agree(rng):
    rho = diag_state(0.5, 0.25, 0.25)
    out = exact_joint_output(rho, rho, 8)
    for _ in range(10):
        M = measurement(out, int(rng.integers(2, 5)), rng)
        assert agreement_probability(out, M) == pytest.approx(1.0, abs=1e-9)
    assert theta_overlap(out) == pytest.approx(1.0, abs=1e-9)


def test_theta_and_chain(rng):
    for _ in range(100):
        N, K = int(rng.integers(2, 5)), int(rng.choice([8, 16, 32]))
        rho, sigma = random_pair(rng, N)
        out = exact_joint_output(rho, sigma, K)
        M = measurement(out, int(rng.integers(2, 5)), rng)
        overlap, agree = theta_overlap(out), agreement_probability(out, M)
        bound = agreement_bound(rho, sigma)
        assert theta_agreement(out, M) == pytest.approx(1.0, abs=1e-9)
        assert overlap <= 1 + 1e-12
        assert overlap >= bound - tol_disc(N, K)
        assert agree >= bound - tol_disc(N, K)
        assert np.sqrt(agree) >= np.sqrt(overlap) - 1e-9


def test_theta_overlap_is_fidelity_squared(rng):
    rho, sigma = random_pair(rng, 2)
    out = exact_joint_output(rho, sigma, 8)
    th = DensityMatrix.normalized(np.outer(out.theta.ravel(), out.theta.ravel().conj()))
    assert fidelity(out.tau_dense(), th) ** 2 == pytest.approx(theta_overlap(out), abs=1e-7)


def test_mc_sample_statistics(rng):
    rho, sigma = random_pair(rng, 2)
    out = exact_joint_output(rho, sigma, 32)
    M = measurement(out, 2, rng)
    res = mc_sample(rho, sigma, 32, seed=7, trials=10000, M=M, out=out)
    assert res.within_3sigma
    assert res.chi2_pvalue > 1e-3
    assert res.stopping_counts.sum() == 10000


def test_mc_equal_states():
    rho = diag_state(0.5, 0.5)
    out = exact_joint_output(rho, rho, 8)
    M = measurement(out, 2, np.random.default_rng(1))
    assert mc_sample(rho, rho, 8, seed=0, trials=500, M=M, out=out).agreement_rate == 1.0


def test_mc_rejects_zero_trials(rng):
    rho, sigma = random_pair(rng, 2)
    out = exact_joint_output(rho, sigma, 8)
    with pytest.raises(ValueError):
        mc_sample(rho, sigma, 8, seed=0, trials=0, M=measurement(out, 2, rng), out=out)


def test_invalid_measurements(rng):
    rho, sigma = random_pair(rng, 2)
    out = exact_joint_output(rho, sigma, 8)
    NK = 16
    with pytest.raises(ValueError):
        agreement_probability(out, [np.eye(NK) / 2, np.eye(NK) / 2])
    with pytest.raises(ValueError):
        agreement_probability(out, [np.eye(NK - 1)])
    half = np.zeros((NK, NK))
    half[: NK // 2, : NK // 2] = np.eye(NK // 2)
    with pytest.raises(ValueError):
        agreement_probability(out, [half])
    u = haar_unitary(NK, rng)
    rot = u @ np.diag([1.0] * 5 + [0.0] * (NK - 5)) @ u.conj().T
    with pytest.raises(ValueError):
        agreement_probability(out, [rot, np.eye(NK) - rot])


def test_cap_too_large():
    rho = DensityMatrix(np.eye(4) / 4)
    with pytest.raises(ValueError):
        exact_joint_output(rho, rho, 256)
    with pytest.raises(ValueError):
        exact_joint_output(rho, rho, 16).tau_dense()


def test_degenerate_basis_invariance(rng):
    """sigma = I/2 has no preferred eigenbasis; rotating the whole instance must not change any statistic."""
    sigma = DensityMatrix(np.eye(2) / 2)
    rho = random_density(2, None, rng)
    base = exact_joint_output(rho, sigma, 16)
    for _ in range(5):
        u = haar_unitary(2, rng)
        rot = DensityMatrix.normalized(u @ rho.matrix @ u.conj().T)
        out = exact_joint_output(rot, sigma, 16)
        assert out.q_both == pytest.approx(base.q_both, abs=1e-12)
        assert theta_overlap(out) == pytest.approx(theta_overlap(base), abs=1e-12)
        np.testing.assert_allclose(out.bob_marginal(), sigma.matrix, atol=1e-12)
        np.testing.assert_allclose(out.alice_marginal(), u @ base.alice_marginal() @ u.conj().T, atol=1e-10)
