import numpy as np
import pytest

from qcompress.hilbert import random_density
from qcompress.quantities import SupportError, dmax, fidelity, rel_entropy
from qcompress.substate import smooth_substate, substate_bound

from conftest import diag_state, random_pair


def classical_grid_threshold(a, b, eps, step=1e-4):
    """Smallest grid lambda whose truncation of the ratio a/b keeps fidelity >= 1 - eps."""
    a, b = np.asarray(a), np.asarray(b)
    ratio = a / b
    lo = np.floor(np.log2(ratio.min()) / step) * step - step
    lams = np.arange(lo, np.log2(ratio.max()) + 2 * step, step)
    keep = ratio[None, :] <= 2.0 ** lams[:, None]
    kept = np.where(keep, a[None, :], 0.0)
    z = kept.sum(axis=1)
    fid = np.sqrt(z)  # sum_i sqrt(a_i * a_i / z) over kept i
    ok = (z > 0) & (fid >= 1 - eps)
    return lams[np.argmax(ok)]


def test_identical_states(rng):
    rho = random_density(3, None, rng)
    sm = smooth_substate(rho, rho, 0.1)
    np.testing.assert_allclose(sm.rho_prime.matrix, rho.matrix, atol=1e-10)
    assert sm.lambda_achieved <= 1e-3
    assert sm.fidelity_achieved == pytest.approx(1.0, abs=1e-10)


def test_diagonal_pair_matches_grid_oracle():
    rho, sigma = diag_state(0.75, 0.25), diag_state(0.5, 0.5)
    sm = smooth_substate(rho, sigma, 0.4)
    lam = classical_grid_threshold([0.75, 0.25], [0.5, 0.5], 0.4)
    assert sm.threshold == pytest.approx(lam, abs=1e-4)
    assert sm.threshold == pytest.approx(np.log2(1.5), abs=1e-12)


@pytest.mark.parametrize("eps", [0.05, 0.2, 0.5])
def test_commuting_random_pairs_match_grid_oracle(rng, eps):
    for _ in range(10):
        a = rng.dirichlet(np.ones(4))
        b = rng.dirichlet(np.ones(4))
        sm = smooth_substate(diag_state(*a), diag_state(*b), eps)
        assert sm.threshold == pytest.approx(classical_grid_threshold(a, b, eps), abs=1.5e-4)


def test_qubit_pairs_meet_bound(rng):
    for _ in range(50):
        rho, sigma = random_pair(rng, 2)
        sm = smooth_substate(rho, sigma, 0.2)
        assert dmax(sm.rho_prime, sigma) <= (rel_entropy(rho, sigma) + 1) / 0.2 + np.log2(1 / 0.8) + 1e-9
        assert sm.bound == pytest.approx(substate_bound(rel_entropy(rho, sigma), 0.2))


@pytest.mark.parametrize("N", [2, 4, 6])
def test_contracts(rng, N):
    for _ in range(15):
        eps = float(rng.uniform(0.01, 0.9))
        rho, sigma = random_pair(rng, N, rank=int(rng.integers(1, N + 1)))
        sm = smooth_substate(rho, sigma, eps)
        assert sm.fidelity_achieved >= 1 - eps - 1e-8
        assert fidelity(rho, sm.rho_prime) == pytest.approx(sm.fidelity_achieved, abs=1e-12)
        assert dmax(sm.rho_prime, sigma) == pytest.approx(sm.lambda_achieved, abs=1e-6)


def test_threshold_monotone_in_eps(rng):
    for _ in range(20):
        rho, sigma = random_pair(rng, 4)
        thresholds = [smooth_substate(rho, sigma, e).threshold for e in (0.6, 0.4, 0.2, 0.1, 0.01)]
        assert all(b >= a - 1e-12 for a, b in zip(thresholds, thresholds[1:]))


def test_rank_deficient_sigma_support():
    sigma = diag_state(0.5, 0.5, 0.0)
    rho = diag_state(0.9, 0.1, 0.0)
    sm = smooth_substate(rho, sigma, 0.3)
    assert sm.rho_prime.matrix[2, 2] == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(SupportError):
        smooth_substate(diag_state(0.5, 0.25, 0.25), sigma, 0.3)


@pytest.mark.parametrize("eps", [0.0, 1.0, -0.1])
def test_eps_range(eps):
    with pytest.raises(ValueError):
        smooth_substate(diag_state(1, 0), diag_state(0.5, 0.5), eps)
