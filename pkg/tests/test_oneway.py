import json

import numpy as np
import pytest

from qcompress.compression import make_params
from qcompress.hilbert import DensityMatrix, RegisterLayout, haar_unitary, random_density
from qcompress.io import protocol_from_obj, protocol_to_json
from qcompress.oneway import (
    OneWayProtocol,
    RelationTable,
    averaged_states,
    base_error,
    base_error_channel,
    compress_protocol,
    equality_fixture,
    good_set,
    index_fixture,
    info_cost,
    info_cost_cmi,
    markov_gap,
    message_states,
)
from qcompress.quantities import cond_mutual_info, entropy, mutual_info


def constant_protocol(nx=3):
    """Alice does nothing; Bob always answers 0."""
    p = OneWayProtocol(dims={"EA": 2, "EB": 1, "M": 2, "Z": 2}, shared_state=np.array([1, 0]),
                       U={x: np.eye(2) for x in range(nx)}, V={0: np.eye(2), 1: np.eye(2)})
    rel = RelationTable(valid={(x, y, 0) for x in range(nx) for y in (0, 1)},
                        mu={(x, y): 1 / (2 * nx) for x in range(nx) for y in (0, 1)})
    return p, rel


def random_protocol(rng, ea=4, eb=1, m=2, nx=3, ny=2):
    dims = {"EA": ea, "EB": eb, "M": m, "Z": 2}
    state = rng.standard_normal(ea * eb) + 1j * rng.standard_normal(ea * eb)
    p = OneWayProtocol(dims=dims, shared_state=state / np.linalg.norm(state),
                       U={x: haar_unitary(ea, rng) for x in range(nx)},
                       V={y: haar_unitary(m * eb, rng) for y in range(ny)})
    w = rng.dirichlet(np.ones(nx * ny))
    mu = {(x, y): float(w[x * ny + y]) for x in range(nx) for y in range(ny)}
    mu = {k: v / sum(mu.values()) for k, v in mu.items()}
    rel = RelationTable(valid={(x, y, (x + y) % 2) for x in range(nx) for y in range(ny)}, mu=mu)
    return p, rel


def test_x_independent_message():
    p, rel = constant_protocol()
    rx, ry = message_states(p, rel.xs), averaged_states(p, rel)
    for x in rel.xs:
        for y in rel.ys:
            np.testing.assert_allclose(rx[x].matrix, ry[y].matrix, atol=1e-12)
    assert info_cost(p, rel) == pytest.approx(0.0, abs=1e-12)
    assert good_set(p, rel, 0.1) == set(rel.support)
    assert base_error(p, rel) == pytest.approx(0.0, abs=1e-12)
    run = compress_protocol(p, rel, 0.45, 0.25, seed=0, trials=200, K=16)
    assert run.error_rate == 0.0


def test_classical_message_bit():
    X = np.array([[0, 1], [1, 0]])
    p = OneWayProtocol(dims={"EA": 2, "EB": 1, "M": 2, "Z": 2}, shared_state=np.array([1, 0]),
                       U={x: np.linalg.matrix_power(X, x % 2) for x in range(3)}, V={0: np.eye(2)})
    for x, rho in message_states(p).items():
        np.testing.assert_allclose(rho.matrix, np.diag([1 - x % 2, x % 2]), atol=1e-12)


def test_equality_fixture_values():
    p, rel = equality_fixture()
    assert info_cost(p, rel) == pytest.approx(1.0, abs=1e-10)
    assert info_cost_cmi(p, rel) == pytest.approx(1.0, abs=1e-10)
    assert markov_gap(p, rel) == pytest.approx(0.0, abs=1e-8)
    assert base_error(p, rel) == pytest.approx(0.0, abs=1e-12)
    good = good_set(p, rel, 0.25)
    assert sum(rel.mu[k] for k in good) >= 0.75


def test_index_fixture_values():
    p, rel = index_fixture()
    assert info_cost(p, rel) == pytest.approx(2.0, abs=1e-10)
    assert info_cost_cmi(p, rel) == pytest.approx(2.0, abs=1e-10)
    assert markov_gap(p, rel) == pytest.approx(0.0, abs=1e-8)
    assert base_error(p, rel) == pytest.approx(0.0, abs=1e-12)
    assert base_error_channel(p, rel) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("fixture", [equality_fixture, index_fixture])
def test_averages_match_global_state(fixture):
    p, rel = fixture()
    ry = averaged_states(p, rel)
    for y in rel.ys:
        direct = 0
        for x, w in rel.conditional_x(y).items():
            v = p.after_alice(x).reshape(p.dim_a, -1)
            direct = direct + w * (v.T @ v.conj())
        np.testing.assert_allclose(ry[y].matrix, direct, atol=1e-10)


@pytest.mark.parametrize("eb", [1, 2])
def test_info_cost_two_ways_and_cap(rng, eb):
    for _ in range(15):
        p, rel = random_protocol(rng, eb=eb)
        cost = info_cost(p, rel)
        assert cost == pytest.approx(info_cost_cmi(p, rel), abs=1e-8)
        assert cost >= -1e-12
        eb_marginal = DensityMatrix.normalized(p.shared_state.reshape(p.dims["EA"], eb).T
                                               @ p.shared_state.reshape(p.dims["EA"], eb).conj())
        assert cost <= 2 * np.log2(p.dims["M"]) + 2 * entropy(eb_marginal) + 1e-9
        assert markov_gap(p, rel) == pytest.approx(0.0, abs=1e-8)


def test_base_error_two_paths(rng):
    for _ in range(15):
        p, rel = random_protocol(rng, eb=2)
        assert base_error(p, rel) == pytest.approx(base_error_channel(p, rel), abs=1e-9)


def test_good_set_mass_and_monotonicity(rng):
    for _ in range(15):
        p, rel = random_protocol(rng)
        prev = None
        for delta in (0.05, 0.1, 0.25, 0.5, 0.9):
            g = good_set(p, rel, delta)
            assert sum(rel.mu[k] for k in g) >= 1 - delta - 1e-12
            if prev is not None:  # a larger delta lowers the cutoff
                assert g <= prev
            prev = g
    with pytest.raises(ValueError):
        good_set(p, rel, 1.0)


def test_compressed_equality_protocol():
    p, rel = equality_fixture()
    run = compress_protocol(p, rel, 0.45, 0.25, seed=3, trials=1000, K=64)
    assert run.within_bound
    assert run.good_mass >= 0.75
    expected = make_params(0.45, info_cost(p, rel) / 0.25, 2, 64).bits_sent
    assert run.params.bits_sent == expected
    assert all(b in (0, expected) for b in run.bits)


def test_compress_dimension_cap(rng):
    p, rel = random_protocol(rng, ea=8, eb=2, m=8)
    with pytest.raises(ValueError):
        compress_protocol(p, rel, 0.45, 0.25, trials=10)


@pytest.mark.parametrize("fixture", [equality_fixture, index_fixture])
def test_json_round_trip(fixture):
    p, rel = fixture()
    q, rel2 = protocol_from_obj(json.loads(protocol_to_json(p, rel)))
    assert q.dims == p.dims and rel2.valid == rel.valid and rel2.mu == rel.mu
    for x in p.U:
        np.testing.assert_allclose(q.U[x], p.U[x], atol=1e-15)
    assert info_cost(q, rel2) == pytest.approx(info_cost(p, rel))


def test_protocol_validation():
    with pytest.raises(ValueError):
        OneWayProtocol(dims={"EA": 2, "EB": 1, "M": 2, "Z": 2}, shared_state=np.array([1, 0]),
                       U={0: np.ones((2, 2))}, V={0: np.eye(2)})
    with pytest.raises(ValueError):
        OneWayProtocol(dims={"EA": 2, "EB": 1, "M": 2, "Z": 2}, shared_state=np.array([1, 1]),
                       U={0: np.eye(2)}, V={0: np.eye(2)})
    with pytest.raises(ValueError):
        RelationTable(valid={(0, 0, 0)}, mu={(0, 0): 0.5, (1, 0): 0.5})


@pytest.mark.parametrize("k", [2, 3])
def test_chain_rule_with_product_inputs(rng, k):
    """I(A_1..A_k : B) = sum_j I(A_j : B | A_<j), and with independent A_j it dominates sum_j I(A_j : B)."""
    for _ in range(10):
        marg = [rng.dirichlet(np.ones(2)) for _ in range(k)]
        out = 0
        for a in np.ndindex(*(2,) * k):
            pa = np.prod([marg[j][a[j]] for j in range(k)])
            proj = np.zeros((2**k, 2**k))
            idx = int("".join(map(str, a)), 2)
            proj[idx, idx] = 1
            out = out + pa * np.kron(proj, random_density(2, None, rng).matrix)
        layout = RegisterLayout.of(*[(f"A{j}", 2) for j in range(k)], ("B", 2))
        state = DensityMatrix.normalized(out, layout)
        names = [f"A{j}" for j in range(k)]
        total = mutual_info(state, names, "B")
        terms = [mutual_info(state, names[0], "B")]
        terms += [cond_mutual_info(state, names[j], "B", names[:j]) for j in range(1, k)]
        assert total == pytest.approx(sum(terms), abs=1e-9)
        assert total >= sum(mutual_info(state, n, "B") for n in names) - 1e-9
