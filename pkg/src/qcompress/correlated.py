"""Zero-communication correlated sampling from shared entanglement.

Alice and Bob scan copies of |S> on A1 A2 B1 B2, Alice accepting with P_A
(caps ceil(K a_i)) and Bob with P_B (caps ceil(K b_j)), each stopping at
their first success. The joint output tau is a mixture of three cases,
split at the first copy where not both fail:

* both succeed there: the collapsed copy (P_A (x) P_B)|S>;
* only Alice succeeds: Alice keeps that copy, Bob's output comes from a
  later fresh copy on which he succeeds;
* only Bob succeeds: symmetric.

Everything is kept as NK x NK matrices. A vector on A (x) B is stored as its
amplitude matrix Psi (rows A, columns B); Bob's operators and states are
written in his own frame, so his projector here is the unconjugated
sum_j |b_j><b_j| (x) slots, and stored/physical frames differ by a complex
conjugate exactly as in the compression module.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .compression import alice_caps, cap_projector, tol_disc
from .hilbert import TOL_CHK, DensityMatrix, Projector, RegisterLayout, SeedLike, as_rng, ptrace_array
from .quantities import trace_distance

DENSE_TAU_CAP = 32  # NK for which tau is materialized as an (NK)^2 matrix
EXACT_CAP = 512  # NK; only NK x NK matrices are formed


def agreement_bound(rho, sigma) -> float:
    """(1 - sqrt(t - t^2/4))^3 with t = ||rho - sigma||_1."""
    t = trace_distance(rho, sigma)
    return float((1.0 - np.sqrt(max(t - t * t / 4.0, 0.0))) ** 3)


def cs_projectors(rho: DensityMatrix, sigma: DensityMatrix, K: int) -> tuple[Projector, Projector]:
    """P_A on A1 A2 and P_B on B1 B2 (stored frame: Bob's eigenvectors conjugated)."""
    N = rho.dim
    if sigma.dim != N or K < 1:
        raise ValueError("need matching dimensions and K >= 1")
    pa = cap_projector(rho.eigenvectors, alice_caps(rho.eigenvalues, K), K)
    pb = cap_projector(sigma.eigenvectors.conj(), alice_caps(sigma.eigenvalues, K), K)
    return (Projector(pa, RegisterLayout.of(("A1", N), ("A2", K))),
            Projector(pb, RegisterLayout.of(("B1", N), ("B2", K))))


def _normalize(m: np.ndarray) -> np.ndarray:
    m = (m + m.conj().T) / 2
    return m / np.trace(m).real


@dataclass(frozen=True)
class JointOutput:
    N: int
    K: int
    p_alice_idx: np.ndarray  # Alice's P_A, NK x NK
    p_bob_idx: np.ndarray  # Bob's P_B in his frame
    q_alice: float
    q_bob: float
    q_both: float
    p_same_index: float
    p_alice_first: float
    p_bob_first: float
    same: np.ndarray  # normalized amplitude matrix of the both-succeed copy
    alice_first: tuple[np.ndarray, np.ndarray]  # (Alice A1A2 state, Bob B1B2 state in his frame)
    bob_first: tuple[np.ndarray, np.ndarray]
    theta: np.ndarray  # amplitude matrix of (P_A (x) P_A)|S>, normalized

    @property
    def q_none(self) -> float:
        return 1.0 - self.q_alice - self.q_bob + self.q_both

    @property
    def weights(self) -> tuple[float, float, float]:
        return self.p_same_index, self.p_alice_first, self.p_bob_first

    @property
    def product_cases(self):
        return ((self.p_alice_first, self.alice_first), (self.p_bob_first, self.bob_first))

    def alice_state(self) -> np.ndarray:
        """A1 A2 marginal of tau."""
        out = self.p_same_index * self.same @ self.same.conj().T
        for w, (alpha, _) in self.product_cases:
            out = out + w * alpha
        return out

    def bob_state(self) -> np.ndarray:
        """B1 B2 marginal of tau, in Bob's frame."""
        s = self.same
        out = self.p_same_index * s.conj().T @ s
        for w, (_, beta) in self.product_cases:
            out = out + w * beta
        return out

    def alice_marginal(self) -> np.ndarray:
        return ptrace_array(self.alice_state(), (self.N, self.K), [0])

    def bob_marginal(self) -> np.ndarray:
        return ptrace_array(self.bob_state(), (self.N, self.K), [0])

    def tau_dense(self) -> DensityMatrix:
        """tau on A1 A2 B1 B2 in the stored frame (Bob's factors conjugated)."""
        NK = self.N * self.K
        if NK > DENSE_TAU_CAP:
            raise ValueError(f"NK={NK} exceeds the dense tau cap {DENSE_TAU_CAP}")
        v = self.same.ravel()
        tau = self.p_same_index * np.outer(v, v.conj())
        for w, (alpha, beta) in self.product_cases:
            if w > 0:
                tau = tau + w * np.kron(alpha, beta.conj())
        layout = RegisterLayout.of(("A1", self.N), ("A2", self.K), ("B1", self.N), ("B2", self.K))
        return DensityMatrix.normalized(tau, layout)

    def same_index_term(self) -> np.ndarray:
        """Weighted both-succeed component of tau (stored frame)."""
        v = self.same.ravel()
        return self.p_same_index * np.outer(v, v.conj())


def exact_joint_output(rho: DensityMatrix, sigma: DensityMatrix, K: int) -> JointOutput:
    N = rho.dim
    NK = N * K
    if NK > EXACT_CAP:
        raise ValueError(f"NK={NK} exceeds the cap {EXACT_CAP}")
    pa, pb = cs_projectors(rho, sigma, K)
    pa, pb = pa.matrix, pb.matrix.conj()
    eye = np.eye(NK)
    tr_a, tr_b = float(np.trace(pa).real), float(np.trace(pb).real)
    tr_ab = float(np.trace(pa @ pb).real)
    q_a, q_b, q_ab = tr_a / NK, tr_b / NK, tr_ab / NK
    total = q_a + q_b - q_ab
    w_same, w_a, w_b = q_ab / total, max(q_a - q_ab, 0.0) / total, max(q_b - q_ab, 0.0) / total
    same = pa @ pb / np.sqrt(tr_ab) if tr_ab > 0 else np.zeros((NK, NK), dtype=complex)
    alice_first = (_normalize(pa @ (eye - pb) @ pa) if w_a > 0 else pa / tr_a, pb / tr_b)
    bob_first = (pa / tr_a, _normalize(pb @ (eye - pa) @ pb) if w_b > 0 else pb / tr_b)
    return JointOutput(
        N=N, K=K, p_alice_idx=pa, p_bob_idx=pb, q_alice=q_a, q_bob=q_b, q_both=q_ab,
        p_same_index=w_same, p_alice_first=w_a, p_bob_first=w_b,
        same=same, alice_first=alice_first, bob_first=bob_first, theta=pa / np.sqrt(tr_a),
    )


def _check_measurement(out: JointOutput, M: Sequence[Projector | np.ndarray]) -> list[np.ndarray]:
    mats = [np.asarray(m.matrix if isinstance(m, Projector) else m, dtype=complex) for m in M]
    NK = out.N * out.K
    if not mats or any(m.shape != (NK, NK) for m in mats):
        raise ValueError(f"measurement elements must be {NK} x {NK}")
    for m in mats:
        if np.max(np.abs(m - m.conj().T)) > TOL_CHK or np.max(np.abs(m @ m - m)) > TOL_CHK:
            raise ValueError("measurement elements must be orthogonal projectors")
    if np.max(np.abs(sum(mats) - np.eye(NK))) > TOL_CHK:
        raise ValueError("measurement elements do not sum to the identity")
    pa = out.p_alice_idx
    if any(np.max(np.abs(m @ pa - pa @ m)) > TOL_CHK for m in mats):
        raise ValueError("measurement must act within supp(P_A): elements have to commute with P_A")
    return mats


def outcome_distributions(out: JointOutput, M) -> tuple[np.ndarray, list[tuple[np.ndarray, np.ndarray]]]:
    """Joint outcome law for the same-index case and marginal laws for the other two."""
    mats = _check_measurement(out, M)
    s = out.same
    joint = np.array([[np.trace(s.conj().T @ mi @ s @ mj).real for mj in mats] for mi in mats])
    prods = []
    for _, (alpha, beta) in out.product_cases:
        prods.append((np.array([np.trace(m @ alpha).real for m in mats]),
                      np.array([np.trace(m @ beta).real for m in mats])))
    return np.clip(joint, 0, None), [(np.clip(a, 0, None), np.clip(b, 0, None)) for a, b in prods]


def agreement_probability(out: JointOutput, M) -> float:
    """Pr[I = J] = Tr(E tau) with E = sum_i M_i (x) M_i."""
    joint, prods = outcome_distributions(out, M)
    p = out.p_same_index * np.trace(joint)
    for (w, _), (pa, pb) in zip(out.product_cases, prods):
        p += w * float(pa @ pb)
    return float(p)


def theta_overlap(out: JointOutput) -> float:
    """<theta| tau |theta>."""
    th = out.theta
    val = out.p_same_index * abs(np.trace(th.conj().T @ out.same)) ** 2
    for w, (alpha, beta) in out.product_cases:
        val += w * np.trace(th @ alpha @ th @ beta).real
    return float(val)


def theta_agreement(out: JointOutput, M) -> float:
    """Tr(E |theta><theta|)."""
    mats = _check_measurement(out, M)
    th = out.theta
    return float(sum(np.trace(th.conj().T @ m @ th @ m).real for m in mats))


@dataclass(frozen=True)
class SamplingResult:
    trials: int
    agreement_rate: float
    exact_agreement: float
    sigma: float
    stopping_counts: np.ndarray  # stopping index 1..4 and >= 5
    stopping_expected: np.ndarray
    chi2_pvalue: float

    @property
    def within_3sigma(self) -> bool:
        return abs(self.agreement_rate - self.exact_agreement) <= 3 * self.sigma + 1e-12


def mc_sample(rho: DensityMatrix, sigma: DensityMatrix, K: int, seed: SeedLike, trials: int, M,
              out: JointOutput | None = None) -> SamplingResult:
    """Trajectory-level simulation of the sequential protocol."""
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = as_rng(seed)
    out = out or exact_joint_output(rho, sigma, K)
    joint, prods = outcome_distributions(out, M)
    w = len(joint)
    stop_p = 1.0 - out.q_none
    stops = rng.geometric(stop_p, size=trials) if stop_p < 1 else np.ones(trials, dtype=int)
    cases = rng.choice(3, size=trials, p=np.array(out.weights) / sum(out.weights))
    agree = np.zeros(trials, dtype=bool)
    idx = np.flatnonzero(cases == 0)
    if idx.size:
        flat = joint.ravel() / joint.sum()
        pairs = rng.choice(w * w, size=idx.size, p=flat)
        agree[idx] = pairs // w == pairs % w
    for k, (pa, pb) in enumerate(prods, start=1):
        idx = np.flatnonzero(cases == k)
        if idx.size:
            i = rng.choice(w, size=idx.size, p=pa / pa.sum())
            j = rng.choice(w, size=idx.size, p=pb / pb.sum())
            agree[idx] = i == j
    exact = agreement_probability(out, M)
    counts = np.array([np.sum(stops == s) for s in range(1, 5)] + [np.sum(stops >= 5)])
    law = np.array([(1 - stop_p) ** (s - 1) * stop_p for s in range(1, 5)])
    expected = trials * np.append(law, 1 - law.sum())
    keep = expected > 0
    if keep.sum() > 1:
        pval = float(stats.chisquare(counts[keep], expected[keep] * counts.sum() / expected[keep].sum()).pvalue)
    else:
        pval = 1.0
    rate = float(agree.mean())
    return SamplingResult(trials, rate, exact, float(np.sqrt(max(exact * (1 - exact), 0.0) / trials)),
                          counts, expected, pval)


def marginal_errors(out: JointOutput, rho: DensityMatrix, sigma: DensityMatrix) -> tuple[float, float]:
    """Max-entry deviation of tau's A1 and B1 marginals from rho and sigma."""
    return (float(np.max(np.abs(out.alice_marginal() - rho.matrix))),
            float(np.max(np.abs(out.bob_marginal() - sigma.matrix))))


def discretization_allowance(N: int, K: int) -> float:
    return tol_disc(N, K)
