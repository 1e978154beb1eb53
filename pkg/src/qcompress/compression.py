"""Entanglement-assisted rejection sampling of rho against sigma.

Frame convention. The shared resource on A1 A2 B1 B2 is
``|S> = sum_{i,m} |i,m>_A |i,m>_B / sqrt(NK)``. Since
``(X (x) I)|S> = (I (x) X^T)|S>``, an operator that Bob applies "in his own
frame" acts on the stored amplitudes as its complex conjugate, and a state
Bob holds is the complex conjugate of the stored marginal. Bob's projector
is therefore returned with conjugated eigenvectors, and every state reported
as Bob's output is already converted back to his frame. Closed-form
expressions below are written directly in that frame.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .hilbert import (
    TOL_SUPP,
    DensityMatrix,
    Projector,
    RegisterLayout,
    SeedLike,
)
from .quantities import _require_support, fidelity, rel_entropy
from .substate import SmoothedState, smooth_substate

DEFAULT_K = 2**16


def tol_disc(N: int, K: int) -> float:
    """Allowance for replacing exact rational caps with ceil(K x)."""
    return 4.0 * N / K


@dataclass(frozen=True)
class CompressionParams:
    epsilon: float
    c: float
    N: int
    K: int
    delta: float
    c_prime: float
    blocks: int
    total_indices: int
    hash_count: int

    @property
    def block_bits(self) -> int:
        return math.ceil(math.log2(self.blocks)) if self.blocks > 1 else 0

    @property
    def bits_sent(self) -> int:
        return self.block_bits + self.hash_count

    @property
    def block_bits_eps(self) -> int:
        """Block id width when written with log log(1/eps) instead of log log(1/delta)."""
        inner = math.log2(1.0 / self.epsilon)
        return math.ceil(math.log2(inner)) if inner > 1 else 0

    @property
    def simplified_bound(self) -> int:
        """ceil(3^4 (c+2)/eps^4 + 7 log(1/eps)), the closed-form cost estimate."""
        return math.ceil(81 * (self.c + 2) / self.epsilon**4 + 7 * math.log2(1 / self.epsilon))

    @property
    def relativeprob_floor(self) -> float:
        return 1.0 - self.delta - 2.0 * self.delta**0.25

    def derivations(self) -> dict:
        d = asdict(self)
        d.update(
            block_bits=self.block_bits,
            bits_sent=self.bits_sent,
            block_bits_eps=self.block_bits_eps,
            bits_sent_eps_variant=self.block_bits_eps + self.hash_count,
            simplified_bound=self.simplified_bound,
        )
        return d


def make_params(epsilon: float, c: float, N: int, K: int = DEFAULT_K) -> CompressionParams:
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if c < 0:
        raise ValueError(f"c must be non-negative, got {c}")
    if N < 1 or K < N:
        raise ValueError(f"need 1 <= N <= K, got N={N}, K={K}")
    delta = (epsilon / 3.0) ** 4
    c_prime = (c + 2.0) / delta
    log_inv_delta = math.log2(1.0 / delta)
    blocks = math.ceil(log_inv_delta)
    hash_count = math.ceil(c_prime + log_inv_delta + 2.0 * math.log2(1.0 / epsilon))
    return CompressionParams(
        epsilon=float(epsilon), c=float(c), N=int(N), K=int(K), delta=delta, c_prime=c_prime,
        blocks=blocks, total_indices=N * blocks, hash_count=hash_count,
    )


def alice_caps(a: np.ndarray, K: int) -> np.ndarray:
    """n_i = ceil(K a_i); eigenvalues outside the support get no slots."""
    a = np.asarray(a, dtype=float)
    # the 1e-9 guard keeps K*a_i that is integral up to rounding from gaining a slot
    caps = np.ceil(K * a - 1e-9).astype(np.int64)
    caps[a <= TOL_SUPP] = 0
    return np.clip(caps, 0, K)


def bob_caps(b: np.ndarray, params: CompressionParams) -> np.ndarray:
    """L_j = min(K, ceil(K 2^c' b_j / delta)), evaluated in log space."""
    K = params.K
    out = np.zeros(len(b), dtype=np.int64)
    for j, bj in enumerate(np.asarray(b, dtype=float)):
        if bj <= TOL_SUPP:
            continue
        expo = math.log2(K) + params.c_prime + math.log2(bj) - math.log2(params.delta)
        out[j] = K if expo >= math.log2(K) else min(K, math.ceil(2.0**expo - 1e-9))
    return out


def cap_projector(vectors: np.ndarray, caps: Sequence[int], K: int) -> np.ndarray:
    """sum_i |v_i><v_i| (x) sum_{m <= caps_i} |m><m| on an N x K layout."""
    N = vectors.shape[0]
    out = np.zeros((N * K, N * K), dtype=complex)
    for v, cap in zip(vectors.T, caps):
        if cap:
            slots = np.zeros(K)
            slots[:cap] = 1.0
            out += np.kron(np.outer(v, v.conj()), np.diag(slots))
    return out


def projectors(rho: DensityMatrix, sigma: DensityMatrix, params: CompressionParams) -> tuple[Projector, Projector]:
    """Alice's P_A on A1 A2 and Bob's P_B on B1 B2 (stored frame, conjugated eigenvectors)."""
    _require_support(rho, sigma)
    N, K = params.N, params.K
    pa = cap_projector(rho.eigenvectors, alice_caps(rho.eigenvalues, K), K)
    pb = cap_projector(sigma.eigenvectors.conj(), bob_caps(sigma.eigenvalues, params), K)
    return (Projector(pa, RegisterLayout.of(("A1", N), ("A2", K))),
            Projector(pb, RegisterLayout.of(("B1", N), ("B2", K))))


def bob_block(rho: DensityMatrix, sigma: DensityMatrix, a_caps: np.ndarray, b_caps: np.ndarray, K: int) -> np.ndarray:
    """Bob's unnormalized B1 state (his frame) on the event selected by the caps.

    (1/KN) sum_i sum_{j,j'} <b_j|a_i><a_i|b_j'> min(n_i, L_j, L_j') |b_j><b_j'|
    """
    N = rho.dim
    ov = rho.eigenvectors.conj().T @ sigma.eigenvectors  # ov[i, j] = <a_i|b_j>
    w = np.minimum(np.asarray(a_caps)[:, None, None],
                   np.minimum(np.asarray(b_caps)[None, :, None], np.asarray(b_caps)[None, None, :]))
    g = np.einsum("ij,ik,ijk->jk", ov.conj(), ov, w)
    vb = sigma.eigenvectors
    m = vb @ g @ vb.conj().T / (K * N)
    return (m + m.conj().T) / 2


@dataclass(frozen=True)
class IndexStats:
    p_alice: float
    p_bob: float
    p_both: float
    p_bob_given_alice: float
    rho_tilde: DensityMatrix | None  # Bob's B1 state given both succeed
    fidelity_out: float
    bob_only: DensityMatrix | None  # Bob's B1 state given Bob succeeds and Alice fails
    alice_caps: np.ndarray
    bob_caps: np.ndarray


def index_stats(rho: DensityMatrix, sigma: DensityMatrix, params: CompressionParams) -> IndexStats:
    """Per-index success statistics and Bob's conditional outputs, in closed form."""
    _require_support(rho, sigma)
    K, N = params.K, params.N
    if rho.dim != N or sigma.dim != N:
        raise ValueError(f"states must have dimension N={N}")
    n = alice_caps(rho.eigenvalues, K)
    L = bob_caps(sigma.eigenvalues, params)
    c = np.abs(rho.eigenvectors.conj().T @ sigma.eigenvectors) ** 2
    p_alice = n.sum() / (K * N)
    p_bob = L.sum() / (K * N)
    p_both = float(np.sum(c * np.minimum(n[:, None], L[None, :])) / (K * N))
    joint = bob_block(rho, sigma, n, L, K)
    rho_tilde = DensityMatrix.normalized(joint, rho.layout) if p_both > 0 else None
    total = bob_block(rho, sigma, np.full(N, K), L, K)
    rest = total - joint
    bob_only = DensityMatrix.normalized(rest, rho.layout) if p_bob - p_both > 1e-12 else None
    return IndexStats(
        p_alice=float(p_alice), p_bob=float(p_bob), p_both=p_both,
        p_bob_given_alice=p_both / p_alice if p_alice > 0 else 0.0,
        rho_tilde=rho_tilde,
        fidelity_out=fidelity(rho, rho_tilde) if rho_tilde is not None else 0.0,
        bob_only=bob_only, alice_caps=n, bob_caps=L,
    )


def shared_state_overlap(rho: DensityMatrix, rho_prime: DensityMatrix, K: int) -> float:
    """|<S_A(rho)|S_A(rho')>| for the discretized collapsed shared states."""
    n = alice_caps(rho.eigenvalues, K)
    g = alice_caps(rho_prime.eigenvalues, K)
    c = np.abs(rho.eigenvectors.conj().T @ rho_prime.eigenvectors) ** 2
    return float(np.sum(c * np.minimum(n[:, None], g[None, :])) / K)


def eigen_tail_mass(rho_prime: DensityMatrix, sigma: DensityMatrix, p: float) -> np.ndarray:
    """For each eigenvector g_i of rho': sum over j with b_j <= p g_i of |<b_j|g_i>|^2."""
    g, vg = rho_prime.eigenvalues, rho_prime.eigenvectors
    b, vb = sigma.eigenvalues, sigma.eigenvectors
    c = np.abs(vb.conj().T @ vg) ** 2  # c[j, i]
    mask = b[:, None] <= p * g[None, :]
    return np.sum(c * mask, axis=0)


@dataclass(frozen=True)
class ProtocolOutcome:
    aborted: bool
    alice_index: int | None  # 1-based, as in the protocol description
    bob_index: int | None
    first_joint_index: int | None
    agreed: bool
    bits_sent: int
    output: DensityMatrix
    fidelity: float
    output_kind: str

    def to_row(self, trial: int, dump_states: bool = False) -> dict:
        row = {
            "trial": trial, "aborted": self.aborted, "m": self.alice_index, "n": self.bob_index,
            "j": self.first_joint_index, "agreed": self.agreed, "bits": self.bits_sent,
            "fidelity": self.fidelity, "output_kind": self.output_kind,
        }
        if dump_states:
            row["output"] = [[[z.real, z.imag] for z in r] for r in self.output.matrix]
        return row


# per-index joint events
BOTH, ALICE_ONLY, BOB_ONLY, NEITHER = 0, 1, 2, 3


def draw_hash_rows(rng: np.random.Generator, rows: int, hash_count: int) -> np.ndarray:
    """``rows`` independent strings of ``hash_count`` fair coins, packed into bytes."""
    nbytes = (hash_count + 7) // 8
    coins = rng.integers(0, 256, size=(rows, nbytes), dtype=np.uint8)
    if hash_count % 8:
        coins[:, -1] &= np.uint8((1 << (hash_count % 8)) - 1)
    return coins


class ProtocolSimulator:
    """Trajectory sampler for one (rho, sigma, params) instance.

    Per-index events are drawn i.i.d. from the closed-form four-outcome
    distribution; quantum registers are never materialized.
    """

    def __init__(self, rho: DensityMatrix, sigma: DensityMatrix, params: CompressionParams,
                 stats: IndexStats | None = None):
        self.rho, self.sigma, self.params = rho, sigma, params
        self.stats = stats or index_stats(rho, sigma, params)
        s = self.stats
        probs = np.array([s.p_both, s.p_alice - s.p_both, s.p_bob - s.p_both,
                          1.0 - s.p_alice - s.p_bob + s.p_both])
        probs = np.clip(probs, 0.0, None)
        self.event_probs = probs / probs.sum()
        fallback = np.zeros((rho.dim, rho.dim), dtype=complex)
        fallback[0, 0] = 1.0
        self.outputs = {"fallback": DensityMatrix(fallback, rho.layout)}
        if s.rho_tilde is not None:
            self.outputs["joint"] = s.rho_tilde
        if s.bob_only is not None:
            self.outputs["bob_only"] = s.bob_only
        self.fidelities = {k: fidelity(rho, v) for k, v in self.outputs.items()}

    def trial(self, rng: np.random.Generator) -> ProtocolOutcome:
        p = self.params
        N, T = p.N, p.total_indices
        events = rng.choice(4, size=T, p=self.event_probs)
        alice = (events == BOTH) | (events == ALICE_ONLY)
        bob = (events == BOTH) | (events == BOB_ONLY)
        both = np.flatnonzero(events == BOTH)
        j = int(both[0]) + 1 if both.size else None
        if not alice.any():
            return ProtocolOutcome(True, None, None, j, False, 0, self.outputs["fallback"],
                                   self.fidelities["fallback"], "fallback")
        m = int(np.argmax(alice))
        start = (m // N) * N
        hashes = draw_hash_rows(rng, N, p.hash_count)
        n = None
        for t in range(start, min(start + N, T)):
            if bob[t] and (t == m or np.array_equal(hashes[t % N], hashes[m % N])):
                n = t
                break
        if n is None:
            kind = "fallback"
        else:
            kind = "joint" if events[n] == BOTH else "bob_only"
        return ProtocolOutcome(
            aborted=False, alice_index=m + 1, bob_index=None if n is None else n + 1,
            first_joint_index=j, agreed=n == m, bits_sent=p.bits_sent,
            output=self.outputs[kind], fidelity=self.fidelities[kind], output_kind=kind,
        )


@dataclass
class ProtocolRun:
    params: CompressionParams
    stats: IndexStats
    smoothed: SmoothedState
    outcomes: list[ProtocolOutcome]
    summary: dict


def trial_rngs(seed: SeedLike, trials: int) -> list[np.random.Generator]:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(trials)]


def binomial_sigma(p: float, n: int) -> float:
    p = min(max(p, 0.0), 1.0)
    return math.sqrt(p * (1.0 - p) / n)


def summarize(outcomes: list[ProtocolOutcome], rho: DensityMatrix, params: CompressionParams) -> dict:
    n = len(outcomes)
    eps = params.epsilon
    aborted = np.array([o.aborted for o in outcomes])
    agreed = np.array([o.agreed for o in outcomes])
    fids = np.array([o.fidelity for o in outcomes])
    mean_out = sum(o.output.matrix for o in outcomes) / n
    abort_rate, agree_rate, mean_fid = float(aborted.mean()), float(agreed.mean()), float(fids.mean())
    s_abort = binomial_sigma(eps, n)
    s_agree = binomial_sigma(1 - 4 * eps, n)
    s_fid = float(fids.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    bits_ok = all(o.bits_sent == (0 if o.aborted else params.bits_sent) for o in outcomes)
    return {
        "trials": n,
        "abort_rate": abort_rate,
        "abort_sigma": s_abort,
        "abort_ok": abort_rate <= eps + 3 * s_abort,
        "agree_rate": agree_rate,
        "agree_sigma": s_agree,
        "agree_ok": agree_rate >= 1 - 4 * eps - 3 * s_agree,
        "mean_fidelity": mean_fid,
        "fidelity_sigma": s_fid,
        "fidelity_ok": mean_fid >= 1 - 5 * eps - 3 * s_fid,
        "fidelity_of_mean_output": fidelity(rho, DensityMatrix.normalized(mean_out, rho.layout)),
        "bits_sent": params.bits_sent,
        "bits_ok": bits_ok,
    }


def run_protocol(rho: DensityMatrix, sigma: DensityMatrix, epsilon: float, seed: SeedLike = None,
                 trials: int = 1000, K: int = DEFAULT_K, c: float | None = None,
                 use_smoothed: bool = False, params: CompressionParams | None = None) -> ProtocolRun:
    """Monte Carlo run of the compression protocol.

    ``c`` defaults to D(rho||sigma); any larger value is also valid. The
    smoothed state rho' (fidelity parameter delta) is always computed for
    the report; with ``use_smoothed`` Alice measures with rho' instead of rho.
    ``params`` overrides the derived parameters entirely.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    _require_support(rho, sigma)
    if c is None:
        c = max(rel_entropy(rho, sigma), 0.0)
    params = params or make_params(epsilon, c, rho.dim, K)
    smoothed = smooth_substate(rho, sigma, params.delta)
    alice_state = smoothed.rho_prime if use_smoothed else rho
    sim = ProtocolSimulator(alice_state, sigma, params)
    if use_smoothed:
        sim.fidelities = {k: fidelity(rho, v) for k, v in sim.outputs.items()}
    outcomes = [sim.trial(r) for r in trial_rngs(seed, trials)]
    summary = summarize(outcomes, rho, params)
    summary["p_alice"] = sim.stats.p_alice
    summary["p_bob"] = sim.stats.p_bob
    summary["p_both"] = sim.stats.p_both
    summary["dmax_smoothed"] = smoothed.lambda_achieved
    summary["c_prime"] = params.c_prime
    return ProtocolRun(params, sim.stats, smoothed, outcomes, summary)
