"""Compression when Bob holds side information, and the channel variant.

With side information Bob replaces sigma_AB by
``tau_AB = exp(log sigma_AB - log sigma_A (x) I + log rho_A (x) I) / Z``,
whose cost D(rho_AB || tau_AB) is at most D(rho_AB || sigma_AB) - D(rho_A || sigma_A).
Matrix logarithms diverge off the supports, so the exponent is evaluated
on the intersection of supp(sigma_AB) with supp(rho_A) (x) B, which is the
limit of the expression as the kernels are pushed to -infinity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .compression import DEFAULT_K, ProtocolRun, run_protocol
from .hilbert import (
    DensityMatrix,
    RegisterLayout,
    SeedLike,
    eig_hermitian,
    exp_hermitian,
    mat_fn_on_support,
    partial_trace,
    reorder,
    support_projector,
)
from .quantities import _require_support, fidelity, rel_entropy


def _split(rho_a: DensityMatrix, sigma_ab: DensityMatrix) -> tuple[list[str], int, int]:
    """Leading registers of sigma_ab that carry rho_a's dimension."""
    names, dims = sigma_ab.layout.names, sigma_ab.layout.dims
    acc = 1
    for k, d in enumerate(dims):
        acc *= d
        if acc == rho_a.dim:
            return list(names[: k + 1]), rho_a.dim, sigma_ab.dim // rho_a.dim
        if acc > rho_a.dim:
            break
    raise ValueError(f"no leading registers of {sigma_ab.layout} have dimension {rho_a.dim}")


def side_info_tau(rho_a: DensityMatrix, sigma_ab: DensityMatrix) -> tuple[DensityMatrix, float]:
    """Bob's effective reference state tau_AB and the normalization Z <= 1.

    The A part is the leading register(s) of ``sigma_ab`` whose dimension
    equals ``rho_a.dim``; everything after it is B.
    """
    a_names, dA, dB = _split(rho_a, sigma_ab)
    sigma_a = partial_trace(sigma_ab, a_names)
    _require_support(rho_a, sigma_a)
    eye_b = np.eye(dB)
    h = (mat_fn_on_support(sigma_ab, "log")
         - np.kron(mat_fn_on_support(sigma_a, "log"), eye_b)
         + np.kron(mat_fn_on_support(rho_a, "log"), eye_b))
    both = support_projector(sigma_ab) + np.kron(support_projector(rho_a), eye_b)
    vals, vecs = eig_hermitian(both, tol=1e-8)
    w = vecs[:, vals > 2 - 1e-8]
    if w.shape[1] == 0:
        raise ValueError("supp(sigma_AB) and supp(rho_A) (x) B intersect trivially")
    core = w.conj().T @ h @ w
    unnorm = w @ exp_hermitian((core + core.conj().T) / 2) @ w.conj().T
    z = float(np.trace(unnorm).real)
    return DensityMatrix.normalized(unnorm, sigma_ab.layout), z


@dataclass(frozen=True)
class Channel:
    """Completely positive trace-preserving map given by Kraus operators."""

    kraus_ops: tuple[np.ndarray, ...]
    tol: float = field(default=1e-9, compare=False)

    def __post_init__(self):
        ops = tuple(np.array(k, dtype=complex) for k in self.kraus_ops)
        if not ops:
            raise ValueError("a channel needs at least one Kraus operator")
        shape = ops[0].shape
        if any(k.shape != shape or k.ndim != 2 for k in ops):
            raise ValueError("Kraus operators must share one 2-d shape")
        gram = sum(k.conj().T @ k for k in ops)
        err = np.max(np.abs(gram - np.eye(shape[1])))
        if err > self.tol:
            raise ValueError(f"Kraus operators are not trace preserving (deviation {err:.3e})")
        object.__setattr__(self, "kraus_ops", ops)

    @property
    def d_in(self) -> int:
        return self.kraus_ops[0].shape[1]

    @property
    def d_out(self) -> int:
        return self.kraus_ops[0].shape[0]

    @property
    def rank(self) -> int:
        return len(self.kraus_ops)

    def __call__(self, rho: DensityMatrix) -> DensityMatrix:
        out = sum(k @ rho.matrix @ k.conj().T for k in self.kraus_ops)
        return DensityMatrix.normalized(out)

    @classmethod
    def identity(cls, d: int) -> "Channel":
        return cls((np.eye(d),))

    @classmethod
    def depolarizing(cls, d: int, p: float = 1.0) -> "Channel":
        """rho -> (1-p) rho + p I/d, through the d^2 generalized Pauli operators."""
        x = np.roll(np.eye(d), 1, axis=0)
        z = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
        paulis = [np.linalg.matrix_power(x, a) @ np.linalg.matrix_power(z, b) for a in range(d) for b in range(d)]
        weights = [1 - p + p / d**2] + [p / d**2] * (d**2 - 1)
        return cls(tuple(np.sqrt(w) * u for w, u in zip(weights, paulis) if w > 0))

    @classmethod
    def random(cls, d_in: int, d_out: int, rank: int, seed: SeedLike = None) -> "Channel":
        """Kraus operators cut from a random isometry C^d_in -> C^(d_out * rank)."""
        rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
        g = rng.standard_normal((d_out * rank, d_in)) + 1j * rng.standard_normal((d_out * rank, d_in))
        q, _ = np.linalg.qr(g)
        iso = q[:, :d_in]
        return cls(tuple(iso[k * d_out:(k + 1) * d_out] for k in range(rank)))


@dataclass(frozen=True)
class Dilation:
    """Unitary U on A (x) B (x) C with E(w) = Tr_{A,C}(U (w (x) |00><00|_{BC}) U^dag).

    The input enters on A; the channel output is read from B.
    """

    channel: Channel
    isometry: np.ndarray  # sum_i K_i (x) |i>_C, shape (d_out * rank, d_in)
    unitary: np.ndarray
    layout: RegisterLayout

    def embed(self, rho: DensityMatrix) -> DensityMatrix:
        ch = self.channel
        pad = np.zeros((ch.d_out * ch.rank,) * 2, dtype=complex)
        pad[0, 0] = 1.0
        full = np.kron(rho.matrix, pad)
        return DensityMatrix.normalized(self.unitary @ full @ self.unitary.conj().T, self.layout)

    def undilate(self, state: DensityMatrix) -> DensityMatrix:
        back = self.unitary.conj().T @ state.matrix @ self.unitary
        return partial_trace(DensityMatrix.normalized(back, self.layout), ["A"])


def stinespring(ch: Channel) -> Dilation:
    d_in, d_out, r = ch.d_in, ch.d_out, ch.rank
    # rows indexed by (b, c)
    iso = sum(np.kron(k, np.eye(r)[:, [i]]) for i, k in enumerate(ch.kraus_ops))
    dim = d_in * d_out * r
    cols = np.zeros((dim, d_in), dtype=complex)
    cols[: d_out * r] = iso  # A register left in |0>
    u_cols = np.zeros((dim, dim), dtype=complex)
    inputs = np.arange(d_in) * d_out * r  # |a>_A |0>_B |0>_C
    u_cols[:, inputs] = cols
    others = np.setdiff1d(np.arange(dim), inputs)
    _, _, vh = np.linalg.svd(cols.conj().T)
    u_cols[:, others] = vh[d_in:].conj().T  # orthonormal complement of the range
    layout = RegisterLayout.of(("A", d_in), ("B", d_out), ("C", r))
    return Dilation(ch, iso, u_cols, layout)


@dataclass
class ChannelRun:
    run: ProtocolRun
    dilation: Dilation
    tau: DensityMatrix
    z: float
    rel_ent: float
    rel_ent_out: float
    cost_bound: float  # D(rho||sigma) - D(E(rho)||E(sigma))
    cost_used: float  # D(rho_full || tau)
    mean_fidelity: float
    summary: dict


def channel_protocol(rho: DensityMatrix, sigma: DensityMatrix, ch: Channel, epsilon: float,
                     seed: SeedLike = None, trials: int = 1000, K: int = DEFAULT_K) -> ChannelRun:
    """Alice sends rho to Bob, who already knows sigma and holds E(rho)."""
    _require_support(rho, sigma)
    dil = stinespring(ch)
    rho_full, sigma_full = dil.embed(rho), dil.embed(sigma)
    e_rho = partial_trace(rho_full, ["B"])
    bob_view = reorder(sigma_full, ["B", "A", "C"])
    tau_bac, z = side_info_tau(e_rho, bob_view)
    tau = reorder(tau_bac, ["A", "B", "C"])
    d, d_out = rel_entropy(rho, sigma), rel_entropy(ch(rho), ch(sigma))
    cost = max(rel_entropy(rho_full, tau), 0.0)
    run = run_protocol(rho_full, tau, epsilon, seed=seed, trials=trials, K=K, c=cost)
    cache: dict[int, float] = {}
    fids = []
    for o in run.outcomes:
        key = id(o.output)
        if key not in cache:
            cache[key] = fidelity(rho, dil.undilate(o.output))
        fids.append(cache[key])
    mean_fid = float(np.mean(fids))
    summary = dict(run.summary)
    summary.update(
        z=z, rel_entropy=d, rel_entropy_output=d_out, cost_bound=d - d_out, cost_used=cost,
        undilated_mean_fidelity=mean_fid, undilated_fidelity_ok=mean_fid >= 1 - 5 * epsilon
        - 3 * (float(np.std(fids, ddof=1)) / np.sqrt(trials) if trials > 1 else 0.0),
    )
    return ChannelRun(run, dil, tau, z, d, d_out, d - d_out, cost, mean_fid, summary)
