"""Brute-force reference computations on the full shared state.

These build |S> on A1 A2 B1 B2 explicitly (dimension (NK)^2), apply the
projectors as local operators and take partial traces. They are slow by
design and exist to cross-check the closed forms used elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .compression import CompressionParams, projectors
from .correlated import cs_projectors
from .hilbert import DensityMatrix, apply_local, reduced_from_vector

DENSE_DIM_CAP = 256  # NK; the state vector then has 65536 entries


def shared_state(N: int, K: int) -> np.ndarray:
    """sum_{i,m} |i,m>_A |i,m>_B / sqrt(NK) as a flat vector over (N, K, N, K)."""
    NK = N * K
    if NK > DENSE_DIM_CAP:
        raise ValueError(f"NK={NK} exceeds the dense cap {DENSE_DIM_CAP}")
    return np.eye(NK, dtype=complex).ravel() / np.sqrt(NK)


@dataclass(frozen=True)
class DenseStats:
    p_alice: float
    p_bob: float
    p_both: float
    rho_tilde: np.ndarray  # Bob's frame
    alice_marginal: np.ndarray  # A1 given both succeed
    bob_only: np.ndarray | None  # Bob's frame, Bob succeeds and Alice fails


def dense_index_stats(rho: DensityMatrix, sigma: DensityMatrix, params: CompressionParams) -> DenseStats:
    N, K = params.N, params.K
    pa, pb = projectors(rho, sigma, params)
    dims = (N, K, N, K)
    s = shared_state(N, K)
    sa = apply_local(s, pa.matrix, dims, (0, 1))
    sb = apply_local(s, pb.matrix, dims, (2, 3))
    sab = apply_local(sa, pb.matrix, dims, (2, 3))
    p_both = float(np.vdot(sab, sab).real)
    b1 = reduced_from_vector(sab, dims, [2]) / p_both
    a1 = reduced_from_vector(sab, dims, [0]) / p_both
    rest = sb - sab
    p_rest = float(np.vdot(rest, rest).real)
    bob_only = reduced_from_vector(rest, dims, [2]).conj() / p_rest if p_rest > 1e-12 else None
    return DenseStats(
        p_alice=float(np.vdot(sa, sa).real),
        p_bob=float(np.vdot(sb, sb).real),
        p_both=p_both,
        rho_tilde=b1.conj(),
        alice_marginal=a1,
        bob_only=bob_only,
    )


def dense_joint_tau(rho: DensityMatrix, sigma: DensityMatrix, K: int) -> np.ndarray:
    """Correlated-sampling output on A1 A2 B1 B2 (stored frame) from explicit collapses of |S>."""
    N = rho.dim
    pa, pb = cs_projectors(rho, sigma, K)
    dims = (N, K, N, K)
    s = shared_state(N, K)
    sa = apply_local(s, pa.matrix, dims, (0, 1))
    sb = apply_local(s, pb.matrix, dims, (2, 3))
    sab = apply_local(sa, pb.matrix, dims, (2, 3))
    a_only, b_only = sa - sab, sb - sab
    q = [float(np.vdot(v, v).real) for v in (sab, a_only, b_only)]
    tau = np.outer(sab, sab.conj())
    if q[1] > 1e-14:
        tau += np.kron(reduced_from_vector(a_only, dims, [0, 1]),
                       reduced_from_vector(sb, dims, [2, 3]) / float(np.vdot(sb, sb).real))
    if q[2] > 1e-14:
        tau += np.kron(reduced_from_vector(sa, dims, [0, 1]) / float(np.vdot(sa, sa).real),
                       reduced_from_vector(b_only, dims, [2, 3]))
    return tau / sum(q)


def naive_partial_trace(mat: np.ndarray, dims: tuple[int, ...], keep: int) -> np.ndarray:
    """Marginal on a single register by explicit index loops."""
    d = dims[keep]
    full = int(np.prod(dims))
    out = np.zeros((d, d), dtype=complex)
    idx = [np.unravel_index(r, dims) for r in range(full)]
    for r in range(full):
        for c in range(full):
            ir, ic = idx[r], idx[c]
            if all(ir[k] == ic[k] for k in range(len(dims)) if k != keep):
                out[ir[keep], ic[keep]] += mat[r, c]
    return out
