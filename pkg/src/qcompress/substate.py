"""Constructive substate smoothing.

Given rho and sigma with supp(rho) inside supp(sigma), produce rho' close to
rho in fidelity whose max-relative entropy against sigma is controlled. The
construction truncates the tilted operator A = sigma^{-1/2} rho sigma^{-1/2}:
eigen-directions of A with eigenvalue above a threshold 2^lam are dropped and
the remainder is mapped back through sigma^{1/2}. Because the kept part of A
is at most 2^lam on supp(sigma), the result satisfies
rho' <= 2^lam sigma / Z, i.e. Dmax(rho' || sigma) <= lam - log2 Z.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hilbert import TOL_SUPP, DensityMatrix, eig_hermitian
from .quantities import _require_support, fidelity, rel_entropy


@dataclass(frozen=True)
class SmoothedState:
    rho_prime: DensityMatrix
    threshold: float  # log2 of the largest kept eigenvalue of the tilted operator
    normalization: float  # Z, the kept weight
    lambda_achieved: float  # threshold - log2(Z) >= Dmax(rho' || sigma)
    fidelity_achieved: float
    bound: float
    epsilon: float

    @property
    def margin(self) -> float:
        return self.bound - self.lambda_achieved


def substate_bound(rel_ent: float, epsilon: float) -> float:
    """(D + 1)/eps + log2(1/(1 - eps))."""
    return (rel_ent + 1.0) / epsilon + np.log2(1.0 / (1.0 - epsilon))


class _Tilted:
    def __init__(self, rho: DensityMatrix, sigma: DensityMatrix):
        b, vb = sigma.eigenvalues, sigma.eigenvectors
        on = b > TOL_SUPP
        self.frame = vb[:, on] * np.sqrt(b[on])  # sigma^{1/2} restricted to its support
        inv = vb[:, on] / np.sqrt(b[on])
        a = inv.conj().T @ rho.matrix @ inv
        self.values, self.vectors = eig_hermitian((a + a.conj().T) / 2, tol=1e-8)

    def truncated(self, level: float) -> tuple[np.ndarray, float]:
        keep = self.values <= level
        v = self.vectors[:, keep]
        part = (v * self.values[keep]) @ v.conj().T
        m = self.frame @ part @ self.frame.conj().T
        z = float(np.trace(m).real)
        return (m + m.conj().T) / (2 * z), z


def smooth_substate(rho: DensityMatrix, sigma: DensityMatrix, epsilon: float) -> SmoothedState:
    """Smallest truncation level whose state keeps F(rho, rho') >= 1 - epsilon.

    Levels are scanned exactly over the tilted operator's eigenvalues, from
    the smallest up; the largest level reproduces rho itself, so the scan
    always terminates.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    _require_support(rho, sigma)
    tilted = _Tilted(rho, sigma)
    levels: list[float] = []
    for v in np.sort(tilted.values[tilted.values > TOL_SUPP]):
        if levels and v <= levels[-1] * (1 + 1e-9):
            levels[-1] = v
        else:
            levels.append(v)
    target = 1.0 - epsilon
    for k, level in enumerate(levels):
        m, z = tilted.truncated(level * (1 + 1e-9))
        cand = DensityMatrix(m, rho.layout)
        f = fidelity(rho, cand)
        if f >= target or k == len(levels) - 1:
            thr = float(np.log2(level))
            return SmoothedState(
                rho_prime=cand,
                threshold=thr,
                normalization=z,
                lambda_achieved=thr - float(np.log2(z)),
                fidelity_achieved=f,
                bound=substate_bound(rel_entropy(rho, sigma), epsilon),
                epsilon=epsilon,
            )
    raise AssertionError("unreachable: the full level always reproduces rho")
