"""Fidelity, distances and entropic quantities (all logarithms base 2)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .hilbert import (
    TOL_SUPP,
    DensityMatrix,
    eig_hermitian,
    mat_fn_on_support,
    partial_trace,
    support_projector,
)

SUPPORT_TOL = 1e-9


class SupportError(ValueError):
    """supp(rho) is not contained in supp(sigma)."""


@dataclass(frozen=True)
class QuantityReport:
    name: str
    value: float
    support_ok: bool = True


def _as_matrix(x) -> np.ndarray:
    if isinstance(x, DensityMatrix):
        return x.matrix
    return np.asarray(x, dtype=complex)


def _eig(x):
    if isinstance(x, DensityMatrix):
        return x.eigenvalues, x.eigenvectors
    vals, vecs = eig_hermitian(_as_matrix(x))
    return np.clip(vals, 0.0, None), vecs


def _same_dim(rho, sigma):
    a, b = _as_matrix(rho), _as_matrix(sigma)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def sqrtm_psd(x) -> np.ndarray:
    vals, vecs = _eig(x)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def fidelity(rho, sigma) -> float:
    """F = || sqrt(rho) sqrt(sigma) ||_1."""
    _same_dim(rho, sigma)
    s = np.linalg.svd(sqrtm_psd(rho) @ sqrtm_psd(sigma), compute_uv=False)
    return float(min(np.sum(s), 1.0))


def trace_distance(rho, sigma) -> float:
    """|| rho - sigma ||_1 (not halved, so it lies in [0, 2])."""
    a, b = _same_dim(rho, sigma)
    d = a - b
    return float(np.sum(np.abs(np.linalg.eigvalsh((d + d.conj().T) / 2))))


def sqrt_overlap(rho, sigma) -> float:
    """Tr( sqrt(rho) sqrt(sigma) ), which lower-bounds the fidelity."""
    _same_dim(rho, sigma)
    return float(np.trace(sqrtm_psd(rho) @ sqrtm_psd(sigma)).real)


def classical_fidelity(p, q) -> float:
    return float(np.sum(np.sqrt(np.asarray(p) * np.asarray(q))))


def entropy(rho) -> float:
    vals, _ = _eig(rho)
    vals = vals[vals > TOL_SUPP]
    return float(-np.sum(vals * np.log2(vals)))


def support_leak(rho, sigma) -> float:
    """|| (I - P) rho (I - P) ||_1 with P the support projector of sigma."""
    a, _ = _same_dim(rho, sigma)
    q = np.eye(a.shape[0]) - support_projector(sigma if isinstance(sigma, DensityMatrix) else _as_matrix(sigma))
    return float(abs(np.trace(q @ a @ q).real))


def supports_contained(rho, sigma) -> bool:
    return support_leak(rho, sigma) <= SUPPORT_TOL


def _require_support(rho, sigma):
    leak = support_leak(rho, sigma)
    if leak > SUPPORT_TOL:
        raise SupportError(f"supp(rho) not inside supp(sigma): leaked weight {leak:.3e}")


def rel_entropy(rho, sigma) -> float:
    """D(rho || sigma) = Tr rho log rho - Tr rho log sigma."""
    _require_support(rho, sigma)
    a = _as_matrix(rho)
    log_sigma = mat_fn_on_support(sigma, "log2")
    return float(-entropy(rho) - np.trace(a @ log_sigma).real)


def tilted_operator(rho, sigma) -> np.ndarray:
    """sigma^{-1/2} rho sigma^{-1/2}, inverse taken on supp(sigma)."""
    inv_sqrt = mat_fn_on_support(sigma, "inv_sqrt")
    t = inv_sqrt @ _as_matrix(rho) @ inv_sqrt
    return (t + t.conj().T) / 2


def dmax(rho, sigma) -> float:
    """Smallest lambda with rho <= 2^lambda sigma."""
    _require_support(rho, sigma)
    top = np.linalg.eigvalsh(tilted_operator(rho, sigma))[-1]
    return float(np.log2(top))


def _names(regs: str | Iterable[str]) -> list[str]:
    return [regs] if isinstance(regs, str) else list(regs)


def _marginal_entropy(state: DensityMatrix, regs: list[str]) -> float:
    if not regs:
        return 0.0
    return entropy(partial_trace(state, regs))


def mutual_info(state: DensityMatrix, a, b) -> float:
    """I(A:B) = S(A) + S(B) - S(AB)."""
    a, b = _names(a), _names(b)
    if set(a) & set(b):
        raise ValueError("register sets must be disjoint")
    return _marginal_entropy(state, a) + _marginal_entropy(state, b) - _marginal_entropy(state, a + b)


def cond_mutual_info(state: DensityMatrix, a, b, c, method: str = "definition") -> float:
    """I(A:B|C), either as I(A:BC) - I(A:C) or as S(AC)+S(BC)-S(ABC)-S(C)."""
    a, b, c = _names(a), _names(b), _names(c)
    if len(set(a) | set(b) | set(c)) != len(a) + len(b) + len(c):
        raise ValueError("register sets must be disjoint")
    if method == "definition":
        if not c:
            return mutual_info(state, a, b)
        return mutual_info(state, a, b + c) - mutual_info(state, a, c)
    if method == "entropies":
        s = lambda regs: _marginal_entropy(state, regs)  # noqa: E731
        return s(a + c) + s(b + c) - s(a + b + c) - s(c)
    raise ValueError(f"unknown method {method!r}")


def joint_eigen_distributions(rho, sigma) -> tuple[np.ndarray, np.ndarray]:
    """R_ij = a_i |<a_i|b_j>|^2 and R'_ij = b_j |<a_i|b_j>|^2, flattened row-major."""
    _same_dim(rho, sigma)
    a, va = _eig(rho)
    b, vb = _eig(sigma)
    overlap = np.abs(va.conj().T @ vb) ** 2
    return (a[:, None] * overlap).ravel(), (b[None, :] * overlap).ravel()


def quantity_reports(rho, sigma) -> list[QuantityReport]:
    ok = supports_contained(rho, sigma)
    out = [
        QuantityReport("fidelity", fidelity(rho, sigma)),
        QuantityReport("trace_distance", trace_distance(rho, sigma)),
        QuantityReport("sqrt_overlap", sqrt_overlap(rho, sigma)),
        QuantityReport("entropy_rho", entropy(rho)),
        QuantityReport("entropy_sigma", entropy(sigma)),
    ]
    if ok:
        out += [QuantityReport("rel_entropy", rel_entropy(rho, sigma)),
                QuantityReport("dmax", dmax(rho, sigma))]
    else:
        out += [QuantityReport("rel_entropy", float("inf"), False),
                QuantityReport("dmax", float("inf"), False)]
    return out
