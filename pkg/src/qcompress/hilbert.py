"""Dense linear algebra over composite finite-dimensional registers.

Everything here works on plain ``numpy`` arrays underneath. ``DensityMatrix``,
``StateVector`` and ``Projector`` pair an array with an explicit
``RegisterLayout`` so that partial traces and local operators never depend on
an implicit register ordering.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Sequence, Union

import numpy as np

TOL_H = 1e-10  # Hermiticity, max entry of |H - H^dag|
TOL_SUPP = 1e-10  # eigenvalues at or below this are outside the support
TOL_CHK = 1e-9  # reconstruction / marginal checks

LN2 = np.log(2.0)

SeedLike = Union[int, np.random.Generator, np.random.SeedSequence, None]


def as_rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class RegisterLayout:
    """Ordered register names with their dimensions."""

    registers: tuple[tuple[str, int], ...]

    def __post_init__(self):
        regs = tuple((str(n), int(d)) for n, d in self.registers)
        names = [n for n, _ in regs]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate register names in layout: {names}")
        if any(d < 1 for _, d in regs):
            raise ValueError("register dimensions must be positive")
        object.__setattr__(self, "registers", regs)

    @classmethod
    def of(cls, *pairs: tuple[str, int], **named: int) -> "RegisterLayout":
        return cls(tuple(pairs) + tuple(named.items()))

    @classmethod
    def single(cls, dim: int, name: str = "R") -> "RegisterLayout":
        return cls(((name, dim),))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.registers)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.registers)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64))

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown register {name!r}; layout has {self.names}") from None

    def dim_of(self, names: Iterable[str]) -> int:
        return int(np.prod([self.dims[self.index(n)] for n in names], dtype=np.int64))

    def sub(self, names: Iterable[str]) -> "RegisterLayout":
        """Layout of the named registers, kept in this layout's order."""
        wanted = set(names)
        for n in wanted:
            self.index(n)
        return RegisterLayout(tuple(r for r in self.registers if r[0] in wanted))

    def __add__(self, other: "RegisterLayout") -> "RegisterLayout":
        return RegisterLayout(self.registers + other.registers)

    def __str__(self):
        return "".join(f"{n}:{d} " for n, d in self.registers).strip()


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def _check_finite(a: np.ndarray):
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")


def is_hermitian(h: np.ndarray, tol: float = TOL_H) -> bool:
    h = np.asarray(h)
    return h.ndim == 2 and h.shape[0] == h.shape[1] and np.max(np.abs(h - h.conj().T), initial=0.0) <= tol


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Positive semidefinite, unit-trace operator on a register layout."""

    matrix: np.ndarray
    layout: RegisterLayout = None

    def __post_init__(self):
        m = _freeze(self.matrix)
        _check_finite(m)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {m.shape}")
        layout = self.layout or RegisterLayout.single(m.shape[0])
        if layout.dim != m.shape[0]:
            raise ValueError(f"layout {layout} does not match dimension {m.shape[0]}")
        if not is_hermitian(m):
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > 1e-10:
            raise ValueError(f"density matrix trace is {np.trace(m).real!r}, expected 1")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "layout", layout)
        if self._raw_eig[0][-1] < -1e-10:
            raise ValueError(f"density matrix has negative eigenvalue {self._raw_eig[0][-1]:.3e}")

    @classmethod
    def from_vector(cls, vec: "StateVector") -> "DensityMatrix":
        a = vec.amplitudes
        return cls(np.outer(a, a.conj()), vec.layout)

    @classmethod
    def normalized(cls, matrix: np.ndarray, layout: RegisterLayout = None) -> "DensityMatrix":
        """Hermitize and rescale a PSD operator to unit trace."""
        m = np.asarray(matrix, dtype=complex)
        m = (m + m.conj().T) / 2
        return cls(m / np.trace(m).real, layout)

    @cached_property
    def _raw_eig(self):
        return eig_hermitian(self.matrix)

    @property
    def eigenvalues(self) -> np.ndarray:
        """Descending eigenvalues, clamped at zero."""
        return np.clip(self._raw_eig[0], 0.0, None)

    @property
    def eigenvectors(self) -> np.ndarray:
        return self._raw_eig[1]

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def rank(self) -> int:
        return int(np.sum(self.eigenvalues > TOL_SUPP))

    def support_projector(self) -> np.ndarray:
        return support_projector(self)

    def conj(self) -> "DensityMatrix":
        return DensityMatrix(self.matrix.conj(), self.layout)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Unit vector on a register layout."""

    amplitudes: np.ndarray
    layout: RegisterLayout = None

    def __post_init__(self):
        a = _freeze(np.ravel(self.amplitudes))
        _check_finite(a)
        layout = self.layout or RegisterLayout.single(a.shape[0])
        if layout.dim != a.shape[0]:
            raise ValueError(f"layout {layout} does not match dimension {a.shape[0]}")
        if abs(np.linalg.norm(a) - 1.0) > 1e-10:
            raise ValueError(f"state vector norm is {np.linalg.norm(a)!r}, expected 1")
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "layout", layout)

    @classmethod
    def normalized(cls, amplitudes, layout: RegisterLayout = None) -> "StateVector":
        a = np.ravel(np.asarray(amplitudes, dtype=complex))
        return cls(a / np.linalg.norm(a), layout)

    @classmethod
    def basis(cls, index: int, layout: RegisterLayout | int) -> "StateVector":
        if isinstance(layout, int):
            layout = RegisterLayout.single(layout)
        a = np.zeros(layout.dim, dtype=complex)
        a[index] = 1.0
        return cls(a, layout)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def density(self) -> DensityMatrix:
        return DensityMatrix.from_vector(self)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.amplitudes, dtype=dtype)


@dataclass(frozen=True, eq=False)
class Projector:
    """Hermitian idempotent on a register layout."""

    matrix: np.ndarray
    layout: RegisterLayout = None

    def __post_init__(self):
        m = _freeze(self.matrix)
        _check_finite(m)
        layout = self.layout or RegisterLayout.single(m.shape[0])
        if layout.dim != m.shape[0]:
            raise ValueError(f"layout {layout} does not match dimension {m.shape[0]}")
        if not is_hermitian(m, 1e-9):
            raise ValueError("projector is not Hermitian")
        if np.max(np.abs(m @ m - m), initial=0.0) > 1e-9:
            raise ValueError("projector is not idempotent")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "layout", layout)

    @property
    def rank(self) -> int:
        return int(round(np.trace(self.matrix).real))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


Operand = Union[DensityMatrix, StateVector, Projector, np.ndarray]


def tensor(a: Operand, b: Operand) -> Operand:
    """Kronecker product; layouts are concatenated."""
    kinds = (type(a), type(b))
    if kinds[0] is not kinds[1] and not all(issubclass(k, np.ndarray) for k in kinds):
        raise TypeError(f"cannot tensor {kinds[0].__name__} with {kinds[1].__name__}")
    if isinstance(a, DensityMatrix):
        return DensityMatrix(np.kron(a.matrix, b.matrix), a.layout + b.layout)
    if isinstance(a, Projector):
        return Projector(np.kron(a.matrix, b.matrix), a.layout + b.layout)
    if isinstance(a, StateVector):
        return StateVector(np.kron(a.amplitudes, b.amplitudes), a.layout + b.layout)
    a, b = np.asarray(a), np.asarray(b)
    if a.ndim != b.ndim:
        raise TypeError("cannot tensor a vector with a matrix")
    return np.kron(a, b)


def _einsum_letters(n: int) -> str:
    letters = string.ascii_letters
    if 2 * n > len(letters):
        raise ValueError("too many registers")
    return letters[: 2 * n]


def ptrace_array(mat: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Partial trace of a square array; ``keep`` are register positions, kept in order."""
    n = len(dims)
    keep = sorted(set(keep))
    t = np.asarray(mat).reshape(tuple(dims) * 2)
    letters = _einsum_letters(n)
    rows = list(letters[:n])
    cols = list(letters[n:])
    for k in range(n):
        if k not in keep:
            cols[k] = rows[k]
    out = "".join(rows[k] for k in keep) + "".join(cols[k] for k in keep)
    d = int(np.prod([dims[k] for k in keep], dtype=np.int64))
    return np.einsum("".join(rows) + "".join(cols) + "->" + out, t).reshape(d, d)


def reduced_from_vector(vec: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Marginal density of a pure state without forming the full outer product."""
    n = len(dims)
    keep = sorted(set(keep))
    traced = [k for k in range(n) if k not in keep]
    t = np.asarray(vec).reshape(dims)
    t = np.transpose(t, keep + traced)
    dk = int(np.prod([dims[k] for k in keep], dtype=np.int64))
    m = t.reshape(dk, -1)
    return m @ m.conj().T


def partial_trace(state: DensityMatrix | StateVector, keep: Iterable[str]) -> DensityMatrix:
    """Marginal of ``state`` on the registers named in ``keep``."""
    layout = state.layout
    keep_idx = [layout.index(n) for n in keep]
    sub = layout.sub(keep)
    if isinstance(state, StateVector):
        m = reduced_from_vector(state.amplitudes, layout.dims, keep_idx)
    else:
        m = ptrace_array(state.matrix, layout.dims, keep_idx)
    return DensityMatrix((m + m.conj().T) / 2, sub)


def reorder(state: DensityMatrix, names: Sequence[str]) -> DensityMatrix:
    """Same state with its registers permuted into the order ``names``."""
    layout = state.layout
    if sorted(names) != sorted(layout.names):
        raise ValueError(f"{list(names)} is not a permutation of {layout.names}")
    perm = [layout.index(n) for n in names]
    n = len(perm)
    t = state.matrix.reshape(layout.dims * 2)
    t = np.transpose(t, perm + [p + n for p in perm])
    new = RegisterLayout(tuple(layout.registers[p] for p in perm))
    return DensityMatrix(t.reshape(layout.dim, layout.dim), new)


def apply_local(vec: np.ndarray, op: np.ndarray, dims: Sequence[int], regs: Sequence[int]) -> np.ndarray:
    """Apply ``op`` to the registers at positions ``regs`` (in that order) of a vector."""
    n = len(dims)
    regs = list(regs)
    rest = [k for k in range(n) if k not in regs]
    t = np.asarray(vec).reshape(dims)
    t = np.transpose(t, regs + rest)
    d = int(np.prod([dims[k] for k in regs], dtype=np.int64))
    t = (np.asarray(op) @ t.reshape(d, -1)).reshape([dims[k] for k in regs] + [dims[k] for k in rest])
    return np.transpose(t, np.argsort(regs + rest)).reshape(-1)


def eig_hermitian(h: np.ndarray, tol: float = TOL_H) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition with descending eigenvalues.

    Each eigenvector's phase is fixed so that its first entry of maximal
    modulus is real and positive, which makes the output reproducible.
    """
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h, tol):
        raise ValueError("eig_hermitian needs a Hermitian matrix")
    vals, vecs = np.linalg.eigh((h + h.conj().T) / 2)
    vals, vecs = vals[::-1].copy(), vecs[:, ::-1].copy()
    pivots = np.argmax(np.abs(vecs) > np.abs(vecs).max(axis=0) - 1e-12, axis=0)
    ph = vecs[pivots, np.arange(vecs.shape[1])]
    vecs = vecs * (np.abs(ph) / np.where(ph == 0, 1, ph))
    # within a degenerate group, order vectors by the position of their pivot entry
    scale = max(1.0, float(np.abs(vals).max(initial=0.0)))
    group = np.concatenate([[0], np.cumsum(np.abs(np.diff(vals)) > 1e-12 * scale)])
    order = np.lexsort((pivots, group))
    return vals[order], vecs[:, order]


_FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "log2": np.log2,
    "log": np.log,
    "sqrt": np.sqrt,
    "inv": lambda x: 1.0 / x,
    "inv_sqrt": lambda x: 1.0 / np.sqrt(x),
}


def mat_fn_on_support(rho: DensityMatrix | np.ndarray, fn: str | Callable, tol: float = TOL_SUPP) -> np.ndarray:
    """Apply ``fn`` to the eigenvalues above ``tol``; zero on the kernel."""
    if isinstance(rho, DensityMatrix):
        vals, vecs = rho._raw_eig
    else:
        vals, vecs = eig_hermitian(rho)
    f = _FUNCTIONS[fn] if isinstance(fn, str) else fn
    on = vals > tol
    out = np.zeros_like(vals)
    out[on] = f(vals[on])
    res = (vecs * out) @ vecs.conj().T
    return (res + res.conj().T) / 2


def support_projector(rho: DensityMatrix | np.ndarray, tol: float = TOL_SUPP) -> np.ndarray:
    return mat_fn_on_support(rho, lambda x: np.ones_like(x), tol)


def exp_hermitian(h: np.ndarray) -> np.ndarray:
    vals, vecs = eig_hermitian(h, tol=1e-8)
    res = (vecs * np.exp(vals)) @ vecs.conj().T
    return (res + res.conj().T) / 2


def orthonormal_basis(proj: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Columns spanning the range of a projector (or PSD operator)."""
    vals, vecs = eig_hermitian(proj, tol=1e-8)
    return vecs[:, vals > tol]


def haar_unitary(dim: int, seed: SeedLike = None) -> np.ndarray:
    rng = as_rng(seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_density(N: int, rank: int | None = None, seed: SeedLike = None,
                   layout: RegisterLayout | None = None) -> DensityMatrix:
    """Induced-measure random state: rho = G G^dag / Tr with Gaussian G of shape (N, rank)."""
    rank = N if rank is None else rank
    if not 1 <= rank <= N:
        raise ValueError(f"rank must be in [1, {N}], got {rank}")
    rng = as_rng(seed)
    g = rng.standard_normal((N, rank)) + 1j * rng.standard_normal((N, rank))
    return DensityMatrix.normalized(g @ g.conj().T, layout)


def random_pure(N: int, seed: SeedLike = None, layout: RegisterLayout | None = None) -> StateVector:
    rng = as_rng(seed)
    return StateVector.normalized(rng.standard_normal(N) + 1j * rng.standard_normal(N), layout)


def random_projective_measurement(dim: int, w: int, seed: SeedLike = None,
                                  support: np.ndarray | None = None) -> list[Projector]:
    """Haar-random orthonormal basis split into ``w`` non-empty groups.

    With ``support`` (a projector), the basis is drawn inside its range and
    the complement of the range is added to the first outcome, so every
    element commutes with ``support`` and the elements still sum to I.
    """
    rng = as_rng(seed)
    if support is None:
        frame = np.eye(dim, dtype=complex)
    else:
        frame = orthonormal_basis(support)
    r = frame.shape[1]
    if not 1 <= w <= r:
        raise ValueError(f"need 1 <= w <= {r} outcomes, got {w}")
    basis = frame @ haar_unitary(r, rng)
    groups = np.array_split(rng.permutation(r), w)
    out = []
    for k, g in enumerate(groups):
        cols = basis[:, g]
        m = cols @ cols.conj().T
        if k == 0 and support is not None:
            m = m + np.eye(dim) - frame @ frame.conj().T
        out.append(Projector((m + m.conj().T) / 2))
    return out


def maximally_entangled(N: int) -> np.ndarray:
    """Sum_i |i,i> / sqrt(N) as a flat vector."""
    return np.eye(N, dtype=complex).ravel() / np.sqrt(N)
