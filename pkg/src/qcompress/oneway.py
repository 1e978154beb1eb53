"""Single-coordinate compression of a one-way entanglement-assisted protocol.

Alice holds x, Bob holds y, and they share a pure state on E_A (x) E_B.
Alice applies U_x on E_A = A (x) M and sends M; Bob applies V_y on
M (x) E_B = B' (x) Z and reads the answer z from Z in the computational basis.
The message state Bob should end up with is rho_x on M (x) E_B; the
compressed protocol replaces the message by a run of the compression
protocol targeting rho_x against Bob's average rho_y.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .compression import DEFAULT_K, CompressionParams, ProtocolSimulator, make_params, trial_rngs
from .hilbert import (
    DensityMatrix,
    RegisterLayout,
    SeedLike,
    apply_local,
    partial_trace,
    reduced_from_vector,
)
from .quantities import cond_mutual_info, rel_entropy

MESSAGE_DIM_CAP = 8  # |M (x) E_B|


def _check_unitary(u: np.ndarray, dim: int, what: str):
    if u.shape != (dim, dim):
        raise ValueError(f"{what} must be {dim} x {dim}, got {u.shape}")
    if np.max(np.abs(u.conj().T @ u - np.eye(dim))) > 1e-9:
        raise ValueError(f"{what} is not unitary")


@dataclass(frozen=True)
class OneWayProtocol:
    dims: dict  # EA, EB, M, Z
    shared_state: np.ndarray
    U: dict  # x -> unitary on E_A
    V: dict  # y -> unitary on M (x) E_B

    def __post_init__(self):
        d = {k: int(self.dims[k]) for k in ("EA", "EB", "M", "Z")}
        if d["EA"] % d["M"] or (d["M"] * d["EB"]) % d["Z"]:
            raise ValueError("need M | EA and Z | M*EB")
        state = np.asarray(self.shared_state, dtype=complex).ravel()
        if state.shape != (d["EA"] * d["EB"],) or abs(np.linalg.norm(state) - 1) > 1e-9:
            raise ValueError("shared state must be a unit vector on EA (x) EB")
        U = {int(x): np.asarray(u, dtype=complex) for x, u in self.U.items()}
        V = {int(y): np.asarray(v, dtype=complex) for y, v in self.V.items()}
        for x, u in U.items():
            _check_unitary(u, d["EA"], f"U[{x}]")
        for y, v in V.items():
            _check_unitary(v, d["M"] * d["EB"], f"V[{y}]")
        object.__setattr__(self, "dims", d)
        object.__setattr__(self, "shared_state", state)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "V", V)

    @property
    def dim_a(self) -> int:
        return self.dims["EA"] // self.dims["M"]

    @property
    def dim_b_out(self) -> int:
        return self.dims["M"] * self.dims["EB"] // self.dims["Z"]

    @property
    def full_dims(self) -> tuple[int, int, int]:
        return self.dim_a, self.dims["M"], self.dims["EB"]

    @property
    def message_layout(self) -> RegisterLayout:
        return RegisterLayout.of(("M", self.dims["M"]), ("EB", self.dims["EB"]))

    def after_alice(self, x: int) -> np.ndarray:
        """Global vector on A (x) M (x) E_B after U_x."""
        dims = (self.dims["EA"], self.dims["EB"])
        return apply_local(self.shared_state, self.U[x], dims, [0])

    def answer_distribution(self, state: DensityMatrix, y: int) -> np.ndarray:
        """Law of z when Bob applies V_y to ``state`` on M (x) E_B and measures Z."""
        out = self.V[y] @ state.matrix @ self.V[y].conj().T
        z = np.real(np.diag(out).reshape(self.dim_b_out, self.dims["Z"]).sum(axis=0))
        return np.clip(z, 0, None) / np.clip(z, 0, None).sum()


@dataclass(frozen=True)
class RelationTable:
    valid: frozenset  # of (x, y, z)
    mu: dict  # (x, y) -> probability

    def __post_init__(self):
        valid = frozenset((int(x), int(y), int(z)) for x, y, z in self.valid)
        mu = {(int(x), int(y)): float(p) for (x, y), p in self.mu.items()}
        if any(p < 0 for p in mu.values()) or abs(sum(mu.values()) - 1) > 1e-9:
            raise ValueError("mu must be a probability distribution")
        for (x, y), p in mu.items():
            if p > 0 and not any(v[0] == x and v[1] == y for v in valid):
                raise ValueError(f"input ({x}, {y}) has positive mass but no valid answer")
        object.__setattr__(self, "valid", valid)
        object.__setattr__(self, "mu", mu)

    @cached_property
    def support(self) -> list[tuple[int, int]]:
        return sorted(k for k, p in self.mu.items() if p > 0)

    @cached_property
    def ys(self) -> list[int]:
        return sorted({y for _, y in self.support})

    @cached_property
    def xs(self) -> list[int]:
        return sorted({x for x, _ in self.support})

    def conditional_x(self, y: int) -> dict[int, float]:
        tot = sum(p for (_, yy), p in self.mu.items() if yy == y)
        return {x: p / tot for (x, yy), p in self.mu.items() if yy == y and p > 0}

    def error_of(self, x: int, y: int, z_law: np.ndarray) -> float:
        return float(sum(p for z, p in enumerate(z_law) if (x, y, z) not in self.valid))


def message_states(p: OneWayProtocol, xs=None) -> dict[int, DensityMatrix]:
    """rho_x: Bob's M (x) E_B state after Alice's unitary."""
    xs = sorted(p.U) if xs is None else xs
    out = {}
    for x in xs:
        m = reduced_from_vector(p.after_alice(x), p.full_dims, [1, 2])
        out[x] = DensityMatrix.normalized(m, p.message_layout)
    return out


def averaged_states(p: OneWayProtocol, rel: RelationTable) -> dict[int, DensityMatrix]:
    """rho_y = sum_x mu(x|y) rho_x."""
    rx = message_states(p, rel.xs)
    return {y: DensityMatrix.normalized(sum(w * rx[x].matrix for x, w in rel.conditional_x(y).items()),
                                        p.message_layout) for y in rel.ys}


def cq_state(p: OneWayProtocol, rel: RelationTable) -> DensityMatrix:
    """sum_{x,y} mu(x,y) |x><x| (x) |y><y| (x) rho_x on X Y M E_B."""
    xs, ys = rel.xs, rel.ys
    rx = message_states(p, xs)
    dx, dy = len(xs), len(ys)
    out = 0
    for (x, y), w in rel.mu.items():
        if w > 0:
            ex = np.zeros((dx, dx))
            ex[xs.index(x), xs.index(x)] = 1
            ey = np.zeros((dy, dy))
            ey[ys.index(y), ys.index(y)] = 1
            out = out + w * np.kron(np.kron(ex, ey), rx[x].matrix)
    layout = RegisterLayout.of(("X", dx), ("Y", dy)) + p.message_layout
    return DensityMatrix.normalized(out, layout)


def pair_divergences(p: OneWayProtocol, rel: RelationTable) -> dict[tuple[int, int], float]:
    rx, ry = message_states(p, rel.xs), averaged_states(p, rel)
    return {(x, y): max(rel_entropy(rx[x], ry[y]), 0.0) for x, y in rel.support}


def info_cost(p: OneWayProtocol, rel: RelationTable) -> float:
    """E_{(x,y)~mu} D(rho_x || rho_y), which equals I(X : M E_B | Y)."""
    div = pair_divergences(p, rel)
    return float(sum(rel.mu[k] * d for k, d in div.items()))


def info_cost_cmi(p: OneWayProtocol, rel: RelationTable) -> float:
    return cond_mutual_info(cq_state(p, rel), "X", ["M", "EB"], "Y")


def markov_gap(p: OneWayProtocol, rel: RelationTable) -> float:
    """I(Y : M E_B | X); zero because Bob's message state depends on x only."""
    return cond_mutual_info(cq_state(p, rel), "Y", ["M", "EB"], "X")


def good_set(p: OneWayProtocol, rel: RelationTable, delta: float, tol: float = 1e-9) -> set[tuple[int, int]]:
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    div = pair_divergences(p, rel)
    cut = sum(rel.mu[k] * d for k, d in div.items()) / delta
    return {k for k, d in div.items() if d <= cut + tol}


def base_error(p: OneWayProtocol, rel: RelationTable) -> float:
    """Distributional error of the uncompressed protocol, via the global vector."""
    err = 0.0
    dz = p.dims["Z"]
    dims = (p.dim_a, p.dim_b_out, dz)
    for (x, y), w in rel.mu.items():
        if w == 0:
            continue
        v = apply_local(p.after_alice(x), p.V[y], p.full_dims, [1, 2])
        law = np.real(np.diag(reduced_from_vector(v, dims, [2])))
        err += w * rel.error_of(x, y, law)
    return float(err)


def base_error_channel(p: OneWayProtocol, rel: RelationTable) -> float:
    """Same quantity through message states and the answer channel."""
    rx = message_states(p, rel.xs)
    layout = RegisterLayout.of(("B", p.dim_b_out), ("Z", p.dims["Z"]))
    err = 0.0
    for (x, y), w in rel.mu.items():
        if w == 0:
            continue
        out = DensityMatrix.normalized(p.V[y] @ rx[x].matrix @ p.V[y].conj().T, layout)
        law = np.real(np.diag(partial_trace(out, ["Z"]).matrix))
        err += w * rel.error_of(x, y, law)
    return float(err)


@dataclass
class CompressedRun:
    error_rate: float
    error_sigma: float
    base_error: float
    bound: float
    info_cost: float
    params: CompressionParams
    good_mass: float
    bits: list[int] = field(repr=False)
    abort_rate: float = 0.0

    @property
    def within_bound(self) -> bool:
        return self.error_rate <= self.bound + 3 * self.error_sigma

    def summary(self) -> dict:
        return {
            "error_rate": self.error_rate, "error_sigma": self.error_sigma, "base_error": self.base_error,
            "bound": self.bound, "info_cost": self.info_cost, "good_mass": self.good_mass,
            "abort_rate": self.abort_rate, "bits_sent": self.params.bits_sent,
            "within_bound": self.within_bound,
        }


def compress_protocol(p: OneWayProtocol, rel: RelationTable, epsilon: float, delta: float,
                      seed: SeedLike = None, trials: int = 1000, K: int = DEFAULT_K) -> CompressedRun:
    """Run the compressed protocol: the message is replaced by a compression run.

    Inputs outside the good set abort and are charged as errors.
    """
    if p.dims["M"] * p.dims["EB"] > MESSAGE_DIM_CAP:
        raise ValueError(f"message dimension exceeds {MESSAGE_DIM_CAP}")
    if trials < 1:
        raise ValueError("trials must be positive")
    rx, ry = message_states(p, rel.xs), averaged_states(p, rel)
    cost = info_cost(p, rel)
    good = good_set(p, rel, delta)
    params = make_params(epsilon, cost / delta, p.dims["M"] * p.dims["EB"], K)
    pairs = rel.support
    weights = np.array([rel.mu[k] for k in pairs])
    sims: dict[tuple[int, int], ProtocolSimulator] = {}
    laws: dict[tuple[int, int], np.ndarray] = {}
    errors, bits, aborts = [], [], 0
    rngs = trial_rngs(seed, trials)
    for rng in rngs:
        x, y = pairs[rng.choice(len(pairs), p=weights)]
        if (x, y) not in good:
            errors.append(True)
            bits.append(0)
            aborts += 1
            continue
        if (x, y) not in sims:
            sims[(x, y)] = ProtocolSimulator(rx[x], ry[y], params)
        outcome = sims[(x, y)].trial(rng)
        key = (id(outcome.output), y)
        if key not in laws:
            laws[key] = p.answer_distribution(outcome.output, y)
        z = int(rng.choice(len(laws[key]), p=laws[key]))
        errors.append((x, y, z) not in rel.valid)
        bits.append(outcome.bits_sent)
        aborts += outcome.aborted
    err = np.array(errors, dtype=float)
    eb = base_error(p, rel)
    bound = eb + 2 * delta + 5 * epsilon
    sig = float(np.sqrt(min(bound, 1.0) * (1 - min(bound, 1.0)) / trials))
    good_mass = float(sum(rel.mu[k] for k in good))
    return CompressedRun(float(err.mean()), sig, eb, bound, cost, params, good_mass, bits, aborts / trials)


# built-in fixtures

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.diag([1, -1]).astype(complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
_SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)


def equality_fixture() -> tuple[OneWayProtocol, RelationTable]:
    """One-bit equality: Alice sends x as a qubit, Bob flips it when y = 0."""
    p = OneWayProtocol(
        dims={"EA": 2, "EB": 1, "M": 2, "Z": 2},
        shared_state=np.array([1, 0]),
        U={0: np.eye(2), 1: _X},
        V={0: _X, 1: np.eye(2)},
    )
    rel = RelationTable(
        valid={(x, y, int(x == y)) for x in (0, 1) for y in (0, 1)},
        mu={(x, y): 0.25 for x in (0, 1) for y in (0, 1)},
    )
    return p, rel


def index_fixture() -> tuple[OneWayProtocol, RelationTable]:
    """Two-bit index function by superdense coding: z is bit y of x."""
    epr = np.array([1, 0, 0, 1]) / np.sqrt(2)
    U = {x: np.linalg.matrix_power(_X, x >> 1) @ np.linalg.matrix_power(_Z, x & 1) for x in range(4)}
    decode = np.kron(_H, np.eye(2)) @ _CNOT  # Bell basis -> |x & 1>_M |x >> 1>_EB
    V = {0: _SWAP @ decode, 1: decode}
    p = OneWayProtocol(dims={"EA": 2, "EB": 2, "M": 2, "Z": 2}, shared_state=epr, U=U, V=V)
    rel = RelationTable(
        valid={(x, y, (x >> y) & 1) for x in range(4) for y in (0, 1)},
        mu={(x, y): 1 / 8 for x in range(4) for y in (0, 1)},
    )
    return p, rel


BUILTIN_FIXTURES = {"equality": equality_fixture, "index": index_fixture}
