"""Compact randomized property suite, runnable from the command line.

Each check draws its own instances from a seed, returns the smallest slack
observed (negative means violated) and, on violation, the offending inputs.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .compression import index_stats, make_params, tol_disc
from .correlated import (
    agreement_bound,
    agreement_probability,
    exact_joint_output,
    marginal_errors,
    theta_agreement,
    theta_overlap,
)
from .hilbert import (
    DensityMatrix,
    RegisterLayout,
    maximally_entangled,
    partial_trace,
    random_density,
    random_projective_measurement,
    tensor,
)
from .oneway import base_error, base_error_channel, equality_fixture, index_fixture, markov_gap
from .oracles import dense_index_stats
from .quantities import dmax, fidelity, rel_entropy, trace_distance
from .sideinfo import side_info_tau
from .substate import smooth_substate

SLACK_TOL = 1e-8


@dataclass
class CheckResult:
    name: str
    cases: int
    min_slack: float
    counterexample: dict | None = None

    @property
    def passed(self) -> bool:
        return self.min_slack >= -SLACK_TOL


class _Tracker:
    def __init__(self):
        self.min_slack = np.inf
        self.example = None
        self.cases = 0

    def add(self, slack: float, **inputs):
        self.cases += 1
        if slack < self.min_slack:
            self.min_slack = float(slack)
            if slack < -SLACK_TOL:
                self.example = {k: (v.matrix if isinstance(v, DensityMatrix) else v) for k, v in inputs.items()}


def _pair(rng, N, rank_rho=None):
    return random_density(N, rank_rho, rng), random_density(N, None, rng)


def check_fuchs_van_de_graaf(rng, t: _Tracker, n=100):
    for _ in range(n):
        N = int(rng.integers(2, 7))
        r, s = _pair(rng, N)
        f, d = fidelity(r, s), trace_distance(r, s)
        t.add(min(d - 2 * (1 - f), 2 * np.sqrt(max(1 - f * f, 0)) - d), rho=r, sigma=s)


def check_conjugation_rule(rng, t: _Tracker, n=20):
    for _ in range(n):
        N = int(rng.integers(2, 6))
        m = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
        phi = maximally_entangled(N)
        t.add(1e-12 - np.max(np.abs(np.kron(m, np.eye(N)) @ phi - np.kron(np.eye(N), m.T) @ phi)))


def check_tensor_trace(rng, t: _Tracker, n=20):
    for _ in range(n):
        dA = int(rng.integers(2, 4))
        a = random_density(dA, None, rng, RegisterLayout.of(("A", dA)))
        b = random_density(3, None, rng, RegisterLayout.of(("B", 3)))
        back = partial_trace(tensor(a, b), ["A"])
        t.add(1e-12 - np.max(np.abs(back.matrix - a.matrix)), rho=a)


def check_oracle_equivalence(rng, t: _Tracker, n=6):
    for _ in range(n):
        N, K = int(rng.integers(2, 4)), 16
        r, s = _pair(rng, N)
        p = dataclasses.replace(make_params(0.45, 1.0, N, K), c_prime=float(rng.uniform(0, 2)), delta=0.5)
        st, d = index_stats(r, s, p), dense_index_stats(r, s, p)
        err = max(abs(st.p_alice - d.p_alice), abs(st.p_bob - d.p_bob), abs(st.p_both - d.p_both),
                  np.max(np.abs(st.rho_tilde.matrix - d.rho_tilde)))
        t.add(1e-10 - err, rho=r, sigma=s, c_prime=p.c_prime)


def check_relativeprob_and_output(rng, t: _Tracker, n=40):
    for _ in range(n):
        N, K = int(rng.integers(2, 5)), 64
        eps = float(rng.choice([0.3, 0.45, 0.6]))
        r, s = _pair(rng, N)
        p = make_params(eps, 1.0, N, K)
        rp = smooth_substate(r, s, p.delta).rho_prime
        st = index_stats(rp, s, p)
        slack_prob = st.p_bob_given_alice - (p.relativeprob_floor - tol_disc(N, K))
        slack_fid = fidelity(rp, st.rho_tilde) - (np.sqrt(st.p_bob_given_alice) - tol_disc(N, K))
        t.add(min(slack_prob, slack_fid), rho=r, sigma=s, epsilon=eps)


def check_substate(rng, t: _Tracker, n=40):
    for _ in range(n):
        N = int(rng.integers(2, 7))
        eps = float(rng.uniform(0.05, 0.6))
        r, s = _pair(rng, N)
        sm = smooth_substate(r, s, eps)
        slack = min(sm.fidelity_achieved - (1 - eps), sm.bound - dmax(sm.rho_prime, s),
                    sm.lambda_achieved - dmax(sm.rho_prime, s) + 1e-8)
        t.add(slack, rho=r, sigma=s, epsilon=eps)


def check_side_info(rng, t: _Tracker, n=40):
    for _ in range(n):
        dA, dB = 2, int(rng.integers(2, 4))
        layout = RegisterLayout.of(("A", dA), ("B", dB))
        rab = random_density(dA * dB, None, rng, layout)
        sab = random_density(dA * dB, None, rng, layout)
        ra, sa = partial_trace(rab, ["A"]), partial_trace(sab, ["A"])
        tau, z = side_info_tau(ra, sab)
        gap = rel_entropy(rab, sab) - rel_entropy(ra, sa) - rel_entropy(rab, tau)
        t.add(min(1 + 1e-8 - z, gap + 1e-7), rho=rab, sigma=sab)


def check_correlated(rng, t: _Tracker, n=15):
    for _ in range(n):
        N, K = int(rng.integers(2, 4)), int(rng.choice([8, 16]))
        r, s = _pair(rng, N)
        out = exact_joint_output(r, s, K)
        M = random_projective_measurement(N * K, int(rng.integers(2, 4)), rng, support=out.p_alice_idx)
        bound = agreement_bound(r, s)
        tol = tol_disc(N, K)
        ea, eb = marginal_errors(out, r, s)
        slack = min(tol - ea, tol - eb,
                    agreement_probability(out, M) - bound + tol,
                    theta_overlap(out) - bound + tol,
                    1e-9 - abs(theta_agreement(out, M) - 1))
        t.add(slack, rho=r, sigma=s, K=K)


def check_oneway(rng, t: _Tracker, n=1):
    for fixture in (equality_fixture, index_fixture):
        p, rel = fixture()
        t.add(min(1e-8 - abs(markov_gap(p, rel)),
                  1e-9 - abs(base_error(p, rel) - base_error_channel(p, rel))))


CHECKS: dict[str, Callable] = {
    "fuchs_van_de_graaf": check_fuchs_van_de_graaf,
    "conjugation_rule": check_conjugation_rule,
    "tensor_then_trace": check_tensor_trace,
    "closed_form_vs_dense": check_oracle_equivalence,
    "conditional_success_and_output": check_relativeprob_and_output,
    "substate_bound": check_substate,
    "side_information": check_side_info,
    "correlated_sampling": check_correlated,
    "oneway_markov_and_error_paths": check_oneway,
}


def run_selfcheck(seed: int = 0, only: list[str] | None = None) -> list[CheckResult]:
    seeds = np.random.SeedSequence(seed).spawn(len(CHECKS))
    results = []
    for (name, fn), ss in zip(CHECKS.items(), seeds):
        if only and name not in only:
            continue
        tr = _Tracker()
        fn(np.random.default_rng(ss), tr)
        results.append(CheckResult(name, tr.cases, tr.min_slack, tr.example))
    return results
