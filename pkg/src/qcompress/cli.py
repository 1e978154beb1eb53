"""Command-line front end: ``qcompress <subcommand> [options]``.

Exit codes: 0 success, 1 selfcheck violation, 2 usage error, 3 violated
precondition (invalid state, support mismatch, out-of-range parameter).
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .compression import DEFAULT_K, index_stats, make_params, run_protocol, tol_disc
from .correlated import (
    agreement_bound,
    exact_joint_output,
    marginal_errors,
    mc_sample,
    theta_agreement,
    theta_overlap,
)
from .hilbert import RegisterLayout, partial_trace, random_density, random_projective_measurement
from .io import (
    atomic_write,
    content_hash,
    csv_text,
    dumps,
    jsonl_text,
    load_protocol,
    load_state_pair,
    state_pair_json,
)
from .oneway import compress_protocol, good_set, info_cost_cmi, markov_gap
from .quantities import dmax, joint_eigen_distributions, quantity_reports, rel_entropy
from .selfcheck import CHECKS, run_selfcheck
from .sideinfo import Channel, channel_protocol, side_info_tau
from .substate import smooth_substate

TRANSCRIPT_COLUMNS = ["trial", "m", "n", "agreed", "bits", "fidelity"]


class PreconditionError(Exception):
    pass


def worker_count() -> int:
    env = os.environ.get("QC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise PreconditionError(f"QC_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _states(args) -> tuple:
    """(rho, sigma, input hash) from --fixture or a seeded random pair."""
    if args.fixture:
        return load_state_pair(args.fixture)
    rng = np.random.default_rng(args.seed)
    rho = random_density(args.N, None, rng)
    sigma = random_density(args.N, None, rng)
    return rho, sigma, content_hash(state_pair_json(rho, sigma).encode())


def _config(args) -> dict:
    skip = {"func", "out", "transcript"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _report(args, input_hash: str, rows: list, summary: dict, derivations: dict | None = None) -> dict:
    rep = {"command": args.command, "version": __version__, "config": _config(args),
           "input_hash": input_hash, "rows": rows, "summary": summary}
    if derivations is not None:
        rep["derivations"] = derivations
    return rep


def _emit(args, report: dict, csv_columns: list[str] | None = None):
    """JSON report, or CSV rows with the rest of the report in a sidecar file."""
    if args.format == "csv" and csv_columns:
        text = csv_text(report["rows"], csv_columns)
        if args.out:
            meta = {k: v for k, v in report.items() if k != "rows"}
            atomic_write(args.out + ".meta.json", dumps(meta))
    else:
        text = dumps(report)
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)


def cmd_quantities(args) -> int:
    rho, sigma, h = _states(args)
    rows = [{"name": q.name, "value": q.value, "support_ok": q.support_ok} for q in quantity_reports(rho, sigma)]
    r, rp = joint_eigen_distributions(rho, sigma)
    summary = {"R": r, "R_prime": rp, "sum_min_R": float(np.minimum(r, rp).sum())}
    _emit(args, _report(args, h, rows, summary))
    return 0


def cmd_substate(args) -> int:
    rho, sigma, h = _states(args)
    sm = smooth_substate(rho, sigma, args.eps)
    summary = {
        "threshold": sm.threshold, "normalization": sm.normalization,
        "lambda_achieved": sm.lambda_achieved, "dmax_rho_prime": dmax(sm.rho_prime, sigma),
        "dmax_rho": dmax(rho, sigma), "rel_entropy": rel_entropy(rho, sigma),
        "fidelity_achieved": sm.fidelity_achieved, "bound": sm.bound, "margin": sm.margin,
        "rho_prime": sm.rho_prime.matrix,
    }
    _emit(args, _report(args, h, [], summary))
    return 0


def cmd_compress(args) -> int:
    rho, sigma, h = _states(args)
    run = run_protocol(rho, sigma, args.eps, seed=args.seed, trials=args.trials, K=args.K,
                       c=args.c, use_smoothed=args.use_smoothed)
    rows = [o.to_row(t) for t, o in enumerate(run.outcomes)]
    stats = run.stats
    summary = dict(run.summary)
    summary.update(p_bob_given_alice=stats.p_bob_given_alice, fidelity_out=stats.fidelity_out,
                   smoothing_lambda=run.smoothed.lambda_achieved,
                   smoothing_fidelity=run.smoothed.fidelity_achieved)
    if args.transcript:
        atomic_write(args.transcript, jsonl_text(o.to_row(t, args.dump_states) for t, o in enumerate(run.outcomes)))
    _emit(args, _report(args, h, rows, summary, run.params.derivations()), TRANSCRIPT_COLUMNS)
    return 0


def _channel(name: str, d: int, seed) -> Channel:
    if name == "identity":
        return Channel.identity(d)
    if name == "depolarizing":
        return Channel.depolarizing(d)
    if name == "random":
        return Channel.random(d, d, 2, seed)
    raise PreconditionError(f"unknown channel {name!r}")


def cmd_sideinfo(args) -> int:
    if args.channel:
        rho, sigma, h = _states(args)
        ch = _channel(args.channel, rho.dim, args.seed)
        cr = channel_protocol(rho, sigma, ch, args.eps, seed=args.seed, trials=args.trials, K=args.K)
        _emit(args, _report(args, h, [], cr.summary, cr.run.params.derivations()))
        return 0
    rng = np.random.default_rng(args.seed)
    layout = RegisterLayout.of(("A", args.dA), ("B", args.dB))
    rows, blobs = [], []
    for i in range(args.instances):
        rab = random_density(args.dA * args.dB, None, rng, layout)
        sab = random_density(args.dA * args.dB, None, rng, layout)
        blobs.append(state_pair_json(rab, sab))
        ra, sa = partial_trace(rab, ["A"]), partial_trace(sab, ["A"])
        tau, z = side_info_tau(ra, sab)
        d_full, d_a, d_tau = rel_entropy(rab, sab), rel_entropy(ra, sa), rel_entropy(rab, tau)
        rows.append({"instance": i, "z": z, "d_full": d_full, "d_marginal": d_a, "d_tau": d_tau,
                     "slack": d_full - d_a - d_tau})
    summary = {"max_z": max(r["z"] for r in rows), "min_slack": min(r["slack"] for r in rows),
               "z_ok": all(r["z"] <= 1 + 1e-8 for r in rows),
               "bound_ok": all(r["slack"] >= -1e-7 for r in rows)}
    _emit(args, _report(args, content_hash("".join(blobs).encode()), rows, summary),
          ["instance", "z", "d_full", "d_marginal", "d_tau", "slack"])
    return 0


def cmd_corrsample(args) -> int:
    rho, sigma, h = _states(args)
    N = rho.dim
    out = exact_joint_output(rho, sigma, args.K)
    rng = np.random.default_rng(args.seed)
    M = random_projective_measurement(N * args.K, args.w, rng, support=out.p_alice_idx)
    mc = mc_sample(rho, sigma, args.K, rng, args.trials, M, out=out)
    ea, eb = marginal_errors(out, rho, sigma)
    summary = {
        "bound": agreement_bound(rho, sigma),
        "exact_agreement": mc.exact_agreement,
        "empirical_agreement": mc.agreement_rate,
        "mc_sigma": mc.sigma,
        "within_3sigma": mc.within_3sigma,
        "theta_overlap": theta_overlap(out),
        "theta_agreement": theta_agreement(out, M),
        "marginal_error_rho": ea,
        "marginal_error_sigma": eb,
        "tol_disc": tol_disc(N, args.K),
        "p_same_index": out.p_same_index,
        "p_alice_first": out.p_alice_first,
        "p_bob_first": out.p_bob_first,
        "stopping_counts": mc.stopping_counts,
        "stopping_chi2_pvalue": mc.chi2_pvalue,
        "K": args.K, "N": N, "seed": args.seed,
    }
    _emit(args, _report(args, h, [], summary))
    return 0


def cmd_oneway(args) -> int:
    p, rel, h = load_protocol(args.fixture or "equality")
    run = compress_protocol(p, rel, args.eps, args.delta, seed=args.seed, trials=args.trials, K=args.K)
    good = good_set(p, rel, args.delta)
    summary = run.summary()
    summary.update(info_cost_cmi=info_cost_cmi(p, rel), markov_gap=markov_gap(p, rel),
                   good_set=sorted(list(k) for k in good))
    rows = [{"x": x, "y": y, "mu": rel.mu[(x, y)], "good": (x, y) in good} for x, y in rel.support]
    _emit(args, _report(args, h, rows, summary, run.params.derivations()))
    return 0


def _sweep_row(task) -> dict:
    kind, N, K, eps, seed = task
    rng = np.random.default_rng(seed)
    rho, sigma = random_density(N, None, rng), random_density(N, None, rng)
    row = {"kind": kind, "N": N, "K": K, "eps": eps, "seed": seed}
    if kind == "compress":
        p = make_params(eps, min(max(rel_entropy(rho, sigma), 0.0), 1.0), N, K)
        sm = smooth_substate(rho, sigma, p.delta)
        st = index_stats(sm.rho_prime, sigma, p)
        row.update(p_alice=st.p_alice, p_bob=st.p_bob, p_both=st.p_both,
                   p_bob_given_alice=st.p_bob_given_alice, fidelity_out=st.fidelity_out,
                   floor=p.relativeprob_floor - tol_disc(N, K), bits=p.bits_sent)
    elif kind == "corrsample":
        out = exact_joint_output(rho, sigma, K)
        ea, eb = marginal_errors(out, rho, sigma)
        row.update(theta_overlap=theta_overlap(out), bound=agreement_bound(rho, sigma),
                   marginal_error_rho=ea, marginal_error_sigma=eb, q_alice=out.q_alice, q_bob=out.q_bob)
    else:
        sm = smooth_substate(rho, sigma, eps)
        row.update(lambda_achieved=sm.lambda_achieved, bound=sm.bound, margin=sm.margin,
                   fidelity=sm.fidelity_achieved)
    return row


def cmd_sweep(args) -> int:
    seeds = np.random.SeedSequence(args.seed).generate_state(args.instances)
    tasks = [(args.kind, N, K, eps, int(s)) for N in args.Ns for K in args.Ks for eps in args.epss for s in seeds]
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        rows = list(pool.map(_sweep_row, tasks))
    lead = ["kind", "N", "K", "eps", "seed"]
    columns = lead + sorted({k for r in rows for k in r} - set(lead))
    summary = {"rows": len(rows)}
    _emit(args, _report(args, content_hash(repr(tasks).encode()), rows, summary), columns)
    return 0


def cmd_selfcheck(args) -> int:
    results = run_selfcheck(args.seed, args.only)
    rows = [{"check": r.name, "cases": r.cases, "min_slack": r.min_slack, "passed": r.passed} for r in results]
    failed = [r for r in results if not r.passed]
    written = []
    for r in failed:
        path = Path(args.counterexample_dir) / f"counterexample_{r.name}_seed{args.seed}.json"
        atomic_write(path, dumps(r.counterexample or {}))
        written.append(str(path))
    summary = {"passed": not failed, "failed": [r.name for r in failed], "counterexamples": written}
    _emit(args, _report(args, content_hash(f"selfcheck seed={args.seed}".encode()), rows, summary))
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name} cases={r.cases} min_slack={r.min_slack:.3e}",
              file=sys.stderr)
    return 1 if failed else 0


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcompress", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func: Callable, help: str, state=True, fmt="json"):
        p = sub.add_parser(name, help=help)
        p.set_defaults(func=func)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="write the report here instead of stdout")
        p.add_argument("--format", choices=["json", "csv"], default=fmt)
        if state:
            p.add_argument("--fixture", help="state-pair JSON {rho, sigma}; random pair if omitted")
            p.add_argument("--N", type=_positive_int, default=2, help="dimension of the random pair")
        return p

    add("quantities", cmd_quantities, "fidelity, distances and entropies of a pair")
    p = add("substate", cmd_substate, "smoothed state rho' with bounded max-relative entropy")
    p.add_argument("--eps", type=float, default=0.2)

    p = add("compress", cmd_compress, "Monte Carlo run of the compression protocol", fmt="csv")
    p.add_argument("--eps", type=float, default=0.45)
    p.add_argument("--K", type=_positive_int, default=DEFAULT_K)
    p.add_argument("--trials", type=_positive_int, default=1000)
    p.add_argument("--c", type=float, default=None, help="upper bound on D(rho||sigma) to use")
    p.add_argument("--use-smoothed", action="store_true", help="Alice measures with the smoothed state")
    p.add_argument("--transcript", help="JSONL transcript path")
    p.add_argument("--dump-states", action="store_true", help="include output states in the transcript")

    p = add("sideinfo", cmd_sideinfo, "side-information reference state, or the channel protocol")
    p.add_argument("--dA", type=_positive_int, default=2)
    p.add_argument("--dB", type=_positive_int, default=2)
    p.add_argument("--instances", type=_positive_int, default=20)
    p.add_argument("--channel", choices=["identity", "depolarizing", "random"])
    p.add_argument("--eps", type=float, default=0.45)
    p.add_argument("--K", type=_positive_int, default=DEFAULT_K)
    p.add_argument("--trials", type=_positive_int, default=1000)

    p = add("corrsample", cmd_corrsample, "correlated sampling: exact and sampled agreement")
    p.add_argument("--K", type=_positive_int, default=32)
    p.add_argument("--w", type=_positive_int, default=2, help="number of measurement outcomes")
    p.add_argument("--trials", type=_positive_int, default=10000)

    p = add("oneway", cmd_oneway, "compressed one-way protocol on a fixture", state=False)
    p.add_argument("--fixture", help="built-in name (equality, index) or protocol JSON path")
    p.add_argument("--eps", type=float, default=0.45)
    p.add_argument("--delta", type=float, default=0.25)
    p.add_argument("--K", type=_positive_int, default=DEFAULT_K)
    p.add_argument("--trials", type=_positive_int, default=1000)

    p = add("sweep", cmd_sweep, "parameter sweep over random instances", state=False, fmt="csv")
    p.add_argument("--kind", choices=["compress", "corrsample", "substate"], default="compress")
    p.add_argument("--Ns", type=_positive_int, nargs="+", default=[2])
    p.add_argument("--Ks", type=_positive_int, nargs="+", default=[32, 64])
    p.add_argument("--epss", type=float, nargs="+", default=[0.45])
    p.add_argument("--instances", type=_positive_int, default=10)

    p = add("selfcheck", cmd_selfcheck, "randomized property suite", state=False)
    p.add_argument("--only", nargs="+", choices=sorted(CHECKS))
    p.add_argument("--counterexample-dir", default=".")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, PreconditionError, FileNotFoundError) as e:
        print(f"qcompress {args.command}: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
