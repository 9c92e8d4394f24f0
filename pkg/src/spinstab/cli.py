"""Command-line front end: configure runs, execute checks, emit reports.

Exit codes: 0 all verdicts pass, 1 check failure, 2 usage/config error,
3 capacity error.  Numeric report fields are byte-identical across re-runs
with the same config and seed, independent of --threads.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import replace

import numpy as np

from . import __version__, observables
from .errors import CapacityError, SpinstabError, UsageError
from .estimators import (RunPlan, delta_g_rhs, delta_g_via_beta,
                         delta_g_via_iden, delta_g_via_lambda_fd,
                         quenched_expectation, quenched_free_energy,
                         quenched_log_partition)
from .mc import McPlan, mc_quenched_expectation
from .models import model_from_string
from .observables import parse_polynomial, replica_count
from .stats import default_threads
from .verify import (check_sumlaw, check_theorem1, check_theorem2,
                     fluctuation_decomposition, rate_sweep, wick_selfcheck)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_CAPACITY = 3

ESTIMATOR_NAMES = ("mean", "log-partition", "free-energy", "delta-g-iden",
                   "delta-g-beta", "delta-g-lambda", "delta-g-rhs")


def f17(x) -> str:
    """Fixed 17-significant-digit decimal rendering for diff-able artifacts."""
    return format(float(x), ".17g")


def _parse_range(text: str) -> tuple[float, float]:
    try:
        lo, hi = text.split(":")
        return float(lo), float(hi)
    except ValueError as exc:
        raise UsageError(f"bad range {text!r}, want LO:HI") from exc


def _parse_grid(text: str) -> np.ndarray:
    try:
        lo, hi, count = text.split(":")
        return np.linspace(float(lo), float(hi), int(count))
    except ValueError as exc:
        raise UsageError(f"bad grid {text!r}, want LO:HI:COUNT") from exc


def _load_config(path: str) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def _apply_config(argv: list[str]) -> list[str]:
    """Expand --config key=value pairs into leading flags so explicit CLI
    flags take precedence (argparse keeps the last occurrence)."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise UsageError("--config needs a file path")
    config = _load_config(argv[idx + 1])
    rest = argv[:idx] + argv[idx + 2:]
    injected: list[str] = []
    for key, value in config.items():
        injected.extend([f"--{key.replace('_', '-')}", value])
    # keep the subcommand words first, then config defaults, then user flags
    head = []
    while rest and not rest[0].startswith("-"):
        head.append(rest.pop(0))
    return head + injected + rest


def _write_json(path, payload):
    text = json.dumps(payload, indent=2, sort_keys=True)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _write_csv(path, header, rows):
    fh = open(path, "w", newline="") if path else sys.stdout
    try:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    finally:
        if path:
            fh.close()


def _report_payload(report, seed: int) -> dict:
    payload = report.to_dict()
    payload["seed"] = seed
    payload["version"] = __version__
    return payload


# ---------------------------------------------------------------------------
# subcommands

def cmd_verify(args) -> int:
    threads = args.threads
    if args.check == "wick":
        report = wick_selfcheck(n_samples=args.samples, seed=args.seed)
        nodes_rows, nodes_header = [], None
    else:
        model = model_from_string(args.model)
        G = parse_polynomial(args.g)
        if args.check == "theorem2":
            report = check_theorem2(model, G, beta=args.beta, lam=args.lam,
                                    n_samples=args.samples, seed=args.seed,
                                    threads=threads, n_sigma=args.tol_sigma)
        elif args.check == "theorem1":
            beta1, beta2 = _parse_range(args.beta_range)
            report = check_theorem1(model, G, beta1, beta2, lam=args.lam,
                                    nodes=args.nodes, n_samples=args.samples,
                                    seed=args.seed, threads=threads,
                                    n_sigma=args.tol_sigma)
        elif args.check == "sumlaw":
            report = check_sumlaw(model, G, beta=args.beta, lam=args.lam,
                                  n_samples=args.samples, seed=args.seed,
                                  threads=threads, n_sigma=args.tol_sigma)
        elif args.check == "decomposition":
            report = fluctuation_decomposition(model, G, beta=args.beta,
                                               n_samples=args.samples,
                                               seed=args.seed, threads=threads)
        else:  # pragma: no cover - argparse restricts choices
            raise UsageError(f"unknown check {args.check!r}")

    if args.csv:
        if args.check == "theorem1":
            _write_csv(args.csv, *_theorem1_node_rows(args))
        else:
            _write_csv(args.csv,
                       ["check", "side", "mean", "stderr", "n_samples", "seed"],
                       [[report.name, "lhs", f17(report.lhs.mean),
                         f17(report.lhs.stderr), report.lhs.n_samples, args.seed],
                        [report.name, "rhs", f17(report.rhs.mean),
                         f17(report.rhs.stderr), report.rhs.n_samples, args.seed]])
    _write_json(args.json, _report_payload(report, args.seed))
    print(f"{report.name}: {report.verdict} "
          f"(discrepancy {f17(report.discrepancy)}, tolerance {f17(report.tolerance)})")
    return EXIT_PASS if report.passed else EXIT_FAIL


def _theorem1_node_rows(args):
    """Per-quadrature-node DeltaG estimates for the theorem1 CSV artifact."""
    from .estimators import integrand_nodes
    model = model_from_string(args.model)
    G = parse_polynomial(args.g)
    beta1, beta2 = _parse_range(args.beta_range)
    betas, weights = integrand_nodes(beta1, beta2, args.nodes)
    header = ["node", "beta", "quadrature_weight", "delta_g_mean",
              "delta_g_stderr", "n_samples", "seed"]
    rows = []
    for j, (beta, weight) in enumerate(zip(betas, weights)):
        plan = RunPlan(model, beta=float(beta), lam=args.lam,
                       n_samples=args.samples, seed=args.seed,
                       threads=args.threads)
        est = delta_g_via_iden(plan, G)
        rows.append([j, f17(beta), f17(weight), f17(est.mean), f17(est.stderr),
                     est.n_samples, args.seed])
    return header, rows


def cmd_estimate(args) -> int:
    model = model_from_string(args.model)
    G = parse_polynomial(args.g)
    betas = _parse_grid(args.beta_grid) if args.beta_grid else [args.beta]
    estimators = [e.strip().replace("_", "-") for e in args.estimator.split(",")]
    for name in estimators:
        if name not in ESTIMATOR_NAMES:
            raise UsageError(f"unknown estimator {name!r} (choose from {ESTIMATOR_NAMES})")

    def run_one(beta, name, plan):
        if name == "mean":
            return quenched_expectation(plan, G)
        if name == "log-partition":
            return quenched_log_partition(plan)
        if name == "free-energy":
            return quenched_free_energy(plan)
        if name == "delta-g-iden":
            return delta_g_via_iden(plan, G)
        if name == "delta-g-beta":
            return delta_g_via_beta(plan, G)
        if name == "delta-g-lambda":
            return delta_g_via_lambda_fd(plan, G)
        return delta_g_rhs(plan, G)

    rows = []
    for beta in betas:
        for name in estimators:
            if args.backend == "mc":
                if name != "mean":
                    raise UsageError("the mc backend only supports estimator=mean")
                plan = McPlan(replicas=max(2, replica_count(G)), sweeps=args.sweeps,
                              burn_in=args.burn_in, thinning=args.thinning,
                              n_samples=args.samples, seed=args.seed)
                est = mc_quenched_expectation(model, G, beta, args.lam, plan)
                variants = [(name, est)]
            else:
                plan = RunPlan(model, beta=float(beta), lam=args.lam,
                               n_samples=args.samples, seed=args.seed,
                               threads=args.threads, h_beta=args.h_beta,
                               h_lambda=args.h_lambda)
                variants = [(name, run_one(beta, name, plan))]
                if args.richardson and name in ("delta-g-beta", "delta-g-lambda"):
                    halved = replace(plan, h_beta=plan.beta_step / 2,
                                     h_lambda=plan.h_lambda / 2)
                    variants.append((name + "@h/2", run_one(beta, name, halved)))
            for label, est in variants:
                rows.append([model.describe(), f17(beta), f17(args.lam), args.g,
                             label, f17(est.mean), f17(est.stderr), est.n_samples,
                             args.seed])

    header = ["model", "beta", "lambda", "observable", "estimator",
              "mean", "stderr", "n_samples", "seed"]
    _write_csv(args.csv, header, rows)
    return EXIT_PASS


def cmd_sweep_rate(args) -> int:
    sizes = [model_from_string(tok) for tok in args.sizes.split(",")]
    G = parse_polynomial(args.g)
    beta1, beta2 = _parse_range(args.beta_range)
    result = rate_sweep(sizes, G, beta1, beta2, nodes=args.nodes,
                        n_samples=args.samples, seed=args.seed, threads=args.threads)
    header = ["model", "scale", "integral_mean", "integral_stderr",
              "endpoint_mean", "endpoint_stderr", "bound", "n_samples", "seed"]
    rows = [[r.model, f17(r.scale), f17(r.integral.mean), f17(r.integral.stderr),
             f17(r.endpoint.mean), f17(r.endpoint.stderr), f17(r.bound),
             args.samples, args.seed] for r in result.rows]
    if args.csv:
        _write_csv(args.csv, header, rows)
    payload = result.to_dict()
    payload["seed"] = args.seed
    payload["version"] = __version__
    _write_json(args.json, payload)
    print(f"rate_sweep: slope {f17(result.slope)} +- {f17(result.slope_stderr)}")
    return EXIT_PASS


# ---------------------------------------------------------------------------
# selftest: the acceptance suite at reduced sample counts

def _selftest_checks(threads: int):
    from . import selftest
    return selftest.reduced_checks(threads)


def cmd_selftest(args) -> int:
    checks = _selftest_checks(args.threads)
    if args.list:
        for name, _ in checks:
            print(name)
        return EXIT_PASS
    if args.mutate == "delta-g":
        observables._MUTATION_OFFSET = 0.5
    t0 = time.perf_counter()
    failures = 0
    try:
        for name, fn in checks:
            try:
                ok = fn()
            except CapacityError:
                raise
            except SpinstabError as exc:
                print(f"FAIL {name}: {exc}")
                failures += 1
                continue
            print(f"{'PASS' if ok else 'FAIL'} {name}")
            failures += 0 if ok else 1
    finally:
        observables._MUTATION_OFFSET = 0.0
    print(f"selftest: {len(checks) - failures}/{len(checks)} passed "
          f"in {time.perf_counter() - t0:.1f} s")
    return EXIT_PASS if failures == 0 else EXIT_FAIL


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinstab",
        description="Numerical verifier for stochastic stability of Gaussian "
                    "spin glasses (SK and Edwards-Anderson).")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed_required=True):
        p.add_argument("--seed", type=int, required=seed_required,
                       help="base seed for the counter-based disorder streams")
        p.add_argument("--samples", type=int, default=1000,
                       help="number of disorder samples")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: cores, or SPINSTAB_THREADS)")
        p.add_argument("--config", help="flat key=value config file; flags override")

    p_verify = sub.add_parser("verify", help="run a theorem/identity check")
    p_verify.add_argument("check",
                          choices=["theorem1", "theorem2", "sumlaw",
                                   "decomposition", "wick"])
    p_verify.add_argument("--model", help="model descriptor, e.g. sk:8 or ea:3x3")
    p_verify.add_argument("--g", default="q1,2", help="observable text")
    p_verify.add_argument("--beta", type=float, default=0.5)
    p_verify.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p_verify.add_argument("--beta-range", help="beta1:beta2 for theorem1")
    p_verify.add_argument("--nodes", type=int, default=17,
                          help="Simpson nodes (odd) for theorem1")
    p_verify.add_argument("--tol-sigma", type=float, default=3.0)
    p_verify.add_argument("--json", help="JSON report path (default: stdout)")
    p_verify.add_argument("--csv", help="per-node/per-size CSV path")
    common(p_verify)
    p_verify.set_defaults(fn=cmd_verify)

    p_est = sub.add_parser("estimate", help="quenched means and DeltaG estimators")
    p_est.add_argument("--model", required=True)
    p_est.add_argument("--g", default="q1,2")
    p_est.add_argument("--beta", type=float, default=0.5)
    p_est.add_argument("--beta-grid", help="LO:HI:COUNT grid over beta")
    p_est.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p_est.add_argument("--estimator", default="mean",
                       help="comma list from " + ",".join(ESTIMATOR_NAMES))
    p_est.add_argument("--backend", choices=["exact", "mc"], default="exact")
    p_est.add_argument("--h-beta", type=float, default=None,
                       help="beta finite-difference step (default 1e-2*max(1,beta))")
    p_est.add_argument("--h-lambda", type=float, default=1e-2,
                       help="lambda finite-difference step")
    p_est.add_argument("--richardson", action="store_true",
                       help="also report finite-difference estimators at halved steps")
    p_est.add_argument("--sweeps", type=int, default=10_000)
    p_est.add_argument("--burn-in", type=int, default=None)
    p_est.add_argument("--thinning", type=int, default=1)
    p_est.add_argument("--csv", help="output CSV path (default: stdout)")
    common(p_est)
    p_est.set_defaults(fn=cmd_estimate)

    p_rate = sub.add_parser("sweep-rate", help="volume-rate sweep over sizes")
    p_rate.add_argument("--sizes", required=True,
                        help="comma list of model descriptors, e.g. sk:4,sk:6,sk:8")
    p_rate.add_argument("--g", default="q1,2")
    p_rate.add_argument("--beta-range", required=True)
    p_rate.add_argument("--nodes", type=int, default=17)
    p_rate.add_argument("--csv", help="per-size CSV path")
    p_rate.add_argument("--json", help="JSON slope report path (default: stdout)")
    common(p_rate)
    p_rate.set_defaults(fn=cmd_sweep_rate)

    p_self = sub.add_parser("selftest", help="reduced acceptance suite")
    p_self.add_argument("--list", action="store_true",
                        help="print check names without running")
    p_self.add_argument("--mutate", choices=["delta-g"],
                        help="negative control: corrupt a DeltaG coefficient")
    p_self.add_argument("--threads", type=int, default=None)
    p_self.set_defaults(fn=cmd_selftest)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config(argv)
        args = parser.parse_args(argv)
        if getattr(args, "threads", None) is None:
            args.threads = default_threads()
        return args.fn(args)
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
