"""Command-line entry point.

Subcommands: run (execute a config across seeds), audit (measure mixing
contraction/centering against the closed-form bounds), ablate (rules x
momentum x attacks grid), seb-test (exhaustive small-instance broadcast
properties). Exit codes: 0 success, 1 validation, 2 invariant violation
during a run, 3 IO.
"""

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from .config import parse_and_validate, parse_seeds
from .errors import (
    ConfigError,
    ConvergenceError,
    InvariantViolationError,
    IoFailure,
    RegimeError,
)
from .metrics import emit_metrics
from .network import exhaustive_property_check
from .reduction import (
    DEFAULT_STRATEGIES,
    audit,
    bound_eleven_f,
    bound_five_f,
    gaussian_inputs,
    make_nna_phase,
    per_receiver_strategy,
)
from .trainer import ablation_matrix, resilience_check, run_single, summarize_cells

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INVARIANT = 2
EXIT_IO = 3

AUDIT_HEADER = (
    "regime,n,f,rounds,trials,alpha_hat,alpha_bound,lambda_hat,lambda_bound,"
    "gamma_in,gamma_out,worst_strategy,violation"
)


def _ensure_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create output directory {path}: {exc}") from exc


def _seed_csv_name(seed):
    return f"run_seed{seed}.csv"


def cmd_run(args):
    cfg = parse_and_validate(args.config)
    if args.seeds:
        cfg = cfg.replaced(seeds=parse_seeds(args.seeds))
    if args.output_dir:
        cfg = cfg.replaced(output_dir=args.output_dir)
    _ensure_dir(cfg.output_dir)
    objectives = cfg.build_objectives()

    def one(seed):
        result = run_single(cfg, seed, objectives)
        emit_metrics(result.rows, os.path.join(cfg.output_dir, _seed_csv_name(seed)))
        return result

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(one, cfg.seeds))
    else:
        results = [one(seed) for seed in cfg.seeds]
    verdict = resilience_check(results, float("inf"))
    print(
        f"run: {len(cfg.seeds)} seed(s), T={cfg.iterations}, rule={cfg.rule}, "
        f"attack={cfg.attack_kind}, worst-node output error {verdict.epsilon_measured:.6g} "
        f"-> {cfg.output_dir}"
    )
    return EXIT_OK


def _write_audit_row(path, row):
    exists = os.path.exists(path)
    try:
        with open(path, "a", encoding="utf-8", newline="\n") as handle:
            if not exists:
                handle.write(AUDIT_HEADER + "\n")
            handle.write(",".join(str(v) for v in row) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write audit row to {path}: {exc}") from exc


def cmd_audit(args):
    n, f = args.n, args.f
    if args.regime == "auto":
        regime = "eleven_f" if (f == 0 or n >= 11 * f) else "five_f"
    else:
        regime = args.regime
    if regime == "eleven_f":
        rounds = args.rounds if args.rounds else 1
        bound = bound_eleven_f(n, f, rounds)
    else:
        bound, rounds = bound_five_f(n, f, args.delta)
        if args.rounds:
            rounds = args.rounds
    strategies = list(DEFAULT_STRATEGIES)
    if not args.seb:
        strategies.append(("per_receiver", per_receiver_strategy))
    phase = make_nna_phase(n, f, rounds, policy="faulty_first", seb=args.seb)
    report = audit(
        phase,
        gaussian_inputs(n - f, args.dim),
        strategies,
        args.trials,
        args.seed,
        rounds=rounds,
        regime=regime,
    )
    _ensure_dir(args.output_dir)
    path = os.path.join(args.output_dir, "mixing_audit.csv")
    _write_audit_row(
        path,
        (
            regime, n, f, rounds, args.trials,
            f"{report.alpha_hat:.17g}", f"{bound.alpha:.17g}",
            f"{report.lambda_hat:.17g}", f"{bound.lam:.17g}",
            f"{report.gamma_in:.17g}", f"{report.gamma_out:.17g}",
            report.worst_strategy, report.violation,
        ),
    )
    ok = (
        not report.violation
        and report.alpha_hat <= bound.alpha
        and report.lambda_hat <= bound.lam
    )
    print(
        f"audit[{regime}] n={n} f={f} K={rounds} trials={args.trials}: "
        f"alpha {report.alpha_hat:.4g} <= {bound.alpha:.4g}, "
        f"lambda {report.lambda_hat:.4g} <= {bound.lam:.4g} "
        f"({'ok' if ok else 'VIOLATION'}) -> {args.output_dir}"
    )
    return EXIT_OK if ok else EXIT_INVARIANT


def cell_csv_name(attack, rule, beta, seed):
    return f"{attack}__{rule}__beta{beta:g}__seed{seed}.csv"


def cmd_ablate(args):
    cfg = parse_and_validate(args.config)
    if args.seeds:
        cfg = cfg.replaced(seeds=parse_seeds(args.seeds))
    if args.output_dir:
        cfg = cfg.replaced(output_dir=args.output_dir)
    _ensure_dir(cfg.output_dir)
    cells = ablation_matrix(cfg)
    failures = 0
    for cell in cells:
        if cell.error:
            failures += 1
            continue
        for seed, result in cell.results.items():
            emit_metrics(
                result.rows,
                os.path.join(cfg.output_dir, cell_csv_name(cell.attack, cell.rule, cell.beta, seed)),
            )
    summary_path = os.path.join(cfg.output_dir, "ablation_summary.csv")
    try:
        with open(summary_path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write("attack,rule,beta,output_error,error\n")
            for attack, rule, beta, eps, err in summarize_cells(cells):
                handle.write(f"{attack},{rule},{beta:g},{eps:.17g},{err}\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {summary_path}: {exc}") from exc
    print(
        f"ablate: {len(cells)} cells x {len(cfg.seeds)} seeds, "
        f"{failures} failed cell(s) -> {cfg.output_dir}"
    )
    return EXIT_OK if failures == 0 else EXIT_INVARIANT


def cmd_seb_test(args):
    stats = exhaustive_property_check(args.max_n, args.max_f)
    ok = stats["validity_failures"] == 0 and stats["consistency_violations"] == 0
    print(
        f"seb-test: {stats['instances']} executions over (n,f) in {stats['pairs']}, "
        f"validity failures {stats['validity_failures']}, "
        f"consistency violations {stats['consistency_violations']} "
        f"({'ok' if ok else 'VIOLATION'})"
    )
    return EXIT_OK if ok else EXIT_INVARIANT


def build_parser():
    parser = argparse.ArgumentParser(
        prog="monna",
        description="Byzantine-robust decentralized SGD simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a configured experiment across seeds")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seeds", default="", help="override, e.g. 1..5 or 1,2,3")
    p_run.add_argument("--output-dir", default="")
    p_run.add_argument("--threads", type=int, default=1)
    p_run.set_defaults(func=cmd_run)

    p_audit = sub.add_parser("audit", help="measure mixing contraction/centering")
    p_audit.add_argument("--n", type=int, required=True)
    p_audit.add_argument("--f", type=int, required=True)
    p_audit.add_argument("--rounds", type=int, default=0, help="0 = regime default")
    p_audit.add_argument("--trials", type=int, default=1000)
    p_audit.add_argument("--dim", type=int, default=5)
    p_audit.add_argument("--seed", type=int, default=0)
    p_audit.add_argument("--delta", type=float, default=1.0 / 3.0)
    p_audit.add_argument("--regime", choices=("auto", "eleven_f", "five_f"), default="auto")
    p_audit.add_argument("--seb", action="store_true", default=True)
    p_audit.add_argument("--no-seb", dest="seb", action="store_false")
    p_audit.add_argument("--output-dir", default="out")
    p_audit.set_defaults(func=cmd_audit)

    p_ablate = sub.add_parser("ablate", help="rules x momentum x attacks grid")
    p_ablate.add_argument("--config", required=True)
    p_ablate.add_argument("--seeds", default="")
    p_ablate.add_argument("--output-dir", default="")
    p_ablate.set_defaults(func=cmd_ablate)

    p_seb = sub.add_parser("seb-test", help="exhaustive broadcast property check")
    p_seb.add_argument("--max-n", type=int, default=7)
    p_seb.add_argument("--max-f", type=int, default=2)
    p_seb.set_defaults(func=cmd_seb_test)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, RegimeError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (InvariantViolationError, ConvergenceError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except IoFailure as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
