"""Command-line front end.

Exit codes: 0 success; 2 configuration/input validation failure; 3 a
verification subcommand found a mathematical violation (a finding, not
a crash); 64 usage errors such as unknown flags.

The default output directory comes from SLLN_LAB_OUTPUT_DIR, else
./results.
"""

import argparse
import json
import os
import sys
from fractions import Fraction

import numpy as np

from .config import document_hash, validate_config
from .errors import CapabilityError, ConfigError
from .experiments import burkholder_ratio, path_convergence_study, run_error_trials, tail_scan
from .fourth_moment import fourth_moment_bruteforce, fourth_moment_formula
from .records import persist_results, write_summary_csv
from .semigroups import chernoff_conditions_check, chernoff_iterate, limit_semigroup
from .spaces import dual_norm, operator_norm
from .verify import (verify_bounds, verify_expansion_identities, verify_expectation_identities,
                     verify_martingale_property, verify_seminorm_equivalence)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VIOLATION = 3
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _output_dir(args) -> str:
    if args.output_dir:
        return args.output_dir
    return os.environ.get("SLLN_LAB_OUTPUT_DIR", "results")


def _load(args):
    if not os.path.exists(args.config):
        raise ConfigError([f"config file not found: {args.config}"])
    with open(args.config, encoding="utf-8") as fh:
        document = json.load(fh)
    if args.seed is not None:
        document["seed"] = args.seed
    config = validate_config(document)
    return config, document_hash(document)


def _print_findings(findings, verbose):
    for finding in findings[: None if verbose else 20]:
        print(f"  FAIL {finding}")
    if not verbose and len(findings) > 20:
        print(f"  ... and {len(findings) - 20} more")


def _cmd_verify_identities(args) -> int:
    config, cfg_hash = _load(args)
    dims = (config.model.dim,)
    groups = [
        ("expansion identity", verify_expansion_identities(seed=config.seed, dims=dims,
                                                           n_max=args.n_max)),
        ("martingale property", verify_martingale_property(n_max=min(args.n_max, 6), dims=dims)),
        ("expectation identities", verify_expectation_identities(seed=config.seed, count=args.identity_cases)),
        ("seminorm equivalence", verify_seminorm_equivalence(seed=config.seed)),
    ]
    failed = 0
    for name, findings in groups:
        status = "ok" if not findings else f"FAIL ({len(findings)} findings)"
        print(f"{name}: {status}")
        _print_findings(findings, args.verbose)
        failed += len(findings)
    print(f"config {cfg_hash}: {failed} finding(s)")
    return EXIT_VIOLATION if failed else EXIT_OK


def _cmd_check_bounds(args) -> int:
    config, cfg_hash = _load(args)
    findings = verify_bounds(seed=config.seed, trials=args.trials, dims=(config.model.dim,))
    status = "ok" if not findings else f"FAIL ({len(findings)} findings)"
    print(f"norm bounds ({args.trials} trials per ensemble): {status}")
    _print_findings(findings, args.verbose)
    print(f"config {cfg_hash}: {len(findings)} finding(s)")
    return EXIT_VIOLATION if findings else EXIT_OK


def _run_errors(args, kinds) -> int:
    config, cfg_hash = _load(args)
    out = _output_dir(args)
    all_records = []
    violations = 0
    for n in config.n_values:
        records = run_error_trials(config, n, kinds=kinds, workers=args.workers)
        if "wot" in kinds and "sot" in kinds:
            bound = dual_norm(config.model, config.functional)
            for rec in records:
                if rec.sup_error_wot > bound * rec.sup_error_sot + 1e-10:
                    violations += 1
        all_records.extend(records)
        meds = np.median([r.sup_error_sot for r in records])
        print(f"n={n}: median sup error {meds:.6g} over {len(records)} trials")
    jsonl_path, csv_path = persist_results(all_records, out, cfg_hash, config.seed,
                                           config.epsilon, basename=f"{args.command}_{cfg_hash}")
    print(f"wrote {jsonl_path}")
    print(f"wrote {csv_path}")
    study = path_convergence_study(config)
    if study.degenerate:
        print("single-path study: degenerate (zero errors)")
    else:
        print(f"single-path study ({study.regime}): slope {study.slope:.3f}, "
              f"decreasing fraction {study.decreasing_fraction:.2f}")
    if violations:
        print(f"FAIL: {violations} trial(s) violated the duality bound")
        return EXIT_VIOLATION
    return EXIT_OK


def _cmd_run_sot(args) -> int:
    return _run_errors(args, ("sot",))


def _cmd_run_wot(args) -> int:
    config, _ = _load(args)
    if config.functional is None:
        raise ConfigError(["run-wot needs a functional in the config"])
    return _run_errors(args, ("sot", "wot"))


def _cmd_run_form(args) -> int:
    config, _ = _load(args)
    if config.form is None:
        raise ConfigError(["run-form needs a form in the config"])
    return _run_errors(args, ("sot", "form"))


def _cmd_tail_scan(args) -> int:
    config, cfg_hash = _load(args)
    out = _output_dir(args)
    result = tail_scan(config, workers=args.workers)
    rows = []
    for pt in result.points:
        print(f"n={pt.n}: tail {pt.frequency:.4f} [{pt.wilson_lo:.4f}, {pt.wilson_hi:.4f}] "
              f"(chernoff distance {pt.chernoff_distance:.3e})")
        recs = result.records[pt.n]
        errs = np.array([r.sup_error_sot for r in recs])
        rows.append((pt.n, float(np.median(errs)), float(np.quantile(errs, 0.1)),
                     float(np.quantile(errs, 0.9)), pt.frequency, pt.wilson_lo, pt.wilson_hi))
    os.makedirs(out, exist_ok=True)
    csv_path = os.path.join(out, f"tail_scan_{cfg_hash}_summary.csv")
    write_summary_csv(rows, csv_path, cfg_hash, config.seed)
    print(f"wrote {csv_path}")
    if result.below_resolution:
        print("tails below resolution at this epsilon; no fit")
        return EXIT_OK
    print(f"weighted log-log slope: {result.slope:.3f} "
          f"(estimable regime: {result.estimable})")
    if result.contract_met is False:
        print("FAIL: fitted slope exceeds -1.5 in the estimable regime")
        return EXIT_VIOLATION
    return EXIT_OK


def _cmd_burkholder(args) -> int:
    config, cfg_hash = _load(args)
    series = burkholder_ratio(config, args.t)
    for pt in series.points:
        print(f"n={pt.n}: lhs {pt.lhs_mean:.6g} rhs {pt.rhs_mean:.6g} ratio {pt.ratio:.4f}")
    if series.degenerate:
        print("degenerate: increment sums vanish (deterministic ensemble)")
        return EXIT_OK
    print(f"max ratio {series.max_ratio:.4f}, median {series.median_ratio:.4f}")
    if not series.contract_met:
        print("FAIL: max ratio exceeds 3x the median ratio")
        return EXIT_VIOLATION
    return EXIT_OK


def _cmd_fourth_moment(args) -> int:
    u = Fraction(args.u) if "/" in args.u or "." not in args.u else float(args.u)
    formula = fourth_moment_formula(args.n, u)
    try:
        brute = fourth_moment_bruteforce(args.n, u)
    except CapabilityError as exc:
        print(f"formula: {formula}")
        print(f"bruteforce unavailable: {exc}")
        return EXIT_OK
    agree = formula == brute if isinstance(u, Fraction) else abs(formula - brute) <= 1e-9 * max(1.0, abs(float(formula)))
    print(f"formula: {formula}")
    print(f"bruteforce: {brute}")
    print(f"formula==bruteforce: {'true' if agree else 'false'}")
    return EXIT_OK if agree else EXIT_VIOLATION


def _cmd_chernoff(args) -> int:
    config, cfg_hash = _load(args)
    report = chernoff_conditions_check(config.ensemble, config.grid)
    print(f"identity deviation at 0: {report.identity_deviation:.3e}")
    print(f"growth-bound margin: {report.norm_margin:.3e}")
    for h, err in sorted(report.derivative_errors.items(), reverse=True):
        print(f"derivative error at h={h:g}: {err:.3e}")
    for n in config.n_values:
        diff = chernoff_iterate(config.ensemble, config.T, n) - limit_semigroup(config.ensemble, config.T)
        dist = operator_norm(config.model, diff, mode="exact").value
        print(f"n={n}: |F(T/n)^n - e^(mean T)| = {dist:.6e}")
    if not report.passed:
        print(f"FAIL: conditions violated: {', '.join(report.failed_conditions)}")
        return EXIT_VIOLATION
    print("chernoff conditions: ok")
    return EXIT_OK


def _cmd_report(args) -> int:
    from .report import render_report
    written = render_report(args.input_dir, args.output_dir or _output_dir(args))
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="slln-lab",
                     description="Verification lab for products of random operator semigroups")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="JSON configuration document")
            p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--output-dir", default=None, help="artifact directory")
        p.add_argument("--workers", type=int, default=1, help="worker process count")
        p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("verify-identities", help="exact identity suite")
    add_common(p)
    p.add_argument("--n-max", type=int, default=10)
    p.add_argument("--identity-cases", type=int, default=100)
    p.set_defaults(func=_cmd_verify_identities)

    p = sub.add_parser("check-bounds", help="proven norm-bound suite")
    add_common(p)
    p.add_argument("--trials", type=int, default=200)
    p.set_defaults(func=_cmd_check_bounds)

    for name, func in (("run-sot", _cmd_run_sot), ("run-wot", _cmd_run_wot),
                       ("run-form", _cmd_run_form)):
        p = sub.add_parser(name, help=f"{name.split('-')[1]} error curves")
        add_common(p)
        p.set_defaults(func=func)

    p = sub.add_parser("tail-scan", help="tail frequencies and rate fit")
    add_common(p)
    p.set_defaults(func=_cmd_tail_scan)

    p = sub.add_parser("burkholder", help="moment-ratio series")
    add_common(p)
    p.add_argument("--t", type=float, default=1.0)
    p.set_defaults(func=_cmd_burkholder)

    p = sub.add_parser("fourth-moment", help="covering-tuple identity")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--u", required=True, help="weight u (float or rational like 1/4)")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=_cmd_fourth_moment)

    p = sub.add_parser("chernoff", help="iterate conditions and distances")
    add_common(p)
    p.set_defaults(func=_cmd_chernoff)

    p = sub.add_parser("report", help="render figures from run outputs")
    p.add_argument("--input-dir", required=True)
    p.add_argument("--output-dir", default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except (json.JSONDecodeError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
