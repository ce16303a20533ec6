"""Command-line entry point: ``etpower {simulate,generate,fit,validate,report}``."""
from __future__ import annotations

import argparse
import json
import logging
import secrets
import sys
import time
from pathlib import Path

import numpy as np

from . import report
from .criteria import DEFAULT_TOKENS, CriterionError, CriterionSpec
from .datagen import (
    EFFECT_MODES, MEASURES, REFERENCE_CORRELATIONS, Dataset, apply_effect, calibrate_effect,
    generate_base, mean_correlations,
)
from .lmm import FitError, lrt
from .mcrunner import config_from_strings, parse_bool, read_config, run
from .numerics import RngStream
from .params import ParameterError, endpoint, read_range, sample_paramset, default_range



def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    seed = secrets.randbits(63)
    print(f"seed: {seed}", file=sys.stderr)
    return seed


def _float_list(text):
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers: {text!r}")


def _bool(text):
    try:
        return parse_bool(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def cmd_simulate(args) -> int:
    overrides = {}
    if args.iterations is not None:
        overrides["iterations"] = args.iterations
    if args.range is not None:
        overrides["range"] = read_range(args.range)
    if args.effects is not None:
        overrides["effects"] = args.effects
    if args.coupled_noise is not None:
        overrides["coupled_noise"] = args.coupled_noise
    if args.effect_mode is not None:
        overrides["effect_mode"] = args.effect_mode
    if args.criteria is not None or args.alpha is not None or args.k is not None:
        tokens = (args.criteria or ",".join(DEFAULT_TOKENS)).split(",")
        alpha = 0.05 if args.alpha is None else args.alpha
        k = 2 if args.k is None else args.k
        overrides["criteria"] = tuple(
            CriterionSpec.from_token(t.strip(), alpha=alpha, k=k) for t in tokens if t.strip())
    raw, base_dir = {}, None
    if args.config is not None:
        raw, base_dir = read_config(args.config), args.config.parent
    if args.seed is not None or "seed" not in raw:
        overrides["master_seed"] = _seed(args)
    cfg = config_from_strings(raw, base_dir=base_dir, **overrides)

    out = Path(args.out or cfg.out_dir or "results")
    t0 = time.monotonic()
    agg = run(cfg, workers=args.workers)
    diagnostics = {
        "runtime_s": round(time.monotonic() - t0, 3),
        "workers": args.workers,
        "seed": cfg.master_seed,
        "coupled_noise": cfg.coupled_noise,
        "effect_mode": cfg.effect_mode,
    }
    report.write_results(agg, out, diagnostics, gnuplot=args.gnuplot)
    print(f"results written to {out}", file=sys.stderr)
    return 0


def cmd_generate(args) -> int:
    rng = RngStream(_seed(args), 0)
    if args.endpoint:
        params = endpoint(args.endpoint)
    else:
        prange = read_range(args.range) if args.range else default_range()
        params = sample_paramset(prange, rng.substream(0))
    data = generate_base(params, rng.substream(1))
    if args.effect:
        data = apply_effect(data, calibrate_effect(params, args.effect), args.effect_mode)
    if args.out in (None, "-"):
        data.to_csv(sys.stdout)
    else:
        data.to_csv(args.out)
        print(f"{len(data)} trials written to {args.out}", file=sys.stderr)
    return 0


def cmd_fit(args) -> int:
    data = Dataset.read_csv(args.data)
    test = lrt(data, args.measure)
    full = test.full_fit
    doc = {
        "measure": args.measure,
        "beta0": full.beta0,
        "beta1": full.beta1,
        "var_subj": full.var_subj,
        "var_item": full.var_item,
        "sigma2": full.sigma2,
        "loglik": full.loglik,
        "loglik_null": test.null_fit.loglik,
        "lrt_stat": test.lrt_stat,
        "p_value": test.p_value,
        "effect_ms": test.effect_ms,
        "converged": bool(full.converged and test.null_fit.converged),
    }
    print(json.dumps(doc, indent=2))
    return 0


def cmd_validate(args) -> int:
    params = endpoint(args.endpoint, n=args.n)
    rng = RngStream(_seed(args), 0)
    corr = mean_correlations(params, args.datasets, rng)
    ref = REFERENCE_CORRELATIONS[args.endpoint]
    names = [m.upper() for m in MEASURES]
    print("      " + " ".join(f"{n:>6}" for n in names))
    for name, row in zip(names, corr):
        print(f"{name:>6}" + " ".join(f"{v:6.2f}" for v in row))
    iu = np.triu_indices(len(MEASURES), 1)
    worst = float(np.max(np.abs(corr[iu] - ref[iu])))
    ok = worst <= args.tolerance
    print(f"max |artificial - reference| = {worst:.3f} (tolerance {args.tolerance}): "
          f"{'ok' if ok else 'FAILED'}", file=sys.stderr)
    return 0 if ok else 1


def cmd_report(args) -> int:
    agg = report.read_aggregate(args.out)
    report.write_results(agg, args.out, gnuplot=args.gnuplot)
    print(json.dumps([{k: r[k] for k in ("criterion", "rate", "ci_low", "ci_high")}
                      for r in report.fp_table(agg).records()], indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="etpower",
        description="False positives and power for multiple eye-tracking measures.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the Monte Carlo experiment")
    p.add_argument("--config", type=Path, help="flat key = value run configuration")
    p.add_argument("--iterations", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--range", type=Path, help="parameter range file")
    p.add_argument("--effects", type=_float_list, help="effect sizes in ms, e.g. 0,5,20")
    p.add_argument("--criteria", help="comma list of: one,two,bonferroni,holm,all,all-bonferroni")
    p.add_argument("--alpha", type=float)
    p.add_argument("--k", type=int, help="measures required by 'two' (k of m)")
    p.add_argument("--out", type=Path, help="results directory")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--coupled-noise", type=_bool, default=None)
    p.add_argument("--effect-mode", choices=EFFECT_MODES, default=None)
    p.add_argument("--gnuplot", action="store_true", help="also write gnuplot stubs")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("generate", help="write one simulated dataset as CSV")
    p.add_argument("--endpoint", choices=("angele", "metzner"))
    p.add_argument("--range", type=Path)
    p.add_argument("--seed", type=int)
    p.add_argument("--effect", type=float, default=0.0, help="true effect in ms")
    p.add_argument("--effect-mode", choices=EFFECT_MODES, default="propagate")
    p.add_argument("--out", help="output CSV (default: stdout)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit", help="fit the mixed model to a dataset CSV")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--measure", choices=MEASURES, default="ffd")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("validate", help="compare endpoint correlations with the reference")
    p.add_argument("--endpoint", choices=("angele", "metzner"), required=True)
    p.add_argument("--datasets", type=int, default=100)
    p.add_argument("--n", type=int, default=40, help="subjects and items per dataset")
    p.add_argument("--seed", type=int)
    p.add_argument("--tolerance", type=float, default=0.06)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("report", help="re-render outputs of a results directory")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--gnuplot", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ParameterError, CriterionError, FitError, ValueError, OSError) as exc:
        print(f"etpower: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
