"""Command-line entry point: ``wassood <subcommand> [flags]``.

Exit codes: 0 success (or ID decision), 1 input error, 2 usage error,
3 OOD decision. Every run writes ``run_manifest.json`` next to its outputs.
"""

import argparse
import hashlib
import json
import math
from pathlib import Path
import sys

import numpy as np

from . import __version__
from .detectors import DETECTORS, detector_summary, score_population
from .exceptions import (
    DimensionMismatchError,
    InputFormatError,
    InsufficientDataError,
    SingularCovarianceError,
)
from .io import read_sample_csv, read_scores_csv, read_softmax_csv, write_csv
from .metrics import roc_curve
from .simulation import (
    BOUND_HEADER,
    SHIFT_RULES,
    ExperimentConfig,
    TheoryConfig,
    first_failing_phi,
    generate_softmax_populations,
    run_bound_check,
    run_power_curve,
    run_shift_experiment,
)
from .testing import Calibration, TestConfig, calibrate, test_statistic

EXIT_OK, EXIT_INPUT, EXIT_USAGE, EXIT_OOD = 0, 1, 2, 3
INPUT_ERRORS = (
    InputFormatError,
    DimensionMismatchError,
    InsufficientDataError,
    SingularCovarianceError,
)


class UsageError(Exception):
    pass


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir, subcommand, config, seed, artifacts, notes=()):
    out_dir = Path(out_dir)
    manifest = {
        "schema_version": "1",
        "package_version": __version__,
        "subcommand": subcommand,
        "config": config,
        "seed": seed,
        "artifacts": {Path(p).name: _sha256(p) for p in artifacts},
        "notes": list(notes),
    }
    path = out_dir / "run_manifest.json"
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return path


def _out_dir(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- subcommands -----------------------------------------------------------------

def cmd_simulate(args):
    try:
        cfg = ExperimentConfig(
            n=args.n, d=args.d, latent_dim=args.latent_dim, noise_sd=args.noise_sd,
            batch_size=args.batch_size, n_batches=args.n_batches,
            ood_fraction=args.ood_fraction,
            shift_grid=tuple(args.shift_grid) if args.shift_grid else ExperimentConfig.shift_grid,
            reps=args.reps, alpha=args.alpha, n_folds=args.k,
            split_fraction=args.split_fraction,
            distances=tuple(args.distances.split(",")), seed=args.seed,
            latent_cov=np.asarray(args.latent_cov).reshape(args.latent_dim, args.latent_dim)
            if args.latent_cov else _default_cov(args.latent_dim),
        )
        TestConfig(alpha=cfg.alpha, split_fraction=cfg.split_fraction, n_folds=cfg.n_folds)
    except ValueError as exc:
        raise UsageError(str(exc))
    curve = run_shift_experiment(cfg, n_jobs=args.threads)
    out = _out_dir(args)
    path = out / "shift_curve.csv"
    write_csv(path, ["distance", "shift", "auroc_mean", "auroc_lo", "auroc_hi"], curve.rows())
    write_manifest(out, "simulate", cfg.to_dict(), cfg.seed, [path],
                   ["auroc_lo/auroc_hi are the 5%/95% quantiles across reps"])
    for kind in cfg.distances:
        print(f"{kind}: mean AUROC " + " ".join(f"{v:.3f}" for v in curve.mean(kind)))
    return EXIT_OK


def _default_cov(p):
    if p == 2:
        return ExperimentConfig.latent_cov
    return np.eye(p)


def cmd_calibrate(args):
    try:
        cfg = TestConfig(
            alpha=args.alpha, distance=args.distance, n_folds=args.k,
            split_fraction=args.split_fraction, batch_size=args.cal_batch_size,
            reference=args.reference, latent_dim=args.latent_dim,
            lambda_scaling=args.lambda_scaling, seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc))
    train = read_sample_csv(args.train)
    cal = calibrate(train, cfg)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    cal.to_json(out_path)
    config = {
        "train": str(args.train), "alpha": cfg.alpha, "distance": str(cfg.distance),
        "n_folds": cfg.n_folds, "split_fraction": cfg.split_fraction,
        "cal_batch_size": cal.cal_batch_size, "reference": cfg.reference,
        "latent_dim": cfg.latent_dim, "lambda_scaling": cfg.lambda_scaling,
    }
    write_manifest(Path(args.out_dir) if args.out_dir else out_path.parent,
                   "calibrate", config, cfg.seed, [out_path])
    print(f"{cal.lam!r}")
    return EXIT_OK


def cmd_test(args):
    cal = Calibration.from_json(args.cal)
    batch = read_sample_csv(args.batch)
    outcome = test_statistic(cal, batch)
    print(f"{outcome.statistic!r},{outcome.lambda_used!r},{outcome.decision}")
    out = _out_dir(args)
    record = out / "test_record.json"
    record.write_text(json.dumps({**outcome.to_dict(), "cal": str(args.cal),
                                  "batch": str(args.batch)}, indent=1) + "\n")
    write_manifest(out, "test", {"cal": str(args.cal), "batch": str(args.batch)},
                   cal.seed, [record])
    return EXIT_OOD if outcome.is_ood else EXIT_OK


def _theory_config(args):
    try:
        return TheoryConfig(alpha=args.alpha, order=args.order, n_folds=args.k,
                            split_fraction=args.split_fraction, reps=args.reps, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc))


def cmd_power_curve(args):
    tc = _theory_config(args)
    if any(m < 1 for m in args.m_grid):
        raise UsageError("--m-grid entries must be positive")
    points = run_power_curve(tc, args.m_grid, args.shift, args.shift_rule, n_jobs=args.threads)
    out = _out_dir(args)
    path = out / "power_curve.csv"
    write_csv(path, ["m", "delta_hat", "power", "se"],
              ([p.m, p.delta_hat, p.power, p.se] for p in points))
    write_manifest(out, "power-curve",
                   {**tc.to_dict(), "m_grid": args.m_grid, "shift": args.shift,
                    "shift_rule": args.shift_rule}, tc.seed, [path],
                   [f"lambda at m={p.m}: {p.lam!r}" for p in points])
    for p in points:
        print(f"m={p.m} delta_hat={p.delta_hat:.3f} lambda={p.lam:.3f} "
              f"power={p.power:.4f} se={p.se:.4f}")
    return EXIT_OK


def cmd_bound_check(args):
    tc = _theory_config(args)
    if any(phi <= 0 for phi in args.phi_grid):
        raise UsageError("--phi-grid entries must be positive")
    rows = run_bound_check(tc, args.phi_grid, args.m_grid, args.shift_grid, args.m_limit,
                           args.fractions)
    out = _out_dir(args)
    path = out / "bound_check.csv"
    write_csv(path, BOUND_HEADER, (r.csv_row() for r in rows))
    failing = first_failing_phi(rows)
    notes = [
        "bounds assume the T2 transport inequality for the reference (assume_t2=true)",
        "bounds are asymptotic: valid beyond an unmodelled sample-size threshold",
        f"first phi_prime with a lower-bound violation: {failing}",
    ]
    write_manifest(out, "bound-check", {**tc.to_dict(), "phi_grid": args.phi_grid,
                   "m_grid": args.m_grid, "shift_grid": args.shift_grid,
                   "m_limit": args.m_limit, "fractions": args.fractions},
                   tc.seed, [path], notes)
    held = sum(r.holds for r in rows)
    print(f"{held}/{len(rows)} rows consistent with their bound; "
          f"first failing phi_prime (lower bound): {failing}")
    return EXIT_OK


def _load_softmax(args):
    if args.softmax:
        return read_softmax_csv(args.softmax)
    return generate_softmax_populations(
        k=args.classes, n_id=args.n_id, n_ood=args.n_ood,
        concentration_id=args.concentration_id, concentration_ood=args.concentration_ood,
        seed=args.seed,
    )


def cmd_detectors(args):
    if not 0.0 < args.alpha < 1.0:
        raise UsageError("--alpha must lie in (0, 1)")
    probs, labels = _load_softmax(args)
    rows = detector_summary(probs, labels, alpha=args.alpha)
    out = _out_dir(args)
    path = out / "detector_summary.csv"
    header = ["detector", "auroc", "tpr_at_alpha", "fpr_at_alpha"]
    write_csv(path, header, ([r[h] for h in header] for r in rows))
    source = str(args.softmax) if args.softmax else "synthetic"
    write_manifest(out, "detectors", {"source": source, "alpha": args.alpha,
                   "classes": int(probs.shape[1]), "rows": int(probs.shape[0])},
                   args.seed, [path],
                   ["tpr/fpr thresholds: (1 - alpha) quantile of ID scores, rule score > t",
                    "wasserstein_uniform uses |i - j| on class indices as ground metric"]
                   + [f"threshold {r['detector']}: {r['threshold']!r}" for r in rows])
    print(f"# TPR/FPR at the (1-{args.alpha:g}) quantile of ID scores")
    for r in rows:
        print(f"{r['detector']}: auroc={r['auroc']:.4f} tpr={r['tpr_at_alpha']:.4f} "
              f"fpr={r['fpr_at_alpha']:.4f}")
    return EXIT_OK


def cmd_roc(args):
    if args.scores:
        scores, labels = read_scores_csv(args.scores)
        source = str(args.scores)
    elif args.softmax:
        probs, labels = read_softmax_csv(args.softmax)
        scores = score_population(probs, args.detector)
        source = f"{args.softmax}:{args.detector}"
    else:
        raise UsageError("one of --scores or --softmax is required")
    try:
        curve = roc_curve(scores, labels)
    except ValueError as exc:
        raise InputFormatError(str(exc))
    out = _out_dir(args)
    path = out / "roc.csv"
    write_csv(path, ["threshold", "fpr", "tpr"],
              zip(map(float, curve.thresholds), map(float, curve.fpr), map(float, curve.tpr)))
    write_manifest(out, "roc", {"source": source}, None, [path],
                   ["row i classifies score >= threshold as OOD; first row threshold inf"])
    print(f"auroc={curve.area():.6f}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="wassood", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=0):
        p.add_argument("--seed", type=int, default=seed)
        p.add_argument("--out-dir", default=".")

    d = ExperimentConfig()
    p = sub.add_parser("simulate", help="factor-model shift experiment (AUROC vs shift)")
    p.add_argument("--n", type=int, default=d.n)
    p.add_argument("--d", type=int, default=d.d)
    p.add_argument("--latent-dim", type=int, default=d.latent_dim)
    p.add_argument("--latent-cov", type=_floats, default=None,
                   help="row-major entries of the latent covariance")
    p.add_argument("--noise-sd", type=float, default=d.noise_sd)
    p.add_argument("--batch-size", type=int, default=d.batch_size)
    p.add_argument("--n-batches", type=int, default=d.n_batches)
    p.add_argument("--ood-fraction", type=float, default=d.ood_fraction)
    p.add_argument("--shift-grid", type=_floats, default=None)
    p.add_argument("--reps", type=int, default=d.reps)
    p.add_argument("--alpha", type=float, default=d.alpha)
    p.add_argument("--k", "--n-folds", dest="k", type=int, default=d.n_folds,
                   help="calibration repetitions")
    p.add_argument("--split-fraction", type=float, default=d.split_fraction)
    p.add_argument("--distances", default=",".join(d.distances))
    p.add_argument("--threads", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="calibrate a test on training data")
    p.add_argument("--train", required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--distance", default="wasserstein")
    p.add_argument("--k", "--n-folds", dest="k", type=int, default=100)
    p.add_argument("--latent-dim", type=int, default=2)
    p.add_argument("--split-fraction", type=float, default=0.8)
    p.add_argument("--cal-batch-size", type=int, default=None)
    p.add_argument("--reference", choices=("factor", "gaussian", "empirical"), default="factor")
    p.add_argument("--lambda-scaling", choices=("none", "sqrt_m"), default="none")
    p.add_argument("--out", default="calibration.json")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=None, help="manifest directory (default: next to --out)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("test", help="test one batch against a calibration")
    p.add_argument("--cal", required=True)
    p.add_argument("--batch", required=True)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_test)

    t = TheoryConfig()

    def theory(p):
        p.add_argument("--alpha", type=float, default=t.alpha)
        p.add_argument("--order", type=float, default=t.order)
        p.add_argument("--k", "--n-folds", dest="k", type=int, default=t.n_folds)
        p.add_argument("--split-fraction", type=float, default=t.split_fraction)
        p.add_argument("--reps", type=int, default=t.reps)
        common(p)

    p = sub.add_parser("power-curve", help="empirical power against batch size")
    p.add_argument("--m-grid", type=_ints, default=[10, 50, 200, 1000])
    p.add_argument("--shift", type=float, default=0.5)
    p.add_argument("--shift-rule", choices=SHIFT_RULES, default="fixed")
    p.add_argument("--threads", type=int, default=1)
    theory(p)
    p.set_defaults(func=cmd_power_curve)

    p = sub.add_parser("bound-check", help="empirical power against the power bounds")
    p.add_argument("--phi-grid", type=_floats,
                   default=[0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0])
    p.add_argument("--m-grid", type=_ints, default=[10, 50, 200, 1000])
    p.add_argument("--shift-grid", type=_floats, default=[0.1, 0.2, 0.3, 0.5])
    p.add_argument("--m-limit", type=int, default=1000)
    p.add_argument("--fractions", type=_floats, default=[0.25, 0.5, 0.75],
                   help="intermediate-regime separations as fractions of lambda")
    theory(p)
    p.set_defaults(func=cmd_bound_check)

    def softmax_source(p):
        p.add_argument("--softmax", default=None, help="CSV with p0..p{k-1},label")
        p.add_argument("--classes", type=int, default=10)
        p.add_argument("--n-id", type=int, default=500)
        p.add_argument("--n-ood", type=int, default=500)
        p.add_argument("--concentration-id", type=float, default=4.0)
        p.add_argument("--concentration-ood", type=float, default=1.0)

    p = sub.add_parser("detectors", help="compare the four softmax OOD scores")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--synthetic", action="store_true", help="use synthetic populations (default)")
    softmax_source(p)
    p.add_argument("--alpha", type=float, default=0.05)
    common(p)
    p.set_defaults(func=cmd_detectors)

    p = sub.add_parser("roc", help="export a ROC curve")
    p.add_argument("--scores", default=None, help="CSV with score,label")
    p.add_argument("--softmax", default=None)
    p.add_argument("--detector", choices=sorted(DETECTORS), default="wasserstein_uniform")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_roc)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
