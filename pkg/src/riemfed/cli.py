"""Command-line driver: ``riemfed run | compare | consensus-bench``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .consensus import KARCHER, TANGENT
from .data import DataError
from .experiment import (
    DatasetSpec,
    ExperimentSpec,
    SpecError,
    consensus_bench,
    run_compare,
    run_experiment,
    write_bench,
    write_results,
)
from .fedopt import ALGORITHMS, LAST, RFEDSVRG, SAMPLE
from .manifolds import GeometryError
from .metrics import ConvergenceError

log = logging.getLogger("riemfed")

EXIT_OK = 0
EXIT_CONFIG = 2


def _dataset_arg(value: str) -> tuple[str, str | None]:
    if value == "gaussian":
        return "gaussian", None
    kind, sep, path = value.partition(":")
    if not sep or kind not in ("csv", "idx") or not path:
        raise argparse.ArgumentTypeError("expected gaussian, csv:PATH or idx:PATH")
    return kind, path


def _eta_arg(value: str):
    if value == "auto":
        return None
    try:
        eta = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a positive number or 'auto'") from None
    if not eta > 0:
        raise argparse.ArgumentTypeError("eta must be positive")
    return eta


def _add_experiment_args(p: argparse.ArgumentParser, with_algorithm: bool) -> None:
    p.add_argument("--spec", type=Path, help="re-run from a spec.json written by an earlier run")
    p.add_argument("--task", choices=("pca", "kpca"), default="pca")
    p.add_argument("--dataset", type=_dataset_arg, default=("gaussian", None), help="gaussian, csv:PATH or idx:PATH")
    p.add_argument("--header", action="store_true", help="CSV has a header row")
    p.add_argument("--label-column", type=int, default=None, help="CSV column to drop (negative counts from the end)")
    p.add_argument("--d", type=int, default=100, help="feature dimension (gaussian)")
    p.add_argument("--p", type=int, default=10000, help="sample count (gaussian)")
    p.add_argument("--r", type=int, default=None, help="subspace dimension (default 1 for pca, 5 for kpca)")
    p.add_argument("--n", type=int, default=10, help="number of clients")
    p.add_argument("--k", type=int, default=None, help="clients per round (default n/10)")
    p.add_argument("--tau", type=int, default=None, help="local steps (default 1 for rfedsvrg, 5 otherwise)")
    p.add_argument("--eta", type=_eta_arg, default=None, help="step size, or 'auto' for 1/lambda_max (default)")
    p.add_argument("--mu", type=float, default=None, help="prox weight for rfedprox (default n/10)")
    p.add_argument("--beta", type=float, default=1.0, help="moving-average weight of the tangent-space mean")
    p.add_argument("--rounds", type=int, default=600)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    if with_algorithm:
        p.add_argument("--algorithm", choices=ALGORITHMS, default=RFEDSVRG)
    p.add_argument("--consensus", choices=(TANGENT, KARCHER), default=TANGENT)
    p.add_argument("--server-option", choices=(LAST, SAMPLE), default=LAST)
    p.add_argument("--client-option", choices=(LAST, SAMPLE), default=LAST)
    p.add_argument("--center", action="store_true", help="center features before forming covariances")
    p.add_argument("--standardize", action="store_true", help="center and scale features to unit variance")
    p.add_argument("--normalize-cov", action="store_true", help="divide client covariances by their sample count")
    p.add_argument("--no-plots", action="store_true")
    p.add_argument("--out", type=Path, required=True, help="output directory")


def spec_from_args(args) -> ExperimentSpec:
    if args.spec is not None:
        return ExperimentSpec.load(args.spec)
    kind, path = args.dataset
    if path is not None and not Path(path).exists():
        raise DataError(f"dataset file not found: {path}")
    r = args.r if args.r is not None else (1 if args.task == "pca" else 5)
    return ExperimentSpec(
        task=args.task,
        dataset=DatasetSpec(kind, path, args.p, args.d, args.header, args.label_column),
        r=r,
        algorithm=getattr(args, "algorithm", RFEDSVRG),
        n=args.n,
        k=args.k,
        T=args.rounds,
        tau=args.tau,
        eta=args.eta,
        mu=args.mu,
        beta=args.beta,
        consensus=args.consensus,
        server_option=args.server_option,
        client_option=args.client_option,
        seed=args.seed,
        repeats=args.repeats,
        center=args.center,
        standardize=args.standardize,
        normalize_cov=args.normalize_cov,
    )


def cmd_run(args) -> int:
    spec = spec_from_args(args)
    table = run_experiment(spec)
    write_results(table, args.out, plots=not args.no_plots)
    agg = table.aggregate()
    print(f"final grad_norm {agg['grad_norm'][-1]:.3e}  loss_gap {agg['loss_gap'][-1]:.3e}  "
          f"angle {agg['principal_angle_sum'][-1]:.3e} rad  -> {args.out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    spec = spec_from_args(args)
    tables = run_compare(spec, args.out, plots=not args.no_plots)
    for algo, t in tables.items():
        agg = t.aggregate()
        print(f"{algo:9s} final grad_norm {agg['grad_norm'][-1]:.3e}  angle {agg['principal_angle_sum'][-1]:.3e} rad")
    return EXIT_OK


def cmd_consensus_bench(args) -> int:
    rows = consensus_bench(args.d_list, args.k, args.trials, args.seed)
    write_bench(rows, args.out, plots=not args.no_plots)
    print(f"{'d':>5} {'h(x_t)':>8} | {'K d2':>7} {'K h':>7} {'K time':>8} | {'T d2':>7} {'T h':>7} {'T time':>8}")
    for r in rows:
        print(f"{r['d']:>5} {r['h_xt']:8.3f} | {r['karcher_d2']:7.3f} {r['karcher_h']:7.3f} {r['karcher_time_s']:8.4f} | "
              f"{r['tangent_d2']:7.3f} {r['tangent_h']:7.3f} {r['tangent_time_s']:8.4f}")
    return EXIT_OK


def _int_list(value: str) -> list[int]:
    try:
        out = [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated integers") from None
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("dimensions must be positive")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="riemfed", description="Federated optimization on manifolds (PCA / kPCA).")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one algorithm over repeated random starts")
    _add_experiment_args(p_run, with_algorithm=True)
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run rfedsvrg, rfedavg and rfedprox on identical inputs")
    _add_experiment_args(p_cmp, with_algorithm=False)
    p_cmp.set_defaults(func=cmd_compare)

    p_b = sub.add_parser("consensus-bench", help="tangent-space mean vs Karcher mean on random sphere points")
    p_b.add_argument("--d-list", type=_int_list, default=[100, 200, 500])
    p_b.add_argument("--k", type=int, default=100)
    p_b.add_argument("--trials", type=int, default=10)
    p_b.add_argument("--seed", type=int, default=0)
    p_b.add_argument("--no-plots", action="store_true")
    p_b.add_argument("--out", type=Path, required=True)
    p_b.set_defaults(func=cmd_consensus_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (SpecError, DataError, GeometryError, ConvergenceError, ValueError, OSError) as e:
        print(f"riemfed: error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
