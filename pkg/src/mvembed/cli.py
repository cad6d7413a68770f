"""Command-line interface: ``mvembed synth | embed | eval``.

Exit codes: 0 success, 2 bad input or configuration, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
import warnings
from pathlib import Path

from . import __version__
from .dataset import load_dataset, manifest_fingerprint, save_dataset, synth_multiview, write_matrix_csv
from .embedding import AmsreConfig, build_graphs
from .errors import EigenFailure, MVEmbedError, NoConvergence
from .evaluation import METHODS, format_report, run_experiment, write_report_csv
from .output import write_result

log = logging.getLogger("mvembed")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


class UsageError(Exception):
    pass


def _int_list(text, flag):
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"{flag} expects a comma-separated list of integers, got {text!r}")
    if not values:
        raise UsageError(f"{flag} is empty")
    return values


def _resolve_threads(arg):
    if arg is None:
        env = os.environ.get("MVEMBED_THREADS")
        if env is not None:
            try:
                arg = int(env)
            except ValueError:
                raise UsageError(f"MVEMBED_THREADS must be an integer, got {env!r}")
        else:
            arg = 1
    if arg < 0:
        raise UsageError(f"--threads must be >= 0, got {arg}")
    return arg or (os.cpu_count() or 1)


def _resolve_config(args, **overrides) -> AmsreConfig:
    """Defaults, then the --config file, then explicit flags."""
    resolved = AmsreConfig().to_dict()
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                from_file = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read --config {args.config}: {exc}")
        lasso = {**resolved["lasso"], **from_file.pop("lasso", {})}
        resolved.update(from_file)
        resolved["lasso"] = lasso
    flags = {
        "d": getattr(args, "dim", None),
        "lambda": args.lam,
        "r": args.r,
        "max_outer_iter": args.max_iter,
        "conv_tol": args.conv_tol,
        "seed": args.seed,
        "coupling_sign": args.coupling_sign,
    }
    resolved.update({k: v for k, v in flags.items() if v is not None})
    lasso_flags = {"gamma_rel": args.gamma_rel, "tol": args.lasso_tol, "max_iter": args.lasso_max_iter}
    resolved["lasso"].update({k: v for k, v in lasso_flags.items() if v is not None})
    resolved.update(overrides)
    return AmsreConfig.from_dict(resolved)


def _write_manifest(out_dir, argv, config, fingerprint, started):
    manifest = {
        "command": ["mvembed"] + list(argv),
        "config": config,
        "dataset_fingerprint": fingerprint,
        "version": __version__,
        "duration_seconds": time.time() - started,
    }
    with open(Path(out_dir) / "run_manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def cmd_synth(args, argv):
    started = time.time()
    dims = _int_list(args.dims, "--dims")
    if len(dims) != args.views:
        raise UsageError(f"--dims has {len(dims)} entries but --views is {args.views}")
    ds = synth_multiview(
        args.samples, args.clusters, args.views, dims, args.noise, args.seed,
    )
    manifest = save_dataset(ds, args.out)
    config = {
        "samples": args.samples, "clusters": args.clusters, "views": args.views,
        "dims": dims, "noise": args.noise, "seed": args.seed,
    }
    _write_manifest(args.out, argv, config, manifest_fingerprint(manifest), started)
    log.info("wrote %s", manifest)
    return EXIT_OK


def cmd_embed(args, argv):
    started = time.time()
    threads = _resolve_threads(args.threads)
    config = _resolve_config(args)
    dataset = load_dataset(args.data)
    config.check_dataset(dataset)
    graphs, Ms = build_graphs(dataset, config.lasso, n_jobs=threads)
    result = METHODS[args.method](dataset, config, Ms=Ms, n_jobs=threads)
    out = Path(args.out) if args.method == "amsre" else Path(args.out) / args.method
    write_result(result, dataset.view_names, out, config, method=args.method)
    if args.dump_graphs:
        for name, g, M in zip(dataset.view_names, graphs, Ms):
            write_matrix_csv(out / f"S_{name}.csv", g.coefficients)
            write_matrix_csv(out / f"M_{name}.csv", M)
    _write_manifest(out, argv, config.to_dict(), manifest_fingerprint(args.data), started)
    log.info("%s: converged=%s after %d iterations", args.method, result.converged, result.iterations_used)
    return EXIT_OK


def cmd_eval(args, argv):
    started = time.time()
    threads = _resolve_threads(args.threads)
    dims = _int_list(args.dims, "--dims")
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    unknown = [m for m in methods if m not in METHODS]
    if unknown or not methods:
        raise UsageError(f"--methods must be drawn from {sorted(METHODS)}, got {args.methods!r}")
    if args.repeats < 1:
        raise UsageError(f"--repeats must be >= 1, got {args.repeats}")
    base = _resolve_config(args, d=dims[0])
    dataset = load_dataset(args.data)
    if dataset.labels is None:
        raise UsageError(f"dataset {args.data} has no labels; eval needs them")
    configs = [_resolve_config(args, d=d) for d in dims]
    for c in configs:
        c.check_dataset(dataset)

    _, Ms = build_graphs(dataset, base.lasso, n_jobs=threads)
    tables = []
    for method in methods:
        for config in configs:
            tables.append(
                run_experiment(
                    dataset, method, config, repeats=args.repeats,
                    test_fraction=args.test_fraction, seed=config.seed, Ms=Ms, n_jobs=threads,
                )
            )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report_csv(out / "report.csv", tables)
    text = format_report(tables, title=dataset.name)
    with open(out / "report.txt", "w") as fh:
        fh.write(text)
    resolved = base.to_dict()
    resolved.update(dims=dims, methods=methods, repeats=args.repeats, test_fraction=args.test_fraction)
    del resolved["d"]
    _write_manifest(out, argv, resolved, manifest_fingerprint(args.data), started)
    print(text, end="")
    return EXIT_OK


def _add_shared(p):
    p.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads, 0 = all cores (fallback: $MVEMBED_THREADS, else 1)")
    p.add_argument("--verbose", "-v", action="store_true")


def _add_model(p):
    p.add_argument("--data", required=True, help="dataset manifest (JSON)")
    p.add_argument("--config", help="JSON file with config values; flags take precedence")
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="coupling strength")
    p.add_argument("--r", type=float, default=None, help="weight exponent (> 1)")
    p.add_argument("--max-iter", type=int, default=None, help="outer iteration cap")
    p.add_argument("--conv-tol", type=float, default=None, help="relative objective change to stop at")
    p.add_argument("--gamma-rel", type=float, default=None, help="relative L1 penalty")
    p.add_argument("--lasso-tol", type=float, default=None)
    p.add_argument("--lasso-max-iter", type=int, default=None)
    p.add_argument("--coupling-sign", type=int, choices=(-1, 1), default=None,
                   help=argparse.SUPPRESS)


def build_parser():
    parser = argparse.ArgumentParser(prog="mvembed", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mvembed {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic clustered multi-view dataset")
    _add_shared(p)
    p.add_argument("--samples", type=int, default=300)
    p.add_argument("--clusters", type=int, default=5)
    p.add_argument("--views", type=int, default=3)
    p.add_argument("--dims", default="50,50,50", help="comma-separated feature count per view")
    p.add_argument("--noise", type=float, default=0.05, help="feature noise sigma")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("embed", help="fit embeddings and write them out")
    _add_shared(p)
    _add_model(p)
    p.add_argument("--dim", type=int, default=None, help="target dimension d")
    p.add_argument("--method", choices=sorted(METHODS), default="amsre")
    p.add_argument("--dump-graphs", action="store_true", help="also write S and M per view")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("eval", help="repeated-holdout 1NN evaluation")
    _add_shared(p)
    _add_model(p)
    p.add_argument("--dims", default="10", help="comma-separated target dimensions")
    p.add_argument("--methods", default="amsre", help="comma-separated subset of amsre,spp,uniform")
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "synth" and args.seed is None:
        args.seed = 0
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        with warnings.catch_warnings():
            if not args.verbose:
                warnings.simplefilter("ignore", NoConvergence)
            return args.func(args, argv)
    except UsageError as exc:
        print(f"mvembed {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except EigenFailure as exc:
        print(f"mvembed {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (MVEmbedError, ValueError, OSError) as exc:
        print(f"mvembed {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
