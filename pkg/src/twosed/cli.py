"""Command line entry point: ``twosed {params,effdim,train,verify}``.

Exit codes: 0 success, 1 verification failure, 2 usage or parse error,
3 data error.
"""
from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .data import load_cifar, load_csv, load_digits, load_idx, subsample, synth_blobs, synth_covertype
from .effdim import log_grid, rank_estimate, sweep
from .errors import (DivergedError, FormatError, InvalidVariance, LabelError, ParseError, ShapeError,
                     TwoSEDError)
from .fisher import estimate_spectra, save_ensemble
from .netmodel import DEFAULT_SIGMA2, load_model_config, parse_model_string
from .trainer import TrainConfig, train
from .verify import SUITES, run_suite

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _shared(p, data=True):
    p.add_argument("--model", help='model string, e.g. "MLP 54-16-7"')
    p.add_argument("--model-config", help="JSON model config file")
    p.add_argument("--sigma2", type=float, default=None, help=f"block noise variance (default {DEFAULT_SIGMA2})")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", help="output CSV path (stdout when omitted)")
    if data:
        p.add_argument("--data", help="dataset path (images file for idx; comma-separated batches for cifar)")
        p.add_argument("--labels", help="labels file for --format idx")
        p.add_argument("--format", default="csv",
                       choices=["csv", "idx", "cifar", "blobs", "covsynth", "digits"])
        p.add_argument("--label-column", type=int, default=-1)
        p.add_argument("--label-base", type=int, default=0, help="smallest label value in the CSV")
        p.add_argument("--header", action="store_true", help="CSV has a header row")
        p.add_argument("--n-rows", type=int, default=1000, help="rows generated for synthetic formats")


def build_parser():
    ap = _Parser(prog="twosed", description="Two-scale effective dimension of stochastic feed-forward models")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("params", help="print the parameter count of a model")
    _shared(p, data=False)

    p = sub.add_parser("effdim", help="2sED and lower 2sED over a grid of covering radii")
    _shared(p)
    p.add_argument("--samples", type=int, default=100, help="data samples per Fisher estimate")
    p.add_argument("--thetas", type=int, default=100, help="parameter samples")
    p.add_argument("--zeta", type=float, default=0.0)
    p.add_argument("--eps-min", type=float, default=1e-6)
    p.add_argument("--eps-max", type=float, default=1e-1)
    p.add_argument("--eps-count", type=int, default=20)
    p.add_argument("--scheme", default="fan_in", choices=["fan_in", "unit_cube"])
    p.add_argument("--trajectories-per-input", type=int, default=1)
    p.add_argument("--mean-propagation", action="store_true")
    p.add_argument("--freeze-weights", action="store_true",
                   help="zero all weights and hold them fixed (trivial model)")
    p.add_argument("--dump-fisher", help="write the normalized Fisher blocks to this binary file")

    p = sub.add_parser("train", help="train the deterministic network with Adam")
    _shared(p)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--n-train", type=int, default=None)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("--suite", required=True)
    p.add_argument("--out", help="report CSV path (stdout when omitted)")
    p.add_argument("--threads", type=int, default=1)
    return ap


def _spec(args):
    if args.model_config:
        spec = load_model_config(args.model_config)
    elif args.model:
        spec = parse_model_string(args.model)
    else:
        raise ParseError("one of --model or --model-config is required")
    if args.sigma2 is not None:
        spec = spec.with_sigma2(args.sigma2)
    return spec


class _DataParseError(FormatError):
    pass


def _dataset(args, spec):
    try:
        return _load(args, spec)
    except ParseError as exc:
        # malformed data files are data errors, not usage errors
        raise _DataParseError(str(exc)) from exc


def _load(args, spec):
    fmt = args.format
    if fmt == "blobs":
        return synth_blobs(args.n_rows, int(np.prod(spec.input_shape)), spec.output_shape[0], args.seed)
    if fmt == "covsynth":
        return synth_covertype(args.n_rows, args.seed)
    if fmt == "digits":
        return load_digits()
    if not args.data:
        raise FormatError(f"--data is required for --format {fmt}")
    if fmt == "csv":
        return load_csv(args.data, label_column=args.label_column, header=args.header,
                        label_base=args.label_base, n_classes=spec.output_shape[0])
    if fmt == "idx":
        if not args.labels:
            raise FormatError("--labels is required for --format idx")
        return load_idx(args.data, args.labels)
    return load_cifar(args.data.split(","))


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _sidecar(out, meta):
    if out:
        Path(str(out) + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _meta_base(args):
    return {
        "command": args.command,
        "argv": {k: v for k, v in sorted(vars(args).items()) if k != "func"},
        "version": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
    }


def cmd_params(args):
    print(_spec(args).d)
    return EXIT_OK


def cmd_effdim(args):
    spec = _spec(args)
    ds = _dataset(args, spec)
    if ds.shape != tuple(spec.input_shape):
        raise ShapeError(f"dataset inputs {ds.shape} do not match model input {spec.input_shape}")
    sub = subsample(ds, args.samples, args.seed)
    t0 = time.perf_counter()
    run = estimate_spectra(spec, sub.inputs, args.thetas, args.seed, threads=args.threads,
                           scheme=args.scheme, trajectories_per_input=args.trajectories_per_input,
                           mean_propagation=args.mean_propagation, frozen=args.freeze_weights,
                           keep_blocks=bool(args.dump_fisher))
    curve = sweep(run.spectra, log_grid(args.eps_min, args.eps_max, args.eps_count), args.zeta)
    _emit(curve.to_csv(), args.out)
    if args.dump_fisher:
        save_ensemble(run.ensemble, args.dump_fisher)
    meta = _meta_base(args)
    meta.update(model=spec.name, d=spec.d, block_dims=list(spec.block_dims), sigma2=spec.sigma2,
                n_data_samples=len(sub), n_theta_samples=args.thetas,
                normalization=run.normalization, rank_estimate=rank_estimate(run.spectra),
                data=ds.meta | sub.meta, wall_time_s=time.perf_counter() - t0)
    _sidecar(args.out, json.loads(json.dumps(meta, default=str)))
    return EXIT_OK


def cmd_train(args):
    spec = _spec(args)
    ds = _dataset(args, spec)
    cfg = TrainConfig(learning_rate=args.lr, batch_size=args.batch_size, epochs=args.epochs,
                      seed=args.seed, n_train=args.n_train)
    t0 = time.perf_counter()
    curve = train(spec, ds, cfg)
    _emit(curve.to_csv(), args.out)
    meta = _meta_base(args)
    meta.update(model=spec.name, d=spec.d, train_config=vars(cfg), data=ds.meta,
                wall_time_s=time.perf_counter() - t0)
    _sidecar(args.out, json.loads(json.dumps(meta, default=str)))
    return EXIT_OK


def cmd_verify(args):
    if args.suite != "all" and args.suite not in SUITES:
        print(f"unknown suite {args.suite!r}; choose from {', '.join([*SUITES, 'all'])}", file=sys.stderr)
        return EXIT_USAGE
    rep = run_suite(args.suite)
    _emit(rep.to_csv(), args.out)
    _sidecar(args.out, _meta_base(args) | {"passed": rep.passed, "n_checks": len(rep.rows)})
    for row in rep.failures():
        print(f"FAILED {row[0]} at {row[1]}: lhs={row[2]:.6g} rhs={row[3]:.6g}", file=sys.stderr)
    return EXIT_OK if rep.passed else EXIT_CHECK


COMMANDS = {"params": cmd_params, "effdim": cmd_effdim, "train": cmd_train, "verify": cmd_verify}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ParseError, ShapeError, InvalidVariance) as exc:
        print(f"twosed: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, LabelError, OSError) as exc:
        print(f"twosed: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DivergedError as exc:
        print(f"twosed: training diverged: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TwoSEDError as exc:
        print(f"twosed: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
