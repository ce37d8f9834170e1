"""Command-line front end.

Subcommands: fit | stats | augment | hist | metrics | phantom.
Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
stdout carries only machine-readable output (--print-config dumps the
resolved run configuration as JSON); diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import augment as aug
from . import metrics as met
from .errors import InputError, InsufficientDataError, NumericalError
from .gmm import EmConfig, fit_em
from .phantom import PhantomSpec, generate_phantom
from .population import estimate_population, load_stats, save_stats
from .preprocess import clip_normalize
from .volume import (
    foreground_mask,
    read_label_volume,
    read_volume,
    write_label_volume,
    write_volume,
)


def _add_em_options(parser):
    group = parser.add_argument_group("EM options")
    group.add_argument("--tol", type=float, default=1e-6, help="relative log-likelihood tolerance")
    group.add_argument("--max-iter", type=int, default=500, help="EM iteration cap")
    group.add_argument("--subsample-cap", type=int, default=2_000_000,
                       help="max voxels fitted per volume (0 disables subsampling)")
    group.add_argument("--subsample-seed", type=int, default=0, help="seed for voxel subsampling")


def _add_clip_options(parser):
    parser.add_argument("--clip-lo", type=float, default=1.0, help="low clip percentile")
    parser.add_argument("--clip-hi", type=float, default=99.0, help="high clip percentile")


def _em_config(args) -> EmConfig:
    cap = None if args.subsample_cap == 0 else args.subsample_cap
    return EmConfig(tol=args.tol, max_iter=args.max_iter,
                    subsample_cap=cap, subsample_seed=args.subsample_seed)


def _print_config(args) -> None:
    if not getattr(args, "print_config", False):
        return
    config = {k: v for k, v in vars(args).items() if k not in ("func", "print_config")}
    print(json.dumps({"command": config.pop("command"), **config}, sort_keys=True))


def cmd_fit(args) -> int:
    vol = read_volume(args.input)
    mask_vol = read_label_volume(args.mask) if args.mask else None
    mask = foreground_mask(vol, mask_vol)
    normalized, _ = clip_normalize(vol, mask, args.clip_lo, args.clip_hi)
    params = fit_em(normalized.data[mask], args.k, _em_config(args))
    Path(args.out).write_text(params.dumps() + "\n")
    return 0


def cmd_stats(args) -> int:
    directory = Path(args.input_dir)
    if not directory.is_dir():
        raise InputError(f"{directory} is not a directory")
    paths = sorted(directory.glob("*.nii")) + sorted(directory.glob("*.nii.gz"))
    paths = sorted(paths, key=lambda p: p.name)
    volumes = []
    for path in paths:
        try:
            volumes.append(read_volume(path))
        except InputError as exc:
            print(f"skipping {path}: {exc}", file=sys.stderr)
    if len(volumes) < 2:
        raise InsufficientDataError(f"found {len(volumes)} readable volumes in {directory}")
    stats = estimate_population(volumes, args.k, _em_config(args),
                                args.clip_lo, args.clip_hi)
    save_stats(stats, args.out)
    return 0


def cmd_augment(args) -> int:
    vol = read_volume(args.input)
    stats = load_stats(args.stats)
    for i in range(args.n):
        seed = args.seed + i
        out_vol, params, pert = aug.augment_volume(
            vol, stats, seed, _em_config(args),
            hard_assign=args.hard_assign,
            reject_order_inversion=args.reject_order_inversion,
            clip=not args.no_clip,
        )
        perturbed = aug.apply_perturbation(params, pert)
        write_volume(out_vol, f"{args.out_prefix}_{i}.nii")
        sidecar = aug.provenance_dict(seed, params, pert, perturbed)
        Path(f"{args.out_prefix}_{i}.json").write_text(json.dumps(sidecar, indent=2) + "\n")
    return 0


def cmd_hist(args) -> int:
    vol = read_volume(args.input)
    mask = foreground_mask(vol)
    if args.bins < 1:
        raise InputError("bins must be >= 1")
    counts, edges = np.histogram(vol.data[mask], bins=args.bins, range=(0.0, 1.0))
    centers = 0.5 * (edges[:-1] + edges[1:])
    lines = ["bin_center,count"]
    lines += [f"{float(c)!r},{int(n)}" for c, n in zip(centers, counts)]
    Path(args.out).write_text("\n".join(lines) + "\n")
    return 0


def cmd_metrics(args) -> int:
    pred = read_label_volume(args.pred)
    ref = read_label_volume(args.ref)
    labels = None
    if args.labels:
        labels = [int(tok) for tok in args.labels.split(",") if tok]
    report = met.overlap(pred, ref, labels)
    out = Path(args.out)
    if out.suffix == ".csv":
        out.write_text(report.to_csv())
    else:
        out.write_text(json.dumps(report.to_json_dict(), indent=2) + "\n")
    return 0


def cmd_phantom(args) -> int:
    spec = PhantomSpec.from_json_file(args.spec) if args.spec else PhantomSpec()
    spec = spec.with_seed(args.seed)
    vol, labels = generate_phantom(spec)
    write_volume(vol, args.out)
    if args.out_labels:
        write_label_volume(labels, args.out_labels)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gmmaug",
        description="Mixture-based intensity augmentation for skull-stripped brain MRI.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a mixture to one volume, write parameters JSON")
    p.add_argument("input", help="input .nii volume")
    p.add_argument("--mask", help="explicit foreground mask volume")
    p.add_argument("--k", type=int, default=3, help="number of components")
    p.add_argument("--out", required=True, help="output parameters JSON")
    _add_clip_options(p)
    _add_em_options(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("stats", help="estimate population spreads over a directory of volumes")
    p.add_argument("input_dir", help="directory scanned for *.nii / *.nii.gz (sorted by name)")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--out", required=True, help="output stats JSON")
    _add_clip_options(p)
    _add_em_options(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("augment", help="write n augmented copies with provenance sidecars")
    p.add_argument("input", help="input .nii volume")
    p.add_argument("--stats", required=True, help="population stats JSON")
    p.add_argument("--seed", type=int, required=True, help="base seed; draw i uses seed+i")
    p.add_argument("--n", type=int, default=1, help="number of augmentations")
    p.add_argument("--out-prefix", required=True, help="outputs <prefix>_<i>.nii and .json")
    p.add_argument("--hard-assign", action="store_true",
                   help="assign each voxel to its argmax component instead of blending")
    p.add_argument("--reject-order-inversion", action="store_true",
                   help="redraw perturbations that invert the component order")
    p.add_argument("--no-clip", action="store_true", help="skip clipping output to [0,1]")
    _add_em_options(p)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("hist", help="masked-intensity histogram as CSV")
    p.add_argument("input")
    p.add_argument("--bins", type=int, default=100, help="fixed-width bins over [0,1]")
    p.add_argument("--out", required=True, help="output CSV of bin_center,count")
    p.set_defaults(func=cmd_hist)

    p = sub.add_parser("metrics", help="overlap metrics between two label volumes")
    p.add_argument("pred", help="predicted labels volume")
    p.add_argument("ref", help="reference labels volume")
    p.add_argument("--labels", help="comma-separated labels (default: all nonzero present)")
    p.add_argument("--out", required=True, help="output report (.json or .csv)")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("phantom", help="generate a synthetic three-tissue phantom")
    p.add_argument("--spec", help="phantom spec JSON (defaults used when omitted)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output .nii volume")
    p.add_argument("--out-labels", help="optional ground-truth labels .nii")
    p.set_defaults(func=cmd_phantom)

    for sp in sub.choices.values():
        sp.add_argument("--print-config", action="store_true",
                        help="dump the resolved run configuration to stdout")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _print_config(args)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except InputError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"IoError: {exc}", file=sys.stderr)
        return 2


def run() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    run()
