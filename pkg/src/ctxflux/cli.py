"""Context-flux skeleton tools: generate, perturb, recover and evaluate.

Every subcommand writes machine-readable JSON (or CSV) to stdout and
diagnostics to stderr. Exit codes: 0 success, 1 internal error, 2 usage or
input error. Subcommands that take one input file also accept a directory,
in which case the output must be a directory too and every matching file is
processed; failures are reported per file without stopping the batch.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .binflux import AofParams, skeletonize_binary
from .evaluation import DEFAULT_NUM_THRESHOLDS, DEFAULT_RHO, binary_report, pr_curve
from .fluxgen import DEFAULT_RADIUS, compute_context_flux, partition_regions
from .raster import (
    RasterFormatError,
    read_binary_map,
    read_flux,
    read_gray,
    write_binary_map,
    write_flux,
)
from .recover import RecoveryParams, confidence_map, recover_skeleton
from .synth import (
    NOISE_SUPPORTS,
    SHAPE_KINDS,
    PerturbSpec,
    make_shape,
    perturb_flux,
    random_shape_spec,
    sweep_context_radius,
    sweep_to_csv,
    sweep_to_dict,
)

log = logging.getLogger("ctxflux")

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE = 0, 1, 2
IMAGE_SUFFIXES = (".pgm", ".png")
FLUX_SUFFIXES = (".flx",)
THREADS_ENV = "CTXFLUX_THREADS"


class UsageError(Exception):
    pass


INPUT_ERRORS = (UsageError, FileNotFoundError, IsADirectoryError, PermissionError,
                RasterFormatError, ValueError)


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


def _write_text(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# -- argument validation ------------------------------------------------------


def _positive_int(name):
    def parse(value):
        try:
            v = int(value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be an integer, got {value!r}") from None
        if v < 1:
            raise argparse.ArgumentTypeError(f"{name} must be >= 1, got {v}")
        return v
    return parse


def _nonneg_int(name):
    def parse(value):
        try:
            v = int(value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be an integer, got {value!r}") from None
        if v < 0:
            raise argparse.ArgumentTypeError(f"{name} must be >= 0, got {v}")
        return v
    return parse


def _nonneg_float(name):
    def parse(value):
        try:
            v = float(value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number, got {value!r}") from None
        if not (v >= 0 and np.isfinite(v)):
            raise argparse.ArgumentTypeError(f"{name} must be finite and >= 0, got {value}")
        return v
    return parse


def _positive_float(name):
    def parse(value):
        v = _nonneg_float(name)(value)
        if v == 0:
            raise argparse.ArgumentTypeError(f"{name} must be > 0")
        return v
    return parse


def _negative_float(value):
    try:
        v = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tau must be a number, got {value!r}") from None
    if not v < 0:
        raise argparse.ArgumentTypeError(f"tau must be < 0, got {v}")
    return v


def _seed(value):
    v = _nonneg_int("seed")(value)
    if v >= 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _radii(value):
    try:
        radii = [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"radii must be comma-separated integers, got {value!r}") from None
    if not radii or any(r < 1 for r in radii):
        raise argparse.ArgumentTypeError("radii must be a non-empty list of integers >= 1")
    return radii


def _dims(value):
    try:
        w, h = (int(v) for v in value.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"dims must look like 300x200, got {value!r}") from None
    if w < 16 or h < 16:
        raise argparse.ArgumentTypeError("dims must be at least 16x16")
    return w, h


def _recovery_params(args) -> RecoveryParams:
    return RecoveryParams(lam=args.lam, k1=args.k1, k2=args.k2)


# -- batch plumbing -----------------------------------------------------------


def _thread_count(args) -> int:
    if args.threads:
        return args.threads
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer %s=%r", THREADS_ENV, env)
    return 1


def _list_inputs(directory: Path, suffixes) -> list[Path]:
    return sorted(p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in suffixes)


def _run_batch(pairs: list[tuple[str, Callable[[], dict]]], threads: int) -> int:
    """Run ``(name, job)`` pairs, emit a summary sorted by name."""
    def guarded(job):
        try:
            return True, job()
        except INPUT_ERRORS as exc:
            return False, str(exc)
        except Exception as exc:  # noqa: BLE001 - reported per file
            log.exception("internal error")
            return False, f"internal error: {exc}"

    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(lambda pair: guarded(pair[1]), pairs))
    files = []
    for (name, _), (ok, payload) in sorted(zip(pairs, results), key=lambda item: item[0][0]):
        if ok:
            files.append({"file": name, "ok": True, **payload})
        else:
            print(f"{name}: {payload}", file=sys.stderr)
            files.append({"file": name, "ok": False, "error": payload})
    failed = sum(not f["ok"] for f in files)
    _emit({"processed": len(files), "succeeded": len(files) - failed, "failed": failed, "files": files})
    return EXIT_USAGE if failed else EXIT_OK


def _map_dir(args, src: Path, dst: Path, suffixes, out_suffix: str, job) -> int:
    if not dst.exists():
        dst.mkdir(parents=True)
    if not dst.is_dir():
        raise UsageError(f"{dst} is not a directory")
    inputs = _list_inputs(src, suffixes)
    if not inputs:
        raise UsageError(f"no {'/'.join(suffixes)} files in {src}")
    pairs = [(p.name, (lambda p=p: job(p, dst / (p.stem + out_suffix)))) for p in inputs]
    return _run_batch(pairs, _thread_count(args))


# -- subcommands --------------------------------------------------------------


def _gen_flux_one(src: Path, dst: Path, r: int) -> dict:
    skeleton = read_binary_map(src)
    partition = partition_regions(skeleton, r)
    write_flux(compute_context_flux(skeleton, r), dst)
    return {"regions": partition.counts()}


def cmd_gen_flux(args) -> int:
    src, dst = Path(args.skeleton), Path(args.out)
    if src.is_dir():
        return _map_dir(args, src, dst, IMAGE_SUFFIXES, ".flx",
                        lambda s, d: _gen_flux_one(s, d, args.r))
    _emit(_gen_flux_one(src, dst, args.r))
    return EXIT_OK


def _recover_one(src: Path, dst: Path, params: RecoveryParams) -> dict:
    flux = read_flux(src)
    t0 = time.perf_counter()
    skeleton = recover_skeleton(flux, params)
    ms = 1000 * (time.perf_counter() - t0)
    write_binary_map(skeleton, dst)
    return {"pixels": int(skeleton.sum()), "recover_ms": ms}


def cmd_recover(args) -> int:
    params = _recovery_params(args)
    src, dst = Path(args.flux), Path(args.out)
    if src.is_dir():
        return _map_dir(args, src, dst, FLUX_SUFFIXES, ".pgm",
                        lambda s, d: _recover_one(s, d, params))
    _emit(_recover_one(src, dst, params))
    return EXIT_OK


def _skeletonize_one(src: Path, dst: Path, params: AofParams) -> dict:
    skeleton = skeletonize_binary(read_binary_map(src), params)
    write_binary_map(skeleton, dst)
    return {"pixels": int(skeleton.sum())}


def cmd_skeletonize(args) -> int:
    params = AofParams(tau=args.tau, min_object_area=args.min_area)
    src, dst = Path(args.mask), Path(args.out)
    if src.is_dir():
        return _map_dir(args, src, dst, IMAGE_SUFFIXES, ".pgm",
                        lambda s, d: _skeletonize_one(s, d, params))
    _emit(_skeletonize_one(src, dst, params))
    return EXIT_OK


def _perturb_one(src: Path, dst: Path, spec: PerturbSpec) -> dict:
    flux = perturb_flux(read_flux(src), spec)
    write_flux(flux, dst)
    return {"width": flux.shape[1], "height": flux.shape[0]}


def cmd_perturb(args) -> int:
    spec = PerturbSpec(sigma=args.sigma, patches=args.patches, patch_size=args.patch_size,
                       angle_jitter=args.angle_jitter, seed=args.seed, support=args.support)
    src, dst = Path(args.flux), Path(args.out)
    if src.is_dir():
        return _map_dir(args, src, dst, FLUX_SUFFIXES, ".flx",
                        lambda s, d: _perturb_one(s, d, spec))
    _emit(_perturb_one(src, dst, spec))
    return EXIT_OK


def _eval_one(pred_path: Path, gt_path: Path, args, conf_path: Path | None = None,
              flux_path: Path | None = None):
    pred = read_binary_map(pred_path)
    gt = read_binary_map(gt_path)
    if conf_path is not None:
        confidence = np.where(pred, read_gray(conf_path) / 255.0, 0.0)
        return pr_curve(confidence, gt, args.rho, args.thresholds)
    if flux_path is not None:
        return pr_curve(confidence_map(read_flux(flux_path), pred), gt, args.rho, args.thresholds)
    return binary_report(pred, gt, args.rho)


def _find_stem(directory: Path, stem: str, suffixes) -> Path:
    for suffix in suffixes:
        candidate = directory / (stem + suffix)
        if candidate.is_file():
            return candidate
    raise FileNotFoundError(f"no match for {stem!r} in {directory}")


def cmd_eval(args) -> int:
    pred, gt = Path(args.pred), Path(args.gt)
    conf = Path(args.confidence) if args.confidence else None
    flux = Path(args.flux) if args.flux else None
    if pred.is_dir():
        if not gt.is_dir():
            raise UsageError("batch eval needs a ground-truth directory")
        out_dir = Path(args.out) if args.out else None
        if out_dir:
            out_dir.mkdir(parents=True, exist_ok=True)

        def job(p: Path):
            report = _eval_one(
                p, _find_stem(gt, p.stem, IMAGE_SUFFIXES), args,
                _find_stem(conf, p.stem, IMAGE_SUFFIXES) if conf else None,
                _find_stem(flux, p.stem, FLUX_SUFFIXES) if flux else None,
            )
            if out_dir:
                if args.format == "csv":
                    (out_dir / (p.stem + ".csv")).write_text(report.to_csv())
                else:
                    (out_dir / (p.stem + ".json")).write_text(report.to_json())
            return {"best": report.to_dict()["best"]}

        inputs = _list_inputs(pred, IMAGE_SUFFIXES)
        if not inputs:
            raise UsageError(f"no image files in {pred}")
        return _run_batch([(p.name, (lambda p=p: job(p))) for p in inputs], _thread_count(args))

    report = _eval_one(pred, gt, args, conf, flux)
    if args.format == "csv":
        _write_text(report.to_csv(), args.out)
    else:
        if args.out:
            Path(args.out).write_text(report.to_json())
        _emit(report.to_dict())
    return EXIT_OK


def cmd_sweep(args) -> int:
    skeleton = read_binary_map(args.skeleton)
    rows = sweep_context_radius(skeleton, args.radii, _recovery_params(args), args.rho)
    if args.format == "csv":
        _write_text(sweep_to_csv(rows), args.out)
    else:
        if args.out:
            Path(args.out).write_text(json.dumps(sweep_to_dict(rows)))
        _emit(sweep_to_dict(rows))
    return EXIT_OK


def cmd_demo(args) -> int:
    width, height = args.dims
    spec = random_shape_spec(args.shape, width, height, args.seed)
    _, skeleton = make_shape(spec)
    flux = compute_context_flux(skeleton, args.r)
    noisy = perturb_flux(flux, PerturbSpec(sigma=args.sigma, seed=args.seed, support=args.support))
    params = _recovery_params(args)
    timings = []
    for _ in range(args.repeat):
        t0 = time.perf_counter()
        recovered = recover_skeleton(noisy, params)
        timings.append(1000 * (time.perf_counter() - t0))
    report = binary_report(recovered, skeleton, args.rho)
    pr = pr_curve(confidence_map(noisy, recovered), skeleton, args.rho)
    _emit({
        "shape": args.shape,
        "width": width,
        "height": height,
        "seed": args.seed,
        "sigma": args.sigma,
        "r": args.r,
        "skeleton_pixels": int(skeleton.sum()),
        "recovered_pixels": int(recovered.sum()),
        "precision": report.precision,
        "recall": report.recall,
        "f": report.f,
        "pr_best_f": pr.f,
        "pr_best_t": pr.best_threshold,
        "recover_ms": float(np.median(timings)),
        "recover_ms_runs": timings,
    })
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def _add_recovery_flags(p) -> None:
    p.add_argument("--lambda", dest="lam", type=_nonneg_float("lambda"), default=0.4,
                   help="flux magnitude threshold (default 0.4)")
    p.add_argument("--k1", type=_nonneg_int("k1"), default=3, help="dilation radius (default 3)")
    p.add_argument("--k2", type=_nonneg_int("k2"), default=4, help="erosion radius (default 4)")


def _add_eval_flags(p) -> None:
    p.add_argument("--rho", type=_positive_float("rho"), default=DEFAULT_RHO,
                   help="match tolerance as a fraction of the image diagonal (default 0.0075)")


def _add_batch_flags(p) -> None:
    p.add_argument("--threads", type=_positive_int("threads"), default=None,
                   help=f"worker threads for directory input (default ${THREADS_ENV} or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctxflux", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-flux", help="ground-truth context flux from a skeleton image")
    p.add_argument("skeleton")
    p.add_argument("out")
    p.add_argument("--r", type=_positive_int("r"), default=DEFAULT_RADIUS,
                   help="context radius in pixels (default 7)")
    _add_batch_flags(p)
    p.set_defaults(func=cmd_gen_flux)

    p = sub.add_parser("recover", help="recover a skeleton from a flux file")
    p.add_argument("flux")
    p.add_argument("out")
    _add_recovery_flags(p)
    _add_batch_flags(p)
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("skeletonize", help="flux skeleton of a binary mask")
    p.add_argument("mask")
    p.add_argument("out")
    p.add_argument("--tau", type=_negative_float, default=-0.4,
                   help="average outward flux threshold, < 0 (default -0.4)")
    p.add_argument("--min-area", type=_positive_int("min-area"), default=9,
                   help="drop objects smaller than this many pixels (default 9)")
    _add_batch_flags(p)
    p.set_defaults(func=cmd_skeletonize)

    p = sub.add_parser("perturb", help="add seeded noise to a flux file")
    p.add_argument("flux")
    p.add_argument("out")
    p.add_argument("--sigma", type=_nonneg_float("sigma"), default=0.0)
    p.add_argument("--angle-jitter", type=_nonneg_float("angle-jitter"), default=0.0,
                   help="std of per-vector rotation, degrees")
    p.add_argument("--patches", type=_nonneg_int("patches"), default=0)
    p.add_argument("--patch-size", type=_positive_int("patch-size"), default=5)
    p.add_argument("--support", choices=NOISE_SUPPORTS, default="all",
                   help="pixels that receive component noise (default all)")
    p.add_argument("--seed", type=_seed, default=0)
    _add_batch_flags(p)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("eval", help="precision/recall/F of a skeleton against ground truth")
    p.add_argument("pred")
    p.add_argument("gt")
    conf = p.add_mutually_exclusive_group()
    conf.add_argument("--confidence", help="8-bit confidence image (value/255)")
    conf.add_argument("--flux", help="flux file; confidence = 1 - min(1, |flux|) on pred")
    _add_eval_flags(p)
    p.add_argument("--thresholds", type=_positive_int("thresholds"), default=DEFAULT_NUM_THRESHOLDS)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", help="also write the report here (JSON or CSV)")
    _add_batch_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="round-trip F-measure across context radii")
    p.add_argument("skeleton")
    p.add_argument("--radii", type=_radii, default=[3, 5, 7, 9, 11])
    _add_recovery_flags(p)
    _add_eval_flags(p)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("demo", help="synthetic shape -> flux -> perturb -> recover -> eval")
    p.add_argument("--dims", type=_dims, default=(300, 200), help="WIDTHxHEIGHT (default 300x200)")
    p.add_argument("--shape", choices=SHAPE_KINDS, default="polyline")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--sigma", type=_nonneg_float("sigma"), default=0.0)
    p.add_argument("--support", choices=NOISE_SUPPORTS, default="all")
    p.add_argument("--r", type=_positive_int("r"), default=DEFAULT_RADIUS)
    p.add_argument("--repeat", type=_positive_int("repeat"), default=5,
                   help="time recovery this many times and report the median")
    _add_recovery_flags(p)
    _add_eval_flags(p)
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        print(f"ctxflux {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        log.debug("traceback", exc_info=True)
        print(f"ctxflux {args.command}: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
