"""Command-line entry point: analyze, factors, sample, synth, report.

Exit status: 0 on success, 2 for usage errors, 1 for bad input, 70 for
internal errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ._version import __version__
from .annotations import dataset_summary, load_dataset
from .errors import IrfsError
from .frequency import compute_frequencies
from .repeat_factor import (
    DEFAULT_THRESHOLD,
    Method,
    SamplerConfig,
    compute_repeat_factors,
    image_repeat_factors,
)
from .report import build_report, format_report
from .sampler import sample_epoch
from .synth import (
    Constant,
    ExplicitCounts,
    ExplicitInstances,
    Geometric,
    SynthSpec,
    Zipf,
    generate,
    write_dataset,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_USAGE = 2
EXIT_INTERNAL = 70


def _method(value: str) -> Method:
    try:
        return Method.parse(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _threshold(value: str) -> float:
    try:
        t = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid threshold {value!r}") from None
    if not t >= 0 or t == float("inf"):
        raise argparse.ArgumentTypeError(f"threshold must be finite and >= 0, got {value}")
    return t


def _nonneg_int(value: str) -> int:
    try:
        n = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {value!r}") from None
    if n < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {n}")
    return n


def _int_list(value: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in value.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}") from None


def _instances_law(value: str):
    kind, _, arg = value.partition(":")
    try:
        if kind == "constant":
            return Constant(int(arg or 1))
        if kind == "geometric":
            return Geometric(float(arg))
        if kind == "explicit":
            return ExplicitInstances(_int_list(arg))
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(
        f"invalid instance law {value!r}; use constant:K, geometric:P or explicit:K1,K2,..."
    )


def _provenance(digest: str, cfg: SamplerConfig | None = None, **extra) -> dict:
    out = {"tool": "irfs", "version": __version__, "source_digest": digest}
    if cfg is not None:
        out.update(cfg.to_dict())
    out.update(extra)
    return out


def _emit(text: str, output: str | None) -> None:
    if output is None or output == "-":
        sys.stdout.write(text)
    else:
        Path(output).write_text(text, encoding="utf-8", newline="\n")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _load(args):
    return load_dataset(args.input, strict=args.strict, streaming=args.streaming)


# subcommands ----------------------------------------------------------------


def cmd_analyze(args) -> int:
    ds = _load(args)
    ft = compute_frequencies(ds)
    if args.format == "csv":
        _emit(ft.to_csv(), args.output)
    else:
        doc = {
            **_provenance(ds.source_digest),
            "summary": dataset_summary(ds).to_dict(),
            **ft.to_json_dict(),
        }
        _emit(_dump(doc), args.output)
    return EXIT_OK


def cmd_factors(args) -> int:
    ds = _load(args)
    cfg = SamplerConfig(args.method, args.t)
    rft = compute_repeat_factors(compute_frequencies(ds), cfg)
    irt = image_repeat_factors(ds, rft, n_jobs=args.jobs)
    if args.format == "csv":
        _emit(rft.to_csv(), args.output)
        if args.output not in (None, "-"):
            out = Path(args.output)
            out.with_name(out.stem + ".images.csv").write_text(
                irt.to_csv(), encoding="utf-8", newline="\n"
            )
    else:
        doc = {
            **_provenance(ds.source_digest, cfg),
            "categories": rft.rows(),
            "images": irt.to_json_dict()["images"],
        }
        _emit(_dump(doc), args.output)
    return EXIT_OK


def cmd_sample(args) -> int:
    ds = _load(args)
    cfg = SamplerConfig(args.method, args.t)
    irt = image_repeat_factors(ds, compute_repeat_factors(compute_frequencies(ds), cfg), n_jobs=args.jobs)
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    epochs = list(range(args.start_epoch, args.start_epoch + args.epochs))
    ext = "json" if args.format == "json" else "txt"
    files = []
    # one epoch in memory at a time
    for e in epochs:
        sample = sample_epoch(irt, args.seed, e, n_jobs=args.jobs)
        name = f"epoch_{e:05d}.{ext}"
        text = sample.to_json() if ext == "json" else sample.to_text()
        (outdir / name).write_text(text, encoding="utf-8", newline="\n")
        files.append({"epoch_index": e, "file": name, "length": len(sample)})
    manifest = {**_provenance(ds.source_digest, cfg, seed=args.seed), "epochs": files}
    (outdir / "manifest.json").write_text(_dump(manifest), encoding="utf-8", newline="\n")
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.image_counts is not None:
        law = ExplicitCounts(args.image_counts)
        num_categories = args.num_categories or len(args.image_counts)
    else:
        law = Zipf(args.zipf)
        num_categories = args.num_categories
        if num_categories is None:
            raise IrfsError("--num-categories is required with --zipf")
    spec = SynthSpec(num_categories, args.num_images, law, args.instances, args.seed)
    ds = generate(spec)
    if args.output in (None, "-"):
        from .annotations import to_coco_bytes

        sys.stdout.write(to_coco_bytes(ds).decode("utf-8"))
    else:
        write_dataset(ds, args.output)
    return EXIT_OK


def cmd_report(args) -> int:
    ds = _load(args)
    methods = args.method or [Method.RFS, Method.IRFS_GEOMETRIC]
    thresholds = args.t or [DEFAULT_THRESHOLD]
    configs = [SamplerConfig(m, t) for m in methods for t in thresholds]
    report = build_report(ds, configs)
    if args.format == "json":
        _emit(report.to_json(), args.output)
    elif args.format == "csv":
        _emit(report.to_csv(), args.output)
    else:
        _emit(format_report(report), args.output)
    return EXIT_OK


# parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    methods = ", ".join(m.value for m in Method)
    parser = argparse.ArgumentParser(
        prog="irfs",
        description="Repeat factor sampling (RFS / IRFS) for long-tailed detection datasets.",
    )
    parser.add_argument("--version", action="version", version=f"irfs {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def dataset_args(p):
        p.add_argument("input", help="COCO/LVIS annotation JSON")
        p.add_argument(
            "--no-strict",
            dest="strict",
            action="store_false",
            help="drop annotations with dangling references instead of failing",
        )
        p.add_argument(
            "--stream",
            dest="streaming",
            action="store_const",
            const=True,
            default=None,
            help="force incremental parsing (default: automatic for large files)",
        )
        p.add_argument("-o", "--output", help="output path (default: stdout)")

    def config_args(p):
        p.add_argument("--method", type=_method, default=Method.IRFS_GEOMETRIC, help=methods)
        p.add_argument("--t", type=_threshold, default=DEFAULT_THRESHOLD, help="threshold (default 1e-3)")
        p.add_argument("--jobs", type=int, default=1, help="worker threads; output does not depend on it")

    p = sub.add_parser("analyze", help="per-category frequencies and buckets")
    dataset_args(p)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("factors", help="category and image repeat factors")
    dataset_args(p)
    config_args(p)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.set_defaults(func=cmd_factors)

    p = sub.add_parser("sample", help="write per-epoch sample lists")
    dataset_args(p)
    config_args(p)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--epochs", type=_nonneg_int, default=1, help="number of epochs")
    p.add_argument("--start-epoch", type=_nonneg_int, default=0)
    p.add_argument("--format", choices=["txt", "json"], default="txt")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("synth", help="generate a synthetic long-tailed dataset")
    p.add_argument("--num-images", type=int, required=True)
    p.add_argument("--num-categories", type=int)
    law = p.add_mutually_exclusive_group(required=True)
    law.add_argument("--zipf", type=float, metavar="EXPONENT")
    law.add_argument("--image-counts", type=_int_list, metavar="N1,N2,...")
    p.add_argument(
        "--instances",
        type=_instances_law,
        default=Constant(1),
        help="instances per occurrence: constant:K, geometric:P, explicit:K1,K2,...",
    )
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("-o", "--output", help="output path (default: stdout)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="balance report comparing configurations")
    dataset_args(p)
    p.add_argument("--method", type=_method, action="append", help=f"repeatable; {methods}")
    p.add_argument("--t", type=_threshold, action="append", help="repeatable threshold")
    p.add_argument("--format", choices=["text", "json", "csv"], default="text")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "sample" and not args.output:
        print("irfs sample: error: --output DIR is required", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (IrfsError, OSError, ValueError) as exc:
        print(f"irfs: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        print(f"irfs: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
