"""``fuzzmat`` command line.

Exit status 0 on success, 2 on usage errors, 1 on runtime errors.
"""
from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import __version__
from .features import (DEFAULT_FAMILY, FEATURE_FAMILIES, MATRIX_KINDS, FeatureVector,
                       PipelineConfig, build_matrix, feature_pipeline, parse_pipeline)
from .fuzzy import AGGREGATIONS, MEMBERSHIP_KINDS, MembershipFunction, fuzzy_szm
from .harness import (CLASSIFIERS, MLPConfig, cross_validate, extract_feature_table,
                      load_manifest, parse_scheme, render_report)
from .image import (GrayImage, QuantizationSpec, attach_mask, format_pgm, load_image,
                    quantize)
from .matrices import szm
from .zones import label_flat_zones

QUANT_CHOICES = ("linear", "log", "equal", "kmeans")


def _quant(text):
    method, _, n = text.partition(":")
    if method not in QUANT_CHOICES:
        raise argparse.ArgumentTypeError(
            f"invalid quantization {text!r}: method must be one of {', '.join(QUANT_CHOICES)}")
    try:
        return QuantizationSpec.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _offset(text):
    try:
        dr, dc = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"offset must look like DR,DC, got {text!r}") from None
    if dr == 0 and dc == 0:
        raise argparse.ArgumentTypeError("offset 0,0 is not allowed")
    return f"{dr},{dc}"


def _radius(text):
    try:
        r = float(text)
    except ValueError:
        r = -1.0
    if not r >= 0:
        raise argparse.ArgumentTypeError(f"radius must be a nonnegative number, got {text!r}")
    return r


def _radii(text):
    return [_radius(x) for x in text.split(",") if x.strip()]


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_image_opts(p, quant_required=False):
    p.add_argument("--mask", help="PGM mask; nonzero pixels are inside")
    p.add_argument("--quant", type=_quant, metavar="{linear|log|equal|kmeans}:N",
                   required=quant_required, help="quantize before computing")
    p.add_argument("--out", help="write output here instead of stdout")


def _add_matrix_opts(p, required=True):
    p.add_argument("--kind", choices=MATRIX_KINDS, required=required)
    p.add_argument("--offset", type=_offset, default="0,1", metavar="DR,DC")
    p.add_argument("--dir", type=int, choices=(0, 45, 90, 135), default=0)
    p.add_argument("--conn", type=int, choices=(4, 8), default=8)
    p.add_argument("--beta", choices=MEMBERSHIP_KINDS, default="linear")
    p.add_argument("--radius", type=_radius, default=2.0, metavar="R")
    p.add_argument("--agg", choices=AGGREGATIONS, default="mean")
    p.add_argument("--multi", type=_radii, metavar="R1,R2,...",
                   help="radii for multifuzzyszm")
    p.add_argument("--levels", type=_int_list, metavar="N1,N2,...", help="mszm quantizations")
    p.add_argument("--weights", type=_float_list, metavar="W1,W2,...", help="mszm weights")
    p.add_argument("--size-bins", choices=("identity", "log2"), default="identity")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fuzzmat",
        description="Gray-level statistical texture matrices, fuzzy variants and features.",
    )
    parser.add_argument("--version", action="version", version=f"fuzzmat {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("info", help="image dimensions and gray range")
    p.add_argument("image")
    p.add_argument("--mask")

    p = sub.add_parser("quantize", help="reduce gray levels and write a PGM")
    p.add_argument("image")
    _add_image_opts(p, quant_required=True)
    p.add_argument("--ascii", action="store_true", help="write P2 instead of P5")

    p = sub.add_parser("flatzones", help="one CSV row per flat zone")
    p.add_argument("image")
    p.add_argument("--conn", type=int, choices=(4, 8), default=8)
    _add_image_opts(p)

    p = sub.add_parser("matrix", help="compute one statistical matrix as CSV")
    p.add_argument("image")
    _add_matrix_opts(p)
    _add_image_opts(p)

    p = sub.add_parser("features", help="feature CSV, one row per image")
    p.add_argument("images", nargs="+")
    _add_matrix_opts(p, required=False)
    _add_image_opts(p)
    p.add_argument("--family", choices=tuple(FEATURE_FAMILIES))
    p.add_argument("--pipeline", action="append", default=[],
                   help='pipeline description, e.g. "linear:8; szm conn=8; size_zone"')

    for name, text in (("extract", "feature table for a manifest"),
                       ("evaluate", "cross-validated classification report")):
        p = sub.add_parser(name, help=text)
        p.add_argument("manifest")
        p.add_argument("--pipeline", action="append", required=True)
        p.add_argument("--out")
        if name == "evaluate":
            p.add_argument("--scheme", default="logo", help="logo | kfold:K[:SEED]")
            p.add_argument("--classifier", choices=tuple(CLASSIFIERS), default="mlp")
            p.add_argument("--hidden", type=int, default=11)
            p.add_argument("--epochs", type=int, default=500)
            p.add_argument("--lr", type=float, default=0.01)
            p.add_argument("--momentum", type=float, default=0.9)
            p.add_argument("--seed", type=int, default=0)
            p.add_argument("--no-class-weighting", action="store_true")
            p.add_argument("--no-adaptive", action="store_true")
            p.add_argument("--json", help="also write the report as JSON to this path")

    p = sub.add_parser("bench", help="time szm against fuzzy szm on noise images")
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--levels", type=int, default=8)
    p.add_argument("--beta", choices=MEMBERSHIP_KINDS, default="linear")
    p.add_argument("--radius", type=_radius, default=2.0)
    p.add_argument("--conn", type=int, choices=(4, 8), default=8)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _emit(text, out, binary=False):
    if out:
        with open(out, "wb" if binary else "w") as fh:
            fh.write(text)
    elif binary:
        sys.stdout.buffer.write(text)
    else:
        sys.stdout.write(text)


def _open(path, mask=None, quant=None) -> GrayImage:
    img = load_image(path)
    if mask:
        img = attach_mask(img, load_image(mask))
    if quant is not None:
        img = quantize(img, quant)
    return img


def _matrix_params(args):
    params = {"offset": args.offset, "dir": args.dir, "conn": args.conn, "beta": args.beta,
              "radius": args.radius, "agg": args.agg, "size_bins": args.size_bins}
    if args.multi:
        params["multi"] = args.multi
    if args.levels:
        params["levels"] = args.levels
    if args.weights:
        params["weights"] = args.weights
    return params


def _relevant(kind, params):
    """Only the parameters that change the matrix of ``kind`` (keeps pipeline names short)."""
    keys = {
        "com": ("offset",), "dh": ("offset",), "sh": ("offset",), "comavg": (),
        "rlm": ("dir",), "szm": ("conn", "size_bins"), "mszm": ("conn", "levels", "weights"),
        "fcom": ("offset", "beta", "radius"), "frlm": ("dir", "beta", "radius"),
        "fszm": ("conn", "beta", "radius"), "fuzzyrlm": ("dir", "beta", "radius", "agg"),
        "fuzzyszm": ("conn", "beta", "radius", "agg", "size_bins"),
        "multifuzzyszm": ("conn", "beta", "multi", "agg"),
    }[kind]
    out = {}
    for k in keys:
        if k in params:
            v = params[k]
            out[k] = ",".join(f"{x:g}" if isinstance(x, float) else str(x) for x in v) \
                if isinstance(v, list) else v
    if out.get("size_bins") == "identity":
        del out["size_bins"]
    return out


def cmd_info(args):
    img = load_image(args.image)
    if args.mask:
        img = attach_mask(img, load_image(args.mask))
    vals = img.inside_values()
    lines = [f"width: {img.width}", f"height: {img.height}", f"levels: {img.levels}",
             f"inside: {img.n_inside}"]
    if vals.size:
        lines += [f"min: {int(vals.min())}", f"max: {int(vals.max())}",
                  f"distinct: {np.unique(vals).size}"]
    print("\n".join(lines))


def cmd_quantize(args):
    img = _open(args.image, args.mask, args.quant)
    _emit(format_pgm(img, binary=not args.ascii), args.out, binary=True)


def cmd_flatzones(args):
    img = _open(args.image, args.mask, args.quant)
    rows = ["gray,size,row,col"]
    for z in label_flat_zones(img, args.conn):
        rows.append(f"{z.gray},{z.size},{z.first[0]},{z.first[1]}")
    _emit("\n".join(rows) + "\n", args.out)


def cmd_matrix(args):
    img = _open(args.image, args.mask, args.quant)
    if args.kind == "mszm" and not args.levels:
        raise ValueError("--kind mszm needs --levels N1,N2,...")
    m = build_matrix(img, args.kind, **_matrix_params(args))
    _emit(m.to_csv(), args.out)


def _cli_pipelines(args):
    pipelines = [parse_pipeline(p) for p in args.pipeline]
    if args.kind:
        if args.kind not in DEFAULT_FAMILY and args.family is None:
            raise ValueError(f"--kind {args.kind} has no feature family")
        pipelines.append(PipelineConfig(args.kind, _relevant(args.kind, _matrix_params(args)),
                                        args.quant, args.family))
    if not pipelines:
        raise ValueError("give --kind or at least one --pipeline")
    return pipelines


def cmd_features(args):
    pipelines = _cli_pipelines(args)
    rows = []
    names = None
    for path in args.images:
        img = _open(path, args.mask)
        vec = FeatureVector.concat(feature_pipeline(img, p) for p in pipelines)
        names = vec.names
        rows.append(",".join([path] + [repr(float(v)) for v in vec.values]))
    _emit("\n".join([",".join(("path",) + names)] + rows) + "\n", args.out)


def cmd_extract(args):
    table = extract_feature_table(load_manifest(args.manifest), args.pipeline)
    _emit(table.to_csv(), args.out)


def cmd_evaluate(args):
    try:
        scheme = parse_scheme(args.scheme)
        config = MLPConfig(hidden_units=args.hidden, epochs=args.epochs,
                           learning_rate=args.lr, momentum=args.momentum, seed=args.seed,
                           class_weighting=not args.no_class_weighting,
                           adaptive=not args.no_adaptive)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    table = extract_feature_table(load_manifest(args.manifest), args.pipeline)
    report = cross_validate(table, config, scheme, args.classifier)
    report.config["pipelines"] = [str(parse_pipeline(p)) for p in args.pipeline]
    _emit(render_report(report), args.out)
    if args.json:
        _emit(report.to_json(), args.json)


def cmd_bench(args):
    rng = np.random.default_rng(args.seed)
    img = GrayImage(rng.integers(0, args.levels, size=(args.size, args.size)), args.levels)
    fn = MembershipFunction(args.beta, args.radius)
    szm(img, args.conn)
    fuzzy_szm(img, args.conn, fn)  # warm-up (JIT compile)

    def best(f):
        times = []
        for _ in range(max(args.repeat, 1)):
            t0 = time.perf_counter()
            f()
            times.append(time.perf_counter() - t0)
        return min(times)

    t_crisp = best(lambda: szm(img, args.conn))
    t_fuzzy = best(lambda: fuzzy_szm(img, args.conn, fn))
    print(f"image: {args.size}x{args.size}, levels={args.levels}, beta={fn}, conn={args.conn}")
    print(f"szm: {t_crisp * 1e3:.3f} ms")
    print(f"fuzzy_szm: {t_fuzzy * 1e3:.3f} ms")
    print(f"ratio: {t_fuzzy / t_crisp:.2f}")


class UsageError(Exception):
    pass


COMMANDS = {
    "info": cmd_info, "quantize": cmd_quantize, "flatzones": cmd_flatzones,
    "matrix": cmd_matrix, "features": cmd_features, "extract": cmd_extract,
    "evaluate": cmd_evaluate, "bench": cmd_bench,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"fuzzmat {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError, KeyError) as exc:
        print(f"fuzzmat {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
