"""``pvroof`` command line: build-lut, fit-capacity, extract, benchmark.

Exit codes: 0 success, 1 configuration or usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .benchmark import QUANTITIES, benchmark_report, read_values_csv
from .capacity import fit_clustered, fit_linear, save_model
from .exceptions import ConfigError, PVRoofError
from .geometry import parse_polygons
from .lut import Bounds, build_lut, save_lut
from .pipeline import ExtractionConfig, extract_all, load_resources, validate_config
from .registry import read_aux_csv

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 1, 2
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _grid(text):
    try:
        k, l = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected KxL, got {text!r}") from None
    if k < 1 or l < 1:
        raise argparse.ArgumentTypeError("grid dimensions must be >= 1")
    return k, l


def _bounds(text):
    try:
        w, s, e, n = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected W,S,E,N, got {text!r}") from None
    if not (w < e and s < n):
        raise argparse.ArgumentTypeError("bounds need W < E and S < N")
    return Bounds(w, s, e, n)


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _write(path, text):
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def cmd_extract(args):
    try:
        config = validate_config(ExtractionConfig.load(args.config))
    except (FileNotFoundError, IsADirectoryError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except TypeError as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
    with open(args.polygons, "rb") as fh:
        polygons = parse_polygons(fh.read(), keep_invalid=True)
    resources = load_resources(config)
    registry = extract_all(polygons, config, resources, workers=args.workers)
    _write(args.out, registry.to_csv() if args.format == "csv" else registry.to_geojson())
    print(registry.summary_line(), file=sys.stderr)
    return EXIT_OK if registry.summary["error"] == 0 else EXIT_DATA


def cmd_build_lut(args):
    aux = read_aux_csv(args.aux)
    k, l = args.grid
    lut = build_lut(aux, k, l, args.categories, bounds=args.bounds)
    text = save_lut(lut)
    _write(args.out, text)
    total = lut.fill_mask.size
    observed = int(lut.fill_mask.sum())
    print(f"cells={total} observed={observed} interpolated={total - observed}", file=sys.stderr)
    if lut.fallback_categories:
        print(f"categories without observations: {list(lut.fallback_categories)}", file=sys.stderr)
    return EXIT_OK


def cmd_fit_capacity(args):
    aux = read_aux_csv(args.aux, require_kwp=True)
    model = fit_linear(aux) if args.kind == "linear" else fit_clustered(aux, args.clusters)
    _write(args.out, save_model(model))
    return EXIT_OK


def cmd_benchmark(args):
    pred = read_values_csv(args.pred)
    truth = read_values_csv(args.truth)
    missing = [i for i in truth if i not in pred] + [i for i in pred if i not in truth]
    if missing:
        raise _DataError(f"id mismatch between files; first missing ids: {', '.join(missing[:5])}")
    ids = list(truth)
    report = benchmark_report([(args.name, [pred[i] for i in ids], [truth[i] for i in ids])], args.quantity)
    sys.stdout.write(report.to_csv() if args.format == "csv" else report.to_text())
    return EXIT_OK


class _DataError(PVRoofError):
    pass


def build_parser():
    p = _Parser(prog="pvroof", description="Rooftop PV characteristics from polygons.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("extract", help="extract characteristics for every polygon")
    e.add_argument("--polygons", required=True, help="GeoJSON FeatureCollection")
    e.add_argument("--config", required=True, help="extraction config JSON")
    e.add_argument("--out", required=True, help="output path, '-' for stdout")
    e.add_argument("--format", choices=("geojson", "csv"), default="geojson")
    e.add_argument("--workers", type=_positive, default=1)
    e.set_defaults(func=cmd_extract)

    b = sub.add_parser("build-lut", help="build a tilt lookup table from an auxiliary registry")
    b.add_argument("--aux", required=True, help="registry CSV")
    b.add_argument("--grid", type=_grid, default=(50, 50), help="KxL cells (default 50x50)")
    b.add_argument("--categories", type=_positive, default=4, help="surface categories (default 4)")
    b.add_argument("--bounds", type=_bounds, default=None, help="W,S,E,N (default: registry extent)")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_build_lut)

    f = sub.add_parser("fit-capacity", help="fit a surface-to-capacity model")
    f.add_argument("--aux", required=True, help="registry CSV with a kwp column")
    f.add_argument("--kind", choices=("linear", "clustered"), default="clustered")
    f.add_argument("--clusters", type=_positive, default=4)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit_capacity)

    m = sub.add_parser("benchmark", help="compare predictions with ground truth")
    m.add_argument("--pred", required=True, help="id,value CSV")
    m.add_argument("--truth", required=True, help="id,value CSV")
    m.add_argument("--quantity", choices=QUANTITIES, required=True)
    m.add_argument("--name", default="method", help="row label")
    m.add_argument("--format", choices=("text", "csv"), default="text")
    m.set_defaults(func=cmd_benchmark)
    return p


def _configure_logging():
    name = os.environ.get("PVROOF_LOG", "warn").lower()
    logging.basicConfig(level=LOG_LEVELS.get(name, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def main(argv=None):
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PVRoofError, ValueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
