"""Command-line entry point: synth | train | match | symmetrize | eval."""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import logging
import sys

from . import evaluation, infer
from .geom import DisconnectedGraphError, ShapeFormatError, load_shape, normalize, read_map, save_shape, write_map
from .losses import MODES
from .model import load_checkpoint
from .train import ConfigError, DatasetIndex, TrainConfig, load_config, load_dataset, train, write_synthetic

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

FORMATS_HELP = """\
file formats:
  shapes       OFF, ascii PLY or OBJ (v/f records); triangles only. Vertex
               order is kept; shapes are centered and scaled to unit max norm
               before use.
  maps         plain text, one integer per line: line i holds the target
               vertex of source vertex i, 1-indexed (use --zero-indexed for
               0-indexed files). Symmetry maps are self-maps in the same form.
  config       INI-style key = value with sections [train], [loss], [arch].
  dataset      DIR/index.json listing shapes, their maps to the template and
               symmetry maps (written by `synth`).
  checkpoint   text header (version, architecture) followed by binary tensors.
  metrics      CSV: step, L_NN, L_comm, L_total, wall_ms.
  report       JSON summary; per-point errors in REPORT.errors.csv and the
               cumulative curve in REPORT.curve.csv.
"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _deterministic_context(flag: bool):
    if not flag:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=1)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="symmatch",
        description="Learned canonical embeddings for joint shape matching and self-symmetry detection.",
        epilog=FORMATS_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--deterministic", action="store_true", help="single-threaded numerics")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("synth", help="write a synthetic symmetric dataset", epilog=FORMATS_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    s.add_argument("--out", required=True)
    s.add_argument("--pairs", type=int, default=20)
    s.add_argument("--points", type=int, default=300)
    s.add_argument("--amplitude", type=float, default=0.2)
    s.add_argument("--seed", type=int, default=0)

    t = sub.add_parser("train", help="train an encoder", epilog=FORMATS_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    t.add_argument("--config", help="run config file; defaults apply when omitted")
    t.add_argument("--data", required=True, help="dataset directory or index.json")
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--mode", choices=MODES)
    t.add_argument("--log", help="metrics CSV (default: CKPT.metrics.csv)")
    t.add_argument("--seed", type=int)

    m = sub.add_parser("match", help="pairwise map by embedding nearest neighbours", epilog=FORMATS_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    m.add_argument("--ckpt", required=True)
    m.add_argument("--source", required=True)
    m.add_argument("--target", required=True)
    m.add_argument("--out", required=True)
    m.add_argument("--colors", help="write the source as PLY colored through the map")
    m.add_argument("--method", choices=infer.METHODS, default="exact")
    m.add_argument("--zero-indexed", action="store_true")

    y = sub.add_parser("symmetrize", help="self-symmetry map via the reflected shape", epilog=FORMATS_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    y.add_argument("--ckpt", required=True)
    y.add_argument("--shape", required=True)
    y.add_argument("--out", required=True)
    y.add_argument("--axis", type=int, choices=(0, 1, 2), default=0)
    y.add_argument("--method", choices=infer.METHODS, default="exact")
    y.add_argument("--zero-indexed", action="store_true")

    e = sub.add_parser("eval", help="average geodesic error x100", epilog=FORMATS_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    e.add_argument("--pred", help="predicted map (omit with --baseline)")
    e.add_argument("--gt", required=True)
    e.add_argument("--target", required=True, help="target mesh (or cloud, with --knn)")
    e.add_argument("--out", required=True)
    e.add_argument("--knn", type=int, default=evaluation.DEFAULT_KNN, help="k for meshless targets")
    e.add_argument("--baseline", choices=("random", "identity"), help="score a baseline map instead of --pred")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--zero-indexed", action="store_true")
    return p


def _load_normalized(path):
    shape, _, _ = normalize(load_shape(path))
    return shape


def cmd_synth(a) -> None:
    if a.pairs < 1 or a.points < 2 or a.points % 2 or a.amplitude < 0:
        raise UsageError("--pairs >= 1, --points even and >= 2, --amplitude >= 0 required")
    write_synthetic(a.out, a.pairs, a.points, a.amplitude, a.seed)
    print(f"wrote {a.pairs} pairs to {a.out}")


def cmd_train(a) -> None:
    cfg = load_config(a.config) if a.config else TrainConfig()
    if a.mode:
        cfg = cfg.with_mode(a.mode)
    if a.seed is not None:
        cfg = dataclasses.replace(cfg, seed=a.seed)
    ds = load_dataset(DatasetIndex.load(a.data), cfg)
    log_path = a.log or f"{a.out}.metrics.csv"
    result = train(ds, cfg, checkpoint_path=a.out, log_path=log_path)
    last = result.rows[-1] if result.rows else None
    msg = f"trained {len(result.rows)} steps"
    if last:
        msg += f"; final L_NN {last['L_NN']:.6g}, L_comm {last['L_comm']:.6g}"
    print(msg)


def cmd_match(a) -> None:
    params, _, _ = load_checkpoint(a.ckpt)
    X, Y = _load_normalized(a.source), _load_normalized(a.target)
    res = infer.match(params, X, Y, a.method)
    write_map(a.out, res.map, one_indexed=not a.zero_indexed)
    if a.colors:
        infer.write_color_transfer(a.colors, X, Y, res.map)
        save_shape(infer.reference_colors_path(a.colors), Y, "ply", colors=infer.coordinate_colors(Y))
    print(f"matched {len(X)} -> {len(Y)} points in {res.elapsed_ms:.1f} ms")


def cmd_symmetrize(a) -> None:
    params, _, _ = load_checkpoint(a.ckpt)
    X = _load_normalized(a.shape)
    res = infer.self_symmetry(params, X, a.axis, a.method)
    write_map(a.out, res.map, one_indexed=not a.zero_indexed)
    print(f"symmetry map for {len(X)} points in {res.elapsed_ms:.1f} ms")


def cmd_eval(a) -> None:
    if not a.pred and not a.baseline:
        raise UsageError("eval needs --pred or --baseline")
    target = load_shape(a.target)
    one = not a.zero_indexed
    gt = read_map(a.gt, one, target_size=len(target))
    if a.baseline:
        report = evaluation.random_baseline(
            gt, target, a.seed, a.knn, override="identity" if a.baseline == "identity" else None
        )
    else:
        pred = read_map(a.pred, one, target_size=len(target))
        report = evaluation.geodesic_error(pred, gt, target, a.knn)
    evaluation.write_report(a.out, report)
    print(f"mean geodesic error x100: {report.mean_geo_err_x100:.4f}")


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "match": cmd_match,
    "symmetrize": cmd_symmetrize,
    "eval": cmd_eval,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required")
    except UsageError as exc:
        print(f"symmatch: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        with _deterministic_context(args.deterministic):
            COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"symmatch {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ShapeFormatError, ConfigError, DisconnectedGraphError, FileNotFoundError, ValueError, IndexError) as exc:
        print(f"symmatch {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FloatingPointError as exc:
        print(f"symmatch {args.command}: numerical error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"symmatch {args.command}: io error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
