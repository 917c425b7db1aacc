"""Command-line front end.

Thin wiring from files to library calls: convert between the text and binary
score formats, print corpus statistics, evaluate scores against a key,
train/apply calibration and fusion models, emit DET and Bayes error-rate
plots, and run a synthetic benchmark.

Exit codes: 0 success, 1 usage error, 2 data error (malformed files,
mismatched inputs). Numeric output uses 17 significant digits so values
printed here compare exactly against the corresponding library calls.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import io as dio
from .errors import DetscoreError
from .fusion import (
    FusionModel,
    PavCalibrationMap,
    TrainingConfig,
    apply_pav_calibration,
    fuse_matrices,
    model_from_text,
    model_to_text,
    stack_for_key,
    train_calibration,
    train_fusion,
    train_pav_calibration,
    train_quality_fusion,
)
from .metrics import (
    CostParams,
    actual_bayes_error,
    cllr,
    default_x_grid,
    dr30_markers,
    effective_prior,
    fast_error_rate_sweep,
    min_bayes_error,
    min_cllr,
)
from .plots import SvgOptions, det_curve, emit_csv, nber_curve, render_svg
from .rocch import pav_llrs, prbep, rocch, rocch_eer
from .synthetic import gaussian_scores
from .trials import LabeledScores, ScoreMatrix, TrialKey, align_scores_to_key

__all__ = ["main"]


class _DataError(Exception):
    """File-level problem; message already carries the file context."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors by default; the convention here
    # reserves 2 for data errors.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _fmt(v) -> str:
    return format(float(v), ".17g")


def _read_bytes(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise _DataError(f"{path}: {exc}") from exc


def _wrap_parse(path: str, fn, *args):
    try:
        return fn(*args)
    except DetscoreError as exc:
        raise _DataError(f"{path}: {exc}") from exc


def _read_scores(path: str) -> ScoreMatrix:
    data = _read_bytes(path)
    if dio.sniff_binary(data):
        return _wrap_parse(path, dio.decode_scores, data)
    return _wrap_parse(path, dio.parse_text_scores, _decode_text(path, data))


def _read_key(path: str) -> TrialKey:
    data = _read_bytes(path)
    if dio.sniff_binary(data):
        return _wrap_parse(path, dio.decode_key, data)
    return _wrap_parse(path, dio.parse_text_key, _decode_text(path, data))


def _read_quality(path: Optional[str]):
    if path is None:
        return None
    return _wrap_parse(path, dio.parse_text_quality, _decode_text(path, _read_bytes(path)))


def _decode_text(path: str, data: bytes) -> str:
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise _DataError(f"{path}: not valid UTF-8: {exc}") from exc


def _write_bytes(path: str, data: bytes) -> None:
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise _DataError(f"{path}: {exc}") from exc


def _write_scores(matrix: ScoreMatrix, path: str, binary: bool) -> None:
    if binary:
        _write_bytes(path, dio.encode_scores(matrix))
    else:
        _write_bytes(path, dio.emit_text_scores(matrix).encode("utf-8"))


def _detect_text_kind(text: str) -> str:
    for line in text.splitlines():
        if not line.strip():
            continue
        payload = line.rstrip("\r").split("\t")[-1]
        return "key" if payload in ("target", "nontarget") else "scores"
    raise _DataError("empty text file, cannot detect kind")


def _aligned(scores_path: str, key_path: str) -> LabeledScores:
    scores = _read_scores(scores_path)
    key = _read_key(key_path)
    labeled, n_missing = align_scores_to_key(scores, key)
    if n_missing:
        print(f"warning: {n_missing} labeled trials have no score", file=sys.stderr)
    return labeled


# ---------------------------------------------------------------- convert


def _cmd_convert(args) -> int:
    data = _read_bytes(args.input)
    kind = args.kind
    if dio.sniff_binary(data):
        obj = _wrap_parse(
            args.input,
            dio.decode_key if kind == "key" else dio.decode_scores if kind == "scores" else dio.decode_any,
            data,
        )
    else:
        text = _decode_text(args.input, data)
        if kind == "auto":
            kind = _detect_text_kind(text)
        parse = dio.parse_text_key if kind == "key" else dio.parse_text_scores
        obj = _wrap_parse(args.input, parse, text)
    if isinstance(obj, TrialKey):
        out = dio.encode_key(obj) if args.to == "binary" else dio.emit_text_key(obj).encode("utf-8")
    else:
        out = dio.encode_scores(obj) if args.to == "binary" else dio.emit_text_scores(obj).encode("utf-8")
    _write_bytes(args.output, out)
    return 0


# ------------------------------------------------------------------ stats


def _cmd_stats(args) -> int:
    data = _read_bytes(args.input)
    if dio.sniff_binary(data):
        obj = _wrap_parse(args.input, dio.decode_any, data)
    else:
        text = _decode_text(args.input, data)
        kind = args.kind if args.kind != "auto" else _detect_text_kind(text)
        parse = dio.parse_text_key if kind == "key" else dio.parse_text_scores
        obj = _wrap_parse(args.input, parse, text)
    print(f"models\t{len(obj.model_names)}")
    print(f"segments\t{len(obj.segment_names)}")
    if isinstance(obj, TrialKey):
        print(f"targets\t{int(obj.n_targets)}")
        print(f"nontargets\t{int(obj.n_nontargets)}")
    else:
        n_valid = int(np.count_nonzero(obj.valid))
        print(f"scored_trials\t{n_valid}")
        if n_valid:
            vals = obj.score[obj.valid]
            print(f"score_min\t{_fmt(vals.min())}")
            print(f"score_max\t{_fmt(vals.max())}")
    return 0


# ------------------------------------------------------------------- eval


def _cmd_eval(args) -> int:
    labeled = _aligned(args.scores, args.key)
    if args.prior is not None:
        costs = CostParams(args.prior, args.cmiss, args.cfa)
        pi = effective_prior(costs)
        cost_scale = args.prior * args.cmiss + (1.0 - args.prior) * args.cfa
        print(f"prior\t{_fmt(args.prior)}")
        print(f"c_miss\t{_fmt(args.cmiss)}")
        print(f"c_fa\t{_fmt(args.cfa)}")
    else:
        pi = args.ptar
        cost_scale = 1.0
    print(f"n_targets\t{labeled.n_tar}")
    print(f"n_nontargets\t{labeled.n_non}")
    print(f"effective_prior\t{_fmt(pi)}")
    curve = rocch(labeled)
    mbe = min_bayes_error(curve, pi)
    if args.llr:
        abe = actual_bayes_error(labeled, pi)
        print(f"act_dcf\t{_fmt(cost_scale * abe.raw)}")
        print(f"act_dcf_norm\t{_fmt(abe.normalized)}")
    print(f"min_dcf\t{_fmt(cost_scale * mbe.raw)}")
    print(f"min_dcf_norm\t{_fmt(mbe.normalized)}")
    print(f"cllr\t{_fmt(cllr(labeled))}")
    print(f"min_cllr\t{_fmt(min_cllr(labeled))}")
    print(f"rocch_eer\t{_fmt(rocch_eer(curve))}")
    print(f"prbep\t{_fmt(prbep(labeled))}")
    markers = dr30_markers(labeled, default_x_grid())
    for name, value in (("x_miss30", markers.x_miss30), ("x_fa30", markers.x_fa30)):
        print(f"{name}\t{'never' if value is None else _fmt(value)}")
    return 0


# -------------------------------------------------------------- calibrate


def _cmd_calibrate(args) -> int:
    if args.apply is not None and args.scores_out is None:
        raise _DataError("--apply requires --scores-out")
    dev = _aligned(args.dev_scores, args.dev_key)
    if args.method == "affine":
        model = train_calibration(dev, TrainingConfig(ptar=args.ptar))
    else:
        model = train_pav_calibration(dev, TrainingConfig(llr_clip=args.clip))
    if args.model_out is not None:
        _write_bytes(args.model_out, model_to_text(model).encode("utf-8"))
    if args.apply is not None:
        matrix = _read_scores(args.apply)
        if isinstance(model, PavCalibrationMap):
            llr = np.where(matrix.valid, apply_pav_calibration(model, np.where(matrix.valid, matrix.score, 0.0)), 0.0)
            out = ScoreMatrix(matrix.model_names, matrix.segment_names, matrix.valid, llr)
        else:
            out = fuse_matrices(model, [matrix])
        _write_scores(out, args.scores_out, args.binary)
    return 0


# ------------------------------------------------------------------- fuse


def _split_paths(spec: str) -> list[str]:
    parts = [p for p in spec.split(",") if p]
    if not parts:
        raise _DataError("expected a comma-separated list of score files")
    return parts


def _cmd_fuse(args) -> int:
    if args.apply is not None and args.scores_out is None:
        raise _DataError("--apply requires --scores-out")
    dev_paths = _split_paths(args.dev_scores)
    matrices = [_read_scores(p) for p in dev_paths]
    key = _read_key(args.dev_key)
    qm = _read_quality(args.quality_models)
    qs = _read_quality(args.quality_segments)
    dev, quality, n_missing = stack_for_key(matrices, key, qm, qs)
    if n_missing:
        print(f"warning: {n_missing} labeled trials not scored by every system", file=sys.stderr)
    cfg = TrainingConfig(ptar=args.ptar, ridge=args.ridge)
    if quality is not None:
        model = train_quality_fusion(dev, quality, cfg)
    else:
        model = train_fusion(dev, cfg)
    if args.model_out is not None:
        _write_bytes(args.model_out, model_to_text(model).encode("utf-8"))
    if args.apply is not None:
        eval_mats = [_read_scores(p) for p in _split_paths(args.apply)]
        fused = fuse_matrices(model, eval_mats, qm, qs)
        _write_scores(fused, args.scores_out, args.binary)
    return 0


# ------------------------------------------------------------------ plots


def _require_output(args) -> None:
    if args.svg is None and args.csv is None:
        raise _DataError("nothing to do: pass --svg and/or --csv")


def _cmd_plot_det(args) -> int:
    _require_output(args)
    labeled = _aligned(args.scores, args.key)
    curve = det_curve(labeled, style=args.style, dr30=not args.no_dr30)
    if args.csv is not None:
        _write_bytes(args.csv, emit_csv(curve).encode("utf-8"))
    if args.svg is not None:
        _write_bytes(args.svg, render_svg(curve, SvgOptions(title=args.title)))
    return 0


def _cmd_plot_nber(args) -> int:
    _require_output(args)
    labeled = _aligned(args.scores, args.key)
    grid = np.linspace(args.xmin, args.xmax, args.points)
    plot = nber_curve(labeled, grid, include_min=not args.no_min, opoints=args.opoint)
    if args.csv is not None:
        _write_bytes(args.csv, emit_csv(plot).encode("utf-8"))
    if args.svg is not None:
        _write_bytes(args.svg, render_svg(plot, SvgOptions(title=args.title)))
    return 0


# ------------------------------------------------------------------ bench


def _cmd_bench(args) -> int:
    labeled = gaussian_scores(args.n_tar, args.n_non, seed=args.seed)
    grid = default_x_grid()

    t0 = time.perf_counter()
    sweep = fast_error_rate_sweep(labeled, -grid)
    t_sweep = time.perf_counter() - t0

    t0 = time.perf_counter()
    tar_llr, non_llr = pav_llrs(labeled)
    t_pav = time.perf_counter() - t0

    print(f"n_targets\t{labeled.n_tar}")
    print(f"n_nontargets\t{labeled.n_non}")
    print(f"seed\t{args.seed}")
    print(f"rocch_eer\t{_fmt(rocch_eer(rocch(labeled)))}")
    print(f"min_cllr\t{_fmt(cllr(LabeledScores(tar_llr, non_llr)))}")
    print(f"sweep_points\t{len(sweep)}")
    print(f"sweep_seconds\t{t_sweep:.3f}", file=sys.stderr)
    print(f"pav_seconds\t{t_pav:.3f}", file=sys.stderr)
    return 0


# ------------------------------------------------------------- the parser


def _build_parser() -> _Parser:
    parser = _Parser(prog="detscore", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("convert", help="convert score/key files between text and binary")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--to", choices=("text", "binary"), required=True)
    p.add_argument("--kind", choices=("auto", "scores", "key"), default="auto")
    p.set_defaults(func=_cmd_convert)

    p = sub.add_parser("stats", help="print counts and score range of a file")
    p.add_argument("input")
    p.add_argument("--kind", choices=("auto", "scores", "key"), default="auto")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("eval", help="evaluate scores against a key")
    p.add_argument("--scores", required=True)
    p.add_argument("--key", required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--ptar", type=float, default=0.5, help="effective target prior")
    group.add_argument("--prior", type=float, help="raw target prior (with --cmiss/--cfa)")
    p.add_argument("--cmiss", type=float, default=1.0)
    p.add_argument("--cfa", type=float, default=1.0)
    p.add_argument("--llr", action="store_true", help="scores are LLRs; also print actual-decision costs")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("calibrate", help="train a calibration model on dev scores")
    p.add_argument("--method", choices=("affine", "pav"), default="affine")
    p.add_argument("--dev-scores", required=True)
    p.add_argument("--dev-key", required=True)
    p.add_argument("--ptar", type=float, default=0.5)
    p.add_argument("--clip", type=float, default=200.0, help="LLR clip for --method pav")
    p.add_argument("--model-out")
    p.add_argument("--apply", help="score file to calibrate with the trained model")
    p.add_argument("--scores-out")
    p.add_argument("--binary", action="store_true", help="write applied scores in binary")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("fuse", help="train a fusion model over several systems")
    p.add_argument("--dev-scores", required=True, help="comma-separated score files, one per system")
    p.add_argument("--dev-key", required=True)
    p.add_argument("--ptar", type=float, default=0.5)
    p.add_argument("--ridge", type=float, default=0.0)
    p.add_argument("--quality-models", help="quality table for model ids")
    p.add_argument("--quality-segments", help="quality table for segment ids")
    p.add_argument("--model-out")
    p.add_argument("--apply", help="comma-separated score files to fuse")
    p.add_argument("--scores-out")
    p.add_argument("--binary", action="store_true")
    p.set_defaults(func=_cmd_fuse)

    p = sub.add_parser("plot-det", help="emit a DET curve as SVG/CSV")
    p.add_argument("--scores", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--style", choices=("rocch", "steppy"), default="rocch")
    p.add_argument("--svg")
    p.add_argument("--csv")
    p.add_argument("--title")
    p.add_argument("--no-dr30", action="store_true")
    p.set_defaults(func=_cmd_plot_det)

    p = sub.add_parser("plot-nber", help="emit normalized Bayes error-rate curves as SVG/CSV")
    p.add_argument("--scores", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--xmin", type=float, default=-10.0)
    p.add_argument("--xmax", type=float, default=0.0)
    p.add_argument("--points", type=int, default=501)
    p.add_argument("--opoint", type=float, action="append", default=[], help="vertical marker at this prior log odds (repeatable)")
    p.add_argument("--no-min", action="store_true")
    p.add_argument("--svg")
    p.add_argument("--csv")
    p.add_argument("--title")
    p.set_defaults(func=_cmd_plot_nber)

    p = sub.add_parser("bench", help="time the sweep and PAV on synthetic scores")
    p.add_argument("--n-tar", type=int, default=200_000)
    p.add_argument("--n-non", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _DataError as exc:
        print(f"detscore: error: {exc}", file=sys.stderr)
        return 2
    except DetscoreError as exc:
        print(f"detscore: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
