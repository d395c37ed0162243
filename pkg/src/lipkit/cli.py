"""Command-line entry point exposing each pipeline stage as a subcommand.

Exit codes: 0 success, 1 runtime failure (one-line diagnostic on stderr),
2 usage error. An optional ``--config`` file supplies ``key=value`` defaults
(keys are flag names with underscores); explicit flags override it.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from . import corpus
from .classify import ClassifierParams, VisemeClassifier, recognize
from .features import DarkParams, FeatureTrack, FrameFeatures, extract_track
from .imaging import Frame, PixelPoint, load_sequence, load_frame, save_frame
from .normalize import (
    FEATURE_IDS,
    NormalizationParams,
    NormalizedFeatureVector,
    derive_point_count,
    normalize_track,
)
from .pipeline import InitialEllipse, PipelineConfig, localize_pois, utterance_curves
from .snake import POI_NAMES, PoiSet, SnakeParams, ellipse_ring, extract_pois, minimize
from .templates import load_bundle, save_bundle
from .tracker import TrackerParams, TrackResult, track_sequence, track_sequence_baseline


def _add_snake_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--vertices", type=int, default=40, help="contour vertex count")
    p.add_argument("--alpha", type=float, default=1.0, help="tension weight")
    p.add_argument("--beta", type=float, default=1.0, help="rigidity weight")
    p.add_argument("--centroid-weight", type=float, default=0.5)
    p.add_argument("--search-radius", type=int, default=2)
    p.add_argument("--max-sweeps", type=int, default=200)


def _add_ellipse_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cx", type=float, default=None, help="seed ellipse center x")
    p.add_argument("--cy", type=float, default=None, help="seed ellipse center y")
    p.add_argument("--rx", type=float, default=None, help="seed ellipse semi-axis x")
    p.add_argument("--ry", type=float, default=None, help="seed ellipse semi-axis y")


def _add_tracker_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--block-size", type=int, default=11, help="odd block size")
    p.add_argument("--steps", type=int, default=10, help="candidates per direction")
    p.add_argument(
        "--no-stationary",
        action="store_true",
        help="drop the zero-motion candidate from the search lattice",
    )


def _add_dark_args(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--dark-ratio",
        type=float,
        default=0.3,
        help="dark cutoff as a fraction of mean region luminance",
    )


def _add_norm_args(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--points",
        type=int,
        default=None,
        help="points per normalized curve (default: fps * duration)",
    )
    p.add_argument("--duration", type=float, default=0.4, help="utterance span, seconds")
    p.add_argument("--trim-epsilon", type=float, default=0.02)


def _add_classifier_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--distance-scale", type=float, default=1.0)
    p.add_argument("--scorer-mode", choices=("uniform", "trained"), default="uniform")
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=500)


def _add_fps_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--fps", type=float, default=25.0, help="capture rate, frames/s")


def _point_count(args: argparse.Namespace) -> int:
    if getattr(args, "points", None) is not None:
        return args.points
    return derive_point_count(args.fps, args.duration)


def _pipeline_config(args: argparse.Namespace) -> PipelineConfig:
    ellipse = None
    if args.cx is not None or args.cy is not None or args.rx is not None or args.ry is not None:
        if None in (args.cx, args.cy, args.rx, args.ry):
            raise ValueError("provide all of --cx --cy --rx --ry or none")
        ellipse = InitialEllipse(cx=args.cx, cy=args.cy, rx=args.rx, ry=args.ry)
    return PipelineConfig(
        snake=SnakeParams(
            num_vertices=args.vertices,
            alpha=args.alpha,
            beta=args.beta,
            centroid_weight=args.centroid_weight,
            search_radius=args.search_radius,
            max_sweeps=args.max_sweeps,
        ),
        tracker=TrackerParams(
            block_size=args.block_size,
            steps=args.steps,
            include_stationary=not args.no_stationary,
        ),
        dark=DarkParams(threshold_ratio=args.dark_ratio),
        normalization=NormalizationParams(
            num_points=_point_count(args), trim_epsilon=args.trim_epsilon
        ),
        classifier=ClassifierParams(
            distance_scale=args.distance_scale,
            scorer_mode=args.scorer_mode,
            learning_rate=args.learning_rate,
            epochs=args.epochs,
        ),
        ellipse=ellipse,
        fps=args.fps,
    )


def _write_text(path: str | None, text: str) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _format_pois(pois: PoiSet) -> str:
    lines = [f"{name}={p.x},{p.y}" for name, p in pois.items()]
    if pois.cupid_bow is not None:
        bow = ";".join(f"{p.x},{p.y}" for p in pois.cupid_bow)
        lines.append(f"cupid_bow={bow}")
    return "\n".join(lines) + "\n"


def _parse_poi_file(path: str) -> PoiSet:
    values: dict[str, PixelPoint] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, val = line.split("=", 1)
        if key in POI_NAMES:
            x, y = val.split(",")
            values[key] = PixelPoint(int(x), int(y))
    missing = [n for n in POI_NAMES if n not in values]
    if missing:
        raise ValueError(f"seed file {path} is missing: {', '.join(missing)}")
    return PoiSet(**values)


def _annotate(frame: Frame, pois: PoiSet, contour_vertices, path: str) -> None:
    img = np.array(frame.data)
    for v in contour_vertices:
        if 0 <= v.y < frame.height and 0 <= v.x < frame.width:
            img[v.y, v.x] = 255.0
    for _, p in pois.items():
        for dx in range(-2, 3):
            for dy in (0,):
                x, y = p.x + dx, p.y + dy
                if 0 <= y < frame.height and 0 <= x < frame.width:
                    img[y, x] = 0.0
        for dy in range(-2, 3):
            x, y = p.x, p.y + dy
            if 0 <= y < frame.height and 0 <= x < frame.width:
                img[y, x] = 0.0
    save_frame(Frame(img), path)


def _cmd_localize(args: argparse.Namespace) -> int:
    frame = load_frame(args.frame)
    config = _pipeline_config(args)
    ell = config.seed_ellipse(frame)
    initial = ellipse_ring(ell.cx, ell.cy, ell.rx, ell.ry, config.snake.num_vertices)
    contour = minimize(frame, initial, config.snake)
    pois = extract_pois(contour)
    _write_text(args.out, _format_pois(pois))
    if args.annotate:
        _annotate(frame, pois, contour.vertices, args.annotate)
    return 0


def _track_csv(result: TrackResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["frame", "poi_name", "x", "y", "votes", "margin"])
    for t, pois in enumerate(result.poi_sets):
        for name, p in pois.items():
            if t == 0:
                writer.writerow([t, name, p.x, p.y, 0, 0.0])
            else:
                move = result.moves[t - 1][name]
                writer.writerow([t, name, p.x, p.y, move.votes, repr(move.margin)])
    return buf.getvalue()


def _cmd_track(args: argparse.Namespace) -> int:
    frames = load_sequence(args.frames)
    if args.seed:
        seed = _parse_poi_file(args.seed)
    else:
        pts = {}
        for name in POI_NAMES:
            raw = getattr(args, name)
            if raw is None:
                raise ValueError(f"--seed or all four landmark flags required (missing --{name.replace('_', '-')})")
            x, y = raw.split(",")
            pts[name] = PixelPoint(int(x), int(y))
        seed = PoiSet(**pts)
    params = TrackerParams(
        block_size=args.block_size,
        steps=args.steps,
        include_stationary=not args.no_stationary,
    )
    if args.method == "vote":
        result = track_sequence(frames, seed, params)
    else:
        result = track_sequence_baseline(frames, seed, params, method=args.method)
    _write_text(args.out, _track_csv(result))
    return 0


def _read_track_csv(path: str, num_frames: int) -> TrackResult:
    rows: dict[int, dict[str, PixelPoint]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            t = int(row["frame"])
            rows.setdefault(t, {})[row["poi_name"]] = PixelPoint(
                int(row["x"]), int(row["y"])
            )
    if sorted(rows) != list(range(num_frames)):
        raise ValueError(f"track file {path} does not cover every frame")
    sets = []
    for t in range(num_frames):
        missing = [n for n in POI_NAMES if n not in rows[t]]
        if missing:
            raise ValueError(f"track file {path} frame {t} is missing: {missing}")
        sets.append(PoiSet(**rows[t]))
    return TrackResult.from_poi_sets(sets)


def _cmd_extract(args: argparse.Namespace) -> int:
    frames = load_sequence(args.frames)
    track = _read_track_csv(args.track, len(frames))
    feats = extract_track(frames, track, DarkParams(threshold_ratio=args.dark_ratio), args.fps)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["frame", "dh", "dv", "da", "dark_count", "s_dark"])
    for t, f in enumerate(feats.frames):
        writer.writerow([t, repr(f.dh), repr(f.dv), repr(f.da), f.dark_count, repr(f.s_dark)])
    _write_text(args.out, buf.getvalue())
    return 0


def _read_features_csv(path: str, fps: float) -> FeatureTrack:
    frames = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            frames.append(
                FrameFeatures(
                    dh=float(row["dh"]),
                    dv=float(row["dv"]),
                    da=float(row["da"]),
                    dark_count=int(row["dark_count"]),
                    s_dark=float(row["s_dark"]),
                )
            )
    if not frames:
        raise ValueError(f"no feature rows in {path}")
    return FeatureTrack(frames=tuple(frames), fps=fps)


def _normalized_csv(result) -> str:
    n = len(result.dh.values)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["feature_id"]
        + [f"v{k + 1}" for k in range(n)]
        + ["scale_basis", "retained_start", "retained_end"]
    )
    for vec in result.vectors:
        writer.writerow(
            [vec.feature_id]
            + [repr(float(v)) for v in vec.values]
            + [repr(float(vec.scale_basis)), result.trim.start, result.trim.end]
        )
    return buf.getvalue()


def _read_normalized_csv(path: str) -> tuple[NormalizedFeatureVector, ...]:
    found: dict[str, NormalizedFeatureVector] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "feature_id":
            raise ValueError(f"not a normalized-curve file: {path}")
        n = len([h for h in header if h.startswith("v")])
        for row in reader:
            fid = row[0]
            values = np.array([float(v) for v in row[1 : 1 + n]])
            found[fid] = NormalizedFeatureVector(
                feature_id=fid, values=values, scale_basis=float(row[1 + n])
            )
    missing = [fid for fid in FEATURE_IDS if fid not in found]
    if missing:
        raise ValueError(f"normalized file {path} is missing curves: {missing}")
    return tuple(found[fid] for fid in FEATURE_IDS)


def _cmd_normalize(args: argparse.Namespace) -> int:
    track = _read_features_csv(args.features, args.fps)
    params = NormalizationParams(
        num_points=_point_count(args), trim_epsilon=args.trim_epsilon
    )
    result = normalize_track(track, params)
    _write_text(args.out, _normalized_csv(result))
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    config = _pipeline_config(args)
    entries = corpus.load_manifest(args.manifest)
    labels, matrices = [], []
    for label, path in entries:
        frames = load_sequence(path)
        labels.append(label)
        matrices.append(utterance_curves(frames, config).matrix())
    clf = VisemeClassifier(
        num_points=config.normalization.num_points,
        distance_scale=config.classifier.distance_scale,
        scorer_mode=config.classifier.scorer_mode,
        learning_rate=config.classifier.learning_rate,
        epochs=config.classifier.epochs,
        dark_ratio=config.dark.threshold_ratio,
    )
    clf.fit(matrices, labels)
    save_bundle(clf.to_bundle(), args.out)
    print(f"trained on {len(labels)} utterances -> {args.out}")
    return 0


def _cmd_recognize(args: argparse.Namespace) -> int:
    bundle = load_bundle(args.bundle)
    config = _pipeline_config(args)
    if bundle.num_points != config.normalization.num_points:
        raise ValueError(
            f"curve point-count mismatch: model has {bundle.num_points}, "
            f"run configured {config.normalization.num_points}"
        )
    if args.normalized:
        fvs = _read_normalized_csv(args.normalized)
    elif args.frames:
        frames = load_sequence(args.frames)
        fvs = utterance_curves(frames, config).vectors
    else:
        raise ValueError("provide --frames or --normalized")
    result = recognize(fvs, bundle)
    lines = [f"winner: {result.winner}"]
    for label, p in zip(result.labels, result.posteriors):
        lines.append(f"posterior {label} {p:.6f}")
    print("\n".join(lines))
    if args.csv:
        header = "winner," + ",".join(result.labels)
        row = result.winner + "," + ",".join(repr(float(p)) for p in result.posteriors)
        Path(args.csv).write_text(header + "\n" + row + "\n")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    config = _pipeline_config(args)
    entries = corpus.load_manifest(args.manifest)
    utterances = [(label, load_sequence(path)) for label, path in entries]
    report = corpus.evaluate(utterances, args.split, config, seed=args.seed)
    print(report.to_text(), end="")
    if args.csv:
        Path(args.csv).write_text(report.to_csv())
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    # default articulation span scales with the utterance length
    start = args.active_start if args.active_start is not None else max(1, round(args.frames * 0.17))
    end = args.active_end if args.active_end is not None else min(args.frames - 2, round(args.frames * 0.69))
    spec = corpus.SyntheticUtteranceSpec(
        label=args.label,
        num_frames=args.frames,
        fps=args.fps,
        width=args.width,
        height=args.height,
        active_start=start,
        active_end=end,
        impulse_fraction=args.impulse,
        offset_mode=args.offset_mode,
        offset_amplitude=args.offset_amplitude,
        jitter=args.jitter,
        rng_seed=args.seed,
    )
    frames, truth = corpus.synthesize(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for t, frame in enumerate(frames):
        save_frame(frame, out / f"frame_{t:04d}.pgm")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["frame", "left_x", "left_y", "right_x", "right_y", "upper_x", "upper_y",
         "lower_x", "lower_y", "dh", "dv", "dark_count"]
    )
    for t, pois in enumerate(truth.poi_sets):
        writer.writerow(
            [t, pois.left_corner.x, pois.left_corner.y, pois.right_corner.x,
             pois.right_corner.y, pois.upper_center.x, pois.upper_center.y,
             pois.lower_center.x, pois.lower_center.y, repr(float(truth.dh[t])),
             repr(float(truth.dv[t])), int(truth.dark_masks[t].sum())]
        )
    (out / "truth.csv").write_text(buf.getvalue())
    (out / "meta.txt").write_text(
        f"label={truth.label}\nfps={truth.fps}\nactive_start={truth.active_start}\n"
        f"active_end={truth.active_end}\nseed={spec.rng_seed}\n"
    )
    print(f"wrote {len(frames)} frames to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lipkit",
        description="Lip landmark localization, tracking, and viseme recognition.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("localize", help="fit the lip contour on one frame")
    p.add_argument("--frame", required=True)
    p.add_argument("--out", default=None, help="landmark file (default: stdout)")
    p.add_argument("--annotate", default=None, help="write an annotated PNG here")
    _shared_pipeline_args(p)
    p.set_defaults(func=_cmd_localize)

    p = sub.add_parser("track", help="track landmarks through a sequence")
    p.add_argument("--frames", required=True, help="frame directory or manifest")
    p.add_argument("--seed", default=None, help="landmark file from `localize`")
    for name in POI_NAMES:
        p.add_argument(f"--{name.replace('_', '-')}", default=None, metavar="X,Y")
    p.add_argument("--method", choices=("vote", "ssd", "ncc"), default="vote")
    p.add_argument("--out", default=None, help="track CSV (default: stdout)")
    _add_tracker_args(p)
    p.add_argument("--config", default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=_cmd_track)

    p = sub.add_parser("extract", help="compute per-frame mouth descriptors")
    p.add_argument("--frames", required=True)
    p.add_argument("--track", required=True, help="track CSV from `track`")
    p.add_argument("--out", default=None, help="feature CSV (default: stdout)")
    _add_dark_args(p)
    _add_fps_arg(p)
    p.add_argument("--config", default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("normalize", help="trim and normalize a feature CSV")
    p.add_argument("--features", required=True, help="feature CSV from `extract`")
    p.add_argument("--out", default=None, help="normalized CSV (default: stdout)")
    _add_norm_args(p)
    _add_fps_arg(p)
    p.add_argument("--config", default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=_cmd_normalize)

    p = sub.add_parser("train", help="fit class templates from a labeled manifest")
    p.add_argument("--manifest", required=True, help="lines of label,frame-dir")
    p.add_argument("--out", required=True, help="model bundle file to write")
    _shared_pipeline_args(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("recognize", help="classify one utterance")
    p.add_argument("--bundle", required=True, help="model bundle from `train`")
    p.add_argument("--frames", default=None, help="frame directory or manifest")
    p.add_argument("--normalized", default=None, help="normalized CSV instead of frames")
    p.add_argument("--csv", default=None, help="also write a machine-readable row here")
    _shared_pipeline_args(p)
    p.set_defaults(func=_cmd_recognize)

    p = sub.add_parser("evaluate", help="train/test split evaluation on a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", type=float, default=0.7, help="train fraction")
    p.add_argument("--seed", type=int, default=0, help="split shuffle seed")
    p.add_argument("--csv", default=None, help="also write the report as CSV here")
    _shared_pipeline_args(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("synth", help="render a synthetic utterance with ground truth")
    p.add_argument("--label", choices=("ba", "bi", "bou"), required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--frames", type=int, default=35)
    p.add_argument("--width", type=int, default=160)
    p.add_argument("--height", type=int, default=120)
    p.add_argument("--active-start", type=int, default=None, help="first articulation frame")
    p.add_argument("--active-end", type=int, default=None, help="last articulation frame")
    p.add_argument("--impulse", type=float, default=0.0, help="salt-and-pepper fraction")
    p.add_argument("--offset-mode", choices=("none", "alternating", "drift"), default="none")
    p.add_argument("--offset-amplitude", type=float, default=0.0)
    p.add_argument("--jitter", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    _add_fps_arg(p)
    p.add_argument("--config", default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=_cmd_synth)

    return parser


def _shared_pipeline_args(p: argparse.ArgumentParser) -> None:
    _add_snake_args(p)
    _add_ellipse_args(p)
    _add_tracker_args(p)
    _add_dark_args(p)
    _add_norm_args(p)
    _add_classifier_args(p)
    _add_fps_arg(p)
    p.add_argument("--config", default=None, help="key=value defaults file")


def _expand_config(argv: list[str]) -> list[str]:
    """Splice config-file entries in as flags right after the subcommand."""
    path = None
    rest: list[str] = []
    i = 0
    while i < len(argv):
        arg = argv[i]
        if arg == "--config":
            if i + 1 >= len(argv):
                raise ValueError("--config needs a file path")
            path = argv[i + 1]
            i += 2
        elif arg.startswith("--config="):
            path = arg.split("=", 1)[1]
            i += 1
        else:
            rest.append(arg)
            i += 1
    if path is None:
        return argv
    cfg = Path(path)
    if not cfg.is_file():
        raise FileNotFoundError(f"config file not found: {cfg}")
    flags: list[str] = []
    for lineno, raw in enumerate(cfg.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"malformed config line {lineno}: {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        flag = "--" + key.replace("_", "-")
        if value.lower() == "true":
            flags.append(flag)
        elif value.lower() == "false":
            continue
        else:
            flags.extend([flag, value])
    if not rest:
        return flags
    return [rest[0], *flags, *rest[1:]]


def main(argv: list[str] | None = None) -> int:
    args_in = list(sys.argv[1:] if argv is None else argv)
    try:
        args_in = _expand_config(args_in)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    parser = build_parser()
    try:
        args = parser.parse_args(args_in)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
