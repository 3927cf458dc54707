"""Command-line pipeline: cameras, synth, aggregate, train, infer, eval,
match, segment, plot.

Config precedence is flags > config file (key=value lines) > defaults.
Every subcommand writes its effective configuration into its output
manifest, and reruns with identical inputs and seed produce byte-identical
outputs. Exit codes: 0 success, 1 usage error, 2 data/validation error,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cameras import (generate_camera_ring, load_camera_manifest,
                      save_camera_manifest)
from .checkpoint import load_checkpoint, save_checkpoint
from .containers import (container_from_vertex_features, maps_from_container,
                         read_container, read_manifest,
                         vertex_features_from_container, write_container,
                         write_manifest)
from .errors import (ChiralisError, NumericError, ParameterError,
                     ValidationError)
from .losses import LossWeights
from .mesh import (load_annotations, load_mesh, mutual_knn_edges,
                   save_annotations, save_mesh_off)
from .metrics import (augment_features, chirality_accuracy,
                      default_tolerance_grid, load_correspondence,
                      match_nearest, matching_accuracy, matching_error,
                      max_pairwise_distance, pck_curve)
from .network import infer_field
from .projection import (ChiralPair, build_chiral_pair,
                         normalize_concat_channels)
from .segmentation import kmeans_segment
from .synthetic import SyntheticSpec, generate_synthetic_pair, make_bilateral_mesh
from .training import TrainConfig, TrainSample, history_to_csv, train

PROVENANCE = f"chiralis {__version__}"


class UsageError(ChiralisError):
    """Command line misuse."""


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# config handling


def _load_config_file(path) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8")
                                 .splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}: line {lineno}: expected key=value")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _parse_elevations(text: str):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"bad elevation list {text!r}") from None


def _parse_grid(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"bad epsilon grid {text!r}; expected lo:hi:count")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"bad epsilon grid {text!r}") from None
    return default_tolerance_grid(lo, hi, count)


class Settings:
    """Resolves option values with flags > config file > defaults."""

    def __init__(self, args):
        self.args = args
        self.file_values = _load_config_file(args.config) \
            if getattr(args, "config", None) else {}
        self.effective = {}

    def get(self, name, default, cast=None):
        value = getattr(self.args, name.replace("-", "_"), None)
        if value is None:
            raw = self.file_values.get(name)
            if raw is None:
                value = default
            else:
                value = (cast or (lambda x: x))(raw)
        self.effective[name] = value if not isinstance(value, np.ndarray) \
            else [float(v) for v in value]
        return value


def _add_config_flag(sub):
    sub.add_argument("--config", help="key=value config file (flags win)")


def _add_seed(sub):
    sub.add_argument("--seed", type=int, help="random seed (default 42)")


def _train_options(settings: Settings):
    config = TrainConfig(
        learning_rate=settings.get("lr", 1e-3, float),
        iterations=settings.get("iters", 20000, int),
        seed=settings.get("seed", 42, int),
        head={"norm": "normalized", "normalized": "normalized",
              "tanh": "tanh"}[settings.get("head", "norm", str)],
    )
    weights = LossWeights(
        reconstruction=settings.get("lambda1", 1.0, float),
        smoothness=settings.get("lambda2", 1.0, float),
        balance=settings.get("lambda3", 1.0, float),
    )
    return config, weights


# ---------------------------------------------------------------------------
# shape manifests


def _resolve(base: Path, rel) -> Path:
    p = Path(rel)
    return p if p.is_absolute() else base / p


def load_shape(manifest_path):
    """Load everything a shape manifest points at.

    Returns (manifest dict, ChiralPair, edges, mesh, manifest dir).
    """
    manifest_path = Path(manifest_path)
    manifest = read_manifest(manifest_path)
    base = manifest_path.parent
    for key in ("features", "counterpart", "mesh"):
        if key not in manifest:
            raise ValidationError(f"{manifest_path}: missing {key!r} entry")
    mesh = load_mesh(_resolve(base, manifest["mesh"]))
    feats, count = vertex_features_from_container(
        read_container(_resolve(base, manifest["features"])))
    counter, count_bar = vertex_features_from_container(
        read_container(_resolve(base, manifest["counterpart"])))
    if not np.array_equal(count, count_bar):
        raise ValidationError(
            f"{manifest_path}: feature and counterpart view counts disagree")
    pair = ChiralPair(features=feats, counterpart=counter, view_count=count)
    if pair.n_vertices != mesh.n_vertices:
        raise ValidationError(
            f"{manifest_path}: container has {pair.n_vertices} rows but the "
            f"mesh has {mesh.n_vertices} vertices")

    connectivity = manifest.get("connectivity", "faces")
    if connectivity == "faces":
        edges = mesh.edges
    elif connectivity == "knn":
        edges = mutual_knn_edges(mesh.vertices, int(manifest.get("knn_k", 5)))
    else:
        raise ValidationError(
            f"{manifest_path}: unknown connectivity {connectivity!r}")
    return manifest, pair, edges, mesh, base


# ---------------------------------------------------------------------------
# subcommands


def cmd_cameras(args):
    settings = Settings(args)
    views = generate_camera_ring(
        n_views=settings.get("views", 16, int),
        radius=settings.get("radius", 2.0, float),
        elevations_deg=settings.get("elevations", [-15.0, 15.0],
                                    _parse_elevations),
        image_size=settings.get("image-size", 256, int),
    )
    save_camera_manifest(args.out, views)
    print(f"wrote {len(views)} views to {args.out}")
    return 0


def cmd_synth(args):
    settings = Settings(args)
    seed = settings.get("seed", 42, int)
    n_shapes = settings.get("shapes", 5, int)
    noise = settings.get("noise", 0.01, float)
    sym = settings.get("sym-channels", 8, int)
    chiral = settings.get("chiral-channels", 2, int)
    knn_k = settings.get("knn", 0, int)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    for i in range(n_shapes):
        mesh = make_bilateral_mesh(seed=seed + i)
        spec = SyntheticSpec(symmetric_channels=sym, chiral_channels=chiral,
                             noise=noise, seed=seed + 1000 + i)
        pair, annotation = generate_synthetic_pair(mesh, spec)
        stem = f"shape_{i:03d}"
        save_mesh_off(out / f"{stem}.off", mesh)
        save_annotations(out / f"{stem}.labels.txt", annotation)
        write_container(out / f"{stem}.features.cfv",
                        container_from_vertex_features(pair.features,
                                                       pair.view_count))
        write_container(out / f"{stem}.counterpart.cfv",
                        container_from_vertex_features(pair.counterpart,
                                                       pair.view_count))
        manifest = {
            "shape_id": stem,
            "mesh": f"{stem}.off",
            "features": f"{stem}.features.cfv",
            "counterpart": f"{stem}.counterpart.cfv",
            "annotations": f"{stem}.labels.txt",
            "connectivity": "knn" if knn_k else "faces",
            "provenance": PROVENANCE,
            "config": settings.effective,
        }
        if knn_k:
            manifest["knn_k"] = knn_k
        write_manifest(out / f"{stem}.json", manifest)
    print(f"wrote {n_shapes} synthetic shapes to {out}")
    return 0


def _parse_channel_split(text: str):
    try:
        counts = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"bad channel split {text!r}") from None
    if not counts:
        raise UsageError(f"bad channel split {text!r}")
    return counts


def cmd_aggregate(args):
    settings = Settings(args)
    depth_tol = settings.get("depth-tolerance", None,
                             lambda x: float(x))
    split = settings.get("model-channels", None, _parse_channel_split)
    mesh = load_mesh(args.mesh)
    views = load_camera_manifest(args.cameras)
    maps_orig = maps_from_container(read_container(args.maps))
    maps_flip = maps_from_container(read_container(args.flipped_maps))
    if split:
        # raw per-model containers: normalize each model's block, join,
        # normalize again, per view
        maps_orig = [normalize_concat_channels(m, split) for m in maps_orig]
        maps_flip = [normalize_concat_channels(m, split) for m in maps_flip]
    pair = build_chiral_pair(mesh, views, maps_orig, maps_flip,
                             depth_tolerance=depth_tol)
    out = Path(args.out_prefix)
    out.parent.mkdir(parents=True, exist_ok=True)
    features_path = out.with_suffix(".features.cfv")
    counterpart_path = out.with_suffix(".counterpart.cfv")
    write_container(features_path,
                    container_from_vertex_features(pair.features,
                                                   pair.view_count))
    write_container(counterpart_path,
                    container_from_vertex_features(pair.counterpart,
                                                   pair.view_count))
    shape_id = args.shape_id or out.name
    manifest = {
        "shape_id": shape_id,
        "mesh": str(Path(args.mesh).resolve()),
        "features": features_path.name,
        "counterpart": counterpart_path.name,
        "cameras": str(Path(args.cameras).resolve()),
        "connectivity": "faces",
        "provenance": PROVENANCE,
        "config": settings.effective,
    }
    write_manifest(out.with_suffix(".json"), manifest)
    seen = int((pair.view_count > 0).sum())
    print(f"aggregated {pair.n_vertices} vertices ({seen} visible) "
          f"into {features_path} / {counterpart_path}")
    return 0


def cmd_train(args):
    settings = Settings(args)
    config, weights = _train_options(settings)
    samples = []
    for manifest_path in args.manifests:
        _, pair, edges, _, _ = load_shape(manifest_path)
        samples.append(TrainSample.from_pair(pair, edges))
    params, history = train(samples, config, weights)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out, params)
    history_path = Path(args.history) if args.history \
        else out.with_suffix(".history.csv")
    history_path.write_text(history_to_csv(history), encoding="utf-8")
    write_manifest(out.with_suffix(".json"), {
        "checkpoint": out.name,
        "history": history_path.name,
        "shapes": [str(Path(m).resolve()) for m in args.manifests],
        "provenance": PROVENANCE,
        "config": settings.effective,
    })
    final = history[-1].breakdown.total if history else None
    print(f"trained {config.iterations} iterations -> {out}"
          + (f" (final loss {final:.6f})" if final is not None else ""))
    return 0


def _field_for(manifest_path, params, head):
    manifest, pair, edges, mesh, base = load_shape(manifest_path)
    field = infer_field(params, pair, head)
    return manifest, pair, edges, mesh, base, field


def cmd_infer(args):
    settings = Settings(args)
    head = {"norm": "normalized", "normalized": "normalized", "tanh": "tanh"}[
        settings.get("head", "norm", str)]
    params = load_checkpoint(args.checkpoint)
    _, _, _, _, _, field = _field_for(args.manifest, params, head)
    lines = ["vertex,chi,chi_bar,included"]
    for i in range(len(field)):
        lines.append(f"{i},{float(field.chi[i])!r},{float(field.chi_bar[i])!r},"
                     f"{int(field.included[i])}")
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(field)} scores to {args.out}")
    return 0


def cmd_eval(args):
    settings = Settings(args)
    head = {"norm": "normalized", "normalized": "normalized", "tanh": "tanh"}[
        settings.get("head", "norm", str)]
    params = load_checkpoint(args.checkpoint)
    fields, annotations, per_shape = [], [], []
    for manifest_path in args.manifests:
        manifest, pair, edges, mesh, base, field = _field_for(
            manifest_path, params, head)
        if "annotations" not in manifest:
            raise ValidationError(
                f"{manifest_path}: no annotations for evaluation")
        annotation = load_annotations(
            _resolve(base, manifest["annotations"]), mesh)
        fields.append(field)
        annotations.append(annotation)
        per_shape.append({
            "shape_id": manifest.get("shape_id", Path(manifest_path).stem),
            "accuracy": float(chirality_accuracy([field], [annotation])),
            "included": int(field.included.sum()),
        })
    acc = chirality_accuracy(fields, annotations)
    report = {
        "acc_chi": acc,
        "shapes": per_shape,
        "provenance": PROVENANCE,
        "config": settings.effective,
    }
    write_manifest(args.out, report)
    print(f"acc_chi = {acc:.4f} over {len(fields)} shapes -> {args.out}")
    return 0


def cmd_match(args):
    settings = Settings(args)
    head = {"norm": "normalized", "normalized": "normalized", "tanh": "tanh"}[
        settings.get("head", "norm", str)]
    weight = settings.get("weight", 0.5, float)
    grid = settings.get("epsilon-grid", default_tolerance_grid(), _parse_grid)

    src_manifest, src_pair, _, src_mesh, _ = load_shape(args.source)
    tgt_manifest, tgt_pair, _, tgt_mesh, _ = load_shape(args.target)
    src_feats = src_pair.features
    tgt_feats = tgt_pair.features
    if args.checkpoint:
        params = load_checkpoint(args.checkpoint)
        src_feats = augment_features(
            src_feats, infer_field(params, src_pair, head).chi, weight)
        tgt_feats = augment_features(
            tgt_feats, infer_field(params, tgt_pair, head).chi, weight)
    match = match_nearest(src_feats, tgt_feats)

    report = {
        "source": src_manifest.get("shape_id", "source"),
        "target": tgt_manifest.get("shape_id", "target"),
        "augmented": bool(args.checkpoint),
        "n_source": int(src_pair.n_vertices),
        "n_target": int(tgt_pair.n_vertices),
        "provenance": PROVENANCE,
        "config": settings.effective,
    }
    if args.gt:
        gt = load_correspondence(args.gt, src_pair.n_vertices,
                                 tgt_pair.n_vertices)
        err = matching_error(match, gt, tgt_mesh.vertices)
        diameter = max_pairwise_distance(tgt_mesh.vertices)
        curve = pck_curve(match, gt, tgt_mesh.vertices, grid)
        acc_eps = settings.get("acc-epsilon", 0.05, float)
        report["err"] = err
        report["err_diameter_normalized"] = err / diameter if diameter else 0.0
        report["acc"] = matching_accuracy(match, gt, tgt_mesh.vertices,
                                          acc_eps)
        report["acc_epsilon"] = acc_eps
        report["auc"] = curve.auc
        if args.pck_out:
            lines = ["tolerance,accuracy"]
            lines += [f"{float(t)!r},{float(a)!r}" for t, a in
                      zip(curve.tolerances, curve.accuracies)]
            Path(args.pck_out).write_text("\n".join(lines) + "\n",
                                          encoding="utf-8")
    write_manifest(args.out, report)
    summary = f"matched {report['n_source']} -> {report['n_target']} vertices"
    if "err" in report:
        summary += f", err {report['err']:.4f}, auc {report['auc']:.4f}"
    print(summary + f" -> {args.out}")
    return 0


def cmd_segment(args):
    settings = Settings(args)
    head = {"norm": "normalized", "normalized": "normalized", "tanh": "tanh"}[
        settings.get("head", "norm", str)]
    k = settings.get("k", 6, int)
    seed = settings.get("seed", 42, int)
    weight = settings.get("weight", 0.5, float)
    _, pair, _, _, _ = load_shape(args.manifest)
    feats = pair.features
    if args.checkpoint:
        params = load_checkpoint(args.checkpoint)
        feats = augment_features(feats, infer_field(params, pair, head).chi,
                                 weight)
    labels = kmeans_segment(feats, k, seed=seed)
    lines = ["vertex,label"]
    lines += [f"{i},{int(l)}" for i, l in enumerate(labels)]
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"segmented {len(labels)} vertices into {k} parts -> {args.out}")
    return 0


def _read_pck_csv(path):
    rows = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if not rows or rows[0] != "tolerance,accuracy":
        raise ValidationError(f"{path}: expected a tolerance,accuracy CSV")
    tol, acc = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        try:
            t, a = row.split(",")
            tol.append(float(t))
            acc.append(float(a))
        except ValueError:
            raise ValidationError(f"{path}: line {lineno}: bad row "
                                  f"{row!r}") from None
    return np.asarray(tol), np.asarray(acc)


def cmd_plot(args):
    tol, acc = _read_pck_csv(args.pck)
    if len(tol) < 2:
        raise ValidationError(f"{args.pck}: need at least two points to plot")
    width, height, margin = 640, 480, 50
    span_x = tol[-1] - tol[0] or 1.0

    def sx(t):
        return margin + (t - tol[0]) / span_x * (width - 2 * margin)

    def sy(a):
        return height - margin - a * (height - 2 * margin)

    points = " ".join(f"{sx(t):.2f},{sy(a):.2f}" for t, a in zip(tol, acc))
    svg = f"""<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}">
<rect width="{width}" height="{height}" fill="white"/>
<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" y2="{height - margin}" stroke="black"/>
<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>
<polyline points="{points}" fill="none" stroke="#1f77b4" stroke-width="2"/>
<text x="{width // 2}" y="{height - 12}" text-anchor="middle" font-size="14">tolerance</text>
<text x="14" y="{height // 2}" text-anchor="middle" font-size="14" transform="rotate(-90 14 {height // 2})">accuracy</text>
<text x="{margin}" y="{height - margin + 18}" text-anchor="middle" font-size="12">{tol[0]:.3g}</text>
<text x="{width - margin}" y="{height - margin + 18}" text-anchor="middle" font-size="12">{tol[-1]:.3g}</text>
</svg>
"""
    Path(args.out).write_text(svg, encoding="utf-8")
    print(f"plotted {len(tol)} points -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser wiring


def build_parser() -> Parser:
    parser = Parser(prog="chiralis",
                    description="Chirality-aware vertex features for 3D shapes")
    parser.add_argument("--version", action="version", version=PROVENANCE)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("cameras", help="write a camera ring manifest")
    p.add_argument("--views", type=int, help="cameras per elevation (default 16)")
    p.add_argument("--radius", type=float, help="ring radius (default 2.0)")
    p.add_argument("--elevations", type=_parse_elevations,
                   help="comma-separated degrees (default -15,15)")
    p.add_argument("--image-size", type=int, help="square image size (default 256)")
    p.add_argument("--out", required=True)
    _add_config_flag(p)
    p.set_defaults(func=cmd_cameras)

    p = subs.add_parser("synth", help="generate synthetic chiral fixtures")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--shapes", type=int, help="number of shapes (default 5)")
    p.add_argument("--noise", type=float, help="noise amplitude (default 0.01)")
    p.add_argument("--sym-channels", type=int, help="default 8")
    p.add_argument("--chiral-channels", type=int, help="default 2")
    p.add_argument("--knn", type=int,
                   help="use mutual k-NN connectivity with this k")
    _add_seed(p)
    _add_config_flag(p)
    p.set_defaults(func=cmd_synth)

    p = subs.add_parser("aggregate",
                        help="build chiral vertex features from view maps")
    p.add_argument("--mesh", required=True)
    p.add_argument("--maps", required=True, help="view_maps container")
    p.add_argument("--flipped-maps", required=True,
                   help="view_maps container of the flipped images")
    p.add_argument("--cameras", required=True, help="camera manifest JSON")
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--shape-id")
    p.add_argument("--depth-tolerance", type=float)
    p.add_argument("--model-channels", type=_parse_channel_split,
                   help="comma-separated channel counts of raw per-model "
                        "blocks to normalize and join (e.g. 1280,768)")
    _add_config_flag(p)
    p.set_defaults(func=cmd_aggregate)

    p = subs.add_parser("train", help="train the chirality network")
    p.add_argument("manifests", nargs="+", help="shape manifest JSON files")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--history", help="loss history CSV path")
    p.add_argument("--lr", type=float, help="learning rate (default 1e-3)")
    p.add_argument("--iters", type=int, help="iterations (default 20000)")
    p.add_argument("--lambda1", type=float, help="reconstruction weight")
    p.add_argument("--lambda2", type=float, help="smoothness weight")
    p.add_argument("--lambda3", type=float, help="balance weight")
    p.add_argument("--head", choices=["norm", "tanh"])
    _add_seed(p)
    _add_config_flag(p)
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("infer", help="write per-vertex scores for one shape")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="CSV output")
    p.add_argument("--head", choices=["norm", "tanh"])
    _add_config_flag(p)
    p.set_defaults(func=cmd_infer)

    p = subs.add_parser("eval", help="left/right accuracy over shapes")
    p.add_argument("manifests", nargs="+")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True, help="JSON report")
    p.add_argument("--head", choices=["norm", "tanh"])
    _add_config_flag(p)
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("match", help="cosine matching between two shapes")
    p.add_argument("--source", required=True, help="shape manifest")
    p.add_argument("--target", required=True, help="shape manifest")
    p.add_argument("--checkpoint", help="augment with chirality scores")
    p.add_argument("--weight", type=float,
                   help="augmentation channel weight (default 0.5)")
    p.add_argument("--gt", help="ground-truth correspondence file")
    p.add_argument("--epsilon-grid", type=_parse_grid,
                   help="lo:hi:count (default 0:0.2:101)")
    p.add_argument("--acc-epsilon", type=float,
                   help="tolerance for the headline accuracy (default 0.05)")
    p.add_argument("--out", required=True, help="JSON report")
    p.add_argument("--pck-out", help="PCK curve CSV")
    p.add_argument("--head", choices=["norm", "tanh"])
    _add_config_flag(p)
    p.set_defaults(func=cmd_match)

    p = subs.add_parser("segment", help="k-means part segmentation")
    p.add_argument("--manifest", required=True)
    p.add_argument("--checkpoint", help="augment with chirality scores")
    p.add_argument("--k", type=int, help="number of parts (default 6)")
    p.add_argument("--weight", type=float)
    p.add_argument("--out", required=True, help="labels CSV")
    p.add_argument("--head", choices=["norm", "tanh"])
    _add_seed(p)
    _add_config_flag(p)
    p.set_defaults(func=cmd_segment)

    p = subs.add_parser("plot", help="render a PCK curve CSV as SVG")
    p.add_argument("--pck", required=True, help="tolerance,accuracy CSV")
    p.add_argument("--out", required=True, help="SVG output")
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except (UsageError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (ChiralisError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
