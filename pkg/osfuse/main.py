"""Command-line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .core.errors import ContractError, DegeneracyError, DimensionError, InputError
from .core.rng import substream
from .core.settings import FILTER_KINDS, SCAN_KINDS, RunConfig, parse_overrides
from .version import APP_NAME, DESCRIPTION, __version__

logger = logging.getLogger(__name__)

COMMANDS = ("filter", "scan", "fuse", "eval", "stats", "metrics", "gen", "toytrain")
ABLATIONS = ("kinds", "area", "modules", "sequence", "alpha")


class UsageError(Exception):
    """Raised instead of exiting when the command line cannot be parsed."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _emit(payload) -> None:
    if isinstance(payload, str):
        sys.stdout.write(payload.rstrip("\n") + "\n")
    else:
        sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _configure_logging(verbose: bool, quiet: bool) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s", force=True)


def _stats(values) -> dict:
    data = np.asarray(values.data if hasattr(values, "data") else values)
    return {"shape": list(data.shape), "mean": float(data.mean()), "std": float(data.std())}


# ---------------------------------------------------------------- commands
def cmd_filter(args, cfg: RunConfig) -> int:
    from .data.pnm import read_image, write_image
    from .fusion.filters import apply_filter, filter_augment

    kind = args.kind or cfg.filter_kind
    image = read_image(args.image)
    response = apply_filter(kind, image)
    summary = {"kind": kind, "response": _stats(response)}
    output = response
    if args.alpha is not None:
        output = filter_augment(image, kind, args.alpha, response=response)
        summary["alpha"] = args.alpha
        summary["augmented"] = _stats(output)
    out = args.out or args.out_flag
    if out:
        write_image(out, output)
        summary["out"] = str(out)
    _emit(summary)
    return 0


def cmd_scan(args, cfg: RunConfig) -> int:
    from .fusion.scan_orders import scan_permutation, vertical_permutation

    build = vertical_permutation if args.vertical else scan_permutation
    perm = build(args.kind or cfg.scan_kind, args.rows, args.cols,
                 cfg.hilbert_direction if args.direction is None else args.direction)
    blocks = ["\n".join(f"({r},{c})" for r, c in single.cells(args.cols)) for single in perm.passes()]
    _emit("\n\n".join(blocks))
    return 0


def cmd_fuse(args, cfg: RunConfig) -> int:
    from .data.pnm import read_image, write_image
    from .experiment.models import PATCH, Batch, FusedModel, ModalityBatch, parameter_breakdown
    from .experiment.toytrain import filter_responses
    from .fusion.filters import normalize_minmax, to_gray

    optical, sar = to_gray(read_image(args.optical)), to_gray(read_image(args.sar))
    if optical.shape != sar.shape or optical.shape[0] != optical.shape[1]:
        raise InputError(f"fuse needs two square images of one size, got {optical.shape} and {sar.shape}")
    model = FusedModel(cfg, substream(cfg.seed, "fuse"))
    step = PATCH * 2 ** (max(model.levels) - 3)
    if optical.shape[0] % step:
        raise InputError(f"image side must be a multiple of {step}, got {optical.shape[0]}")
    batch = Batch(
        optical=ModalityBatch(optical[None], filter_responses(optical[None], cfg.filter_kind)),
        sar=ModalityBatch(sar[None], filter_responses(sar[None], cfg.filter_kind)),
        labels=np.zeros(1, dtype=np.intp),
    )
    pyramid_o = model.optical.pyramid(batch.optical, model.levels)
    pyramid_s = model.sar.pyramid(batch.sar, model.levels)
    levels = {}
    for level in model.levels:
        fused = model.fuse_level(level, pyramid_o[level], pyramid_s[level])
        levels[str(level)] = {
            "optical": _stats(pyramid_o[level]),
            "sar": _stats(pyramid_s[level]),
            "fused": _stats(fused),
        }
        if level == model.levels[0]:
            first = fused
    summary = {
        "filter": cfg.filter_kind,
        "scan": cfg.scan_kind,
        "levels": levels,
        "parameters": parameter_breakdown(model),
    }
    if args.out:
        write_image(args.out, normalize_minmax(first.data[0].mean(axis=-1)))
        summary["out"] = str(args.out)
    _emit(summary)
    return 0


def cmd_eval(args, cfg: RunConfig) -> int:
    from .data.detections import DetectionImporter
    from .data.labels import read_label_dir
    from .detection.evaluation import evaluate
    from .detection.nms import postprocess_detections
    from .export import plots
    from .export.report import Report, ReportGenerator, ReportSection, table_rows

    gts = read_label_dir(args.gt)
    dets = DetectionImporter.import_file(args.det)
    if args.nms is not None:
        dets = postprocess_detections(dets, args.nms)
    report = evaluate(dets, gts)
    _emit(report.to_json())
    if args.out_dir:
        defined = {k: v for k, v in report.ap50_per_class.items() if v is not None}
        ReportGenerator(include_pdf=args.pdf).export(args.out_dir, Report(
            name="evaluation",
            title="Oriented Detection Evaluation",
            payload=report.to_dict(),
            text=report.format_table(),
            sections=[ReportSection("AP50 per category", table_rows(
                ["category", "AP50"], list(report.ap50_per_class.items())))],
            charts={"ap50": lambda: plots.bar_chart(defined, "AP50 [%]", "AP50 per category")},
        ))
    return 0


def cmd_stats(args, cfg: RunConfig) -> int:
    from .data.labels import read_label_dir
    from .data.statistics import dataset_stats
    from .export import plots

    stats = dataset_stats(read_label_dir(args.labels), args.image_size)
    _emit(stats.to_dict() if args.json else stats.format_table())
    if args.svg_dir:
        out = Path(args.svg_dir)
        out.mkdir(parents=True, exist_ok=True)
        plots.save_svg(plots.angle_histogram(stats.angle_edges, stats.angle_counts), out / "angles.svg")
        plots.save_svg(plots.bar_chart(stats.percentages, "Instances [%]", "Instances per category"),
                       out / "categories.svg")
    return 0


def _pair_paths(directory: Path) -> List[tuple]:
    optical_dir, sar_dir = directory / "optical", directory / "sar"
    if not optical_dir.is_dir() or not sar_dir.is_dir():
        raise InputError(f"{directory} must contain optical/ and sar/ subdirectories")
    pairs = []
    for path in sorted(optical_dir.glob("*.p[gp]m")):
        partner = sar_dir / path.name
        if partner.exists():
            pairs.append((path, partner))
        else:
            logger.warning(f"No SAR partner for {path.name}")
    return pairs


def cmd_metrics(args, cfg: RunConfig) -> int:
    from .data.pnm import read_image
    from .data.similarity import aggregate_pair_metrics, feature_space_similarity, pair_metrics

    if args.dir:
        paths = _pair_paths(Path(args.dir))
        images = [(read_image(a), read_image(b)) for a, b in paths]
        result = aggregate_pair_metrics(images)
        if args.filters:
            per_pair = [feature_space_similarity(a, b) for a, b in images]
            result["feature_space"] = {k: float(np.mean([p[k] for p in per_pair])) for k in per_pair[0]}
    elif args.a and args.b:
        a, b = read_image(args.a), read_image(args.b)
        result = pair_metrics(a, b).to_dict()
        if args.filters:
            result["feature_space"] = feature_space_similarity(a, b)
    else:
        raise InputError("metrics needs two images or --dir")
    _emit(result)
    return 0


def cmd_gen(args, cfg: RunConfig) -> int:
    from .data.synthetic import generate_synthetic_pairs, write_dataset

    dataset = generate_synthetic_pairs(cfg, args.count)
    manifest = write_dataset(dataset, args.out, cfg)
    _emit({"out": str(args.out), "count": len(dataset), "manifest": str(manifest),
           "occluded_share": dataset.occluded_share()})
    return 0


def cmd_toytrain(args, cfg: RunConfig) -> int:
    from .experiment import ablation
    from .experiment.toytrain import control_config, run_seeds, toy_fusion_experiment
    from .export import plots
    from .export.report import Report, ReportGenerator, ReportSection, table_rows

    if args.control:
        cfg = control_config(cfg)
    generator = ReportGenerator(include_pdf=args.pdf)

    if args.area_sweep:
        args.ablation = "area"
    if args.ablation:
        runners = {
            "kinds": ablation.run_ablation,
            "area": ablation.run_area_sweep,
            "modules": ablation.run_module_ablation,
            "sequence": ablation.run_sequence_ablation,
            "alpha": ablation.run_alpha_sweep,
        }
        report = runners[args.ablation](cfg)
        name = {"kinds": "ablation", "area": "area_sweep"}.get(args.ablation, f"ablation_{args.ablation}")
        _emit(report.to_dict())
        if args.out_dir:
            charts = {axis: (lambda a=axis: plots.bar_chart(report.by_axis(a), "Accuracy [%]", f"Fused model by {a}"))
                      for axis in sorted({row.axis for row in report.rows})}
            generator.export(args.out_dir, Report(
                name=name, title="Fusion Ablation", payload=report.to_dict(), text=report.format_table(),
                sections=[ReportSection("Fused accuracy", table_rows(
                    ["axis", "value", "accuracy"], [[r.axis, r.value, r.accuracy] for r in report.rows]))],
                charts=charts,
            ))
        return 0

    if args.seeds > 1:
        summary = run_seeds(cfg, [cfg.seed + i for i in range(args.seeds)])
        _emit(summary.to_dict())
        if args.out_dir:
            payload = summary.to_dict()
            rows = [[s, r.margin] for s, r in zip(summary.seeds, summary.reports)]
            generator.export(args.out_dir, Report(
                name="seeds", title="Fusion Experiment Across Seeds", payload=payload,
                text=json.dumps(payload, indent=2, sort_keys=True),
                sections=[ReportSection("Margin per seed", table_rows(["seed", "margin"], rows))],
                charts={"margins": lambda: plots.bar_chart(
                    {str(s): m for s, m in zip(summary.seeds, summary.margins)}, "Margin [points]",
                    "Fused minus best single")},
            ))
        return 0

    kinds = [k.strip() for k in args.models.split(",") if k.strip()]
    report = toy_fusion_experiment(cfg, kinds=kinds)
    _emit(report.to_dict())
    if args.out_dir:
        rows = [[k, r.accuracy, r.parameters.get("total")] for k, r in report.results.items()]
        fused_parts = report.results["fused"].parameters if "fused" in report.results else {}
        generator.export(args.out_dir, Report(
            name="experiment", title="Fusion Experiment", payload=report.to_dict(),
            text=report.format_table(),
            sections=[
                ReportSection("Held-out accuracy", table_rows(["model", "accuracy", "parameters"], rows),
                              note=report.note),
                ReportSection("Fused parameter breakdown",
                              table_rows(["component", "count"], list(fused_parts.items()))),
            ],
            charts={"accuracy": lambda: plots.accuracy_curves(
                {k: r.test_curve for k, r in report.results.items()})},
        ))
    return 0


# ------------------------------------------------------------------ parser
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    common.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one configuration field (repeatable)")

    parser = _Parser(prog=APP_NAME, description=DESCRIPTION)
    parser.add_argument("--version", action="version", version=f"{APP_NAME} {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(COMMANDS) + "}")

    p = sub.add_parser("filter", parents=[common], help="handcrafted descriptor response of an image")
    p.add_argument("image", type=Path)
    p.add_argument("out", type=Path, nargs="?", help="write the response (or augmented image) here")
    p.add_argument("--kind", choices=FILTER_KINDS)
    p.add_argument("--alpha", type=float, help="write the augmented image with this residual weight")
    p.add_argument("--out", dest="out_flag", type=Path, metavar="OUT")
    p.set_defaults(handler=cmd_filter)

    p = sub.add_parser("scan", parents=[common], help="print a scan order as (row,col) lines")
    p.add_argument("--kind", choices=SCAN_KINDS)
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--direction", type=int, choices=range(8), metavar="0-7")
    p.add_argument("--vertical", action="store_true", help="scan the transposed grid")
    p.set_defaults(handler=cmd_scan)

    p = sub.add_parser("fuse", parents=[common], help="run the fusion pipeline on one image pair")
    p.add_argument("optical", type=Path)
    p.add_argument("sar", type=Path)
    p.add_argument("--out", type=Path)
    p.set_defaults(handler=cmd_fuse)

    p = sub.add_parser("eval", parents=[common], help="COCO-style evaluation of oriented detections")
    p.add_argument("--gt", type=Path, required=True, help="directory of label files")
    p.add_argument("--det", type=Path, required=True, help="detection file")
    p.add_argument("--nms", type=float, help="apply rotated NMS at this IoU first")
    p.add_argument("--out-dir", type=Path)
    p.add_argument("--pdf", action="store_true")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("stats", parents=[common], help="dataset statistics of a label directory")
    p.add_argument("--labels", type=Path, required=True)
    p.add_argument("--image-size", type=int, required=True)
    p.add_argument("--json", action="store_true")
    p.add_argument("--svg-dir", type=Path)
    p.set_defaults(handler=cmd_stats)

    p = sub.add_parser("metrics", parents=[common], help="MSE, SSIM and MI of image pairs")
    p.add_argument("a", type=Path, nargs="?")
    p.add_argument("b", type=Path, nargs="?")
    p.add_argument("--dir", type=Path, help="dataset with optical/ and sar/ subdirectories")
    p.add_argument("--filters", action="store_true", help="add SSIM after each descriptor")
    p.set_defaults(handler=cmd_metrics)

    p = sub.add_parser("gen", parents=[common], help="write the synthetic paired dataset")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--count", type=int)
    p.set_defaults(handler=cmd_gen)

    p = sub.add_parser("toytrain", parents=[common], help="fusion versus single-modality experiment")
    p.add_argument("--models", default="optical,sar,fused")
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--control", action="store_true", help="disable occlusion and speckle")
    p.add_argument("--ablation", nargs="?", const="kinds", choices=ABLATIONS,
                   help="sweep: filter and scan kinds (default), area block count, module on/off, "
                        "token sequence layout or fixed alpha")
    p.add_argument("--area-sweep", action="store_true", help="sweep the area block count")
    p.add_argument("--out-dir", type=Path)
    p.add_argument("--pdf", action="store_true")
    p.set_defaults(handler=cmd_toytrain)
    return parser


def run_command(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv`` and run one subcommand.

    Returns:
        0 on success, 1 on usage or input errors, 2 on internal errors
    """
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except UsageError as e:
        sys.stderr.write(f"{APP_NAME}: error: {e}\n")
        return 1
    except SystemExit as e:  # --help / --version
        return int(e.code or 0)
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return 1

    _configure_logging(args.verbose, args.quiet)
    try:
        cfg = RunConfig.load(args.config).with_overrides(parse_overrides(args.set)).validate()
        return args.handler(args, cfg)
    except (InputError, DimensionError, ContractError, DegeneracyError, OSError) as e:
        logger.error(str(e))
        return 1
    except Exception:
        logger.exception(f"Internal error while running '{args.command}'")
        return 2


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
