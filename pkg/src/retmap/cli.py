"""Command-line interface: `study run|render|synth|info`.

Exit codes: 0 ok, 2 validation failure, 3 insufficient data, 4 I/O error.
Validation failures print a machine-readable JSON error list on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .artifacts import (
    attribute_map_from_dict,
    comparison_from_dict,
    deviation_map_from_dict,
    load_artifact,
)
from .attributes import AttributeKind
from .dataset import load_dataset, save_dataset
from .errors import (
    CohortSpecError,
    FormatError,
    InsufficientDataError,
    RetmapError,
    ValidationError,
)
from .render import (
    render_attribute_map,
    render_comparison_cells,
    render_comparison_points,
    render_deviation_map,
    save_png,
)
from .study import StudyConfig, run_study
from .synthetic import generate_synthetic_cohort, load_cohort_spec

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INSUFFICIENT = 3
EXIT_IO = 4


def _fail(code: int, errors: list[str]) -> int:
    print(json.dumps({"errors": errors}), file=sys.stderr)
    return code


def _parse_range(text: str | None) -> tuple[float, float] | None:
    if text is None:
        return None
    try:
        lo, hi = (float(p) for p in text.split(","))
    except ValueError:
        raise ValueError(f"--range expects 'lo,hi', got {text!r}") from None
    return (lo, hi)


def cmd_run(args) -> int:
    try:
        config = StudyConfig(
            patients_dir=args.patients,
            controls_dir=args.controls,
            layers=tuple(args.layer),
            attributes=tuple(AttributeKind.parse(a) for a in args.attribute),
            out_dir=args.out,
            mode=args.mode,
            test=args.test,
            alpha=args.alpha,
            correction=args.correction,
            sd_threshold=args.sd_threshold,
            max_depth=args.max_depth,
            palette=args.palette or "auto",
            value_range=_parse_range(args.range),
        )
        report = run_study(config)
    except InsufficientDataError as exc:
        return _fail(EXIT_INSUFFICIENT, [str(exc)])
    except (ValidationError, ValueError, CohortSpecError) as exc:
        return _fail(EXIT_VALIDATION, getattr(exc, "issues", [str(exc)]))
    except (FormatError, OSError) as exc:
        return _fail(EXIT_IO, [str(exc)])
    print(f"study written to {report.out_dir} ({len(report.files)} files)")
    for m in report.metrics:
        parts = [f"layer {m['layer']} {m['attribute']}:"]
        if "n_significant_cells" in m:
            parts.append(f"{m['n_significant_cells']}/{m['n_cells']} significant cells")
        if "n_significant_points" in m:
            parts.append(
                f"{m['n_significant_points']} significant points in "
                f"{m['n_regions']} regions ({m['significant_area_mm2']:.3f} mm2)"
            )
        print("  " + " ".join(parts))
    return EXIT_OK


def cmd_render(args) -> int:
    try:
        doc = load_artifact(args.artifact)
        kind = doc.get("artifact")
        value_range = _parse_range(args.range)
        if kind == "attribute_map":
            amap = attribute_map_from_dict(doc)
            palette = args.palette or "sequential"
            rgb = render_attribute_map(amap, value_range, palette=palette)
        elif kind == "deviation_map":
            rgb = render_deviation_map(deviation_map_from_dict(doc))
        elif kind == "comparison_map":
            cmp, regions = comparison_from_dict(doc)
            if cmp.mode == "point":
                rgb = render_comparison_points(cmp, regions, value_range)
            else:
                rgb = render_comparison_cells(cmp, value_range=value_range)
        else:
            return _fail(EXIT_VALIDATION, [f"cannot render artifact kind {kind!r}"])
        save_png(rgb, args.out)
    except (ValidationError, ValueError) as exc:
        return _fail(EXIT_VALIDATION, [str(exc)])
    except (FormatError, OSError) as exc:
        return _fail(EXIT_IO, [str(exc)])
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        spec = load_cohort_spec(args.spec)
        datasets = generate_synthetic_cohort(spec, seed=args.seed)
        out = Path(args.out)
        for ds in datasets:
            save_dataset(ds, out / ds.id)
    except CohortSpecError as exc:
        return _fail(EXIT_VALIDATION, [str(exc)])
    except (FormatError, OSError) as exc:
        return _fail(EXIT_IO, [str(exc)])
    print(f"wrote {len(datasets)} datasets to {out}")
    return EXIT_OK


def cmd_info(args) -> int:
    try:
        ds = load_dataset(args.dataset)
    except (ValidationError,) as exc:
        return _fail(EXIT_VALIDATION, exc.issues)
    except (FormatError, OSError) as exc:
        return _fail(EXIT_IO, [str(exc)])
    geo = ds.geometry
    print(f"dataset {ds.id} ({geo.eye} eye)")
    print(
        f"  lattice {geo.width} x {geo.n_bscans} x {geo.bscan_height} px, "
        f"resolution {geo.res_lateral} x {geo.res_bscan} x {geo.res_axial} um/px"
    )
    print(f"  fovea at (ix={geo.fovea_ix}, iy={geo.fovea_iy})")
    if ds.group_label:
        print(f"  group: {ds.group_label}")
    print(f"  volume: {'present' if ds.volume is not None else 'absent'}")
    print(f"  {ds.segmentation.n_layers} layers, {ds.segmentation.n_boundaries} boundaries:")
    for k, surf in enumerate(ds.segmentation.boundaries):
        names = ds.segmentation.layer_names
        label = f"(top of {names[k]})" if k < len(names) else "(bottom)"
        print(f"    boundary {k:2d} {label:16s} coverage {100.0 * surf.coverage:6.2f}%")
    for w in ds.warnings:
        print(f"  warning: {w}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="study",
        description="Retinal OCT layer analytics: synthetic cohorts, attribute maps, "
        "adaptive grids, and group comparisons.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a cross-sectional study evaluation")
    run.add_argument("--patients", required=True, help="patient cohort directory")
    run.add_argument("--controls", required=True, help="control cohort directory")
    run.add_argument("--layer", type=int, action="append", required=True,
                     help="layer index (repeatable)")
    run.add_argument("--attribute", action="append", required=True,
                     help="attribute selector, e.g. thickness, curvature:lower")
    run.add_argument("--mode", choices=("map", "grid", "both"), default="both")
    run.add_argument("--test", choices=("welch_t", "mann_whitney_u"),
                     default="welch_t")
    run.add_argument("--alpha", type=float, default=0.05)
    run.add_argument("--correction",
                     choices=("none", "bonferroni", "benjamini_hochberg"),
                     default=None,
                     help="default: benjamini_hochberg per point, none per cell")
    run.add_argument("--sd-threshold", type=float, default=10.0)
    run.add_argument("--max-depth", type=int, default=4)
    run.add_argument("--out", required=True)
    run.add_argument("--palette", choices=("auto", "sequential", "diverging"),
                     default=None, help="palette for the attribute-map images")
    run.add_argument("--range", default=None, help="value range 'lo,hi' for images")
    run.set_defaults(func=cmd_run)

    render = sub.add_parser("render", help="render a serialized artifact to PNG")
    render.add_argument("artifact", help="artifact JSON file")
    render.add_argument("--palette", choices=("sequential", "diverging"), default=None)
    render.add_argument("--range", default=None, help="value range 'lo,hi'")
    render.add_argument("--out", required=True)
    render.set_defaults(func=cmd_render)

    synth = sub.add_parser("synth", help="generate a synthetic cohort")
    synth.add_argument("spec", help="cohort spec JSON file")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out", required=True)
    synth.set_defaults(func=cmd_synth)

    info = sub.add_parser("info", help="describe a dataset directory")
    info.add_argument("dataset", help="dataset directory")
    info.set_defaults(func=cmd_info)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RetmapError as exc:  # uncategorized library error
        return _fail(EXIT_VALIDATION, [str(exc)])


if __name__ == "__main__":
    sys.exit(main())
