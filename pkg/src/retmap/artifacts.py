"""JSON artifact serialization for maps, grids, and comparisons.

Numeric arrays travel as base64-encoded little-endian binary with declared
shape and dtype, not per-point JSON numbers; the same encoding backs the
service payloads and the study output files.
"""

from __future__ import annotations

import base64
import json
from pathlib import Path

import numpy as np

from .attributes import AttributeKind, AttributeMap
from .errors import FormatError
from .geometry import EnFaceDomain
from .grids import grid_from_dict, grid_to_dict
from .stats import (
    CellComparison,
    ComparisonConfig,
    ComparisonMap,
    DeviationMap,
    Region,
)

ARTIFACT_SCHEMA_VERSION = 1


def encode_array(arr: np.ndarray) -> dict:
    arr = np.ascontiguousarray(arr)
    le = arr.dtype.newbyteorder("<")
    return {
        "dtype": le.str,
        "shape": list(arr.shape),
        "data_b64": base64.b64encode(arr.astype(le, copy=False).tobytes()).decode("ascii"),
    }


def decode_array(doc: dict) -> np.ndarray:
    raw = base64.b64decode(doc["data_b64"])
    arr = np.frombuffer(raw, dtype=np.dtype(doc["dtype"]))
    return arr.reshape(doc["shape"]).copy()


def domain_to_dict(domain: EnFaceDomain) -> dict:
    return {
        "width": domain.width,
        "n_bscans": domain.n_bscans,
        "res_lateral_um": domain.res_lateral,
        "res_bscan_um": domain.res_bscan,
        "fovea_ix": domain.fovea_ix,
        "fovea_iy": domain.fovea_iy,
        "eye": domain.eye,
    }


def domain_from_dict(doc: dict) -> EnFaceDomain:
    return EnFaceDomain(
        width=int(doc["width"]),
        n_bscans=int(doc["n_bscans"]),
        res_lateral=float(doc["res_lateral_um"]),
        res_bscan=float(doc["res_bscan_um"]),
        fovea_ix=float(doc["fovea_ix"]),
        fovea_iy=float(doc["fovea_iy"]),
        eye=str(doc["eye"]),
    )


def _kind_to_dict(kind: AttributeKind) -> dict:
    return {
        "name": kind.name,
        "boundary": kind.boundary,
        "stencil": kind.stencil,
        "normalize": kind.normalize,
    }


def _kind_from_dict(doc: dict) -> AttributeKind:
    return AttributeKind(
        name=doc["name"],
        boundary=doc.get("boundary", "upper"),
        stencil=int(doc.get("stencil", 1)),
        normalize=bool(doc.get("normalize", True)),
    )


def attribute_map_to_dict(amap: AttributeMap) -> dict:
    return {
        "artifact": "attribute_map",
        "schema_version": ARTIFACT_SCHEMA_VERSION,
        "layer": amap.layer_id,
        "kind": _kind_to_dict(amap.kind),
        "unit": amap.unit,
        "domain": domain_to_dict(amap.domain),
        "values": encode_array(amap.values),
    }


def attribute_map_from_dict(doc: dict) -> AttributeMap:
    return AttributeMap(
        layer_id=int(doc["layer"]),
        kind=_kind_from_dict(doc["kind"]),
        values=decode_array(doc["values"]),
        domain=domain_from_dict(doc["domain"]),
    )


def deviation_map_to_dict(dev: DeviationMap) -> dict:
    return {
        "artifact": "deviation_map",
        "schema_version": ARTIFACT_SCHEMA_VERSION,
        "domain": domain_to_dict(dev.domain),
        "z": encode_array(dev.z),
        "flags": encode_array(dev.flags),
    }


def deviation_map_from_dict(doc: dict) -> DeviationMap:
    return DeviationMap(
        domain=domain_from_dict(doc["domain"]),
        z=decode_array(doc["z"]),
        flags=decode_array(doc["flags"]),
    )


def config_to_dict(config: ComparisonConfig) -> dict:
    return {
        "test": config.test,
        "alpha": config.alpha,
        "correction": config.correction,
        "min_group": config.min_group,
    }


def config_from_dict(doc: dict) -> ComparisonConfig:
    return ComparisonConfig(
        test=doc["test"],
        alpha=float(doc["alpha"]),
        correction=doc["correction"],
        min_group=int(doc.get("min_group", 3)),
    )


def region_to_dict(region: Region) -> dict:
    return {
        "id": region.id,
        "points": encode_array(region.points.astype(np.int32)),
        "n_points": region.n_points,
        "area_mm2": region.area_mm2,
        "centroid_mm": list(region.centroid_mm),
        "mean_diff": region.mean_diff,
        "min_p": region.min_p,
        "outlines": [[list(pt) for pt in poly] for poly in region.outlines],
    }


def region_from_dict(doc: dict) -> Region:
    return Region(
        id=int(doc["id"]),
        points=decode_array(doc["points"]).astype(np.int64),
        area_mm2=float(doc["area_mm2"]),
        centroid_mm=(float(doc["centroid_mm"][0]), float(doc["centroid_mm"][1])),
        mean_diff=float(doc["mean_diff"]),
        min_p=float(doc["min_p"]),
        outlines=tuple(
            tuple((float(x), float(y)) for x, y in poly) for poly in doc["outlines"]
        ),
    )


def _cell_record_to_dict(rec: CellComparison) -> dict:
    return {
        "cell_id": rec.cell_id,
        "n_p": rec.n_p,
        "n_c": rec.n_c,
        "mean_p": rec.mean_p,
        "mean_c": rec.mean_c,
        "diff": rec.diff,
        "p": rec.p,
        "d": rec.d,
        "significant": rec.significant,
        "tested": rec.tested,
    }


def _cell_record_from_dict(doc: dict) -> CellComparison:
    return CellComparison(
        cell_id=doc["cell_id"],
        n_p=int(doc["n_p"]),
        n_c=int(doc["n_c"]),
        mean_p=doc["mean_p"],
        mean_c=doc["mean_c"],
        diff=doc["diff"],
        p=doc["p"],
        d=doc["d"],
        significant=bool(doc["significant"]),
        tested=bool(doc["tested"]),
    )


def comparison_to_dict(cmp: ComparisonMap, regions: list[Region] | None = None) -> dict:
    doc = {
        "artifact": "comparison_map",
        "schema_version": ARTIFACT_SCHEMA_VERSION,
        "mode": cmp.mode,
        "domain": domain_to_dict(cmp.domain),
        "config": config_to_dict(cmp.config),
    }
    if cmp.mode == "point":
        doc["diff"] = encode_array(cmp.diff)
        doc["p"] = encode_array(cmp.p)
        doc["d"] = encode_array(cmp.d)
        doc["significant"] = encode_array(cmp.significant.astype(np.uint8))
        doc["tested"] = encode_array(cmp.tested.astype(np.uint8))
        if regions is not None:
            doc["regions"] = [region_to_dict(r) for r in regions]
    else:
        doc["cells"] = [_cell_record_to_dict(r) for r in cmp.cells]
        if cmp.grid is not None:
            doc["grid"] = grid_to_dict(cmp.grid)
    return doc


def comparison_from_dict(doc: dict) -> tuple[ComparisonMap, list[Region]]:
    domain = domain_from_dict(doc["domain"])
    config = config_from_dict(doc["config"])
    if doc["mode"] == "point":
        cmp = ComparisonMap(
            mode="point",
            domain=domain,
            config=config,
            diff=decode_array(doc["diff"]),
            p=decode_array(doc["p"]),
            d=decode_array(doc["d"]),
            significant=decode_array(doc["significant"]).astype(bool),
            tested=decode_array(doc["tested"]).astype(bool),
        )
        regions = [region_from_dict(r) for r in doc.get("regions", [])]
        return cmp, regions
    cmp = ComparisonMap(
        mode="cell",
        domain=domain,
        config=config,
        cells=tuple(_cell_record_from_dict(r) for r in doc["cells"]),
        grid=grid_from_dict(doc["grid"]) if "grid" in doc else None,
    )
    return cmp, []


def save_artifact(doc: dict, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_artifact(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"artifact file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot parse artifact {path}: {exc}") from exc
    if "artifact" not in doc:
        raise FormatError(f"{path} is not an artifact document")
    return doc
