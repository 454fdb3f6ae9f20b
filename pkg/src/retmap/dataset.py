"""Dataset container and its on-disk format.

A dataset directory holds:
  meta.json       acquisition metadata, layer names, cohort tag
  boundaries.f32  little-endian float32, layout [boundary][bscan][x]
  volume.u8       optional raw intensities, layout [bscan][row][x]

Invalid segmentation points are NaN in the float arrays.  Boundary
surfaces are axial positions in pixels, ordered top to bottom.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError
from .geometry import AcquisitionGeometry

SCHEMA_VERSION = 1
META_NAME = "meta.json"
BOUNDARIES_NAME = "boundaries.f32"
VOLUME_NAME = "volume.u8"


@dataclass(frozen=True)
class BoundarySurface:
    """One segmented boundary: axial position (px) per en-face point."""

    values: np.ndarray  # float32 [n_bscans, width], NaN = invalid

    @property
    def valid_mask(self) -> np.ndarray:
        return np.isfinite(self.values)

    @property
    def coverage(self) -> float:
        return float(np.mean(self.valid_mask))


@dataclass(frozen=True)
class Segmentation:
    boundaries: tuple[BoundarySurface, ...]
    layer_names: tuple[str, ...]

    @property
    def n_boundaries(self) -> int:
        return len(self.boundaries)

    @property
    def n_layers(self) -> int:
        return len(self.layer_names)

    def layer_bounds(self, layer_id: int) -> tuple[BoundarySurface, BoundarySurface]:
        """Upper and lower boundary of one layer."""
        if not 0 <= layer_id < self.n_layers:
            raise IndexError(f"layer_id {layer_id} out of range [0, {self.n_layers})")
        return self.boundaries[layer_id], self.boundaries[layer_id + 1]


@dataclass(frozen=True)
class Dataset:
    """One eye's examination: geometry, segmentation, optional volume."""

    id: str
    geometry: AcquisitionGeometry
    segmentation: Segmentation
    volume: np.ndarray | None = None  # uint8 [n_bscans, bscan_height, width]
    group_label: str | None = None
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        if (self.id, self.geometry, self.group_label) != (
            other.id,
            other.geometry,
            other.group_label,
        ):
            return False
        if self.segmentation.layer_names != other.segmentation.layer_names:
            return False
        if self.segmentation.n_boundaries != other.segmentation.n_boundaries:
            return False
        for a, b in zip(self.segmentation.boundaries, other.segmentation.boundaries):
            if not np.array_equal(a.values, b.values, equal_nan=True):
                return False
        if (self.volume is None) != (other.volume is None):
            return False
        if self.volume is not None and not np.array_equal(self.volume, other.volume):
            return False
        return True


def _check_boundary_ordering(boundaries: tuple[BoundarySurface, ...]) -> None:
    """Boundary k must not lie below boundary k+1 where both are valid."""
    for k in range(len(boundaries) - 1):
        upper = boundaries[k].values
        lower = boundaries[k + 1].values
        with np.errstate(invalid="ignore"):
            bad = (lower - upper) < 0
        if bad.any():
            iy, ix = np.argwhere(bad)[0]
            raise ValidationError(
                f"boundary ordering violated for layer {k}: boundary {k} is below "
                f"boundary {k + 1} at (ix={int(ix)}, iy={int(iy)})"
            )


def _check_boundary_range(boundaries: tuple[BoundarySurface, ...], bscan_height: int) -> None:
    for k, surf in enumerate(boundaries):
        v = surf.values
        with np.errstate(invalid="ignore"):
            bad = np.isfinite(v) & ((v < 0) | (v > bscan_height))
        if bad.any():
            iy, ix = np.argwhere(bad)[0]
            raise ValidationError(
                f"boundary {k} value {float(v[iy, ix]):.3f} outside "
                f"[0, {bscan_height}] at (ix={int(ix)}, iy={int(iy)})"
            )


def validate_dataset(dataset: Dataset) -> list[str]:
    """Check all dataset invariants; returns soft warnings, raises on violation."""
    warnings = dataset.geometry.validate()
    geo = dataset.geometry
    seg = dataset.segmentation
    if seg.n_boundaries != seg.n_layers + 1:
        raise ValidationError(
            f"expected {seg.n_layers + 1} boundaries for {seg.n_layers} layers, "
            f"found {seg.n_boundaries}"
        )
    expected = (geo.n_bscans, geo.width)
    for k, surf in enumerate(seg.boundaries):
        if surf.values.shape != expected:
            raise ValidationError(
                f"boundary {k} shape {surf.values.shape} does not match geometry {expected}"
            )
    _check_boundary_range(seg.boundaries, geo.bscan_height)
    _check_boundary_ordering(seg.boundaries)
    if dataset.volume is not None:
        vexp = (geo.n_bscans, geo.bscan_height, geo.width)
        if dataset.volume.shape != vexp:
            raise ValidationError(
                f"volume shape {dataset.volume.shape} does not match geometry {vexp}"
            )
    return warnings


def save_dataset(dataset: Dataset, path: str | Path) -> Path:
    """Write a dataset directory in the documented format."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    geo = dataset.geometry
    meta = {
        "schema_version": SCHEMA_VERSION,
        "id": dataset.id,
        "eye": geo.eye,
        "width": geo.width,
        "n_bscans": geo.n_bscans,
        "bscan_height": geo.bscan_height,
        "res_axial_um": geo.res_axial,
        "res_lateral_um": geo.res_lateral,
        "res_bscan_um": geo.res_bscan,
        "fovea_ix": geo.fovea_ix,
        "fovea_iy": geo.fovea_iy,
        "layer_names": list(dataset.segmentation.layer_names),
        "group_label": dataset.group_label,
    }
    (path / META_NAME).write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    stack = np.stack(
        [b.values.astype("<f4", copy=False) for b in dataset.segmentation.boundaries]
    )
    (path / BOUNDARIES_NAME).write_bytes(stack.tobytes())
    if dataset.volume is not None:
        (path / VOLUME_NAME).write_bytes(
            dataset.volume.astype(np.uint8, copy=False).tobytes()
        )
    return path


_META_REQUIRED = (
    "schema_version", "id", "eye", "width", "n_bscans", "bscan_height",
    "res_axial_um", "res_lateral_um", "res_bscan_um", "fovea_ix", "fovea_iy",
    "layer_names",
)


def load_dataset(path: str | Path) -> Dataset:
    """Load and fully validate a dataset directory.

    Raises FormatError for missing/corrupt files and ValidationError for
    invariant violations (shape mismatch, boundary ordering, geometry).
    """
    path = Path(path)
    meta_path = path / META_NAME
    if not meta_path.is_file():
        raise FormatError(f"missing metadata file: {meta_path}")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot parse {meta_path}: {exc}") from exc
    missing = [k for k in _META_REQUIRED if k not in meta]
    if missing:
        raise FormatError(f"{meta_path} is missing keys: {', '.join(missing)}")

    geometry = AcquisitionGeometry(
        width=int(meta["width"]),
        n_bscans=int(meta["n_bscans"]),
        bscan_height=int(meta["bscan_height"]),
        res_axial=float(meta["res_axial_um"]),
        res_lateral=float(meta["res_lateral_um"]),
        res_bscan=float(meta["res_bscan_um"]),
        fovea_ix=float(meta["fovea_ix"]),
        fovea_iy=float(meta["fovea_iy"]),
        eye=str(meta["eye"]),
    )
    layer_names = tuple(str(n) for n in meta["layer_names"])
    n_boundaries = len(layer_names) + 1

    bnd_path = path / BOUNDARIES_NAME
    if not bnd_path.is_file():
        raise FormatError(f"missing boundaries file: {bnd_path}")
    raw = bnd_path.read_bytes()
    expected_bytes = 4 * n_boundaries * geometry.n_bscans * geometry.width
    if len(raw) != expected_bytes:
        raise ValidationError(
            f"{bnd_path}: expected {expected_bytes} bytes "
            f"({n_boundaries} boundaries x {geometry.n_bscans} x {geometry.width} "
            f"float32), found {len(raw)}"
        )
    stack = np.frombuffer(raw, dtype="<f4").reshape(
        n_boundaries, geometry.n_bscans, geometry.width
    )
    boundaries = tuple(BoundarySurface(values=stack[k].copy()) for k in range(n_boundaries))

    volume = None
    vol_path = path / VOLUME_NAME
    if vol_path.is_file():
        vraw = vol_path.read_bytes()
        vexp = geometry.n_bscans * geometry.bscan_height * geometry.width
        if len(vraw) != vexp:
            raise ValidationError(
                f"{vol_path}: expected {vexp} bytes, found {len(vraw)}"
            )
        volume = np.frombuffer(vraw, dtype=np.uint8).reshape(
            geometry.n_bscans, geometry.bscan_height, geometry.width
        ).copy()

    dataset = Dataset(
        id=str(meta["id"]),
        geometry=geometry,
        segmentation=Segmentation(boundaries=boundaries, layer_names=layer_names),
        volume=volume,
        group_label=meta.get("group_label"),
    )
    warnings = validate_dataset(dataset)
    return Dataset(
        id=dataset.id,
        geometry=dataset.geometry,
        segmentation=dataset.segmentation,
        volume=dataset.volume,
        group_label=dataset.group_label,
        warnings=tuple(warnings),
    )


def load_cohort(path: str | Path) -> list[Dataset]:
    """Load every dataset directory found directly under `path`, sorted by name."""
    path = Path(path)
    if not path.is_dir():
        raise FormatError(f"cohort directory not found: {path}")
    out = []
    for sub in sorted(p for p in path.iterdir() if p.is_dir()):
        if (sub / META_NAME).is_file():
            out.append(load_dataset(sub))
    return out
