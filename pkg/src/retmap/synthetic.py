"""Synthetic cohort generator.

Builds datasets with known ground truth: per-layer thickness fields are
assembled as base thickness + per-dataset smooth undulation + per-point
Gaussian noise + hard-disc defect bumps, then stacked into boundary
surfaces below a smooth top surface.  Thickness is clamped to a small
positive floor so the boundary ordering invariant holds by construction.

Everything is a pure function of (spec, seed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import BoundarySurface, Dataset, Segmentation, validate_dataset
from .errors import CohortSpecError
from .geometry import AcquisitionGeometry, lattice_positions_mm

DEFAULT_LAYER_NAMES = (
    "RNFL", "GCL", "IPL", "INL", "OPL", "ONL", "MZ", "EZ", "OS", "IZ", "RPE",
)

MIN_THICKNESS_UM = 0.1

# Intensity levels used to fill the optional volume, one per layer.
BACKGROUND_INTENSITY = 20


def layer_intensity(layer_id: int) -> int:
    return 60 + 12 * (layer_id % 12)


@dataclass(frozen=True)
class DefectSpec:
    """A hard-disc thickness change on one layer.

    center_mm is (x, y) relative to the fovea in the nasal-normalized
    physical frame; delta_um is added inside the disc.
    """

    center_mm: tuple[float, float]
    radius_mm: float
    layer: int
    delta_um: float


@dataclass(frozen=True)
class CohortSpec:
    n_datasets: int
    geometry: AcquisitionGeometry
    base_thickness_um: tuple[float, ...]
    undulation_amplitude_um: float = 0.0
    noise_sd_um: float = 0.0
    defects: tuple[DefectSpec, ...] = ()
    layer_names: tuple[str, ...] | None = None
    group_label: str | None = None
    id_prefix: str = "synthetic"
    top_margin_um: float = 140.0
    base_surface_amplitude_um: float = 10.0
    with_volume: bool = False

    def resolved_layer_names(self) -> tuple[str, ...]:
        if self.layer_names is not None:
            return self.layer_names
        n = len(self.base_thickness_um)
        if n == len(DEFAULT_LAYER_NAMES):
            return DEFAULT_LAYER_NAMES
        return tuple(f"layer{i}" for i in range(n))


def _validate_spec(spec: CohortSpec) -> None:
    if spec.n_datasets < 1:
        raise CohortSpecError(f"n_datasets must be >= 1, got {spec.n_datasets}")
    if len(spec.base_thickness_um) < 1:
        raise CohortSpecError("at least one layer thickness required")
    for i, t in enumerate(spec.base_thickness_um):
        if not t > 0:
            raise CohortSpecError(f"layer {i} base thickness must be > 0, got {t}")
    names = spec.resolved_layer_names()
    if len(names) != len(spec.base_thickness_um):
        raise CohortSpecError(
            f"{len(names)} layer names for {len(spec.base_thickness_um)} thicknesses"
        )
    n_layers = len(spec.base_thickness_um)
    for d in spec.defects:
        if not 0 <= d.layer < n_layers:
            raise CohortSpecError(f"defect layer {d.layer} out of range [0, {n_layers})")
        if not d.radius_mm > 0:
            raise CohortSpecError(f"defect radius must be > 0, got {d.radius_mm}")
    # Deterministic floor: base + all overlapping defect deltas must stay positive.
    for layer in range(n_layers):
        floor = spec.base_thickness_um[layer] + sum(
            min(d.delta_um, 0.0) for d in spec.defects if d.layer == layer
        )
        if floor <= 0:
            raise CohortSpecError(
                f"defects drive layer {layer} thickness to {floor:.3f} um (must stay > 0)"
            )


def defect_mask(defect: DefectSpec, geometry: AcquisitionGeometry) -> np.ndarray:
    """Lattice points whose physical position lies in the defect disc."""
    x, y = lattice_positions_mm(geometry.enface_domain())
    cx, cy = defect.center_mm
    return (x - cx) ** 2 + (y - cy) ** 2 <= defect.radius_mm**2


def _undulation(rng: np.random.Generator, shape: tuple[int, int], amplitude: float) -> np.ndarray:
    """Smooth per-dataset random field: one low-frequency sinusoid."""
    if amplitude == 0.0:
        return np.zeros(shape)
    fy, fx = rng.uniform(0.5, 2.0, size=2)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    yy = np.linspace(0.0, 1.0, shape[0])[:, None]
    xx = np.linspace(0.0, 1.0, shape[1])[None, :]
    return amplitude * np.sin(2.0 * np.pi * (fx * xx + fy * yy) + phase)


def _base_top_surface(spec: CohortSpec) -> np.ndarray:
    """Smooth cohort-level top boundary (axial µm); same for every dataset."""
    geo = spec.geometry
    yy = np.linspace(0.0, 1.0, geo.n_bscans)[:, None]
    xx = np.linspace(0.0, 1.0, geo.width)[None, :]
    wave = np.sin(2.0 * np.pi * xx) * np.cos(np.pi * yy)
    return spec.top_margin_um + spec.base_surface_amplitude_um * (1.0 + wave)


def _fill_volume(
    boundaries_px: np.ndarray, geometry: AcquisitionGeometry
) -> np.ndarray:
    """Fill each layer with a constant intensity between its boundaries."""
    n_b = boundaries_px.shape[0]
    rows = np.arange(geometry.bscan_height, dtype=np.float64)[None, :, None]
    volume = np.full(
        (geometry.n_bscans, geometry.bscan_height, geometry.width),
        BACKGROUND_INTENSITY,
        dtype=np.uint8,
    )
    for layer in range(n_b - 1):
        upper = boundaries_px[layer][:, None, :]
        lower = boundaries_px[layer + 1][:, None, :]
        inside = (rows >= np.ceil(upper)) & (rows < np.ceil(lower))
        volume[inside] = layer_intensity(layer)
    return volume


def generate_synthetic_cohort(spec: CohortSpec, seed: int) -> list[Dataset]:
    """Generate `spec.n_datasets` validated datasets, deterministic in (spec, seed)."""
    _validate_spec(spec)
    geo = spec.geometry
    geo.validate()
    names = spec.resolved_layer_names()
    n_layers = len(spec.base_thickness_um)
    shape = (geo.n_bscans, geo.width)

    top_um = _base_top_surface(spec)
    defect_fields = np.zeros((n_layers,) + shape)
    for d in spec.defects:
        defect_fields[d.layer][defect_mask(d, geo)] += d.delta_um

    rng = np.random.default_rng(seed)
    datasets = []
    for k in range(spec.n_datasets):
        boundaries_um = np.empty((n_layers + 1,) + shape)
        boundaries_um[0] = top_um
        for layer in range(n_layers):
            thickness = (
                spec.base_thickness_um[layer]
                + _undulation(rng, shape, spec.undulation_amplitude_um)
                + defect_fields[layer]
            )
            if spec.noise_sd_um > 0:
                thickness = thickness + rng.normal(0.0, spec.noise_sd_um, size=shape)
            np.maximum(thickness, MIN_THICKNESS_UM, out=thickness)
            boundaries_um[layer + 1] = boundaries_um[layer] + thickness

        boundaries_px = boundaries_um / geo.res_axial
        max_px = float(boundaries_px[-1].max())
        if max_px > geo.bscan_height:
            raise CohortSpecError(
                f"stacked boundaries reach {max_px:.1f} px but bscan_height is "
                f"{geo.bscan_height}; increase bscan_height or reduce thicknesses"
            )
        surfaces = tuple(
            BoundarySurface(values=boundaries_px[b].astype("<f4"))
            for b in range(n_layers + 1)
        )
        volume = None
        if spec.with_volume:
            stack = np.stack([s.values.astype(np.float64) for s in surfaces])
            volume = _fill_volume(stack, geo)
        ds = Dataset(
            id=f"{spec.id_prefix}-{k:03d}",
            geometry=geo,
            segmentation=Segmentation(boundaries=surfaces, layer_names=names),
            volume=volume,
            group_label=spec.group_label,
        )
        warnings = validate_dataset(ds)
        datasets.append(
            Dataset(
                id=ds.id,
                geometry=ds.geometry,
                segmentation=ds.segmentation,
                volume=ds.volume,
                group_label=ds.group_label,
                warnings=tuple(warnings),
            )
        )
    return datasets


def _geometry_from_dict(d: dict) -> AcquisitionGeometry:
    return AcquisitionGeometry(
        width=int(d["width"]),
        n_bscans=int(d["n_bscans"]),
        bscan_height=int(d["bscan_height"]),
        res_axial=float(d["res_axial_um"]),
        res_lateral=float(d["res_lateral_um"]),
        res_bscan=float(d["res_bscan_um"]),
        fovea_ix=float(d["fovea_ix"]),
        fovea_iy=float(d["fovea_iy"]),
        eye=str(d.get("eye", "right")),
    )


def cohort_spec_from_dict(d: dict) -> CohortSpec:
    """Parse a cohort spec document (the `study synth` input file)."""
    try:
        defects = tuple(
            DefectSpec(
                center_mm=(float(x["center_mm"][0]), float(x["center_mm"][1])),
                radius_mm=float(x["radius_mm"]),
                layer=int(x["layer"]),
                delta_um=float(x["delta_um"]),
            )
            for x in d.get("defects", ())
        )
        spec = CohortSpec(
            n_datasets=int(d["n_datasets"]),
            geometry=_geometry_from_dict(d["geometry"]),
            base_thickness_um=tuple(float(t) for t in d["base_thickness_um"]),
            undulation_amplitude_um=float(d.get("undulation_amplitude_um", 0.0)),
            noise_sd_um=float(d.get("noise_sd_um", 0.0)),
            defects=defects,
            layer_names=tuple(d["layer_names"]) if "layer_names" in d else None,
            group_label=d.get("group_label"),
            id_prefix=str(d.get("id_prefix", "synthetic")),
            with_volume=bool(d.get("with_volume", False)),
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise CohortSpecError(f"bad cohort spec: {exc}") from exc
    _validate_spec(spec)
    return spec


def load_cohort_spec(path: str | Path) -> CohortSpec:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CohortSpecError(f"cannot read cohort spec {path}: {exc}") from exc
    return cohort_spec_from_dict(doc)
