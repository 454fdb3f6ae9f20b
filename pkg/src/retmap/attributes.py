"""Per-point 2D attribute maps of retinal layers.

Each attribute reduces the 3D layer geometry to one scalar per en-face
lattice point.  Invalid inputs (NaN boundaries, missing stencil
neighbors, zero-thickness columns) yield invalid (NaN) output points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import BoundarySurface, Dataset, Segmentation
from .errors import CapabilityError
from .geometry import AcquisitionGeometry, EnFaceDomain

THICKNESS = "thickness"
CURVATURE = "curvature"
MEAN_REFLECTIVITY = "mean_reflectivity"

_UNITS = {THICKNESS: "um", CURVATURE: "1/mm", MEAN_REFLECTIVITY: "intensity"}


@dataclass(frozen=True)
class AttributeKind:
    """An attribute selector plus its parameters.

    curvature applies to one boundary of the layer ("upper" or "lower")
    with a configurable finite-difference stencil spacing (lattice steps);
    mean_reflectivity optionally skips the /255 normalization.
    """

    name: str
    boundary: str = "upper"
    stencil: int = 1
    normalize: bool = True

    def __post_init__(self):
        if self.name not in _UNITS:
            raise ValueError(f"unknown attribute kind {self.name!r}")
        if self.boundary not in ("upper", "lower"):
            raise ValueError(f"boundary must be 'upper' or 'lower', got {self.boundary!r}")
        if self.stencil < 1:
            raise ValueError(f"stencil spacing must be >= 1, got {self.stencil}")

    @property
    def unit(self) -> str:
        if self.name == MEAN_REFLECTIVITY and not self.normalize:
            return "intensity8"
        return _UNITS[self.name]

    @property
    def label(self) -> str:
        if self.name == CURVATURE and self.boundary != "upper":
            return f"{self.name}:{self.boundary}"
        return self.name

    @classmethod
    def thickness(cls) -> "AttributeKind":
        return cls(name=THICKNESS)

    @classmethod
    def curvature(cls, boundary: str = "upper", stencil: int = 1) -> "AttributeKind":
        return cls(name=CURVATURE, boundary=boundary, stencil=stencil)

    @classmethod
    def mean_reflectivity(cls, normalize: bool = True) -> "AttributeKind":
        return cls(name=MEAN_REFLECTIVITY, normalize=normalize)

    @classmethod
    def parse(cls, text: str) -> "AttributeKind":
        """Parse CLI-style selectors: "thickness", "curvature", "curvature:lower"."""
        parts = text.split(":")
        name = parts[0]
        if name == CURVATURE and len(parts) == 2:
            return cls.curvature(boundary=parts[1])
        if len(parts) != 1:
            raise ValueError(f"cannot parse attribute selector {text!r}")
        return cls(name=name)


@dataclass(frozen=True)
class AttributeMap:
    """2D scalar field of one attribute of one layer; NaN marks invalid points."""

    layer_id: int
    kind: AttributeKind
    values: np.ndarray  # float64 [n_bscans, width]
    domain: EnFaceDomain

    @property
    def unit(self) -> str:
        return self.kind.unit

    @property
    def valid_mask(self) -> np.ndarray:
        return np.isfinite(self.values)


def thickness_at(
    segmentation: Segmentation,
    layer_id: int,
    ix: int,
    iy: int,
    geometry: AcquisitionGeometry,
) -> float:
    """Layer thickness (µm) at one point; NaN if either boundary is invalid."""
    upper, lower = segmentation.layer_bounds(layer_id)
    if not (0 <= ix < geometry.width and 0 <= iy < geometry.n_bscans):
        raise IndexError(f"point ({ix}, {iy}) outside lattice")
    u = float(upper.values[iy, ix])
    l = float(lower.values[iy, ix])
    return (l - u) * geometry.res_axial


def mean_curvature_at(
    boundary: BoundarySurface,
    ix: int,
    iy: int,
    geometry: AcquisitionGeometry,
    stencil: int = 1,
) -> float:
    """Mean curvature (1/mm) of the boundary height field at one point.

    Central differences over a 3x3 neighborhood at `stencil` lattice steps,
    in physical mm units; convex toward the vitreous (smaller axial
    position) is positive.  Returns NaN near the border or where any
    neighborhood value is invalid.
    """
    s = stencil
    n_bscans, width = boundary.values.shape
    if not (0 <= ix < width and 0 <= iy < n_bscans):
        raise IndexError(f"point ({ix}, {iy}) outside lattice")
    if ix < s or ix >= width - s or iy < s or iy >= n_bscans - s:
        return math.nan
    z = boundary.values[iy - s : iy + s + 1 : s, ix - s : ix + s + 1 : s].astype(float)
    if not np.isfinite(z).all():
        return math.nan
    z = z * (geometry.res_axial / 1000.0)
    hx = s * geometry.res_lateral / 1000.0
    hy = s * geometry.res_bscan / 1000.0
    zx = (z[1, 2] - z[1, 0]) / (2.0 * hx)
    zy = (z[2, 1] - z[0, 1]) / (2.0 * hy)
    zxx = (z[1, 2] - 2.0 * z[1, 1] + z[1, 0]) / (hx * hx)
    zyy = (z[2, 1] - 2.0 * z[1, 1] + z[0, 1]) / (hy * hy)
    zxy = (z[2, 2] - z[2, 0] - z[0, 2] + z[0, 0]) / (4.0 * hx * hy)
    num = (1.0 + zx * zx) * zyy - 2.0 * zx * zy * zxy + (1.0 + zy * zy) * zxx
    den = 2.0 * (1.0 + zx * zx + zy * zy) ** 1.5
    return num / den


def mean_reflectivity_at(
    volume: np.ndarray,
    segmentation: Segmentation,
    layer_id: int,
    ix: int,
    iy: int,
    normalize: bool = True,
) -> float:
    """Mean intensity of the layer's axial rows [upper, lower) at one A-scan."""
    upper, lower = segmentation.layer_bounds(layer_id)
    u = upper.values[iy, ix]
    l = lower.values[iy, ix]
    if not (np.isfinite(u) and np.isfinite(l)):
        return math.nan
    r0 = int(math.ceil(u))
    r1 = int(math.ceil(l))
    if r1 <= r0:
        return math.nan
    mean = float(volume[iy, r0:r1, ix].mean())
    return mean / 255.0 if normalize else mean


def _thickness_field(dataset: Dataset, layer_id: int) -> np.ndarray:
    upper, lower = dataset.segmentation.layer_bounds(layer_id)
    return (lower.values.astype(float) - upper.values.astype(float)) * dataset.geometry.res_axial


def mean_curvature_field(
    boundary: BoundarySurface, geometry: AcquisitionGeometry, stencil: int = 1
) -> np.ndarray:
    """Vectorized mean curvature of a boundary surface (NaN border/invalid)."""
    s = stencil
    z = boundary.values.astype(float) * (geometry.res_axial / 1000.0)
    n_bscans, width = z.shape
    out = np.full_like(z, np.nan)
    if n_bscans <= 2 * s or width <= 2 * s:
        return out
    hx = s * geometry.res_lateral / 1000.0
    hy = s * geometry.res_bscan / 1000.0

    c = z[s:-s, s:-s]
    e = z[s:-s, 2 * s :]
    w = z[s:-s, : -2 * s]
    n = z[: -2 * s, s:-s]
    so = z[2 * s :, s:-s]
    ne = z[: -2 * s, 2 * s :]
    nw = z[: -2 * s, : -2 * s]
    se = z[2 * s :, 2 * s :]
    sw = z[2 * s :, : -2 * s]

    zx = (e - w) / (2.0 * hx)
    zy = (so - n) / (2.0 * hy)
    zxx = (e - 2.0 * c + w) / (hx * hx)
    zyy = (so - 2.0 * c + n) / (hy * hy)
    zxy = (se - sw - ne + nw) / (4.0 * hx * hy)
    num = (1.0 + zx * zx) * zyy - 2.0 * zx * zy * zxy + (1.0 + zy * zy) * zxx
    den = 2.0 * (1.0 + zx * zx + zy * zy) ** 1.5
    out[s:-s, s:-s] = num / den
    return out


def _reflectivity_field(dataset: Dataset, layer_id: int, normalize: bool) -> np.ndarray:
    if dataset.volume is None:
        raise CapabilityError(
            f"dataset {dataset.id} has no volume; mean_reflectivity unavailable"
        )
    upper, lower = dataset.segmentation.layer_bounds(layer_id)
    u = upper.values.astype(float)
    l = lower.values.astype(float)
    geo = dataset.geometry
    r0 = np.ceil(u)
    r1 = np.ceil(l)
    valid = np.isfinite(u) & np.isfinite(l) & (r1 > r0)
    r0i = np.where(valid, r0, 0).astype(np.int64)
    r1i = np.where(valid, r1, 0).astype(np.int64)
    np.clip(r0i, 0, geo.bscan_height, out=r0i)
    np.clip(r1i, 0, geo.bscan_height, out=r1i)

    # Row-range sums via a cumulative sum along the axial axis.
    cum = np.zeros((geo.n_bscans, geo.bscan_height + 1, geo.width), dtype=np.float64)
    np.cumsum(dataset.volume, axis=1, out=cum[:, 1:, :])
    top = np.take_along_axis(cum, r0i[:, None, :], axis=1)[:, 0, :]
    bot = np.take_along_axis(cum, r1i[:, None, :], axis=1)[:, 0, :]
    count = (r1i - r0i).astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = (bot - top) / count
    mean[~valid | (count < 1)] = np.nan
    return mean / 255.0 if normalize else mean


def compute_attribute_map(dataset: Dataset, layer_id: int, kind: AttributeKind) -> AttributeMap:
    """Compute one attribute map; dispatches on kind.

    Raises IndexError for a bad layer_id and CapabilityError when
    reflectivity is requested without a volume.
    """
    n_layers = dataset.segmentation.n_layers
    if not 0 <= layer_id < n_layers:
        raise IndexError(f"layer_id {layer_id} out of range [0, {n_layers})")
    if kind.name == THICKNESS:
        values = _thickness_field(dataset, layer_id)
    elif kind.name == CURVATURE:
        upper, lower = dataset.segmentation.layer_bounds(layer_id)
        boundary = upper if kind.boundary == "upper" else lower
        values = mean_curvature_field(boundary, dataset.geometry, kind.stencil)
    elif kind.name == MEAN_REFLECTIVITY:
        values = _reflectivity_field(dataset, layer_id, kind.normalize)
    else:  # pragma: no cover - guarded by AttributeKind
        raise ValueError(f"unknown attribute kind {kind.name!r}")
    return AttributeMap(
        layer_id=layer_id,
        kind=kind,
        values=values,
        domain=dataset.geometry.enface_domain(),
    )


def attribute_profile(amap: AttributeMap, iy: int) -> np.ndarray:
    """Row iy of the map as an ordered series; NaN entries are the gaps."""
    if not 0 <= iy < amap.domain.n_bscans:
        raise IndexError(f"bscan index {iy} out of range [0, {amap.domain.n_bscans})")
    return amap.values[iy].copy()
