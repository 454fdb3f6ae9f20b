"""Acquisition geometry and the en-face coordinate frame.

All physical coordinates are millimetres relative to the fovea center.
Left eyes are mirrored along x during lattice-to-physical conversion so
that +x is always nasal; one grid layout and one comparison pipeline
then serve both lateralities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

EYE_RIGHT = "right"
EYE_LEFT = "left"

# Observed acquisition sizes in practice; outside -> soft warning, not error.
PLAUSIBLE_WIDTH = (512, 1024)
PLAUSIBLE_N_BSCANS = (19, 241)


@dataclass(frozen=True)
class AcquisitionGeometry:
    """Scan geometry of one OCT examination.

    Resolutions are in µm per pixel; the fovea position is a fractional
    lattice coordinate on the en-face plane (ix along a B-scan, iy across
    B-scans).
    """

    width: int
    n_bscans: int
    bscan_height: int
    res_axial: float
    res_lateral: float
    res_bscan: float
    fovea_ix: float
    fovea_iy: float
    eye: str = EYE_RIGHT

    def validate(self) -> list[str]:
        """Check hard invariants, return soft warnings.

        Raises ValidationError on violations; the returned list holds
        plausibility warnings that do not make the dataset unusable.
        """
        issues = []
        if self.width < 2:
            issues.append(f"width must be >= 2, got {self.width}")
        if self.n_bscans < 2:
            issues.append(f"n_bscans must be >= 2, got {self.n_bscans}")
        if self.bscan_height < 1:
            issues.append(f"bscan_height must be >= 1, got {self.bscan_height}")
        for name in ("res_axial", "res_lateral", "res_bscan"):
            if not getattr(self, name) > 0:
                issues.append(f"{name} must be > 0, got {getattr(self, name)}")
        if not (0 <= self.fovea_ix <= self.width - 1):
            issues.append(
                f"fovea_ix {self.fovea_ix} outside lattice [0, {self.width - 1}]"
            )
        if not (0 <= self.fovea_iy <= self.n_bscans - 1):
            issues.append(
                f"fovea_iy {self.fovea_iy} outside lattice [0, {self.n_bscans - 1}]"
            )
        if self.eye not in (EYE_RIGHT, EYE_LEFT):
            issues.append(f"eye must be 'right' or 'left', got {self.eye!r}")
        if issues:
            raise ValidationError("invalid acquisition geometry", issues)

        warnings = []
        if not (PLAUSIBLE_WIDTH[0] <= self.width <= PLAUSIBLE_WIDTH[1]):
            warnings.append(
                f"width {self.width} outside plausible range {PLAUSIBLE_WIDTH}"
            )
        if not (PLAUSIBLE_N_BSCANS[0] <= self.n_bscans <= PLAUSIBLE_N_BSCANS[1]):
            warnings.append(
                f"n_bscans {self.n_bscans} outside plausible range {PLAUSIBLE_N_BSCANS}"
            )
        return warnings

    def enface_domain(self) -> "EnFaceDomain":
        return EnFaceDomain(
            width=self.width,
            n_bscans=self.n_bscans,
            res_lateral=self.res_lateral,
            res_bscan=self.res_bscan,
            fovea_ix=self.fovea_ix,
            fovea_iy=self.fovea_iy,
            eye=self.eye,
        )


@dataclass(frozen=True)
class EnFaceDomain:
    """Projection of the acquisition geometry onto the en-face plane."""

    width: int
    n_bscans: int
    res_lateral: float
    res_bscan: float
    fovea_ix: float
    fovea_iy: float
    eye: str = EYE_RIGHT

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_bscans, self.width)

    @property
    def extent_mm(self) -> tuple[float, float]:
        """Physical extent (x, y) of the lattice in mm."""
        return (
            self.width * self.res_lateral / 1000.0,
            self.n_bscans * self.res_bscan / 1000.0,
        )

    @property
    def pixel_area_mm2(self) -> float:
        return self.res_lateral * self.res_bscan / 1e6


def enface_to_physical(ix, iy, domain: EnFaceDomain):
    """Lattice (ix, iy) -> physical (x, y) in mm relative to the fovea.

    Accepts scalars or numpy arrays.  For left eyes the x axis is mirrored
    so that nasal is always +x.
    """
    x = (np.asarray(ix, dtype=float) - domain.fovea_ix) * domain.res_lateral / 1000.0
    y = (np.asarray(iy, dtype=float) - domain.fovea_iy) * domain.res_bscan / 1000.0
    if domain.eye == EYE_LEFT:
        x = -x
    if np.ndim(ix) == 0 and np.ndim(iy) == 0:
        return float(x), float(y)
    return x, y


def physical_to_enface(x, y, domain: EnFaceDomain):
    """Exact inverse of enface_to_physical."""
    x = np.asarray(x, dtype=float)
    if domain.eye == EYE_LEFT:
        x = -x
    ix = x * 1000.0 / domain.res_lateral + domain.fovea_ix
    iy = np.asarray(y, dtype=float) * 1000.0 / domain.res_bscan + domain.fovea_iy
    if np.ndim(x) == 0 and np.ndim(y) == 0:
        return float(ix), float(iy)
    return ix, iy


def lattice_positions_mm(domain: EnFaceDomain) -> tuple[np.ndarray, np.ndarray]:
    """Physical (x, y) mm coordinates of every lattice point, shape (n_bscans, width)."""
    ix = np.arange(domain.width, dtype=float)
    iy = np.arange(domain.n_bscans, dtype=float)
    gx, gy = np.meshgrid(ix, iy)
    return enface_to_physical(gx, gy, domain)


def polygon_mask(polygon_mm, domain: EnFaceDomain) -> np.ndarray:
    """Rasterize a polygon (mm vertices) by point-in-polygon on lattice centers.

    Even-odd ray casting; vertices on edges may fall either way, which is
    fine for selection purposes.
    """
    poly = [(float(x), float(y)) for x, y in polygon_mm]
    if len(poly) < 3:
        raise ValueError("polygon needs at least 3 vertices")
    x, y = lattice_positions_mm(domain)
    inside = np.zeros(domain.shape, dtype=bool)
    n = len(poly)
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        if y0 == y1:
            continue
        crosses = (y0 <= y) != (y1 <= y)
        with np.errstate(invalid="ignore", divide="ignore"):
            x_at = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (x < x_at)
    return inside
