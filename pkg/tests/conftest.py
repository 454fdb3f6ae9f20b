import numpy as np
import pytest

from retmap.attributes import AttributeKind, AttributeMap, compute_attribute_map
from retmap.geometry import AcquisitionGeometry
from retmap.synthetic import CohortSpec, DefectSpec, generate_synthetic_cohort

# 128 x 64 lattice, 7.04 x 7.04 mm extent: covers the 6 mm ETDRS disc.
DESK_GEOMETRY = AcquisitionGeometry(
    width=128,
    n_bscans=64,
    bscan_height=192,
    res_axial=3.5,
    res_lateral=55.0,
    res_bscan=110.0,
    fovea_ix=63.5,
    fovea_iy=31.5,
    eye="right",
)

ELEVEN_LAYERS = (30.0,) * 11


def flat_spec(**overrides) -> CohortSpec:
    """Fully flat cohort: constant thicknesses, no undulation, no noise."""
    kwargs = dict(
        n_datasets=1,
        geometry=DESK_GEOMETRY,
        base_thickness_um=ELEVEN_LAYERS,
        undulation_amplitude_um=0.0,
        noise_sd_um=0.0,
        base_surface_amplitude_um=0.0,
    )
    kwargs.update(overrides)
    return CohortSpec(**kwargs)


def map_from_array(values, geometry=DESK_GEOMETRY, layer_id=0,
                   kind=AttributeKind.thickness()) -> AttributeMap:
    values = np.asarray(values, dtype=float)
    assert values.shape == (geometry.n_bscans, geometry.width)
    return AttributeMap(
        layer_id=layer_id, kind=kind, values=values, domain=geometry.enface_domain()
    )


@pytest.fixture(scope="session")
def desk_geometry():
    return DESK_GEOMETRY


@pytest.fixture(scope="session")
def flat_dataset():
    return generate_synthetic_cohort(flat_spec(), seed=7)[0]


@pytest.fixture(scope="session")
def noisy_dataset():
    spec = flat_spec(
        n_datasets=1,
        undulation_amplitude_um=6.0,
        noise_sd_um=3.0,
        base_surface_amplitude_um=10.0,
        defects=(DefectSpec(center_mm=(2.2, 0.0), radius_mm=0.5, layer=2, delta_um=-20.0),),
    )
    return generate_synthetic_cohort(spec, seed=21)[0]


@pytest.fixture(scope="session")
def volume_dataset():
    return generate_synthetic_cohort(flat_spec(with_volume=True), seed=9)[0]


@pytest.fixture(scope="session")
def flat_thickness_map(flat_dataset):
    return compute_attribute_map(flat_dataset, 0, AttributeKind.thickness())
