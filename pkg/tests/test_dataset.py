import json

import numpy as np
import pytest

from conftest import DESK_GEOMETRY, flat_spec
from retmap.dataset import load_cohort, load_dataset, save_dataset
from retmap.errors import FormatError, ValidationError
from retmap.synthetic import generate_synthetic_cohort


@pytest.fixture()
def saved_dir(tmp_path, flat_dataset):
    return save_dataset(flat_dataset, tmp_path / "ds")


def test_round_trip_is_bit_exact(saved_dir, flat_dataset):
    loaded = load_dataset(saved_dir)
    assert loaded == flat_dataset
    assert loaded.segmentation.n_boundaries == 12
    assert loaded.segmentation.n_layers == 11


def test_round_trip_with_volume_and_nans(tmp_path):
    ds = generate_synthetic_cohort(flat_spec(with_volume=True), seed=3)[0]
    values = ds.segmentation.boundaries[4].values
    values[5, 7] = np.nan  # invalid marker survives the round trip
    path = save_dataset(ds, tmp_path / "v")
    loaded = load_dataset(path)
    assert loaded == ds
    assert np.isnan(loaded.segmentation.boundaries[4].values[5, 7])


def test_missing_metadata_file(tmp_path):
    with pytest.raises(FormatError, match="meta.json"):
        load_dataset(tmp_path)


def test_corrupt_metadata(saved_dir):
    (saved_dir / "meta.json").write_text("{not json", encoding="utf-8")
    with pytest.raises(FormatError, match="cannot parse"):
        load_dataset(saved_dir)


def test_missing_meta_keys(saved_dir):
    meta = json.loads((saved_dir / "meta.json").read_text())
    del meta["res_axial_um"]
    (saved_dir / "meta.json").write_text(json.dumps(meta))
    with pytest.raises(FormatError, match="res_axial_um"):
        load_dataset(saved_dir)


def test_boundary_count_mismatch(saved_dir):
    # File holds 11 surfaces, metadata still declares 11 layers (12 boundaries).
    raw = (saved_dir / "boundaries.f32").read_bytes()
    surface_bytes = 4 * DESK_GEOMETRY.n_bscans * DESK_GEOMETRY.width
    (saved_dir / "boundaries.f32").write_bytes(raw[: 11 * surface_bytes])
    with pytest.raises(ValidationError, match="expected") as excinfo:
        load_dataset(saved_dir)
    assert "12 boundaries" in str(excinfo.value)


def test_boundary_ordering_violation_names_point(saved_dir):
    stack = np.frombuffer((saved_dir / "boundaries.f32").read_bytes(), dtype="<f4")
    stack = stack.reshape(12, DESK_GEOMETRY.n_bscans, DESK_GEOMETRY.width).copy()
    # Push boundary 3 below boundary 4 at one point.
    stack[3, 10, 20] = stack[4, 10, 20] + 5.0
    (saved_dir / "boundaries.f32").write_bytes(stack.tobytes())
    with pytest.raises(ValidationError, match=r"layer 3.*ix=20.*iy=10"):
        load_dataset(saved_dir)


def test_boundary_out_of_range(saved_dir):
    stack = np.frombuffer((saved_dir / "boundaries.f32").read_bytes(), dtype="<f4")
    stack = stack.reshape(12, DESK_GEOMETRY.n_bscans, DESK_GEOMETRY.width).copy()
    stack[0, 0, 0] = -4.0
    (saved_dir / "boundaries.f32").write_bytes(stack.tobytes())
    with pytest.raises(ValidationError, match="outside"):
        load_dataset(saved_dir)


def test_volume_size_mismatch(tmp_path):
    ds = generate_synthetic_cohort(flat_spec(with_volume=True), seed=3)[0]
    path = save_dataset(ds, tmp_path / "v")
    raw = (path / "volume.u8").read_bytes()
    (path / "volume.u8").write_bytes(raw[:-10])
    with pytest.raises(ValidationError, match="volume.u8"):
        load_dataset(path)


def test_group_label_round_trip(tmp_path):
    ds = generate_synthetic_cohort(flat_spec(group_label="control"), seed=3)[0]
    loaded = load_dataset(save_dataset(ds, tmp_path / "g"))
    assert loaded.group_label == "control"


def test_load_cohort_sorted(tmp_path):
    cohort = generate_synthetic_cohort(flat_spec(n_datasets=3), seed=1)
    for ds in reversed(cohort):
        save_dataset(ds, tmp_path / ds.id)
    loaded = load_cohort(tmp_path)
    assert [d.id for d in loaded] == sorted(d.id for d in cohort)


def test_load_cohort_missing_dir(tmp_path):
    with pytest.raises(FormatError):
        load_cohort(tmp_path / "nope")
