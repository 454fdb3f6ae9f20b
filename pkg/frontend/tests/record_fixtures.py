"""Record the service transcript the viewer tests replay.

Drives the real HTTP service over the exact request sequence the scripted
UI test issues and freezes every (request, response) pair into
fixtures/transcript.json.  Regenerate after API changes:

    python tests/record_fixtures.py
"""

import json
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from retmap.dataset import save_dataset
from retmap.geometry import AcquisitionGeometry
from retmap.service import create_app
from retmap.synthetic import CohortSpec, DefectSpec, generate_synthetic_cohort

GEOMETRY = AcquisitionGeometry(
    width=48, n_bscans=24, bscan_height=96,
    res_axial=3.5, res_lateral=150.0, res_bscan=300.0,
    fovea_ix=23.5, fovea_iy=11.5, eye="right",
)

POLYGON = [[1.3, -0.9], [2.7, -0.9], [2.7, 0.9], [1.3, 0.9]]

transcript = []


def build_data(root: Path) -> None:
    controls = generate_synthetic_cohort(
        CohortSpec(
            n_datasets=5, geometry=GEOMETRY, base_thickness_um=(30.0, 35.0),
            noise_sd_um=2.0, base_surface_amplitude_um=0.0,
            group_label="control", id_prefix="ctl",
        ),
        seed=61,
    )
    patients = generate_synthetic_cohort(
        CohortSpec(
            n_datasets=5, geometry=GEOMETRY, base_thickness_um=(30.0, 35.0),
            noise_sd_um=2.0, base_surface_amplitude_um=0.0,
            defects=(DefectSpec(center_mm=(2.0, 0.0), radius_mm=0.7,
                                layer=1, delta_um=-25.0),),
            group_label="patient", id_prefix="pat", with_volume=True,
        ),
        seed=62,
    )
    for ds in controls + patients:
        save_dataset(ds, root / ds.id)


def record(client: TestClient, method: str, path: str, body=None):
    if method == "GET":
        resp = client.get(path)
    else:
        resp = client.post(path, json=body)
    transcript.append({
        "method": method,
        "path": path,
        "body": body,
        "status": resp.status_code,
        "response": resp.json(),
    })
    return resp.json()


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        build_data(root)
        client = TestClient(create_app(root))

        record(client, "GET", "/catalog")
        sid = record(client, "POST", "/sessions", {})["session_id"]

        for layer in (0, 1):
            record(client, "GET",
                   f"/datasets/pat-000/layers/{layer}/attributes/thickness/map")
        for iy, layer in ((12, 0), (12, 1), (8, 1)):
            record(client, "GET",
                   f"/datasets/pat-000/bscans/{iy}?layer={layer}&attribute=thickness")

        grid = record(client, "POST", f"/sessions/{sid}/grids", {
            "dataset": "pat-000", "layer": 1, "attribute": "thickness",
            "sd_threshold": 8, "max_depth": 4,
        })
        gid = grid["grid_id"]
        base = f"/sessions/{sid}/grids/{gid}"
        record(client, "POST", f"{base}/cells/inner-superior/split", {"version": 0})
        record(client, "POST", f"{base}/cells/inner-superior/merge", {"version": 1})
        # A stale token (another client's view of the world) must conflict.
        record(client, "POST", f"{base}/cells/center/split", {"version": 0})
        record(client, "GET", f"/sessions/{sid}/grids")

        record(client, "POST", f"/sessions/{sid}/measure", {
            "layer": 1, "attribute": "thickness", "dataset": "pat-000",
            "selection": {"polygon": POLYGON},
        })
        record(client, "POST", "/compare", {
            "patients": "patient", "controls": "control",
            "layer": 1, "attribute": "thickness", "mode": "point",
        })
        record(client, "POST", "/compare", {
            "patients": "patient", "controls": "control",
            "layer": 1, "attribute": "thickness", "mode": "grid",
            "session": sid, "grid_id": gid,
        })
        record(client, "POST", f"/sessions/{sid}/measure", {
            "layer": 1, "attribute": "thickness",
            "patients": "patient", "controls": "control",
            "selection": {"polygon": POLYGON},
        })

    out = Path(__file__).parent / "fixtures" / "transcript.json"
    out.parent.mkdir(exist_ok=True)
    out.write_text(json.dumps(transcript, indent=1, sort_keys=True) + "\n")
    print(f"wrote {out} ({len(transcript)} exchanges)")


if __name__ == "__main__":
    main()
