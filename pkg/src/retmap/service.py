"""HTTP+JSON service for the interactive explorer.

Stateless computational core (pure delegation to the library) plus
in-memory sessions holding grid states and selections.  Grid edits use
optimistic concurrency: every grid state carries a version token, and a
mismatching token gets a 409 conflict.

Map payloads are base64-encoded little-endian binary arrays with declared
shape and dtype; every payload carries units and value ranges.  Errors are
{code, message, detail} bodies.

Run directly:  python -m retmap.service --data <dir> [--port 8000]
"""

from __future__ import annotations

import hashlib
import itertools
import json
import threading
import uuid
from pathlib import Path

import numpy as np
from fastapi import Body, FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .artifacts import config_to_dict, domain_to_dict, encode_array, region_to_dict
from .attributes import AttributeKind, AttributeMap, attribute_profile, compute_attribute_map
from .dataset import Dataset, load_cohort
from .errors import (
    CapabilityError,
    DomainMismatchError,
    GridEditError,
    InsufficientDataError,
    RetmapError,
    SelectionError,
)
from .geometry import polygon_mask
from .grids import (
    AdaptiveGrid,
    cell_mask,
    fit_grid,
    grid_to_dict,
    merge_children,
    split_cell,
)
from .stats import (
    ComparisonConfig,
    build_control_model,
    compare_gridwise,
    compare_pointwise,
    deviation_map,
    extract_significant_regions,
    measure_region,
)

ATTRIBUTES = ("thickness", "curvature", "mean_reflectivity")


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, detail=None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.detail = detail


def _not_found(what: str) -> ApiError:
    return ApiError(404, "not_found", what)


class DataStore:
    """Read-only dataset collection with computation caches."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.datasets: dict[str, Dataset] = {}
        if self.data_dir.is_dir():
            for ds in load_cohort(self.data_dir):
                self.datasets[ds.id] = ds
        self._maps: dict[tuple, AttributeMap] = {}
        self._models: dict[tuple, object] = {}
        # Reentrant: control_model() computes member maps under the same lock.
        self._lock = threading.RLock()

    def dataset(self, dataset_id: str) -> Dataset:
        ds = self.datasets.get(dataset_id)
        if ds is None:
            raise _not_found(f"dataset {dataset_id!r}")
        return ds

    def groups(self) -> list[str]:
        return sorted({d.group_label for d in self.datasets.values() if d.group_label})

    def group_datasets(self, label: str) -> list[Dataset]:
        out = [d for d in self.datasets.values() if d.group_label == label]
        if not out:
            raise _not_found(f"cohort {label!r}")
        return sorted(out, key=lambda d: d.id)

    def map(self, dataset_id: str, layer: int, attr: str) -> AttributeMap:
        key = (dataset_id, layer, attr)
        with self._lock:
            if key not in self._maps:
                kind = AttributeKind.parse(attr)
                self._maps[key] = compute_attribute_map(self.dataset(dataset_id), layer, kind)
            return self._maps[key]

    def group_maps(self, selector, layer: int, attr: str) -> list[AttributeMap]:
        """Selector is a cohort label or an explicit dataset id list."""
        if isinstance(selector, str):
            ids = [d.id for d in self.group_datasets(selector)]
        else:
            ids = list(selector)
        return [self.map(i, layer, attr) for i in ids]

    def control_model(self, group: str, layer: int, attr: str):
        key = (group, layer, attr)
        with self._lock:
            if key not in self._models:
                maps = [
                    self.map(d.id, layer, attr) for d in self.group_datasets(group)
                ]
                self._models[key] = build_control_model(maps)
            return self._models[key]


class GridState:
    def __init__(self, grid: AdaptiveGrid, dataset_id: str, layer: int, attr: str):
        self.grid = grid
        self.version = 0
        self.dataset_id = dataset_id
        self.layer = layer
        self.attr = attr


class Session:
    def __init__(self, session_id: str):
        self.id = session_id
        self.grids: dict[str, GridState] = {}
        self.selection: dict | None = None
        self.lock = threading.Lock()
        self._counter = itertools.count(1)

    def new_grid_id(self) -> str:
        return f"g{next(self._counter)}"


def _nullable_list(arr: np.ndarray) -> list:
    return [None if not np.isfinite(v) else float(v) for v in np.asarray(arr, dtype=float)]


def _finite_range(values: np.ndarray) -> list | None:
    finite = np.isfinite(values)
    if not finite.any():
        return None
    return [float(values[finite].min()), float(values[finite].max())]


def _map_payload(amap: AttributeMap, dataset_id: str, attr: str) -> dict:
    return {
        "dataset": dataset_id,
        "layer": amap.layer_id,
        "attribute": attr,
        "unit": amap.unit,
        "shape": list(amap.domain.shape),
        "domain": domain_to_dict(amap.domain),
        "values": encode_array(amap.values.astype("<f4")),
        "valid": encode_array(amap.valid_mask.astype(np.uint8)),
        "range": _finite_range(amap.values),
    }


def _grid_payload(grid_id: str, state: GridState) -> dict:
    return {
        "grid_id": grid_id,
        "version": state.version,
        "dataset": state.dataset_id,
        "layer": state.layer,
        "attribute": state.attr,
        "tree": grid_to_dict(state.grid),
        "leaf_ids": state.grid.leaf_ids(),
    }


def _comparison_payload(cmp, regions) -> dict:
    body = {
        "mode": cmp.mode,
        "config": config_to_dict(cmp.config),
        "domain": domain_to_dict(cmp.domain),
    }
    if cmp.mode == "point":
        body.update(
            {
                "shape": list(cmp.domain.shape),
                "diff": encode_array(cmp.diff.astype("<f4")),
                "p": encode_array(cmp.p.astype("<f4")),
                "d": encode_array(cmp.d.astype("<f4")),
                "significant": encode_array(cmp.significant.astype(np.uint8)),
                "tested": encode_array(cmp.tested.astype(np.uint8)),
                "diff_range": _finite_range(cmp.diff),
                "n_significant": int(cmp.significant.sum()),
                "regions": [region_to_dict(r) for r in regions],
            }
        )
    else:
        body["cells"] = [
            {
                "cell_id": r.cell_id,
                "n_p": r.n_p,
                "n_c": r.n_c,
                "mean_p": r.mean_p,
                "mean_c": r.mean_c,
                "diff": r.diff,
                "p": r.p,
                "d": r.d,
                "significant": r.significant,
                "tested": r.tested,
            }
            for r in cmp.cells
        ]
        body["grid"] = grid_to_dict(cmp.grid) if cmp.grid is not None else None
        body["n_significant"] = cmp.n_significant
    return body


def _measurement_payload(m) -> dict:
    return {
        "n": m.n,
        "mean": m.mean,
        "sd": m.sd,
        "min": m.vmin,
        "max": m.vmax,
        "area_mm2": m.area_mm2,
        "diff": m.diff,
        "p": m.p,
        "d": m.d,
        "n_p": m.n_p,
        "n_c": m.n_c,
        "test": m.test,
    }


def create_app(data_dir: str | Path) -> FastAPI:
    app = FastAPI(title="retmap service", docs_url=None, redoc_url=None)
    # The viewer may be served from a different origin; no auth by design.
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    store = DataStore(data_dir)
    sessions: dict[str, Session] = {}
    compare_cache: dict[str, dict] = {}

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"code": exc.code, "message": exc.message, "detail": exc.detail},
        )

    @app.exception_handler(RetmapError)
    async def handle_retmap_error(request: Request, exc: RetmapError):
        status, code = 422, "invalid_request"
        if isinstance(exc, (GridEditError,)):
            status, code = 409, "illegal_edit"
        elif isinstance(exc, InsufficientDataError):
            code = "insufficient_data"
        elif isinstance(exc, CapabilityError):
            code = "capability"
        elif isinstance(exc, SelectionError):
            code = "selection"
        elif isinstance(exc, DomainMismatchError):
            code = "domain_mismatch"
        return JSONResponse(
            status_code=status,
            content={"code": code, "message": str(exc), "detail": None},
        )

    def _session(sid: str) -> Session:
        s = sessions.get(sid)
        if s is None:
            raise _not_found(f"session {sid!r}")
        return s

    def _grid_state(session: Session, gid: str) -> GridState:
        state = session.grids.get(gid)
        if state is None:
            raise _not_found(f"grid {gid!r}")
        return state

    def _dataset_entry(ds: Dataset) -> dict:
        return {
            "id": ds.id,
            "eye": ds.geometry.eye,
            "group_label": ds.group_label,
            "shape": [ds.geometry.n_bscans, ds.geometry.width],
            "n_layers": ds.segmentation.n_layers,
            "layers": list(ds.segmentation.layer_names),
            "has_volume": ds.volume is not None,
            "warnings": list(ds.warnings),
        }

    @app.get("/catalog")
    def catalog():
        return {
            "datasets": [
                _dataset_entry(store.datasets[i]) for i in sorted(store.datasets)
            ],
            "groups": store.groups(),
            "attributes": list(ATTRIBUTES),
        }

    @app.get("/datasets/{dataset_id}")
    def dataset_detail(dataset_id: str):
        ds = store.dataset(dataset_id)
        geo = ds.geometry
        entry = _dataset_entry(ds)
        entry["geometry"] = {
            "width": geo.width,
            "n_bscans": geo.n_bscans,
            "bscan_height": geo.bscan_height,
            "res_axial_um": geo.res_axial,
            "res_lateral_um": geo.res_lateral,
            "res_bscan_um": geo.res_bscan,
            "fovea_ix": geo.fovea_ix,
            "fovea_iy": geo.fovea_iy,
        }
        return entry

    @app.get("/datasets/{dataset_id}/layers/{layer}/attributes/{attr}/map")
    def get_map(dataset_id: str, layer: int, attr: str, deviation: str | None = None):
        ds = store.dataset(dataset_id)
        if not 0 <= layer < ds.segmentation.n_layers:
            raise _not_found(f"layer {layer} of dataset {dataset_id!r}")
        amap = store.map(dataset_id, layer, attr)
        payload = _map_payload(amap, dataset_id, attr)
        if deviation is not None:
            model = store.control_model(deviation, layer, attr)
            dev = deviation_map(amap, model)
            payload["deviation"] = {
                "model": deviation,
                "unit": "z",
                "z": encode_array(dev.z.astype("<f4")),
                "flags": encode_array(dev.flags),
                "percentiles": list(model.percentiles),
            }
        return payload

    @app.get("/datasets/{dataset_id}/bscans/{iy}")
    def get_bscan(dataset_id: str, iy: int, layer: int = 0, attribute: str = "thickness"):
        ds = store.dataset(dataset_id)
        geo = ds.geometry
        if not 0 <= iy < geo.n_bscans:
            raise ApiError(422, "range", f"bscan index {iy} out of range [0, {geo.n_bscans})")
        amap = store.map(dataset_id, layer, attribute)
        payload = {
            "dataset": dataset_id,
            "iy": iy,
            "width": geo.width,
            "bscan_height": geo.bscan_height,
            "boundaries": [
                _nullable_list(b.values[iy]) for b in ds.segmentation.boundaries
            ],
            "layer": layer,
            "attribute": attribute,
            "unit": amap.unit,
            "profile": _nullable_list(attribute_profile(amap, iy)),
            "intensity": None,
        }
        if ds.volume is not None:
            payload["intensity"] = encode_array(ds.volume[iy])
        return payload

    @app.post("/sessions", status_code=201)
    def create_session():
        sid = uuid.uuid4().hex[:12]
        sessions[sid] = Session(sid)
        return {"session_id": sid}

    @app.get("/sessions/{sid}/grids")
    def list_grids(sid: str):
        session = _session(sid)
        return {
            "grids": [_grid_payload(gid, st) for gid, st in sorted(session.grids.items())]
        }

    @app.post("/sessions/{sid}/grids", status_code=201)
    def fit_session_grid(sid: str, body: dict = Body(...)):
        session = _session(sid)
        dataset_id = body["dataset"]
        layer = int(body["layer"])
        attr = str(body.get("attribute", "thickness"))
        sd_threshold = float(body["sd_threshold"])
        max_depth = int(body.get("max_depth", 4))
        amap = store.map(dataset_id, layer, attr)
        grid = fit_grid(amap, sd_threshold, max_depth)
        with session.lock:
            gid = session.new_grid_id()
            state = GridState(grid, dataset_id, layer, attr)
            session.grids[gid] = state
            return _grid_payload(gid, state)

    def _edit_grid(sid: str, gid: str, cell_id: str, body: dict, op: str):
        session = _session(sid)
        with session.lock:
            state = _grid_state(session, gid)
            version = body.get("version")
            if version is None or int(version) != state.version:
                raise ApiError(
                    409,
                    "version_conflict",
                    f"grid {gid!r} is at version {state.version}, request used {version}",
                    {"current_version": state.version},
                )
            amap = store.map(state.dataset_id, state.layer, state.attr)
            if op == "split":
                state.grid = split_cell(state.grid, cell_id, amap)
            else:
                state.grid = merge_children(state.grid, cell_id, amap)
            state.version += 1
            return _grid_payload(gid, state)

    @app.post("/sessions/{sid}/grids/{gid}/cells/{cell_id:path}/split")
    def split_grid_cell(sid: str, gid: str, cell_id: str, body: dict = Body(...)):
        return _edit_grid(sid, gid, cell_id, body, "split")

    @app.post("/sessions/{sid}/grids/{gid}/cells/{cell_id:path}/merge")
    def merge_grid_cell(sid: str, gid: str, cell_id: str, body: dict = Body(...)):
        return _edit_grid(sid, gid, cell_id, body, "merge")

    @app.post("/compare")
    def compare(body: dict = Body(...)):
        key = hashlib.sha256(
            json.dumps(body, sort_keys=True).encode("utf-8")
        ).hexdigest()
        if key in compare_cache:
            return compare_cache[key]
        layer = int(body["layer"])
        attr = str(body.get("attribute", "thickness"))
        mode = body.get("mode", "point")
        config = ComparisonConfig(
            test=body.get("test", "welch_t"),
            alpha=float(body.get("alpha", 0.05)),
            correction=body.get(
                "correction", "benjamini_hochberg" if mode == "point" else "none"
            ),
        )
        pmaps = store.group_maps(body["patients"], layer, attr)
        cmaps = store.group_maps(body["controls"], layer, attr)
        if mode == "point":
            cmp = compare_pointwise(pmaps, cmaps, config)
            regions = extract_significant_regions(cmp)
            payload = _comparison_payload(cmp, regions)
        elif mode == "grid":
            grid = None
            if "session" in body and "grid_id" in body:
                session = _session(body["session"])
                grid = _grid_state(session, body["grid_id"]).grid
            if grid is None:
                from .grids import fit_common_grid

                grid = fit_common_grid(
                    cmaps,
                    float(body.get("sd_threshold", 10.0)),
                    int(body.get("max_depth", 4)),
                )
            cmp = compare_gridwise(grid, pmaps, cmaps, config)
            payload = _comparison_payload(cmp, [])
        else:
            raise ApiError(422, "invalid_request", f"unknown compare mode {mode!r}")
        compare_cache[key] = payload
        return payload

    @app.post("/sessions/{sid}/measure")
    def measure(sid: str, body: dict = Body(...)):
        session = _session(sid)
        selection = body.get("selection") or {}
        layer = int(body["layer"])
        attr = str(body.get("attribute", "thickness"))

        if "patients" in body and "controls" in body:
            pmaps = store.group_maps(body["patients"], layer, attr)
            cmaps = store.group_maps(body["controls"], layer, attr)
            domain = pmaps[0].domain
            mask = _selection_mask(session, selection, domain)
            result = measure_region(pmaps, mask, control_maps=cmaps)
        elif "dataset" in body:
            amap = store.map(body["dataset"], layer, attr)
            mask = _selection_mask(session, selection, amap.domain)
            model = None
            if body.get("deviation"):
                model = store.control_model(body["deviation"], layer, attr)
            result = measure_region(amap, mask, model=model)
        else:
            raise ApiError(
                422, "invalid_request", "measure needs 'dataset' or 'patients'+'controls'"
            )
        with session.lock:
            session.selection = selection
        return _measurement_payload(result)

    def _selection_mask(session: Session, selection: dict, domain) -> np.ndarray:
        if "cells" in selection:
            gid = selection.get("grid_id")
            state = _grid_state(session, gid) if gid else None
            if state is None:
                raise ApiError(422, "selection", "cell selection needs grid_id")
            mask = np.zeros(domain.shape, dtype=bool)
            for cid in selection["cells"]:
                mask |= cell_mask(state.grid.cell(cid), domain)
            if not mask.any():
                raise SelectionError("cell selection rasterizes to no lattice points")
            return mask
        if "polygon" in selection:
            mask = polygon_mask(selection["polygon"], domain)
            if not mask.any():
                raise SelectionError("polygon rasterizes to no lattice points")
            return mask
        raise ApiError(422, "selection", "selection needs 'cells' or 'polygon'")

    app.state.store = store
    app.state.sessions = sessions
    return app


def main(argv: list[str] | None = None) -> int:
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(description="Serve a dataset directory over HTTP+JSON")
    parser.add_argument("--data", required=True, help="directory of dataset directories")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    args = parser.parse_args(argv)
    uvicorn.run(create_app(args.data), host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
