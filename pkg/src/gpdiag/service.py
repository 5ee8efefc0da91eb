"""HTTP facade hosting model-building sessions.

A session wraps one uploaded dataset and walks the interactive loop:
grid it, fit, inspect the v_j^2 series, compare added variable plots,
add or remove covariates, refit.  Sessions persist as append-only
JSON-lines event logs under the data directory, so a recorded history
replays deterministically on a fresh server (fits carry their seeds).

Routes (all JSON):
  POST   /sessions                        upload CSV text + schema
  GET    /sessions/{id}                   session view
  POST   /sessions/{id}/grid              apply IDW gridding
  POST   /sessions/{id}/fit               start a fit -> 202 + poll token
  GET    /sessions/{id}/fits/{token}      poll a fit
  DELETE /sessions/{id}/fits/{token}      cancel marker
  GET    /sessions/{id}/diagnostics       v_j^2 series of the latest fit
  GET    /sessions/{id}/avp               ?candidate=&domain=
  POST   /sessions/{id}/covariates       add/remove (no refit until /fit)
  GET    /sessions/{id}/history           fit history

Errors: 400 schema/validation, 404 unknown session/token, 409 fit in
progress, 422 numerical failure or invalid analysis request.
"""

from __future__ import annotations

import io
import json
import secrets
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .basis import build_basis_1d, build_basis_2d
from .covariance import a_sequence
from .data import Dataset, design_matrix, ingest_csv, standardize
from .diagnostics import avp_observation, avp_spectral, vj_squared_series
from .errors import GpdiagError, NumericalError, OptimizationError
from .gridding import GridSpec, regrid
from .reml import OptimizerConfig, fit
from .simulation import thread_cap

SYNTHETIC_KINDS = ("ns_linear", "ns_quadratic", "ew_linear", "ew_quadratic")


class CreateSession(BaseModel):
    csv: str
    schema_: dict = Field(alias="schema")

    model_config = {"populate_by_name": True}


class GridRequest(BaseModel):
    m1: int
    m2: int
    lam: float = Field(default=7.0, alias="lambda")
    lambda_covariates: float | None = None

    model_config = {"populate_by_name": True}


class FitRequest(BaseModel):
    method: str = "exact"
    nu: float = 0.5
    seed: int = 0


class CovariateRequest(BaseModel):
    action: str  # add | remove
    name: str
    synthetic: str | None = None  # one of SYNTHETIC_KINDS


def synthetic_covariate(dataset: Dataset, kind: str) -> np.ndarray:
    """Standardized polynomial surface over the grid coordinates.
    North-south varies along the second coordinate, east-west along the
    first."""
    if kind not in SYNTHETIC_KINDS:
        raise GpdiagError(f"unknown synthetic covariate kind {kind!r}")
    if not dataset.is_grid:
        raise GpdiagError("synthetic covariates need a grid-tagged session")
    lattice = dataset.lattice_coordinates()
    axis = 1 if kind.startswith("ns") else 0
    base = lattice[:, axis]
    if kind.endswith("quadratic"):
        base = (base - base.mean()) ** 2
    col, _, _ = standardize(base)
    return col


class _Session:
    def __init__(self, session_id: str, dataset: Dataset):
        self.id = session_id
        self.dataset = dataset
        self.design_names: list[str] = []
        self.fit_history: list[dict] = []
        self.fits: dict[str, dict] = {}
        self.active_fit: str | None = None
        self.created = time.time()
        self.updated = self.created
        self.lock = threading.Lock()

    def view(self) -> dict:
        latest = self.fit_history[-1] if self.fit_history else None
        return {
            "id": self.id,
            "n": self.dataset.n,
            "grid": list(self.dataset.grid.dims) if self.dataset.is_grid else None,
            "design": list(self.design_names),
            "candidates": [
                c for c in self.dataset.covariates if c not in self.design_names
            ],
            "fit_count": len(self.fit_history),
            "latest_fit": latest,
            "fit_in_progress": self.active_fit is not None,
            "created": self.created,
            "updated": self.updated,
        }


class SessionStore:
    def __init__(self, data_dir: Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.sessions: dict[str, _Session] = {}
        self.lock = threading.Lock()
        self.pool = ThreadPoolExecutor(max_workers=thread_cap() + 1)

    def log_event(self, session_id: str, event: dict) -> None:
        path = self.data_dir / f"{session_id}.jsonl"
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")

    def events(self, session_id: str) -> list[dict]:
        path = self.data_dir / f"{session_id}.jsonl"
        if not path.exists():
            return []
        return [json.loads(line) for line in path.read_text().splitlines() if line]

    def get(self, session_id: str) -> _Session:
        s = self.sessions.get(session_id)
        if s is None:
            raise HTTPException(404, f"unknown session {session_id!r}")
        return s


def _ingest_csv_text(csv_text: str, schema: dict) -> Dataset:
    import tempfile

    with tempfile.NamedTemporaryFile("w", suffix=".csv", delete=False) as fh:
        fh.write(csv_text)
        name = fh.name
    try:
        return ingest_csv(name, schema)
    finally:
        Path(name).unlink(missing_ok=True)


def _run_fit(store: SessionStore, session: _Session, token: str, req: FitRequest):
    try:
        with session.lock:
            ds = session.dataset
            names = list(session.design_names)
        design = design_matrix(ds, names)
        res = fit(
            ds,
            design,
            method=req.method,
            nu=req.nu,
            optimizer=OptimizerConfig(seed=req.seed),
        )
        record = res.to_json()
        record["design"] = names
        record["seed"] = req.seed
        with session.lock:
            entry = session.fits[token]
            if entry["status"] == "cancelled":
                session.active_fit = None
                return
            entry["status"] = "done"
            entry["result"] = record
            session.fit_history.append(record)
            session.active_fit = None
            session.updated = time.time()
    except Exception as exc:
        with session.lock:
            entry = session.fits[token]
            entry["status"] = "failed"
            entry["error"] = str(exc)
            session.active_fit = None


def create_app(data_dir="./gpdiag-sessions", static_dir: str | None = None) -> FastAPI:
    app = FastAPI(
        title="gpdiag service",
        description="model-building sessions for GP mixed-model diagnostics",
        version="0.1.0",
    )
    store = SessionStore(Path(data_dir))
    app.state.store = store

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSession):
        try:
            ds = _ingest_csv_text(body.csv, body.schema_)
        except GpdiagError as exc:
            raise HTTPException(400, str(exc)) from None
        session_id = secrets.token_hex(8)
        session = _Session(session_id, ds)
        with store.lock:
            store.sessions[session_id] = session
        store.log_event(session_id, {"event": "create", "csv": body.csv,
                                     "schema": body.schema_})
        return session.view()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = store.get(session_id)
        with session.lock:
            return session.view()

    @app.post("/sessions/{session_id}/grid")
    def apply_grid(session_id: str, body: GridRequest):
        session = store.get(session_id)
        with session.lock:
            if session.active_fit is not None:
                raise HTTPException(409, "fit in progress")
            try:
                spec = GridSpec(body.m1, body.m2, body.lam)
                session.dataset = regrid(
                    session.dataset, spec, lam_covariates=body.lambda_covariates
                )
            except GpdiagError as exc:
                raise HTTPException(400, str(exc)) from None
            session.updated = time.time()
            view = session.view()
        store.log_event(session_id, {
            "event": "grid", "m1": body.m1, "m2": body.m2,
            "lambda": body.lam, "lambda_covariates": body.lambda_covariates,
        })
        return view

    @app.post("/sessions/{session_id}/fit", status_code=202)
    def start_fit(session_id: str, body: FitRequest):
        session = store.get(session_id)
        if body.method not in ("exact", "approximate"):
            raise HTTPException(400, f"unknown method {body.method!r}")
        with session.lock:
            if session.active_fit is not None:
                raise HTTPException(409, "fit in progress")
            if body.method == "approximate" and not session.dataset.is_grid:
                raise HTTPException(422, "approximate method requires grid data")
            token = secrets.token_hex(8)
            session.fits[token] = {"status": "running"}
            session.active_fit = token
        store.log_event(session_id, {
            "event": "fit", "method": body.method, "nu": body.nu, "seed": body.seed,
        })
        store.pool.submit(_run_fit, store, session, token, body)
        return JSONResponse({"token": token, "status": "running"}, status_code=202)

    @app.get("/sessions/{session_id}/fits/{token}")
    def poll_fit(session_id: str, token: str):
        session = store.get(session_id)
        with session.lock:
            entry = session.fits.get(token)
            if entry is None:
                raise HTTPException(404, "unknown fit token")
            out = {"token": token, "status": entry["status"]}
            if entry["status"] == "done":
                out["result"] = entry["result"]
            if entry["status"] == "failed":
                out["error"] = entry.get("error", "")
            return out

    @app.delete("/sessions/{session_id}/fits/{token}")
    def cancel_fit(session_id: str, token: str):
        session = store.get(session_id)
        with session.lock:
            entry = session.fits.get(token)
            if entry is None:
                raise HTTPException(404, "unknown fit token")
            if entry["status"] == "running":
                entry["status"] = "cancelled"
                session.active_fit = None
            return {"token": token, "status": entry["status"]}

    @app.get("/sessions/{session_id}/diagnostics")
    def diagnostics(session_id: str):
        session = store.get(session_id)
        with session.lock:
            if not session.fit_history:
                raise HTTPException(422, "no fit yet")
            record = session.fit_history[-1]
            ds = session.dataset
        if record.get("v_sq") is None:
            raise HTTPException(422, "latest fit has no spectral projections")
        dims = ds.grid.dims
        basis = build_basis_1d(dims[0]) if len(dims) == 1 else build_basis_2d(*dims)
        from .covariance import VarianceParams
        from .reml import FitResult

        params = VarianceParams(nu=record["nu"] if record["nu"] is not None else float("inf"),
                                **record["params"])
        res = FitResult(
            params=params, objective=record["objective"], method=record["method"],
            nu=params.nu, gls=None, v_sq=np.asarray(record["v_sq"]),
            basis_dims=dims, converged=record["converged"],
            n_starts=record["n_starts"],
        )
        return vj_squared_series(res, basis=basis).to_json()

    @app.get("/sessions/{session_id}/avp")
    def avp(session_id: str, candidate: str, domain: str = "spectral"):
        session = store.get(session_id)
        with session.lock:
            if not session.fit_history:
                raise HTTPException(422, "no fit yet")
            record = session.fit_history[-1]
            ds = session.dataset
            names = list(session.design_names)
        if candidate in names:
            raise HTTPException(422, f"candidate {candidate!r} already in model")
        if candidate not in ds.covariates:
            raise HTTPException(400, f"unknown covariate {candidate!r}")
        if domain not in ("observation", "spectral"):
            raise HTTPException(400, f"unknown domain {domain!r}")
        from .covariance import VarianceParams
        from .reml import FitResult

        params = VarianceParams(nu=record["nu"] if record["nu"] is not None else float("inf"),
                                **record["params"])
        res = FitResult(
            params=params, objective=record["objective"], method=record["method"],
            nu=params.nu, gls=None, v_sq=None, basis_dims=None,
            converged=record["converged"], n_starts=record["n_starts"],
        )
        design = design_matrix(ds, names)
        try:
            if domain == "observation":
                out = avp_observation(ds, design, candidate, res)
            else:
                if not ds.is_grid:
                    raise HTTPException(422, "spectral domain requires grid data")
                ordered = ds.to_lattice_order()
                dims = ordered.grid.dims
                basis = build_basis_1d(dims[0]) if len(dims) == 1 else build_basis_2d(*dims)
                a = a_sequence(basis, params.rho, params.nu)
                out = avp_spectral(ordered, basis, design_matrix(ordered, names),
                                   candidate, res, a)
        except HTTPException:
            raise
        except (NumericalError, OptimizationError) as exc:
            raise HTTPException(422, str(exc)) from None
        except GpdiagError as exc:
            raise HTTPException(422, str(exc)) from None
        return out.to_json()

    @app.post("/sessions/{session_id}/covariates")
    def covariates(session_id: str, body: CovariateRequest):
        session = store.get(session_id)
        with session.lock:
            if session.active_fit is not None:
                raise HTTPException(409, "fit in progress")
            if body.action == "add":
                if body.synthetic is not None:
                    try:
                        col = synthetic_covariate(session.dataset, body.synthetic)
                    except GpdiagError as exc:
                        raise HTTPException(422, str(exc)) from None
                    session.dataset = session.dataset.with_covariate(body.name, col)
                if body.name not in session.dataset.covariates:
                    raise HTTPException(400, f"unknown covariate {body.name!r}")
                if body.name in session.design_names:
                    raise HTTPException(422, f"{body.name!r} already in model")
                session.design_names.append(body.name)
            elif body.action == "remove":
                if body.name not in session.design_names:
                    raise HTTPException(400, f"{body.name!r} not in model")
                session.design_names.remove(body.name)
            else:
                raise HTTPException(400, f"unknown action {body.action!r}")
            session.updated = time.time()
            view = session.view()
        store.log_event(session_id, {
            "event": "covariates", "action": body.action, "name": body.name,
            "synthetic": body.synthetic,
        })
        return view

    @app.get("/sessions/{session_id}/history")
    def history(session_id: str):
        session = store.get(session_id)
        with session.lock:
            return {"id": session_id, "fit_history": list(session.fit_history)}

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app


def replay_events(app_client, events: list[dict]) -> str:
    """Drive a fresh server through a recorded event log; returns the new
    session id.  Used to check replay determinism."""
    session_id = None
    for event in events:
        kind = event["event"]
        if kind == "create":
            r = app_client.post(
                "/sessions", json={"csv": event["csv"], "schema": event["schema"]}
            )
            r.raise_for_status()
            session_id = r.json()["id"]
        elif kind == "grid":
            app_client.post(
                f"/sessions/{session_id}/grid",
                json={
                    "m1": event["m1"], "m2": event["m2"], "lambda": event["lambda"],
                    "lambda_covariates": event["lambda_covariates"],
                },
            ).raise_for_status()
        elif kind == "fit":
            r = app_client.post(
                f"/sessions/{session_id}/fit",
                json={"method": event["method"], "nu": event["nu"], "seed": event["seed"]},
            )
            r.raise_for_status()
            token = r.json()["token"]
            while True:
                poll = app_client.get(f"/sessions/{session_id}/fits/{token}").json()
                if poll["status"] != "running":
                    break
                time.sleep(0.02)
        elif kind == "covariates":
            app_client.post(
                f"/sessions/{session_id}/covariates",
                json={
                    "action": event["action"], "name": event["name"],
                    "synthetic": event["synthetic"],
                },
            ).raise_for_status()
    return session_id


def main(argv=None) -> int:
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(prog="gpdiag-service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8321)
    parser.add_argument("--data-dir", default="./gpdiag-sessions")
    parser.add_argument("--static-dir", default=None,
                        help="directory with the built browser bundle")
    args = parser.parse_args(argv)
    app = create_app(args.data_dir, static_dir=args.static_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    main()
