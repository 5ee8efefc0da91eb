import io
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from gpdiag.covariance import VarianceParams
from gpdiag.data import Dataset, export_csv
from gpdiag.service import create_app, replay_events, synthetic_covariate
from gpdiag.simulation import SimConfig, simulate_gp


def _csv_text(dataset):
    import tempfile
    from pathlib import Path

    with tempfile.NamedTemporaryFile("w", suffix=".csv", delete=False) as fh:
        name = fh.name
    export_csv(dataset, name)
    text = Path(name).read_text()
    Path(name).unlink()
    return text


@pytest.fixture
def irregular_csv():
    rng = np.random.default_rng(12)
    loc = rng.uniform(0, 1, size=(90, 2))
    y = loc[:, 1] * 2 + rng.standard_normal(90)
    ds = Dataset(loc, y, {"elev": loc[:, 1] + 0.1 * rng.standard_normal(90),
                          "noise": rng.standard_normal(90)},
                 loc_names=("e", "n"))
    return _csv_text(ds)


@pytest.fixture
def client(tmp_path):
    app = create_app(tmp_path / "sessions")
    with TestClient(app) as c:
        yield c


def _wait_fit(client, sid, token, timeout=60.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        poll = client.get(f"/sessions/{sid}/fits/{token}").json()
        if poll["status"] != "running":
            return poll
        time.sleep(0.02)
    raise TimeoutError("fit did not finish")


def _create(client, csv_text):
    r = client.post("/sessions", json={
        "csv": csv_text,
        "schema": {"loc": ["e", "n"], "outcome": "y",
                   "covariates": ["elev", "noise"]},
    })
    assert r.status_code == 201
    return r.json()["id"]


class TestSessionLifecycle:
    def test_create_grid_fit_diagnostics(self, client, irregular_csv):
        sid = _create(client, irregular_csv)
        r = client.post(f"/sessions/{sid}/grid",
                        json={"m1": 8, "m2": 8, "lambda": 7.0})
        assert r.status_code == 200
        assert r.json()["grid"] == [8, 8]

        r = client.post(f"/sessions/{sid}/fit",
                        json={"method": "approximate", "nu": 0.5, "seed": 3})
        assert r.status_code == 202
        token = r.json()["token"]
        poll = _wait_fit(client, sid, token)
        assert poll["status"] == "done"

        r = client.get(f"/sessions/{sid}/diagnostics")
        assert r.status_code == 200
        entries = r.json()["entries"]
        assert len(entries) == 8 * 8 - 1

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/nope").status_code == 404

    def test_bad_schema_400(self, client, irregular_csv):
        r = client.post("/sessions", json={
            "csv": irregular_csv,
            "schema": {"loc": ["absent"], "outcome": "y"},
        })
        assert r.status_code == 400

    def test_avp_in_model_422(self, client, irregular_csv):
        sid = _create(client, irregular_csv)
        client.post(f"/sessions/{sid}/grid", json={"m1": 8, "m2": 8, "lambda": 7.0})
        token = client.post(f"/sessions/{sid}/fit",
                            json={"method": "approximate", "seed": 1}).json()["token"]
        _wait_fit(client, sid, token)
        r = client.post(f"/sessions/{sid}/covariates",
                        json={"action": "add", "name": "elev"})
        assert r.status_code == 200
        r = client.get(f"/sessions/{sid}/avp",
                       params={"candidate": "elev", "domain": "spectral"})
        assert r.status_code == 422
        assert "already in model" in r.json()["detail"]

    def test_avp_both_domains(self, client, irregular_csv):
        sid = _create(client, irregular_csv)
        client.post(f"/sessions/{sid}/grid", json={"m1": 8, "m2": 8, "lambda": 7.0})
        token = client.post(f"/sessions/{sid}/fit",
                            json={"method": "approximate", "seed": 1}).json()["token"]
        _wait_fit(client, sid, token)
        for domain in ("spectral", "observation"):
            r = client.get(f"/sessions/{sid}/avp",
                           params={"candidate": "elev", "domain": domain})
            assert r.status_code == 200
            body = r.json()
            assert body["domain"] == domain
            assert {"slope", "p_value", "points"} <= set(body)

    def test_covariate_add_refit_moves_estimates(self, client, irregular_csv):
        sid = _create(client, irregular_csv)
        client.post(f"/sessions/{sid}/grid", json={"m1": 8, "m2": 8, "lambda": 7.0})
        t1 = client.post(f"/sessions/{sid}/fit",
                         json={"method": "approximate", "seed": 2}).json()["token"]
        first = _wait_fit(client, sid, t1)["result"]
        client.post(f"/sessions/{sid}/covariates",
                    json={"action": "add", "name": "elev"})
        t2 = client.post(f"/sessions/{sid}/fit",
                         json={"method": "approximate", "seed": 2}).json()["token"]
        second = _wait_fit(client, sid, t2)["result"]
        assert second["design"] == ["elev"]
        history = client.get(f"/sessions/{sid}/history").json()["fit_history"]
        assert len(history) == 2
        assert history[0] == first and history[1] == second

    def test_synthetic_covariate_endpoint(self, client, irregular_csv):
        sid = _create(client, irregular_csv)
        client.post(f"/sessions/{sid}/grid", json={"m1": 8, "m2": 8, "lambda": 7.0})
        r = client.post(f"/sessions/{sid}/covariates", json={
            "action": "add", "name": "ns_quad", "synthetic": "ns_quadratic",
        })
        assert r.status_code == 200
        assert "ns_quad" in r.json()["design"]

    def test_synthetic_on_irregular_422(self, client, irregular_csv):
        sid = _create(client, irregular_csv)
        r = client.post(f"/sessions/{sid}/covariates", json={
            "action": "add", "name": "ns", "synthetic": "ns_linear",
        })
        assert r.status_code == 422

    def test_openapi_served(self, client):
        spec = client.get("/openapi.json").json()
        paths = set(spec["paths"])
        assert {"/sessions", "/sessions/{session_id}/fit",
                "/sessions/{session_id}/avp"} <= paths


class TestSyntheticCovariates:
    def _grid_ds(self):
        return simulate_gp(SimConfig(dims=(4, 4), truth=VarianceParams(1, 1, 2), seed=0))

    def test_ns_linear_shape(self):
        ds = self._grid_ds()
        col = synthetic_covariate(ds, "ns_linear")
        assert abs(col.mean()) < 1e-12
        grid = col.reshape(4, 4)
        # varies along the second coordinate, constant along the first
        assert np.allclose(grid[0], grid[1])
        assert np.ptp(grid[0]) > 0

    def test_quadratic_differs_from_linear(self):
        ds = self._grid_ds()
        lin = synthetic_covariate(ds, "ns_linear")
        quad = synthetic_covariate(ds, "ns_quadratic")
        resid = quad - lin * (quad @ lin) / (lin @ lin)
        assert np.linalg.norm(resid) > 1e-6

    def test_quadratic_energy_in_low_frequencies(self):
        from gpdiag.basis import build_basis_2d, project

        ds = simulate_gp(SimConfig(dims=(8, 8), truth=VarianceParams(1, 1, 2), seed=0))
        quad = synthetic_covariate(ds, "ns_quadratic")
        b = build_basis_2d(8, 8)
        v = project(b, quad).v
        energy = v**2 / np.sum(v**2)
        order = np.argsort(-energy)
        assert energy[order[:2]].sum() > 0.9


class TestReplayDeterminism:
    def test_replay_reproduces_fit_history(self, tmp_path, irregular_csv):
        app1 = create_app(tmp_path / "a")
        with TestClient(app1) as c1:
            sid = _create(c1, irregular_csv)
            c1.post(f"/sessions/{sid}/grid", json={"m1": 6, "m2": 6, "lambda": 7.0})
            t = c1.post(f"/sessions/{sid}/fit",
                        json={"method": "approximate", "seed": 5}).json()["token"]
            _wait_fit(c1, sid, t)
            c1.post(f"/sessions/{sid}/covariates",
                    json={"action": "add", "name": "elev"})
            t = c1.post(f"/sessions/{sid}/fit",
                        json={"method": "exact", "seed": 5}).json()["token"]
            _wait_fit(c1, sid, t)
            history1 = c1.get(f"/sessions/{sid}/history").json()["fit_history"]
            events = app1.state.store.events(sid)

        app2 = create_app(tmp_path / "b")
        with TestClient(app2) as c2:
            sid2 = replay_events(c2, events)
            history2 = c2.get(f"/sessions/{sid2}/history").json()["fit_history"]
        assert history1 == history2

    def test_event_log_append_only(self, tmp_path, irregular_csv):
        app = create_app(tmp_path / "log")
        with TestClient(app) as c:
            sid = _create(c, irregular_csv)
            c.post(f"/sessions/{sid}/grid", json={"m1": 6, "m2": 6, "lambda": 7.0})
            events = app.state.store.events(sid)
        assert [e["event"] for e in events] == ["create", "grid"]
