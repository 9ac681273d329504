import pytest
from fastapi.testclient import TestClient

from ensemblescope.server import create_app


@pytest.fixture(scope="module")
def client(demo_library):
    return TestClient(create_app(demo_library))


@pytest.fixture()
def sid(client):
    return client.post("/sessions", json={"seed": 0}).json()["session_id"]


def test_library_info(client, demo_library):
    r = client.get("/library")
    assert r.status_code == 200
    body = r.json()
    assert body["n_models"] == demo_library.n_models
    assert body["classes"] == list(demo_library.dataset.classes)
    assert {m["name"] for m in body["attributes"]} == {
        a.name for a in demo_library.dataset.attributes
    }
    assert "acc_local" in body["metric_names"]


def test_create_session_response(client):
    r = client.post("/sessions", json={"seed": 0, "max_size": 4})
    assert r.status_code == 200
    body = r.json()
    assert body["revision"] == 0
    assert body["members"]
    assert body["auto_trace"]["steps"]


def test_every_response_carries_revision(client, sid):
    calls = [
        ("get", f"/sessions/{sid}/frame", None),
        ("post", f"/sessions/{sid}/selection", {"ids": []}),
        ("post", f"/sessions/{sid}/errors-filter", {"on": True}),
        ("get", f"/sessions/{sid}/model-space", None),
        ("post", f"/sessions/{sid}/cv", None),
        ("post", f"/sessions/{sid}/reset", None),
        ("get", f"/sessions/{sid}/perf", None),
    ]
    for method, path, body in calls:
        r = client.get(path) if method == "get" else client.post(path, json=body)
        assert r.status_code == 200, path
        assert "revision" in r.json(), path


def test_frame_bytes_stable_at_fixed_revision(client, sid):
    a = client.get(f"/sessions/{sid}/frame")
    b = client.get(f"/sessions/{sid}/frame")
    assert a.content == b.content


def test_rect_selection_and_local_accuracy(client, sid):
    r = client.post(
        f"/sessions/{sid}/selection",
        json={"rect": {"x0": 0.0, "x1": 2.0, "y0": 0.0, "y1": 1.1}},
    )
    body = r.json()
    assert body["selection_size"] > 0
    assert body["local_accuracies"]


def test_toggle_round_trip(client, sid, demo_library):
    members = client.get(f"/sessions/{sid}/perf").json()["members"]
    target = next(m for m in range(demo_library.n_models) if m not in members)
    r1 = client.post(f"/sessions/{sid}/models/{target}/toggle")
    assert r1.json()["applied"]
    assert target in r1.json()["members"]
    r2 = client.post(f"/sessions/{sid}/models/{target}/toggle")
    assert target not in r2.json()["members"]
    assert r2.json()["revision"] == r1.json()["revision"] + 1


def test_model_space_axis_params(client, sid):
    r = client.get(f"/sessions/{sid}/model-space", params={"x": "acc", "y": "div_q"})
    body = r.json()
    assert body["available"]
    assert body["axis_x"] == "acc"
    assert len(body["points"]) > 0
    # acc_local without a selection reports unavailable instead of crashing
    client.post(f"/sessions/{sid}/selection", json={"ids": []})
    r2 = client.get(f"/sessions/{sid}/model-space", params={"x": "acc_local", "y": "acc"})
    assert r2.status_code == 200
    assert not r2.json()["available"]


def test_library_rows_for_selection_table(client, demo_library):
    ids = demo_library.dataset.test_indices[:3].tolist()
    r = client.get("/library/rows", params={"ids": ",".join(map(str, ids))})
    assert r.status_code == 200
    rows = r.json()["rows"]
    assert [row["id"] for row in rows] == ids
    assert rows[0]["label"] in demo_library.dataset.classes
    assert "age" in rows[0]["values"]
    # non-test ids are refused
    bad = int(demo_library.dataset.train_indices[0])
    assert client.get("/library/rows", params={"ids": str(bad)}).status_code == 400


def test_error_statuses(client, sid):
    assert client.get("/sessions/missing/perf").status_code == 404
    assert client.post(f"/sessions/{sid}/models/9999/toggle").status_code == 400
    assert client.get(f"/sessions/{sid}/frame", params={"mode": "umap"}).status_code == 400
    assert (
        client.post(f"/sessions/{sid}/selection", json={"rect": {"x0": 0}}).status_code == 400
    )
