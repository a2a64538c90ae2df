import json

import pytest
from fastapi.testclient import TestClient

from codeatlas.errors import GatewayError
from codeatlas.gateway import ProviderConfig
from codeatlas.service import MapService, create_app

from conftest import make_tree, scripted_completion

LOCAL_REPLY = (
    "The node defines two members.\n"
    "```dot\ndigraph L { M1 -> M2 [label=\"defines\"]; }\n```\n"
)
CHAT_REPLY = "The core module handles everything."


def project(tmp_path):
    return make_tree(
        tmp_path / "proj",
        {
            "a.py": "def a():\n    return 1\n",
            "b.py": "def b():\n    return 2\n",
            "sub/c.py": "def c():\n    return 3\n",
        },
    )


PATHS = ["a.py", "b.py", "sub/c.py"]
GOOD = scripted_completion(PATHS)


def default_script():
    # two identical globals stabilize the map in two iterations, then a
    # local reply and a chat reply
    return [GOOD, GOOD, LOCAL_REPLY, CHAT_REPLY]


@pytest.fixture
def storage(tmp_path):
    return tmp_path / "sessions"


def make_service(storage, script=None, **kwargs):
    return MapService(
        storage_root=storage,
        provider_config=ProviderConfig(provider_kind="scripted"),
        script=script if script is not None else default_script(),
        **kwargs,
    )


@pytest.fixture
def client(tmp_path, storage):
    service = make_service(storage)
    with TestClient(create_app(service)) as test_client:
        test_client.project_root = str(project(tmp_path))
        yield test_client


def create_session(client):
    response = client.post("/sessions", json={"serverPath": client.project_root})
    assert response.status_code == 201
    return response.json()["sessionId"]


class TestSessionLifecycle:
    def test_create_from_server_path(self, client):
        response = client.post("/sessions", json={"serverPath": client.project_root})
        assert response.status_code == 201
        body = response.json()
        assert body["status"] == "ready"
        assert body["fileCount"] == 3

    def test_create_from_archive(self, client, tmp_path):
        import base64
        import io
        import zipfile

        buffer = io.BytesIO()
        with zipfile.ZipFile(buffer, "w") as archive:
            archive.writestr("x.py", "pass\n")
        response = client.post(
            "/sessions",
            json={"archiveBase64": base64.b64encode(buffer.getvalue()).decode()},
        )
        assert response.status_code == 201
        assert response.json()["fileCount"] == 1

    def test_zero_files_rejected(self, client, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        response = client.post("/sessions", json={"serverPath": str(empty)})
        assert response.status_code == 400
        assert response.json()["code"] == "zero-files"

    def test_both_inputs_rejected(self, client):
        response = client.post(
            "/sessions", json={"serverPath": "x", "archiveBase64": "eA=="}
        )
        assert response.status_code == 400

    def test_unknown_session_is_404(self, client):
        response = client.get("/sessions/nope")
        assert response.status_code == 404
        assert response.json()["code"] == "not-found"

    def test_get_session_lists_generated_maps(self, client):
        session_id = create_session(client)
        assert client.get(f"/sessions/{session_id}").json()["generatedMaps"] == []
        client.get(f"/sessions/{session_id}/maps/business")
        body = client.get(f"/sessions/{session_id}").json()
        assert body["generatedMaps"] == ["business"]

    def test_upload_failure_keeps_session_retryable(self, tmp_path, storage, monkeypatch):
        import codeatlas.service as service_module

        service = make_service(storage)
        real_build = service_module.build_provider
        state = {"fail": True}

        def flaky_build(config, script=None):
            if state["fail"]:
                raise GatewayError("store unavailable")
            return real_build(config, script=script)

        monkeypatch.setattr(service_module, "build_provider", flaky_build)
        with TestClient(create_app(service)) as client:
            response = client.post("/sessions", json={"serverPath": str(project(tmp_path))})
            assert response.status_code == 201
            session_id = response.json()["sessionId"]
            assert response.json()["status"] == "uploadFailed"
            # retry once the provider recovers
            state["fail"] = False
            response = client.get(f"/sessions/{session_id}/maps/business")
            assert response.status_code == 200
            assert client.get(f"/sessions/{session_id}").json()["status"] == "ready"


class TestGlobalMaps:
    def test_generate_and_payload_shape(self, client):
        session_id = create_session(client)
        body = client.get(f"/sessions/{session_id}/maps/business").json()
        assert body["kind"] == "business-component"
        assert body["graphDot"].startswith("digraph")
        assert body["overview"]["summary"]
        assert body["trace"]["stoppedBecause"] == "stabilized"
        assert [i["tp"] for i in body["trace"]["iterations"]] == [3, 3]

    def test_unknown_kind_rejected(self, client):
        session_id = create_session(client)
        response = client.get(f"/sessions/{session_id}/maps/wat")
        assert response.status_code == 400

    def test_cache_hit_makes_no_gateway_calls(self, tmp_path, storage):
        service = make_service(storage)
        with TestClient(create_app(service)) as client:
            client.project_root = str(project(tmp_path))
            session_id = create_session(client)
            first = client.get(f"/sessions/{session_id}/maps/business")
            provider = service._providers[session_id]
            calls = provider.complete_calls
            second = client.get(f"/sessions/{session_id}/maps/business")
            assert provider.complete_calls == calls
            assert second.content == first.content

    def test_restart_serves_byte_identical_payload_offline(self, tmp_path, storage, monkeypatch):
        with TestClient(create_app(make_service(storage))) as client:
            client.project_root = str(project(tmp_path))
            session_id = create_session(client)
            first = client.get(f"/sessions/{session_id}/maps/business")
            assert first.status_code == 200

        # fresh process simulation: new service over the same storage, with
        # a provider factory that counts (and would fail) if ever touched
        import codeatlas.service as service_module

        def exploding_build(config, script=None):
            raise AssertionError("restart served from cache must not build a provider")

        monkeypatch.setattr(service_module, "build_provider", exploding_build)
        with TestClient(create_app(make_service(storage, script=[]))) as client:
            second = client.get(f"/sessions/{session_id}/maps/business")
            assert second.status_code == 200
            assert second.content == first.content

    def test_regenerate_versions_old_payload(self, tmp_path, storage):
        service = make_service(
            storage, script=[GOOD, GOOD, GOOD, GOOD]
        )
        with TestClient(create_app(service)) as client:
            client.project_root = str(project(tmp_path))
            session_id = create_session(client)
            client.get(f"/sessions/{session_id}/maps/business")
            response = client.post(f"/sessions/{session_id}/maps/business/regenerate")
            assert response.status_code == 200
        map_dir = storage / session_id / "maps" / "business-component"
        versioned = list(map_dir.glob("payload-*.json"))
        assert len(versioned) == 1

    def test_parse_failure_returns_raw_text(self, tmp_path, storage):
        service = make_service(storage, script=["garbage", "junk"])
        with TestClient(create_app(service)) as client:
            client.project_root = str(project(tmp_path))
            session_id = create_session(client)
            response = client.get(f"/sessions/{session_id}/maps/business")
            assert response.status_code == 400
            assert "junk" in response.json()["message"]

    def test_trace_endpoint(self, client):
        session_id = create_session(client)
        client.get(f"/sessions/{session_id}/maps/business")
        trace = client.get(f"/sessions/{session_id}/trace/business").json()
        assert trace["stoppedBecause"] == "stabilized"
        assert len(trace["iterations"]) == 2


class TestLocalMaps:
    def test_requires_generated_global(self, client):
        session_id = create_session(client)
        response = client.get(
            f"/sessions/{session_id}/maps/business/nodes/Core/local"
        )
        assert response.status_code == 400

    def test_local_map_and_cache(self, tmp_path, storage):
        service = make_service(storage)
        with TestClient(create_app(service)) as client:
            client.project_root = str(project(tmp_path))
            session_id = create_session(client)
            client.get(f"/sessions/{session_id}/maps/business")
            response = client.get(
                f"/sessions/{session_id}/maps/business/nodes/Core/local"
            )
            assert response.status_code == 200
            body = response.json()
            assert body["nodeId"] == "Core"
            assert "defines" in body["graphDot"]
            assert "defines two members" in body["explanation"]
            provider = service._providers[session_id]
            calls = provider.complete_calls
            again = client.get(
                f"/sessions/{session_id}/maps/business/nodes/Core/local"
            )
            assert provider.complete_calls == calls  # served from cache
            assert again.json() == body

    def test_unknown_node_is_404(self, client):
        session_id = create_session(client)
        client.get(f"/sessions/{session_id}/maps/business")
        response = client.get(
            f"/sessions/{session_id}/maps/business/nodes/Ghost/local"
        )
        assert response.status_code == 404


class TestChat:
    def test_chat_with_selected_node(self, client):
        session_id = create_session(client)
        client.get(f"/sessions/{session_id}/maps/business")
        # consume the scripted local reply so chat gets the next response
        client.get(f"/sessions/{session_id}/maps/business/nodes/Core/local")
        response = client.post(
            f"/sessions/{session_id}/chat",
            json={"question": "What does Core do?", "selectedNodeId": "Core"},
        )
        assert response.status_code == 200
        body = response.json()
        assert body["answer"] == CHAT_REPLY
        assert body["selectedNodeId"] == "Core"
        assert body["nodePayload"]["keyFiles"] == PATHS
        log = client.get(f"/sessions/{session_id}/chat").json()
        assert len(log) == 1
        assert log[0]["question"] == "What does Core do?"

    def test_chat_unknown_node(self, client):
        session_id = create_session(client)
        client.get(f"/sessions/{session_id}/maps/business")
        response = client.post(
            f"/sessions/{session_id}/chat",
            json={"question": "hi", "selectedNodeId": "Ghost"},
        )
        assert response.status_code == 404

    def test_gateway_errors_surface_as_502(self, tmp_path, storage):
        service = make_service(storage, script=[])  # nothing scripted
        with TestClient(create_app(service)) as client:
            client.project_root = str(project(tmp_path))
            session_id = create_session(client)
            response = client.post(
                f"/sessions/{session_id}/chat", json={"question": "hello"}
            )
            assert response.status_code == 502
            assert response.json()["code"] == "gateway-error"


def test_chat_log_persists_across_restart(tmp_path, storage):
    with TestClient(create_app(make_service(storage))) as client:
        client.project_root = str(project(tmp_path))
        session_id = create_session(client)
        client.get(f"/sessions/{session_id}/maps/business")
        client.get(f"/sessions/{session_id}/maps/business/nodes/Core/local")
        client.post(f"/sessions/{session_id}/chat", json={"question": "q1"})
    with TestClient(create_app(make_service(storage))) as client:
        log = client.get(f"/sessions/{session_id}/chat").json()
        assert [e["question"] for e in log] == ["q1"]
