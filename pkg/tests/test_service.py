import json

import pytest
from fastapi.testclient import TestClient

from corrsim.service import build_app


def _client(tmp_path, **kw):
    app = build_app("slot", record_dir=tmp_path, realtime=False, **kw)
    return TestClient(app)


def _send(ws, **cmd):
    ws.send_text(json.dumps(cmd))


def _recv(ws):
    return json.loads(ws.receive_text())


def test_idle_before_start(tmp_path):
    with _client(tmp_path).websocket_connect("/ws") as ws:
        _send(ws, type="step", n=1)
        frame = _recv(ws)
        assert frame["type"] == "idle"
        assert frame["task"] == "slot"


def test_start_and_frame_schema(tmp_path):
    with _client(tmp_path).websocket_connect("/ws") as ws:
        _send(ws, type="start")
        started = _recv(ws)
        assert started["type"] == "started"
        assert started["scenario_id"].startswith("slot-col-")
        _send(ws, type="step", n=3)
        for tick in range(3):
            frame = _recv(ws)
            assert frame["type"] == "frame"
            assert frame["tick"] == tick
            assert frame["time"] == pytest.approx(tick * 0.02)
            for key in ("episode_id", "mode", "stage", "correction", "tool",
                        "measured", "human", "primitives", "outcome"):
                assert key in frame
            assert len(frame["tool"]) == 3
            assert any(p.get("name") == "tool" for p in frame["primitives"])


def test_force_scaled_and_applied_next_tick(tmp_path):
    with _client(tmp_path, force_scale=0.05).websocket_connect("/ws") as ws:
        _send(ws, type="start")
        _recv(ws)
        _send(ws, type="force", fx=100.0, fy=-40.0)
        _send(ws, type="step", n=1)
        frame = _recv(ws)
        assert frame["human"][0] == pytest.approx(5.0)
        assert frame["human"][1] == pytest.approx(-2.0)
        assert frame["correction"] is True


def test_force_decays_after_hold_window(tmp_path):
    with _client(tmp_path).websocket_connect("/ws") as ws:
        _send(ws, type="start")
        _recv(ws)
        _send(ws, type="force", fx=100.0, fy=0.0)
        _send(ws, type="step", n=15)  # 0.3 s, past the 0.2 s hold
        frames = [_recv(ws) for _ in range(15)]
        assert frames[0]["human"][0] > 0.0
        assert frames[-1]["human"][0] == 0.0
        assert frames[-1]["correction"] is False


def test_set_mode_rules(tmp_path):
    with _client(tmp_path).websocket_connect("/ws") as ws:
        _send(ws, type="set_mode", mode="TakeOver")
        assert _recv(ws)["type"] == "ack"
        _send(ws, type="set_mode", mode="Demo")
        assert _recv(ws)["type"] == "error"
        _send(ws, type="start")
        _recv(ws)
        _send(ws, type="set_mode", mode="OnPolicyDelta")
        assert _recv(ws)["type"] == "error"


def test_takeover_flag_marks_correction(tmp_path):
    with _client(tmp_path).websocket_connect("/ws") as ws:
        _send(ws, type="set_mode", mode="TakeOver")
        _recv(ws)
        _send(ws, type="start")
        _recv(ws)
        _send(ws, type="step", n=1)
        assert _recv(ws)["correction"] is False
        _send(ws, type="flag_down")
        _send(ws, type="step", n=2)
        assert _recv(ws)["correction"] is True
        assert _recv(ws)["correction"] is True
        _send(ws, type="flag_up")
        _send(ws, type="step", n=1)
        assert _recv(ws)["correction"] is False


def test_end_saves_episode(tmp_path):
    with _client(tmp_path).websocket_connect("/ws") as ws:
        _send(ws, type="start")
        _recv(ws)
        _send(ws, type="step", n=5)
        for _ in range(5):
            _recv(ws)
        _send(ws, type="end", save=True)
        ended = _recv(ws)
        assert ended["type"] == "ended"
        assert ended["saved"] is not None
        files = list(tmp_path.glob("*.ep"))
        assert len(files) == 1
        assert "live" in files[0].name


def test_end_without_save(tmp_path):
    with _client(tmp_path).websocket_connect("/ws") as ws:
        _send(ws, type="start")
        _recv(ws)
        _send(ws, type="step", n=1)
        _recv(ws)
        _send(ws, type="end", save=False)
        assert _recv(ws)["saved"] is None
        assert not list(tmp_path.glob("*.ep"))


def test_unknown_command_and_scenario(tmp_path):
    with _client(tmp_path).websocket_connect("/ws") as ws:
        _send(ws, type="warp")
        assert _recv(ws)["type"] == "error"
        _send(ws, type="start", scenario_id="slot-nope-9")
        assert _recv(ws)["type"] == "error"


def test_second_client_rejected(tmp_path):
    client = _client(tmp_path)
    with client.websocket_connect("/ws") as first:
        _send(first, type="step", n=1)
        _recv(first)
        with client.websocket_connect("/ws") as second:
            msg = _recv(second)
            assert msg["type"] == "error"
