import io
import json
import socket
import threading

import numpy as np
import pytest

from attrfool.attack import AttackConfig, run_attack
from attrfool.attribution import AttributionRequest, IgConfig
from attrfool.bridge import (
    BridgeClassifier,
    BridgeError,
    CapabilityError,
    ProtocolError,
    handle_native_request,
    native_meta,
    serve_stdio,
    validate_alignment,
    validate_request,
    validate_response,
)
from helpers import random_toy_sentence


class PipeTransport:
    """In-process transport handing requests straight to a native model server."""

    def __init__(self, model, mangle=None):
        self.model = model
        self.mangle = mangle
        self._pending = None

    def send_line(self, line):
        request = json.loads(line)
        response = handle_native_request(self.model, request)
        out = json.dumps(response)
        if self.mangle:
            out = self.mangle(out, request)
        self._pending = out

    def recv_line(self):
        out, self._pending = self._pending, None
        return out

    def close(self):
        pass


@pytest.fixture
def native_bridge(toy_model):
    return BridgeClassifier(PipeTransport(toy_model))


# --- schema validation ---------------------------------------------------------


def test_validate_request_accepts_canonical_ops():
    validate_request({"op": "meta", "id": 0})
    validate_request({"op": "predict", "id": 1, "tokens": ["good", "movie"], "mask": []})
    validate_request(
        {"op": "attribute", "id": 2, "tokens": ["good"], "method": "IG",
         "label": 0, "mask": [0], "params": {"ig_steps": 8}}
    )
    validate_request({"op": "sentence_sim", "id": 3, "tokens_a": ["a"], "tokens_b": ["b"]})
    validate_request({"op": "perplexity", "id": 4, "tokens": ["a"]})


@pytest.mark.parametrize(
    "bad",
    [
        {"op": "predict", "id": 0, "tokens": [], "mask": []},
        {"op": "predict", "id": 0, "tokens": ["a"], "mask": [1]},
        {"op": "predict", "id": -1, "tokens": ["a"], "mask": []},
        {"op": "attribute", "id": 0, "tokens": ["a"], "method": "LIME", "label": 0},
        {"op": "attribute", "id": 0, "tokens": ["a"], "method": "IG", "label": -2},
        {"op": "explode", "id": 0},
    ],
)
def test_validate_request_rejects_malformed(bad):
    with pytest.raises(ProtocolError):
        validate_request(bad)


def test_validate_response_id_echo_and_shape():
    request = {"op": "predict", "id": 5, "tokens": ["a"], "mask": []}
    validate_response({"id": 5, "result": {"logits": [0.1, 0.9]}}, request)
    with pytest.raises(ProtocolError):
        validate_response({"id": 6, "result": {"logits": [0.1]}}, request)
    with pytest.raises(ProtocolError):
        validate_response({"id": 5}, request)
    with pytest.raises(ProtocolError):
        validate_response(
            {"id": 5, "result": {"logits": [0.1]}, "error": {"code": "x", "message": "y"}},
            request,
        )


def test_validate_attribution_length():
    request = {"op": "attribute", "id": 1, "tokens": ["a", "b"], "method": "S",
               "label": 0, "mask": []}
    validate_response({"id": 1, "result": {"attributions": [0.5, 0.2]}}, request)
    with pytest.raises(ProtocolError):
        validate_response({"id": 1, "result": {"attributions": [0.5]}}, request)


def test_validate_alignment_partition_rules():
    validate_alignment([[0], [1, 2]], 2)
    with pytest.raises(ProtocolError):
        validate_alignment([[0], [0]], 2)  # overlapping groups
    with pytest.raises(ProtocolError):
        validate_alignment([[0]], 2)  # wrong group count
    with pytest.raises(ProtocolError):
        validate_alignment([[0], [-1]], 2)


def test_golden_protocol_corpus():
    from importlib import resources

    corpus = json.loads(
        resources.files("attrfool.data").joinpath("protocol_corpus.json").read_text("utf-8")
    )
    assert corpus["version"] == "attrfool/1"
    for entry in corpus["exchanges"]:
        validate_request(entry["request"])
        validate_response(entry["response"], entry["request"])
    for bad in corpus["invalid_requests"]:
        with pytest.raises(ProtocolError):
            validate_request(bad)
    for item in corpus["invalid_responses"]:
        with pytest.raises(ProtocolError):
            validate_response(item["response"], item["request"])


# --- native loopback server -----------------------------------------------------


def test_meta_reflects_architecture(toy_model):
    meta = native_meta(toy_model)
    assert meta["version"] == "attrfool/1"
    assert meta["labels"] == 2
    assert meta["methods"] == ["S", "IG", "A"]
    assert meta["attention"] == {"layers": 1, "heads": 1}
    assert meta["sentence_sim"] is False and meta["perplexity"] is False


def test_loopback_predict_matches_native(native_bridge, toy_model):
    tokens = ("movie", "feels", "truly", "good")
    direct = toy_model.predict(tokens)
    bridged = native_bridge.predict(tokens)
    assert bridged.y == direct.y
    assert np.allclose(bridged.logits, direct.logits)


def test_loopback_masking_matches_native(native_bridge, toy_model):
    tokens = ("movie", "feels", "truly", "good")
    direct = toy_model.predict(tokens, mask=(1, 3))
    bridged = native_bridge.predict(tokens, mask=(1, 3))
    assert np.allclose(bridged.logits, direct.logits)
    again = native_bridge.predict(tokens, mask=(1, 3))
    assert np.array_equal(bridged.logits, again.logits)


@pytest.mark.parametrize("method", ["S", "IG", "A"])
def test_loopback_attribution_matches_native(native_bridge, toy_model, method):
    tokens = ("movie", "feels", "truly", "good")
    req = AttributionRequest(method=method, ig=IgConfig(16))
    direct = toy_model.attribute(tokens, 0, req)
    bridged = native_bridge.attribute(tokens, 0, req)
    assert np.allclose(bridged, direct, atol=1e-12)


def test_bridge_capability_errors(native_bridge):
    from attrfool.attribution import AttentionSelector

    with pytest.raises(CapabilityError):
        native_bridge.attribute(
            ("good",), 0, AttributionRequest(method="A", attention=AttentionSelector(3, 0))
        )
    with pytest.raises(CapabilityError):
        native_bridge.sentence_similarity(("a",), ("b",))
    with pytest.raises(CapabilityError):
        native_bridge.perplexity(("a",))


def test_bridge_server_error_objects(toy_model):
    response = handle_native_request(
        toy_model, {"op": "attribute", "id": 4, "tokens": ["good"], "method": "IG",
                    "label": 9, "mask": []}
    )
    assert response["id"] == 4
    assert response["error"]["code"] == "runtime"
    # the server stays usable after a failed request
    ok = handle_native_request(toy_model, {"op": "meta", "id": 5})
    assert "result" in ok


def test_attack_identical_native_and_bridged(toy_model, toy_lexicon):
    bridged = BridgeClassifier(PipeTransport(toy_model))
    rng = np.random.default_rng(5)
    req = AttributionRequest(method="S")
    for trial in range(10):
        tokens = random_toy_sentence(rng, toy_lexicon)
        cfg = AttackConfig(rho_max=0.5, variant="tef", seed=trial)
        native_out = run_attack(toy_model, tokens, toy_lexicon, req, cfg)
        bridged_out = run_attack(bridged, tokens, toy_lexicon, req, cfg)
        assert native_out.record.edits == bridged_out.record.edits
        assert native_out.record.pcc == pytest.approx(bridged_out.record.pcc, abs=1e-12)


def test_bridge_retries_one_malformed_response(toy_model):
    state = {"mangled": False}

    def mangle_once(line, request):
        if not state["mangled"] and request["op"] == "predict":
            state["mangled"] = True
            return "this is not json"
        return line

    bridge = BridgeClassifier(PipeTransport(toy_model, mangle=mangle_once))
    pred = bridge.predict(("good", "movie"))
    assert state["mangled"]
    assert pred.logits.size == 2


def test_bridge_rejects_out_of_order_ids(toy_model):
    def wrong_id(line, request):
        obj = json.loads(line)
        obj["id"] = 999
        return json.dumps(obj)

    with pytest.raises(BridgeError):
        BridgeClassifier(PipeTransport(toy_model, mangle=wrong_id))


def test_serve_stdio_round_trip(toy_model):
    requests = [
        {"op": "meta", "id": 0},
        {"op": "predict", "id": 1, "tokens": ["good", "movie"], "mask": []},
        "not json at all",
    ]
    stdin = io.StringIO(
        "\n".join(json.dumps(r) if isinstance(r, dict) else r for r in requests) + "\n"
    )
    stdout = io.StringIO()
    serve_stdio(toy_model, stdin, stdout)
    lines = [json.loads(l) for l in stdout.getvalue().splitlines()]
    assert lines[0]["result"]["version"] == "attrfool/1"
    assert len(lines[1]["result"]["logits"]) == 2
    assert lines[2]["error"]["code"] == "protocol"


def test_tcp_transport_round_trip(toy_model):
    server = socket.create_server(("127.0.0.1", 0))
    host, port = server.getsockname()

    def serve_one():
        conn, _ = server.accept()
        fh = conn.makefile("rw", encoding="utf-8", newline="\n")
        serve_stdio(toy_model, fh, fh)
        conn.close()

    thread = threading.Thread(target=serve_one, daemon=True)
    thread.start()
    from attrfool.bridge import TcpTransport

    bridge = BridgeClassifier(TcpTransport(host, port, timeout=10))
    pred = bridge.predict(("good", "movie"))
    assert pred.logits.size == 2
    bridge.close()
    server.close()
