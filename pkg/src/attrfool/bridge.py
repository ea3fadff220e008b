"""Line-delimited JSON wire protocol: client, schema checks, and a native loopback server.

One JSON object per line, UTF-8. Requests carry ``op``, a monotonically
increasing ``id`` and an op-specific payload; responses echo the ``id`` with
either ``result`` or ``error{code,message}``. Version string: ``attrfool/1``.
"""

from __future__ import annotations

import json
import shlex
import socket
import subprocess
import sys
from dataclasses import dataclass

import numpy as np

from .attribution import AttributionRequest, METHODS
from .metrics import SemanticSimilarity
from .models import Prediction

PROTOCOL_VERSION = "attrfool/1"
OPS = ("meta", "predict", "attribute", "sentence_sim", "perplexity")


class BridgeError(RuntimeError):
    pass


class ProtocolError(BridgeError):
    pass


class CapabilityError(BridgeError):
    pass


# ---------------------------------------------------------------------------
# schema validation


def _fail(msg: str):
    raise ProtocolError(msg)


def _check_tokens(tokens, name="tokens"):
    if not isinstance(tokens, list) or not tokens:
        _fail(f"{name} must be a non-empty list")
    for t in tokens:
        if not isinstance(t, str) or not t:
            _fail(f"{name} entries must be non-empty strings")


def _check_mask(mask, length):
    if not isinstance(mask, list):
        _fail("mask must be a list")
    seen = set()
    for i in mask:
        if not isinstance(i, int) or isinstance(i, bool) or not 0 <= i < length:
            _fail(f"mask index {i!r} out of range for {length} tokens")
        if i in seen:
            _fail(f"duplicate mask index {i}")
        seen.add(i)


def validate_request(obj) -> None:
    """Raise ProtocolError unless ``obj`` is a well-formed request object."""
    if not isinstance(obj, dict):
        _fail("request must be a JSON object")
    op = obj.get("op")
    if op not in OPS:
        _fail(f"unknown op {op!r}")
    rid = obj.get("id")
    if not isinstance(rid, int) or isinstance(rid, bool) or rid < 0:
        _fail(f"id must be a non-negative integer, got {rid!r}")
    if op == "meta":
        return
    if op in ("predict", "attribute", "perplexity"):
        _check_tokens(obj.get("tokens"))
        if op != "perplexity":
            _check_mask(obj.get("mask", []), len(obj["tokens"]))
    if op == "attribute":
        if obj.get("method") not in METHODS:
            _fail(f"unknown method {obj.get('method')!r}")
        label = obj.get("label")
        if not isinstance(label, int) or isinstance(label, bool) or label < 0:
            _fail(f"label must be a non-negative integer, got {label!r}")
        params = obj.get("params", {})
        if not isinstance(params, dict):
            _fail("params must be an object")
        for key in ("ig_steps", "layer", "head"):
            if key in params:
                v = params[key]
                if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                    _fail(f"params.{key} must be a non-negative integer")
        if params.get("ig_steps") == 0:
            _fail("params.ig_steps must be >= 1")
    if op == "sentence_sim":
        _check_tokens(obj.get("tokens_a"), "tokens_a")
        _check_tokens(obj.get("tokens_b"), "tokens_b")


def _check_number_list(values, name):
    if not isinstance(values, list) or not values:
        _fail(f"{name} must be a non-empty list")
    for v in values:
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            _fail(f"{name} entries must be numbers")


def validate_meta(result) -> None:
    if not isinstance(result, dict):
        _fail("meta result must be an object")
    if result.get("version") != PROTOCOL_VERSION:
        _fail(f"protocol version mismatch: {result.get('version')!r} != {PROTOCOL_VERSION!r}")
    labels = result.get("labels")
    if not isinstance(labels, int) or labels < 1:
        _fail("meta.labels must be a positive integer")
    methods = result.get("methods")
    if not isinstance(methods, list) or any(m not in METHODS for m in methods):
        _fail(f"meta.methods must be a subset of {METHODS}")
    att = result.get("attention")
    if not isinstance(att, dict):
        _fail("meta.attention must be an object")
    for key in ("layers", "heads"):
        if not isinstance(att.get(key), int) or att[key] < 0:
            _fail(f"meta.attention.{key} must be a non-negative integer")
    for key in ("sentence_sim", "perplexity"):
        if not isinstance(result.get(key), bool):
            _fail(f"meta.{key} must be a boolean")


def validate_alignment(alignment, source_count: int) -> None:
    """Alignment groups must be disjoint lists of non-negative target indices."""
    if not isinstance(alignment, list) or len(alignment) != source_count:
        _fail(f"alignment must list one group per source token ({source_count})")
    seen = set()
    for group in alignment:
        if not isinstance(group, list):
            _fail("alignment groups must be lists")
        for idx in group:
            if not isinstance(idx, int) or isinstance(idx, bool) or idx < 0:
                _fail(f"alignment index {idx!r} must be a non-negative integer")
            if idx in seen:
                _fail(f"alignment index {idx} appears in more than one group")
            seen.add(idx)


def validate_response(obj, request) -> None:
    """Raise ProtocolError unless ``obj`` is a well-formed response to ``request``."""
    if not isinstance(obj, dict):
        _fail("response must be a JSON object")
    if obj.get("id") != request.get("id"):
        _fail(f"response id {obj.get('id')!r} does not echo request id {request.get('id')!r}")
    has_result = "result" in obj
    has_error = "error" in obj
    if has_result == has_error:
        _fail("response must carry exactly one of result/error")
    if has_error:
        err = obj["error"]
        if not isinstance(err, dict) or not isinstance(err.get("code"), str) or not isinstance(
            err.get("message"), str
        ):
            _fail("error must be an object with string code and message")
        return
    result = obj["result"]
    op = request.get("op")
    if op == "meta":
        validate_meta(result)
    elif op == "predict":
        if not isinstance(result, dict):
            _fail("predict result must be an object")
        _check_number_list(result.get("logits"), "logits")
    elif op == "attribute":
        if not isinstance(result, dict):
            _fail("attribute result must be an object")
        _check_number_list(result.get("attributions"), "attributions")
        if len(result["attributions"]) != len(request["tokens"]):
            _fail(
                f"attribution length {len(result['attributions'])} != "
                f"source token count {len(request['tokens'])}"
            )
        if "alignment" in result:
            validate_alignment(result["alignment"], len(request["tokens"]))
    elif op == "sentence_sim":
        if not isinstance(result, dict) or not isinstance(
            result.get("similarity"), (int, float)
        ):
            _fail("sentence_sim result must carry a numeric similarity")
    elif op == "perplexity":
        if not isinstance(result, dict) or not isinstance(
            result.get("perplexity"), (int, float)
        ):
            _fail("perplexity result must carry a numeric perplexity")


# ---------------------------------------------------------------------------
# transports


class StdioTransport:
    """Child process speaking the protocol on its stdin/stdout."""

    def __init__(self, argv, timeout: float = 60.0):
        self.proc = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )
        self.timeout = timeout

    def send_line(self, line: str) -> None:
        if self.proc.poll() is not None:
            raise BridgeError("bridge process has exited")
        self.proc.stdin.write(line + "\n")
        self.proc.stdin.flush()

    def recv_line(self) -> str:
        line = self.proc.stdout.readline()
        if not line:
            raise BridgeError("bridge process closed its output")
        return line.rstrip("\n")

    def close(self) -> None:
        if self.proc.poll() is None:
            self.proc.stdin.close()
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()


class TcpTransport:
    def __init__(self, host: str, port: int, timeout: float = 60.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.sock.settimeout(timeout)
        self._file = self.sock.makefile("rw", encoding="utf-8", newline="\n")

    def send_line(self, line: str) -> None:
        self._file.write(line + "\n")
        self._file.flush()

    def recv_line(self) -> str:
        line = self._file.readline()
        if not line:
            raise BridgeError("bridge connection closed")
        return line.rstrip("\n")

    def close(self) -> None:
        try:
            self._file.close()
        finally:
            self.sock.close()


# ---------------------------------------------------------------------------
# client


@dataclass(frozen=True)
class Capabilities:
    version: str
    labels: int
    methods: tuple[str, ...]
    attention_layers: int
    attention_heads: int
    sentence_sim: bool
    perplexity: bool

    @classmethod
    def from_meta(cls, result: dict) -> "Capabilities":
        validate_meta(result)
        return cls(
            version=result["version"],
            labels=result["labels"],
            methods=tuple(result["methods"]),
            attention_layers=result["attention"]["layers"],
            attention_heads=result["attention"]["heads"],
            sentence_sim=result["sentence_sim"],
            perplexity=result["perplexity"],
        )


class BridgeClassifier:
    """Classifier + explainer backed by an external process over the wire protocol.

    The interface matches the native classifiers, so attacks cannot tell the
    difference. Capabilities are fetched once at connect and never change.
    """

    def __init__(self, transport):
        self.transport = transport
        self._next_id = 0
        meta = self._call("meta", {})
        self.capabilities = Capabilities.from_meta(meta)

    # -- classifier surface ----------------------------------------------------

    @property
    def num_labels(self) -> int:
        return self.capabilities.labels

    @property
    def has_sentence_sim(self) -> bool:
        return self.capabilities.sentence_sim

    @property
    def has_perplexity(self) -> bool:
        return self.capabilities.perplexity

    def predict(self, tokens, mask=()) -> Prediction:
        result = self._call("predict", {"tokens": list(tokens), "mask": sorted(mask)})
        logits = np.asarray(result["logits"], dtype=np.float64)
        if logits.size != self.capabilities.labels:
            raise ProtocolError(
                f"logits length {logits.size} != declared label count "
                f"{self.capabilities.labels}"
            )
        return Prediction.from_logits(logits)

    def attribute(self, tokens, label, request: AttributionRequest, mask=()) -> np.ndarray:
        if request.method not in self.capabilities.methods:
            raise CapabilityError(
                f"bridge does not support method {request.method!r} "
                f"(declared: {self.capabilities.methods})"
            )
        if request.method == "A":
            sel = request.attention
            if sel.layer >= self.capabilities.attention_layers or (
                sel.head >= self.capabilities.attention_heads
            ):
                raise CapabilityError(
                    f"attention selector ({sel.layer}, {sel.head}) outside declared "
                    f"{self.capabilities.attention_layers}x{self.capabilities.attention_heads}"
                )
        result = self._call(
            "attribute",
            {
                "tokens": list(tokens),
                "method": request.method,
                "label": int(label),
                "mask": sorted(mask),
                "params": request.params(),
            },
        )
        values = np.asarray(result["attributions"], dtype=np.float64)
        return values

    def sentence_similarity(self, tokens_a, tokens_b) -> SemanticSimilarity:
        if not self.capabilities.sentence_sim:
            raise CapabilityError("bridge declares no sentence encoder")
        result = self._call(
            "sentence_sim", {"tokens_a": list(tokens_a), "tokens_b": list(tokens_b)}
        )
        return SemanticSimilarity(float(result["similarity"]), "bridge")

    def perplexity(self, tokens) -> float:
        if not self.capabilities.perplexity:
            raise CapabilityError("bridge declares no language model")
        result = self._call("perplexity", {"tokens": list(tokens)})
        return float(result["perplexity"])

    def close(self) -> None:
        self.transport.close()

    # -- wire ------------------------------------------------------------------

    def _call(self, op: str, payload: dict) -> dict:
        last_error = None
        for _ in range(2):  # failed exchanges are retried once with a fresh id
            request = {"op": op, "id": self._next_id, **payload}
            self._next_id += 1
            validate_request(request)
            try:
                self.transport.send_line(json.dumps(request, ensure_ascii=False))
                raw = self.transport.recv_line()
                try:
                    response = json.loads(raw)
                except json.JSONDecodeError as exc:
                    raise ProtocolError(f"malformed response line: {exc}") from None
                validate_response(response, request)
            except (BridgeError, OSError, socket.timeout) as exc:
                last_error = exc
                continue
            if "error" in response:
                err = response["error"]
                raise BridgeError(f"bridge error {err['code']}: {err['message']}")
            return response["result"]
        raise BridgeError(f"bridge call {op!r} failed after retry: {last_error}")


def connect(spec: str) -> BridgeClassifier:
    """Open a bridge endpoint: ``stdio:<command>`` or ``<host>:<port>``."""
    if spec.startswith("stdio:"):
        argv = shlex.split(spec[len("stdio:") :])
        if not argv:
            raise BridgeError("empty stdio bridge command")
        return BridgeClassifier(StdioTransport(argv))
    host, sep, port = spec.rpartition(":")
    if not sep or not port.isdigit():
        raise BridgeError(f"bad bridge endpoint {spec!r}; expected host:port or stdio:<cmd>")
    return BridgeClassifier(TcpTransport(host or "127.0.0.1", int(port)))


# ---------------------------------------------------------------------------
# loopback server for native models


def native_meta(model) -> dict:
    has_attention = model.config.arch == "attention_pool"
    return {
        "version": PROTOCOL_VERSION,
        "labels": model.num_labels,
        "methods": ["S", "IG", "A"] if has_attention else ["S", "IG"],
        "attention": {"layers": 1, "heads": 1} if has_attention else {"layers": 0, "heads": 0},
        "sentence_sim": False,
        "perplexity": False,
    }


def handle_native_request(model, request: dict) -> dict:
    """Serve one request against a native model; errors become error objects."""
    rid = request.get("id") if isinstance(request, dict) else None
    try:
        validate_request(request)
        op = request["op"]
        if op == "meta":
            result = native_meta(model)
        elif op == "predict":
            pred = model.predict(request["tokens"], mask=tuple(request.get("mask", [])))
            result = {"logits": [float(x) for x in pred.logits]}
        elif op == "attribute":
            from .attribution import AttentionSelector, IgConfig

            params = request.get("params", {})
            req = AttributionRequest(
                method=request["method"],
                ig=IgConfig(int(params.get("ig_steps", 32))),
                attention=AttentionSelector(
                    int(params.get("layer", 0)), int(params.get("head", 0))
                ),
            )
            if req.method not in native_meta(model)["methods"]:
                raise CapabilityError(f"model has no method {req.method!r}")
            if request["label"] >= model.num_labels:
                raise ValueError(f"label {request['label']} out of range")
            values = model.attribute(
                request["tokens"], request["label"], req, mask=tuple(request.get("mask", []))
            )
            result = {
                "attributions": [float(x) for x in values],
                "alignment": [[i] for i in range(len(request["tokens"]))],
            }
        else:
            raise CapabilityError(f"native loopback does not serve {op!r}")
    except Exception as exc:  # per-request failures keep the server alive
        code = {
            ProtocolError: "protocol",
            CapabilityError: "capability",
        }.get(type(exc), "runtime")
        return {"id": rid, "error": {"code": code, "message": str(exc)}}
    return {"id": rid, "result": result}


def serve_stdio(model, stdin=None, stdout=None) -> None:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            response = {"id": None, "error": {"code": "protocol", "message": str(exc)}}
        else:
            response = handle_native_request(model, request)
        stdout.write(json.dumps(response, ensure_ascii=False) + "\n")
        stdout.flush()


def main(argv=None) -> int:
    import argparse

    from .lexicon import EmbeddingStore
    from .models import load_model

    parser = argparse.ArgumentParser(
        prog="attrfool.bridge", description="Serve a native checkpoint over the wire protocol."
    )
    parser.add_argument("checkpoint")
    parser.add_argument("embeddings")
    args = parser.parse_args(argv)
    store = EmbeddingStore.from_file(args.embeddings)
    model = load_model(args.checkpoint, store)
    serve_stdio(model)
    return 0


if __name__ == "__main__":
    sys.exit(main())
