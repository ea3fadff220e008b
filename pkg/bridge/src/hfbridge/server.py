"""Protocol loop: one JSON object per line, responses echo the request id."""

from __future__ import annotations

import json
import socket
import sys

from .served import METHODS, ServedModel, ServeError

OPS = ("meta", "predict", "attribute", "sentence_sim", "perplexity")


def _require_tokens(request: dict, key: str = "tokens") -> list[str]:
    tokens = request.get(key)
    if not isinstance(tokens, list) or not tokens or not all(
        isinstance(t, str) and t for t in tokens
    ):
        raise ServeError("protocol", f"{key} must be a non-empty list of non-empty strings")
    return tokens


def _require_mask(request: dict, length: int) -> tuple[int, ...]:
    mask = request.get("mask", [])
    if not isinstance(mask, list):
        raise ServeError("protocol", "mask must be a list")
    seen = set()
    for i in mask:
        if not isinstance(i, int) or isinstance(i, bool) or not 0 <= i < length:
            raise ServeError("protocol", f"mask index {i!r} outside {length} tokens")
        if i in seen:
            raise ServeError("protocol", f"duplicate mask index {i}")
        seen.add(i)
    return tuple(mask)


def handle_request(model: ServedModel, request) -> dict:
    """Serve one request; every failure becomes an error object for that id."""
    rid = request.get("id") if isinstance(request, dict) else None
    try:
        if not isinstance(request, dict):
            raise ServeError("protocol", "request must be a JSON object")
        if not isinstance(rid, int) or isinstance(rid, bool) or rid < 0:
            raise ServeError("protocol", f"id must be a non-negative integer, got {rid!r}")
        op = request.get("op")
        if op not in OPS:
            raise ServeError("protocol", f"unknown op {request.get('op')!r}")
        if op == "meta":
            result = model.meta()
        elif op == "predict":
            tokens = _require_tokens(request)
            mask = _require_mask(request, len(tokens))
            result = {"logits": model.predict(tokens, mask)}
        elif op == "attribute":
            tokens = _require_tokens(request)
            mask = _require_mask(request, len(tokens))
            method = request.get("method")
            if method not in METHODS:
                raise ServeError("protocol", f"unknown method {method!r}")
            label = request.get("label")
            if not isinstance(label, int) or isinstance(label, bool) or label < 0:
                raise ServeError("protocol", f"label must be a non-negative integer")
            params = request.get("params", {})
            if not isinstance(params, dict):
                raise ServeError("protocol", "params must be an object")
            result = model.attribute(tokens, method, label, mask, params)
        elif op == "sentence_sim":
            a = _require_tokens(request, "tokens_a")
            b = _require_tokens(request, "tokens_b")
            result = {"similarity": model.sentence_similarity(a, b)}
        else:
            tokens = _require_tokens(request)
            result = {"perplexity": model.perplexity(tokens)}
    except ServeError as exc:
        return {"id": rid, "error": {"code": exc.code, "message": str(exc)}}
    except Exception as exc:  # stay alive on any per-request failure
        return {"id": rid, "error": {"code": "runtime", "message": str(exc)}}
    return {"id": rid, "result": result}


def serve_stream(model: ServedModel, instream, outstream) -> None:
    for line in instream:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            response = {"id": None, "error": {"code": "protocol", "message": str(exc)}}
        else:
            response = handle_request(model, request)
        outstream.write(json.dumps(response, ensure_ascii=False) + "\n")
        outstream.flush()


def serve_stdio(model: ServedModel) -> None:
    serve_stream(model, sys.stdin, sys.stdout)


def serve_tcp(model: ServedModel, host: str, port: int, ready_out=None) -> None:
    server = socket.create_server((host, port))
    if ready_out is not None:
        ready_out.write(f"listening {server.getsockname()[0]}:{server.getsockname()[1]}\n")
        ready_out.flush()
    try:
        while True:
            conn, _ = server.accept()
            with conn:
                fh = conn.makefile("rw", encoding="utf-8", newline="\n")
                serve_stream(model, fh, fh)
    finally:
        server.close()
