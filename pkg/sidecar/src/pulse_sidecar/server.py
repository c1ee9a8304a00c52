"""NDJSON-over-stdio model server.

Protocol, one JSON object per line:

  server -> client, once at startup:
    {"tasks": [...], "embed_dim": N, "models": {...}, "batch": N}

  client -> server, one request per line:
    {"id": str, "task": "embed"|"stance"|"ner", "texts": [str, ...]}
    {"id": str, "task": "stance", "texts": [...], "masking": bool}
    {"id": str, "task": "m3", "rows": [{...}, ...]}

  server -> client, exactly one response per request id:
    {"id": str, "ok": true,  "result": {"vectors": ...}}   embed
    {"id": str, "ok": true,  "result": {"labels": ..., "probs": ...}}
    {"id": str, "ok": true,  "result": {"entities": ...}}  ner
    {"id": str, "ok": true,  "result": {"rows": ...}}      m3
    {"id": ..., "ok": false, "error": {"code": ..., "message": ...}}

Error codes: `unsupported_task` for a task the backend does not serve,
`bad_request` for anything malformed (unparseable line, missing or
mistyped fields; id is null when none could be read), `oom` for a
batch too large to process, `internal` for backend faults. The process
answers every line and never crashes on bad input.

Responses may lawfully arrive out of request order; this implementation
is a single reader loop with one writer, so order is preserved and no
partial lines interleave. Clients must not rely on that.
"""

from __future__ import annotations

import argparse
import json
import socket as socket_mod
import sys
from typing import IO

from . import __version__
from .backends import OutOfMemory, StubBackend
from .masking import load_mask_terms

STANCE_PROB_TOL = 1e-6  # documented contract: prob triples sum to 1 within this


def _error(rid: object, code: str, message: str) -> dict:
    return {"id": rid, "ok": False, "error": {"code": code, "message": message}}


def _text_list(req: dict) -> list[str] | str:
    """The validated texts field, or an error message."""
    texts = req.get("texts")
    if not isinstance(texts, list) or not texts:
        return "field 'texts' must be a non-empty list"
    if not all(isinstance(t, str) for t in texts):
        return "field 'texts' must contain only strings"
    return texts


def handle_line(backend, raw: str) -> dict | None:
    """One request line to one response object; None for blank lines."""
    if not raw.strip():
        return None
    try:
        req = json.loads(raw)
    except json.JSONDecodeError as e:
        return _error(None, "bad_request", f"unparseable request line: {e}")
    if not isinstance(req, dict):
        return _error(None, "bad_request", "request must be a JSON object")

    rid = req.get("id")
    if not isinstance(rid, str):
        return _error(None, "bad_request", "field 'id' must be a string")

    task = req.get("task")
    if not isinstance(task, str):
        return _error(rid, "bad_request", "field 'task' must be a string")
    if task not in backend.tasks:
        return _error(
            rid, "unsupported_task",
            f"task {task!r} not served; available: {', '.join(backend.tasks)}",
        )

    try:
        if task == "embed":
            texts = _text_list(req)
            if isinstance(texts, str):
                return _error(rid, "bad_request", texts)
            return {"id": rid, "ok": True, "result": {"vectors": backend.embed(texts)}}

        if task == "stance":
            texts = _text_list(req)
            if isinstance(texts, str):
                return _error(rid, "bad_request", texts)
            masking = req.get("masking", False)
            if not isinstance(masking, bool):
                return _error(rid, "bad_request", "field 'masking' must be a boolean")
            labels, probs = backend.stance(texts, masking)
            return {"id": rid, "ok": True, "result": {"labels": labels, "probs": probs}}

        if task == "ner":
            texts = _text_list(req)
            if isinstance(texts, str):
                return _error(rid, "bad_request", texts)
            return {"id": rid, "ok": True, "result": {"entities": backend.ner(texts)}}

        # m3: metadata rows instead of texts
        rows = req.get("rows")
        if not isinstance(rows, list) or not all(isinstance(r, dict) for r in rows):
            return _error(rid, "bad_request", "field 'rows' must be a list of objects")
        return {"id": rid, "ok": True, "result": {"rows": backend.m3(rows)}}

    except OutOfMemory as e:
        return _error(rid, "oom", str(e))
    except Exception as e:  # never crash the loop on a backend fault
        return _error(rid, "internal", f"{type(e).__name__}: {e}")


def serve(backend, batch: int, fin: IO[str], fout: IO[str]) -> None:
    """Handshake, then answer every request line until EOF."""
    handshake = {
        "tasks": list(backend.tasks),
        "embed_dim": backend.embed_dim,
        "models": backend.models,
        "batch": batch,
    }
    fout.write(json.dumps(handshake, separators=(",", ":")) + "\n")
    fout.flush()
    for raw in fin:
        resp = handle_line(backend, raw)
        if resp is None:
            continue
        fout.write(json.dumps(resp, separators=(",", ":")) + "\n")
        fout.flush()


def _parse_models(pairs: list[str]) -> dict[str, str]:
    models = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key or not value:
            raise argparse.ArgumentTypeError(f"--model expects KEY=ID, got {pair!r}")
        models[key] = value
    return models


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="pulse-sidecar",
        description="model server speaking NDJSON over stdio",
    )
    parser.add_argument("--version", action="version", version=f"pulse-sidecar {__version__}")
    parser.add_argument(
        "--backend", choices=("stub", "transformers"), default="stub",
        help="stub answers deterministically with no weights (default)",
    )
    parser.add_argument(
        "--model", action="append", default=[], metavar="KEY=ID",
        help="override a model identifier (encoder, stance, ner); transformers only",
    )
    parser.add_argument("--batch", type=int, default=32, help="advertised batch size")
    parser.add_argument(
        "--embed-dim", type=int, default=1024, help="stub embedding width"
    )
    parser.add_argument("--device", default="cpu", help="torch device for transformers")
    parser.add_argument(
        "--local-files-only", action="store_true",
        help="never download weights; fail if not cached",
    )
    parser.add_argument(
        "--mask-terms", metavar="PATH",
        help="pattern,boundary_mode CSV replacing the bundled mask list",
    )
    parser.add_argument(
        "--socket", metavar="PATH",
        help="serve one connection on a unix socket instead of stdio",
    )
    args = parser.parse_args(argv)

    if args.batch < 1:
        parser.error("--batch must be at least 1")
    if args.model and args.backend != "transformers":
        parser.error("--model is only valid with --backend transformers")

    try:
        mask_list = load_mask_terms(args.mask_terms)
        if args.backend == "stub":
            if args.embed_dim < 1:
                parser.error("--embed-dim must be at least 1")
            backend = StubBackend(mask_list, embed_dim=args.embed_dim)
        else:
            from .backends import TransformersBackend

            backend = TransformersBackend(
                mask_list,
                models=_parse_models(args.model),
                device=args.device,
                local_files_only=args.local_files_only,
            )
    except argparse.ArgumentTypeError as e:
        parser.error(str(e))
    except Exception as e:
        print(f"pulse-sidecar: startup failed: {e}", file=sys.stderr)
        return 2

    try:
        if args.socket:
            with socket_mod.socket(socket_mod.AF_UNIX, socket_mod.SOCK_STREAM) as srv:
                srv.bind(args.socket)
                srv.listen(1)
                conn, _ = srv.accept()
                with conn, conn.makefile("r", encoding="utf-8") as fin, \
                        conn.makefile("w", encoding="utf-8") as fout:
                    serve(backend, args.batch, fin, fout)
        else:
            serve(backend, args.batch, sys.stdin, sys.stdout)
    except (BrokenPipeError, ConnectionResetError):
        return 0  # client went away; nothing left to answer
    return 0


if __name__ == "__main__":
    sys.exit(main())
