"""HTTP JSON inference service behind the analyst console.

Models are loaded once from a directory of container files and shared
read-only across requests; prediction is stateless, so the threading
server needs no locks.  Endpoints:

    GET  /api/models                 -> [{id, kind, info_type}]
    POST /api/predict                -> {sentences: [...]}
    GET  /api/samples?info_type=X    -> {sensitive: [], non_sensitive: []}
    POST /api/compare                -> {sentences: [...], disagreements}

Anything else under /api/ is a JSON 404; other paths serve files from
the optional static directory.  Errors are {"error": message}.
"""

import json
import sys
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .container import ContainerError, load_container
from .rawtext import predict_document

CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".map": "application/json",
    ".svg": "image/svg+xml",
    ".png": "image/png",
    ".ico": "image/x-icon",
    ".txt": "text/plain; charset=utf-8",
}


def load_models(models_dir) -> dict:
    """Load every container under ``models_dir``, keyed by file stem.

    Files that are not valid containers are skipped with a note on
    stderr so a samples file can live in the same directory.
    """
    root = Path(models_dir)
    if not root.is_dir():
        raise ContainerError(f"{models_dir} is not a directory")
    models = {}
    for f in sorted(root.glob("*.json")):
        try:
            models[f.stem] = load_container(f)
        except ContainerError as e:
            print(f"skipping {f.name}: {e}", file=sys.stderr)
    return models


def load_samples(path) -> dict:
    """Read the samples file: {info_type: {sensitive, non_sensitive}}."""
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: samples file must be a JSON object")
    for itype, entry in doc.items():
        if not isinstance(entry, dict) or not all(
                isinstance(entry.get(k), list)
                for k in ("sensitive", "non_sensitive")):
            raise ValueError(
                f"{path}: entry {itype!r} needs list fields "
                "'sensitive' and 'non_sensitive'")
    return doc


def make_server(models: dict, samples: dict, port: int = 8080,
                host: str = "127.0.0.1", static_dir=None) -> ThreadingHTTPServer:
    """Build (but do not start) the threading HTTP server."""
    static_root = Path(static_dir).resolve() if static_dir else None

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, fmt, *args):
            pass

        def _send_json(self, obj, status: int = 200) -> None:
            body = json.dumps(obj).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _error(self, status: int, message: str) -> None:
            self._send_json({"error": message}, status)

        def _read_body(self):
            try:
                length = int(self.headers.get("Content-Length") or 0)
            except ValueError:
                return None
            raw = self.rfile.read(length)
            try:
                doc = json.loads(raw.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError):
                return None
            return doc if isinstance(doc, dict) else None

        def do_GET(self):
            url = urlparse(self.path)
            if url.path == "/api/models":
                listing = [{"id": mid, "kind": c.kind,
                            "info_type": c.info_type}
                           for mid, c in sorted(models.items())]
                return self._send_json(listing)
            if url.path == "/api/samples":
                itypes = parse_qs(url.query).get("info_type")
                if not itypes:
                    return self._error(400, "missing info_type query parameter")
                entry = samples.get(itypes[0], {})
                return self._send_json({
                    "sensitive": list(entry.get("sensitive", [])),
                    "non_sensitive": list(entry.get("non_sensitive", [])),
                })
            if url.path.startswith("/api/"):
                return self._error(404, f"no such endpoint: {url.path}")
            return self._static(url.path)

        def do_POST(self):
            url = urlparse(self.path)
            if url.path == "/api/predict":
                return self._predict()
            if url.path == "/api/compare":
                return self._compare()
            return self._error(404, f"no such endpoint: {url.path}")

        def _predict(self):
            body = self._read_body()
            if body is None:
                return self._error(400, "body must be a JSON object")
            model_id, text = body.get("model_id"), body.get("text")
            if not isinstance(model_id, str) or not isinstance(text, str):
                return self._error(
                    400, "body needs string fields model_id and text")
            c = models.get(model_id)
            if c is None:
                return self._error(404, f"unknown model: {model_id}")
            results = predict_document(c, text)
            return self._send_json(
                {"sentences": [r.to_dict() for r in results]})

        def _compare(self):
            body = self._read_body()
            if body is None:
                return self._error(400, "body must be a JSON object")
            ids = body.get("model_a"), body.get("model_b")
            text = body.get("text")
            if not all(isinstance(i, str) for i in ids) or \
                    not isinstance(text, str):
                return self._error(
                    400,
                    "body needs string fields model_a, model_b, and text")
            for mid in ids:
                if mid not in models:
                    return self._error(404, f"unknown model: {mid}")
            res_a = predict_document(models[ids[0]], text)
            res_b = predict_document(models[ids[1]], text)
            sentences = []
            for a, b in zip(res_a, res_b):
                sentences.append({
                    "text": a.text, "start": a.start, "end": a.end,
                    "label_a": a.label, "probability_a": a.probability,
                    "label_b": b.label, "probability_b": b.probability,
                    "disagree": a.label != b.label,
                })
            return self._send_json({
                "sentences": sentences,
                "disagreements": sum(s["disagree"] for s in sentences),
            })

        def _static(self, path: str):
            if static_root is None:
                return self._error(404, "static assets not configured")
            rel = path.lstrip("/") or "index.html"
            full = (static_root / rel).resolve()
            if static_root not in full.parents and full != static_root:
                return self._error(404, "not found")
            if full.is_dir():
                full = full / "index.html"
            if not full.is_file():
                return self._error(404, "not found")
            data = full.read_bytes()
            self.send_response(200)
            self.send_header("Content-Type", CONTENT_TYPES.get(
                full.suffix, "application/octet-stream"))
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

    return ThreadingHTTPServer((host, port), Handler)
