"""Newline-delimited JSON wire protocol for attaching a real detector.

One JSON document per line over a byte stream (spawned subprocess stdio or a
TCP connection); responses come back in request order. Requests::

    {"op": "train", "labeled": [{"image": {...}, "boxes": [...]}],
     "hyperparams": {...}?}                      -> {"ok": true, "model_id": "..."}
    {"op": "detect", "model_id": "...", "image": {...}}
        -> {"ok": true, "proposals": [{"box": {...}, "score": 0.87}], "detections": [...]}

Errors are ``{"ok": false, "error": "<message>"}``. Images are serialized
in full manifest form (including ``objects``, which a synthetic backend uses
to fabricate proposals and a real detector ignores); the ``boxes`` field of
train requests is the authoritative label channel. ``hyperparams`` is an
opaque passthrough for real training backends (epochs, learning rate, ...).
"""

from __future__ import annotations

import argparse
import json
import socket
import subprocess
import sys
from typing import Any, IO, Sequence

from .dataset import ImageRecord, box_to_dict
from .detector import (
    Detection,
    Detector,
    DetectorOutput,
    LabeledExample,
    RegionProposal,
    SyntheticDetector,
    SyntheticDetectorParams,
)
from .geometry import BoundingBox


class ProtocolError(RuntimeError):
    """Malformed traffic or an error response from the remote detector."""


def image_to_wire(image: ImageRecord) -> dict:
    d: dict = {"id": image.id, "width": image.width, "height": image.height,
               "difficulty": image.difficulty,
               "objects": [box_to_dict(b) for b in image.objects]}
    if image.image_uri is not None:
        d["image_uri"] = image.image_uri
    return d


def image_from_wire(d: dict) -> ImageRecord:
    return ImageRecord(
        id=str(d["id"]),
        width=float(d["width"]),
        height=float(d["height"]),
        objects=tuple(_box_from_wire(b) for b in d.get("objects", ())),
        difficulty=float(d.get("difficulty", 0.0)),
        image_uri=d.get("image_uri"),
    )


def _box_from_wire(d: dict) -> BoundingBox:
    return BoundingBox(float(d["x_min"]), float(d["y_min"]), float(d["x_max"]), float(d["y_max"]))


def _scored_box_to_wire(box: BoundingBox, score: float) -> dict:
    return {"box": box_to_dict(box), "score": score}


class ExternalDetector:
    """Client side of the protocol; satisfies the :class:`Detector` contract.

    The model state it returns from ``train`` is the remote ``model_id``
    string. The remote end receives the full labeled pool on every train
    call; incremental training is its private concern.
    """

    def __init__(self, reader: IO[bytes], writer: IO[bytes]) -> None:
        self._reader = reader
        self._writer = writer

    @classmethod
    def spawn(cls, argv: Sequence[str]) -> "ExternalDetector":
        proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        client = cls(proc.stdout, proc.stdin)  # type: ignore[arg-type]
        client._proc = proc
        return client

    @classmethod
    def connect(cls, host: str, port: int) -> "ExternalDetector":
        sock = socket.create_connection((host, port))
        client = cls(sock.makefile("rb"), sock.makefile("wb"))
        client._sock = sock
        return client

    def _roundtrip(self, request: dict) -> dict:
        self._writer.write(json.dumps(request).encode("utf-8") + b"\n")
        self._writer.flush()
        line = self._reader.readline()
        if not line:
            raise ProtocolError("detector closed the stream")
        try:
            response = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ProtocolError(f"invalid response line: {exc}") from exc
        if not isinstance(response, dict) or "ok" not in response:
            raise ProtocolError(f"malformed response: {response!r}")
        if not response["ok"]:
            raise ProtocolError(f"detector error: {response.get('error', 'unknown')}")
        return response

    def train(self, labeled: Sequence[LabeledExample], hyperparams: dict | None = None) -> str:
        request: dict = {
            "op": "train",
            "labeled": [
                {"image": image_to_wire(img), "boxes": [box_to_dict(b) for b in boxes]}
                for img, boxes in labeled
            ],
        }
        if hyperparams is not None:
            request["hyperparams"] = hyperparams
        response = self._roundtrip(request)
        model_id = response.get("model_id")
        if not isinstance(model_id, str):
            raise ProtocolError(f"train response lacks a model_id: {response!r}")
        return model_id

    def detect(self, model_state: str, image: ImageRecord) -> DetectorOutput:
        response = self._roundtrip({"op": "detect", "model_id": model_state, "image": image_to_wire(image)})
        try:
            proposals = tuple(
                RegionProposal(box=_box_from_wire(p["box"]), score=float(p["score"]))
                for p in response["proposals"]
            )
            detections = tuple(
                Detection(box=_box_from_wire(d["box"]), score=float(d["score"]))
                for d in response["detections"]
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed detect response: {exc}") from exc
        return DetectorOutput(image_id=image.id, proposals=proposals, detections=detections)

    def close(self) -> None:
        proc = getattr(self, "_proc", None)
        if proc is not None:
            proc.stdin.close()
            proc.wait(timeout=10)
        sock = getattr(self, "_sock", None)
        if sock is not None:
            sock.close()


class DetectorServer:
    """Server side: exposes any :class:`Detector` over the protocol."""

    def __init__(self, detector: Detector) -> None:
        self.detector = detector
        self._models: dict[str, Any] = {}
        self._counter = 0

    def handle(self, request: dict) -> dict:
        op = request.get("op")
        if op == "train":
            labeled = [
                (image_from_wire(item["image"]),
                 tuple(_box_from_wire(b) for b in item.get("boxes", ())))
                for item in request.get("labeled", [])
            ]
            state = self.detector.train(labeled)
            self._counter += 1
            model_id = f"m{self._counter}"
            self._models[model_id] = state
            return {"ok": True, "model_id": model_id}
        if op == "detect":
            model_id = request.get("model_id")
            if model_id not in self._models:
                raise ProtocolError(f"unknown model_id {model_id!r}")
            image = image_from_wire(request["image"])
            out = self.detector.detect(self._models[model_id], image)
            return {
                "ok": True,
                "proposals": [_scored_box_to_wire(p.box, p.score) for p in out.proposals],
                "detections": [_scored_box_to_wire(d.box, d.score) for d in out.detections],
            }
        raise ProtocolError(f"unknown op {op!r}")

    def serve(self, reader: IO[bytes], writer: IO[bytes]) -> None:
        """Process requests until the stream closes; errors keep serving."""
        for line in iter(reader.readline, b""):
            if not line.strip():
                continue
            try:
                request = json.loads(line.decode("utf-8"))
                response = self.handle(request)
            except Exception as exc:  # report over the wire, keep serving
                response = {"ok": False, "error": str(exc)}
            writer.write(json.dumps(response).encode("utf-8") + b"\n")
            writer.flush()


def main(argv: Sequence[str] | None = None) -> int:
    """Run the synthetic detector behind the protocol on stdio (for tests
    and as a template for wrapping a real detector)."""
    parser = argparse.ArgumentParser(description="synthetic detector wire-protocol server (stdio)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--params-json", default=None, help="SyntheticDetectorParams overrides as JSON")
    args = parser.parse_args(argv)
    params = SyntheticDetectorParams(**json.loads(args.params_json)) if args.params_json else None
    server = DetectorServer(SyntheticDetector(params, seed=args.seed))
    server.serve(sys.stdin.buffer, sys.stdout.buffer)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
