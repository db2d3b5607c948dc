"""Reading and writing detection streams as JSON Lines.

Line one is a header: {"schema": 1, "dim": D, "delta": seconds}. Every
following line is one frame: {"frame": k, "t": seconds, "det": [...],
"in": [...], "out": [...]}, where each detection object carries "x", "y",
"f" (the feature vector), and optionally "id" (ground-truth identity).
Serialization is deterministic (fixed key order, shortest round-tripping
float form), and write followed by parse reproduces the stream exactly.
"""

import json

from .errors import StreamFormatError
from .stream import Detection, DetectionStream, FrameRecord

SCHEMA_VERSION = 1


def _dump(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=True)


def write_stream(stream: DetectionStream, path) -> None:
    """Write a stream to a JSON Lines file (header line plus one line per frame)."""
    dim = stream.feature_dim
    header = {"schema": SCHEMA_VERSION, "dim": 0 if dim is None else dim, "delta": stream.delta}
    with open(path, "w", encoding="ascii") as fh:
        fh.write(_dump(header) + "\n")
        for frame in stream.frames:
            dets = []
            for det in frame.detections:
                obj = {
                    "x": det.coordinate[0],
                    "y": det.coordinate[1],
                    "f": [float(v) for v in det.feature],
                }
                if det.gt_id is not None:
                    obj["id"] = det.gt_id
                dets.append(obj)
            fh.write(
                _dump(
                    {
                        "frame": frame.frame_index,
                        "t": frame.timestamp,
                        "det": dets,
                        "in": list(frame.inflow),
                        "out": list(frame.outflow),
                    }
                )
                + "\n"
            )


def _fail(path, lineno: int, msg: str):
    raise StreamFormatError(f"{path}:{lineno}: {msg}")


def _need(obj: dict, key: str, path, lineno: int):
    if key not in obj:
        _fail(path, lineno, f"missing key {key!r}")
    return obj[key]


def parse_stream(path) -> DetectionStream:
    """Parse a stream file written by write_stream, validating as it goes.

    Errors carry the path and 1-based line number of the offending line.
    """
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines:
        _fail(path, 1, "empty file, expected a header line")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        _fail(path, 1, f"malformed header: {exc.msg}")
    if not isinstance(header, dict):
        _fail(path, 1, "header must be a JSON object")
    schema = _need(header, "schema", path, 1)
    if schema != SCHEMA_VERSION:
        _fail(path, 1, f"unknown schema version {schema!r}, expected {SCHEMA_VERSION}")
    dim = _need(header, "dim", path, 1)
    if not isinstance(dim, int) or dim < 0:
        _fail(path, 1, f"dim must be a non-negative integer, got {dim!r}")
    delta = _need(header, "delta", path, 1)
    if not isinstance(delta, (int, float)) or not delta > 0:
        _fail(path, 1, f"delta must be a positive number, got {delta!r}")
    frames = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            _fail(path, lineno, "blank line in frame section")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            _fail(path, lineno, f"malformed frame: {exc.msg}")
        if not isinstance(obj, dict):
            _fail(path, lineno, "frame must be a JSON object")
        frame_index = _need(obj, "frame", path, lineno)
        timestamp = _need(obj, "t", path, lineno)
        raw_dets = _need(obj, "det", path, lineno)
        inflow = _need(obj, "in", path, lineno)
        outflow = _need(obj, "out", path, lineno)
        if not isinstance(raw_dets, list):
            _fail(path, lineno, "det must be a list")
        dets = []
        for d_idx, raw in enumerate(raw_dets):
            if not isinstance(raw, dict):
                _fail(path, lineno, f"det[{d_idx}] must be a JSON object")
            x = _need(raw, "x", path, lineno)
            y = _need(raw, "y", path, lineno)
            feat = _need(raw, "f", path, lineno)
            if not isinstance(feat, list) or len(feat) != dim:
                got = len(feat) if isinstance(feat, list) else type(feat).__name__
                _fail(path, lineno, f"det[{d_idx}]: feature length {got} != header dim {dim}")
            gt_id = raw.get("id")
            try:
                dets.append(Detection((x, y), feat, gt_id=gt_id))
            except (ValueError, TypeError) as exc:
                _fail(path, lineno, f"det[{d_idx}]: {exc}")
        try:
            frames.append(
                FrameRecord(
                    frame_index=frame_index,
                    timestamp=timestamp,
                    detections=tuple(dets),
                    inflow=inflow,
                    outflow=outflow,
                )
            )
        except (ValueError, TypeError) as exc:
            _fail(path, lineno, f"{exc}")
    try:
        return DetectionStream(tuple(frames), delta)
    except (ValueError, TypeError) as exc:
        _fail(path, len(lines), f"{exc}")
