"""Core data model: detections, frames, streams, and similarity partitioning.

A stream is a sequence of frames sampled at a fixed interval. Each frame
carries localized individuals with appearance features plus weak group-level
labels: an inflow bit (new since the previous sampled frame) and an outflow
bit (gone by the next sampled frame) per detection. Pairing adjacent frames
and reordering each side so that shared individuals come first partitions the
similarity matrix into blocks that the loss functions consume.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError

_UNIT_NORM_TOL = 1e-12


def normalize_feature(v) -> np.ndarray:
    """Scale a feature vector to unit Euclidean norm.

    Vectors already unit-length within tolerance are returned unchanged, so
    the operation is idempotent bit-for-bit. A zero vector has no direction
    and raises DataError.
    """
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise DataError("degenerate feature: non-finite entries")
    sq = float(np.dot(arr, arr))
    if sq == 0.0:
        raise DataError("degenerate feature: zero vector")
    if abs(sq - 1.0) <= _UNIT_NORM_TOL:
        return arr.copy()
    return arr / np.sqrt(sq)


def shared_count(outflow_i, inflow_j) -> int:
    """Number of individuals present in both frames of an adjacent pair.

    Zeros in the earlier frame's outflow mark individuals that stay; zeros in
    the later frame's inflow mark individuals that were already there. Both
    counts must agree or the weak labels are contradictory.
    """
    out_arr = np.asarray(outflow_i, dtype=np.int64)
    in_arr = np.asarray(inflow_j, dtype=np.int64)
    m_out = int(np.count_nonzero(out_arr == 0))
    m_in = int(np.count_nonzero(in_arr == 0))
    if m_out != m_in:
        raise DataError(
            f"inconsistent weak labels: {m_out} staying vs {m_in} already present"
        )
    return m_out


@dataclass(frozen=True)
class Detection:
    """One localized individual: image coordinate, unit feature, optional identity.

    The feature is normalized at construction; downstream code relies on
    inner products being cosine similarities.
    """

    coordinate: tuple[float, float]
    feature: np.ndarray
    gt_id: int | None = None

    def __post_init__(self):
        x, y = self.coordinate
        object.__setattr__(self, "coordinate", (float(x), float(y)))
        feat = normalize_feature(self.feature)
        feat.setflags(write=False)
        object.__setattr__(self, "feature", feat)
        if self.gt_id is not None:
            gid = int(self.gt_id)
            if gid < 0:
                raise DataError(f"gt_id must be non-negative, got {gid}")
            object.__setattr__(self, "gt_id", gid)

    @property
    def dim(self) -> int:
        return int(self.feature.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Detection):
            return NotImplemented
        return (
            self.coordinate == other.coordinate
            and self.gt_id == other.gt_id
            and np.array_equal(self.feature, other.feature)
        )


def _as_bits(values, n: int, name: str) -> tuple[int, ...]:
    bits = tuple(int(b) for b in values)
    if len(bits) != n:
        raise DataError(f"{name} has {len(bits)} entries for {n} detections")
    if any(b not in (0, 1) for b in bits):
        raise DataError(f"{name} entries must be 0 or 1")
    return bits


@dataclass(frozen=True, eq=False)
class FrameRecord:
    """A sampled frame: detections plus per-detection inflow/outflow bits."""

    frame_index: int
    timestamp: float
    detections: tuple[Detection, ...]
    inflow: tuple[int, ...]
    outflow: tuple[int, ...]

    def __post_init__(self):
        idx = int(self.frame_index)
        if idx < 1:
            raise DataError(f"frame_index must be >= 1, got {idx}")
        object.__setattr__(self, "frame_index", idx)
        object.__setattr__(self, "timestamp", float(self.timestamp))
        dets = tuple(self.detections)
        if not all(isinstance(d, Detection) for d in dets):
            raise DataError("detections must be Detection instances")
        object.__setattr__(self, "detections", dets)
        n = len(dets)
        object.__setattr__(self, "inflow", _as_bits(self.inflow, n, "inflow"))
        object.__setattr__(self, "outflow", _as_bits(self.outflow, n, "outflow"))
        dims = {d.dim for d in dets}
        if len(dims) > 1:
            raise DataError(f"mixed feature dimensions in frame {idx}: {sorted(dims)}")

    def __len__(self) -> int:
        return len(self.detections)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FrameRecord):
            return NotImplemented
        return (
            self.frame_index == other.frame_index
            and self.timestamp == other.timestamp
            and self.inflow == other.inflow
            and self.outflow == other.outflow
            and self.detections == other.detections
        )


@dataclass(frozen=True, eq=False)
class DetectionStream:
    """Frames sampled at a fixed interval, validated for internal consistency."""

    frames: tuple[FrameRecord, ...]
    delta: float

    def __post_init__(self):
        object.__setattr__(self, "delta", float(self.delta))
        if not (self.delta > 0):
            raise DataError(f"delta must be positive, got {self.delta}")
        frames = tuple(self.frames)
        object.__setattr__(self, "frames", frames)
        tol = 1e-9 * max(1.0, self.delta)
        for prev, curr in zip(frames, frames[1:]):
            if curr.frame_index <= prev.frame_index:
                raise DataError(
                    f"frame indices must increase: {prev.frame_index} then {curr.frame_index}"
                )
            gap = curr.timestamp - prev.timestamp
            if abs(gap - self.delta) > tol:
                raise DataError(
                    f"frames {prev.frame_index}->{curr.frame_index} spaced {gap}s, expected {self.delta}s"
                )
        dims = {d.dim for f in frames for d in f.detections}
        if len(dims) > 1:
            raise DataError(f"mixed feature dimensions in stream: {sorted(dims)}")
        if frames and len(frames[0]) > 0 and any(b == 0 for b in frames[0].inflow):
            raise DataError("first frame must have inflow bits all 1")

    @property
    def feature_dim(self) -> int | None:
        for f in self.frames:
            if len(f) > 0:
                return f.detections[0].dim
        return None

    def __len__(self) -> int:
        return len(self.frames)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DetectionStream):
            return NotImplemented
        return self.delta == other.delta and self.frames == other.frames


@dataclass(frozen=True, eq=False)
class SimilarityBlocks:
    """Similarity matrix of an adjacent frame pair, split along shared individuals.

    Detections of the earlier frame are reordered so the ones that stay come
    first; detections of the later frame so the ones already present come
    first. The top-left block s0 then holds similarities among shared
    individuals and the bottom-right block s3 compares outflow against
    inflow, while s1/s2 mix the two groups. perm_i/perm_j map block
    positions back to the original detection order of each frame.
    """

    s0: np.ndarray
    s1: np.ndarray
    s2: np.ndarray
    s3: np.ndarray
    perm_i: np.ndarray | None = None
    perm_j: np.ndarray | None = None

    def __post_init__(self):
        for name in ("s0", "s1", "s2", "s3"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.ndim != 2:
                raise DataError(f"{name} must be a 2-d array")
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        m = self.s0.shape[0]
        if self.s0.shape[1] != m:
            raise DataError(f"s0 must be square, got {self.s0.shape}")
        if self.s1.shape[0] != m or self.s2.shape[1] != m:
            raise DataError("block shapes disagree on the shared count")
        if self.s3.shape != (self.s2.shape[0], self.s1.shape[1]):
            raise DataError(f"s3 shape {self.s3.shape} does not close the block layout")
        for name, size in (("perm_i", self.n_i), ("perm_j", self.n_j)):
            perm = getattr(self, name)
            if perm is None:
                perm = np.arange(size, dtype=np.intp)
            else:
                perm = np.asarray(perm, dtype=np.intp).copy()
                if perm.shape != (size,) or sorted(perm.tolist()) != list(range(size)):
                    raise DataError(f"{name} is not a permutation of range({size})")
            perm.setflags(write=False)
            object.__setattr__(self, name, perm)

    @property
    def m(self) -> int:
        return self.s0.shape[0]

    @property
    def n_i(self) -> int:
        return self.s0.shape[0] + self.s2.shape[0]

    @property
    def n_j(self) -> int:
        return self.s0.shape[1] + self.s1.shape[1]

    @property
    def full(self) -> np.ndarray:
        """The whole similarity matrix in block order, shape (n_i, n_j)."""
        m = self.m
        out = np.empty((self.n_i, self.n_j), dtype=np.float64)
        out[:m, :m] = self.s0
        out[:m, m:] = self.s1
        out[m:, :m] = self.s2
        out[m:, m:] = self.s3
        return out

    @classmethod
    def from_full(cls, s: np.ndarray, m: int, perm_i=None, perm_j=None) -> "SimilarityBlocks":
        """Split a full block-ordered similarity matrix at shared count m."""
        s = np.asarray(s, dtype=np.float64)
        if s.ndim != 2:
            raise DataError("similarity matrix must be 2-d")
        if not (0 <= m <= min(s.shape)):
            raise DataError(f"shared count {m} out of range for shape {s.shape}")
        return cls(
            s0=s[:m, :m], s1=s[:m, m:], s2=s[m:, :m], s3=s[m:, m:],
            perm_i=perm_i, perm_j=perm_j,
        )


def partition_similarity(frame_i: FrameRecord, frame_j: FrameRecord) -> SimilarityBlocks:
    """Build the partitioned similarity matrix for an adjacent frame pair.

    frame_i is the earlier frame (its outflow bits apply), frame_j the later
    one (its inflow bits apply). The reorderings are stable: within the
    shared and non-shared groups, original detection order is preserved.
    """
    m = shared_count(frame_i.outflow, frame_j.inflow)
    order_i = np.argsort(np.asarray(frame_i.outflow, dtype=np.int64), kind="stable")
    order_j = np.argsort(np.asarray(frame_j.inflow, dtype=np.int64), kind="stable")
    n_i, n_j = len(frame_i), len(frame_j)
    if n_i == 0 or n_j == 0:
        s = np.zeros((n_i, n_j), dtype=np.float64)
    else:
        feats_i = np.stack([frame_i.detections[k].feature for k in order_i])
        feats_j = np.stack([frame_j.detections[k].feature for k in order_j])
        s = np.clip(feats_i @ feats_j.T, -1.0, 1.0)
    return SimilarityBlocks.from_full(s, m, perm_i=order_i, perm_j=order_j)


def pair_blocks(stream: DetectionStream) -> list[SimilarityBlocks]:
    """Partitioned similarity blocks for every adjacent frame pair of a stream."""
    return [
        partition_similarity(prev, curr)
        for prev, curr in zip(stream.frames, stream.frames[1:])
    ]


def random_similarity_blocks(
    rng: np.random.Generator, n_i: int, n_j: int, m: int
) -> SimilarityBlocks:
    """Random blocks with entries in [-1, 1], for diagnostics and gradient checks."""
    if not (0 <= m <= min(n_i, n_j)):
        raise DataError(f"shared count {m} out of range for ({n_i}, {n_j})")
    s = rng.uniform(-1.0, 1.0, size=(n_i, n_j))
    return SimilarityBlocks.from_full(s, m)
