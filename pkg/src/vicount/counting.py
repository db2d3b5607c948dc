"""Memory-based count prediction over a detection stream.

The total count of a video is the first frame's population plus the inflow
of every later frame. Inflow is decided by associating each frame's
detections against a template memory of recently seen individuals: a
detection that matches no remembered individual cheaply enough is new.
Remembered individuals that go unmatched survive a bounded number of steps
so that short absences (occlusion, missed detection) do not inflate the
count when the individual comes back.
"""

from dataclasses import dataclass

import numpy as np

from .assignment import hungarian
from .errors import DataError
from .stream import Detection, DetectionStream

_AGGREGATORS = ("max", "min", "mean")


@dataclass(frozen=True)
class McpConfig:
    """Association parameters for the count predictor.

    zeta: matching-cost threshold; a matched pair costing more is rejected
    and the detection counts as inflow. ttl_max: number of consecutive
    unmatched steps a remembered individual survives after the step it was
    last seen. mem_max: templates kept per individual (oldest evicted
    first). template_aggregator: how per-template costs combine into one
    cost per remembered individual.
    """

    zeta: float = 0.7
    ttl_max: int = 3
    mem_max: int = 5
    template_aggregator: str = "max"

    def __post_init__(self):
        if not (self.zeta >= 0 and np.isfinite(self.zeta)):
            raise DataError(f"zeta must be a finite non-negative number, got {self.zeta}")
        if self.ttl_max < 1:
            raise DataError(f"ttl_max must be at least 1, got {self.ttl_max}")
        if self.mem_max < 1:
            raise DataError(f"mem_max must be at least 1, got {self.mem_max}")
        if self.template_aggregator not in _AGGREGATORS:
            raise DataError(
                f"template_aggregator must be one of {_AGGREGATORS}, "
                f"got {self.template_aggregator!r}"
            )


@dataclass(frozen=True)
class TemplateEntry:
    """One remembered individual: its recent appearance templates and time to live."""

    entry_id: int
    templates: tuple[np.ndarray, ...]
    ttl: int

    def __post_init__(self):
        if not self.templates:
            raise DataError("a template entry needs at least one template")
        if self.ttl < 0:
            raise DataError(f"ttl must be non-negative, got {self.ttl}")
        frozen = []
        for t in self.templates:
            arr = np.asarray(t, dtype=np.float64).copy()
            arr.setflags(write=False)
            frozen.append(arr)
        object.__setattr__(self, "templates", tuple(frozen))


@dataclass(frozen=True)
class MemoryState:
    """The template memory between steps. Updates come as new instances."""

    entries: tuple[TemplateEntry, ...] = ()
    next_entry_id: int = 0

    @classmethod
    def empty(cls) -> "MemoryState":
        return cls((), 0)


@dataclass(frozen=True)
class StepRecord:
    """What one frame contributed: inflow count, accepted matches, new entry ids."""

    frame_index: int
    inflow: int
    associations: tuple[tuple[int, int], ...]
    new_entry_ids: tuple[int, ...]


@dataclass(frozen=True)
class CountReport:
    """Counting outcome for a whole stream: per-frame records and the total."""

    per_step: tuple[StepRecord, ...]
    total: int


def template_cost(detection: Detection, entry: TemplateEntry, aggregator: str = "max") -> float:
    """Cost of associating a detection with a remembered individual.

    Each stored template contributes one minus its cosine similarity to the
    detection feature; the aggregator collapses these to a single number.
    Taking the max is the conservative default: the detection must resemble
    every remembered appearance.
    """
    if aggregator not in _AGGREGATORS:
        raise DataError(f"template_aggregator must be one of {_AGGREGATORS}, got {aggregator!r}")
    feat = detection.feature
    costs = []
    for t in entry.templates:
        if t.shape != feat.shape:
            raise DataError(
                f"feature dimension mismatch: detection {feat.shape[0]} vs template {t.shape[0]}"
            )
        costs.append(1.0 - float(np.dot(feat, t)))
    if aggregator == "max":
        return max(costs)
    if aggregator == "min":
        return min(costs)
    return float(sum(costs) / len(costs))


def _matched_entry(entry: TemplateEntry, feature: np.ndarray, cfg: McpConfig) -> TemplateEntry:
    templates = entry.templates + (feature,)
    if len(templates) > cfg.mem_max:
        templates = templates[-cfg.mem_max:]
    return TemplateEntry(entry.entry_id, templates, cfg.ttl_max)


def step(memory: MemoryState, detections, cfg: McpConfig) -> tuple[MemoryState, StepRecord]:
    """Associate one frame's detections against the memory and update it.

    Runs a minimum-cost assignment between detections and remembered
    individuals, rejecting matches that cost more than zeta. Every rejected
    or unmatched detection counts as inflow (a fresh entry). Remembered
    individuals not matched this step lose one unit of time to live and are
    dropped once it is exhausted. Returns the new memory and a record with
    frame_index 0 (the caller knows the real index).
    """
    dets = tuple(detections)
    n, big_n = len(dets), len(memory.entries)
    cost = np.empty((n, big_n), dtype=np.float64)
    for i, det in enumerate(dets):
        for k, entry in enumerate(memory.entries):
            cost[i, k] = template_cost(det, entry, cfg.template_aggregator)
    accepted: dict[int, int] = {}
    if n and big_n:
        for i, k in hungarian(cost).pairs:
            if cost[i, k] <= cfg.zeta:
                accepted[i] = k
    by_entry = {k: i for i, k in accepted.items()}
    # Rebuild in original order: matched entries get the feature appended and
    # their ttl refreshed, missed ones tick down (dropped once exhausted),
    # fresh entries append at the end.
    rebuilt: list[TemplateEntry] = []
    for k, entry in enumerate(memory.entries):
        if k in by_entry:
            rebuilt.append(_matched_entry(entry, dets[by_entry[k]].feature, cfg))
        elif entry.ttl > 0:
            rebuilt.append(TemplateEntry(entry.entry_id, entry.templates, entry.ttl - 1))
    new_entries: list[TemplateEntry] = []
    associations: list[tuple[int, int]] = []
    next_id = memory.next_entry_id
    new_ids: list[int] = []
    for i in range(n):
        if i in accepted:
            associations.append((i, memory.entries[accepted[i]].entry_id))
        else:
            fresh = TemplateEntry(next_id, (dets[i].feature,), cfg.ttl_max)
            new_entries.append(fresh)
            new_ids.append(next_id)
            next_id += 1
    new_memory = MemoryState(tuple(rebuilt + new_entries), next_id)
    record = StepRecord(0, len(new_ids), tuple(associations), tuple(new_ids))
    return new_memory, record


def count_video(stream: DetectionStream, cfg: McpConfig) -> CountReport:
    """Count distinct individuals over a stream with the template memory.

    Seeds the memory with the first frame (everyone there is counted), then
    steps through the remaining frames accumulating inflow. An empty stream
    counts zero.
    """
    frames = stream.frames
    if not frames:
        return CountReport((), 0)
    first = frames[0]
    memory = MemoryState.empty()
    entries = []
    first_ids = []
    for i, det in enumerate(first.detections):
        entries.append(TemplateEntry(i, (det.feature,), cfg.ttl_max))
        first_ids.append(i)
    memory = MemoryState(tuple(entries), len(entries))
    records = [StepRecord(first.frame_index, len(first_ids), (), tuple(first_ids))]
    total = len(first_ids)
    for frame in frames[1:]:
        memory, record = step(memory, frame.detections, cfg)
        records.append(
            StepRecord(frame.frame_index, record.inflow, record.associations, record.new_entry_ids)
        )
        total += record.inflow
    return CountReport(tuple(records), total)
