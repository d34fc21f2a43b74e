"""Pose-trace data model, file ingestion and fixed-rate normalization."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import DuplicateHand, EmptyOverlap, GapTooLong, ParseError, SchemaError, UnknownElement
from .transforms import RigidTransform, canonical_quat, relative_transform, slerp

FIELDS = ("t", "name", "kind", "px", "py", "pz", "qw", "qx", "qy", "qz")
QUAT_NORM_TOL = 1e-6


class ElementKind(str, Enum):
    HAND_RIGHT = "HandRight"
    HAND_LEFT = "HandLeft"
    OBJECT = "Object"

    @property
    def is_hand(self) -> bool:
        return self is not ElementKind.OBJECT


@dataclass(frozen=True)
class ElementId:
    name: str
    kind: ElementKind


@dataclass(frozen=True)
class PoseSample:
    t: float
    position: tuple
    orientation: tuple  # (w, x, y, z)

    def as_transform(self) -> RigidTransform:
        return RigidTransform(self.orientation, self.position)


@dataclass(frozen=True)
class Stream:
    """Samples of one element as parallel arrays: ``t`` (n,), ``pos`` (n, 3), ``quat`` (n, 4)."""

    t: np.ndarray
    pos: np.ndarray
    quat: np.ndarray

    def __len__(self):
        return len(self.t)

    def sample(self, i: int) -> PoseSample:
        return PoseSample(float(self.t[i]), tuple(self.pos[i]), tuple(self.quat[i]))

    def pose(self, i: int) -> RigidTransform:
        return RigidTransform(tuple(self.quat[i]), tuple(self.pos[i]))


@dataclass(frozen=True)
class Trace:
    elements: dict  # name -> ElementId
    streams: dict  # name -> Stream
    rate_hz: float | None = None
    source: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def normalized(self) -> bool:
        return self.rate_hz is not None

    @property
    def timestamps(self) -> np.ndarray:
        """Shared grid of a normalized trace."""
        return next(iter(self.streams.values())).t

    def __len__(self):
        return len(self.timestamps)

    def hand(self, kind: ElementKind) -> str | None:
        for name, el in self.elements.items():
            if el.kind is kind:
                return name
        return None

    @property
    def right_hand(self) -> str | None:
        return self.hand(ElementKind.HAND_RIGHT)

    @property
    def left_hand(self) -> str | None:
        return self.hand(ElementKind.HAND_LEFT)

    @property
    def objects(self) -> list[str]:
        return sorted(n for n, e in self.elements.items() if e.kind is ElementKind.OBJECT)

    def stream(self, name: str) -> Stream:
        try:
            return self.streams[name]
        except KeyError:
            raise UnknownElement(f"no element named {name!r}") from None

    def positions(self, name: str) -> np.ndarray:
        return self.stream(name).pos

    def pose(self, name: str, i: int) -> RigidTransform:
        return self.stream(name).pose(i)


def _build(records: list[dict], source: str) -> Trace:
    elements: dict[str, ElementId] = {}
    rows: dict[str, dict[float, tuple]] = {}
    for line, rec in records:
        name = rec["name"]
        try:
            kind = ElementKind(rec["kind"])
        except ValueError:
            raise SchemaError(f"unknown kind {rec['kind']!r}", line) from None
        prev = elements.get(name)
        if prev is not None and prev.kind is not kind:
            raise SchemaError(f"element {name!r} changes kind", line)
        if prev is None:
            if kind.is_hand and any(e.kind is kind for e in elements.values()):
                raise DuplicateHand(f"two elements claim {kind.value}: line {line}")
            elements[name] = ElementId(name, kind)
        # later duplicates of a timestamp overwrite earlier ones
        rows.setdefault(name, {})[rec["t"]] = (rec["pos"], rec["quat"])

    streams = {}
    for name, by_t in rows.items():
        ts = sorted(by_t)
        streams[name] = Stream(
            t=np.array(ts, dtype=float),
            pos=np.array([by_t[t][0] for t in ts], dtype=float),
            quat=canonical_quat(np.array([by_t[t][1] for t in ts], dtype=float)),
        )
    return Trace(elements=elements, streams=streams, source=source)


def _parse_record(raw: dict, line: int) -> dict:
    missing = [f for f in FIELDS if raw.get(f) in (None, "")]
    if missing:
        raise SchemaError(f"missing field(s) {', '.join(missing)}", line)
    try:
        t = float(raw["t"])
        pos = tuple(float(raw[k]) for k in ("px", "py", "pz"))
        quat = tuple(float(raw[k]) for k in ("qw", "qx", "qy", "qz"))
    except (TypeError, ValueError) as exc:
        raise ParseError(f"malformed number ({exc})", line) from None
    if not all(math.isfinite(v) for v in (t, *pos, *quat)):
        raise ParseError("non-finite value", line)
    norm = math.sqrt(sum(v * v for v in quat))
    if abs(norm - 1.0) > QUAT_NORM_TOL:
        raise SchemaError(f"quaternion norm {norm:.6g} is not unit", line)
    return {"t": t, "name": str(raw["name"]), "kind": str(raw["kind"]), "pos": pos, "quat": quat}


def ingest(path, format: str | None = None) -> Trace:
    """Read a CSV or JSONL recording into a raw (un-normalized) trace."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).upper()
    if not path.exists():
        raise ParseError(f"{path}: no such file")
    records = []
    if fmt == "CSV":
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != list(FIELDS):
                raise SchemaError(f"header must be {','.join(FIELDS)}", 1)
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(FIELDS):
                    raise ParseError(f"expected {len(FIELDS)} columns, got {len(row)}", lineno)
                records.append((lineno, _parse_record(dict(zip(FIELDS, row)), lineno)))
    elif fmt == "JSONL":
        with path.open() as fh:
            for lineno, text in enumerate(fh, start=1):
                if not text.strip():
                    continue
                try:
                    raw = json.loads(text)
                except json.JSONDecodeError as exc:
                    raise ParseError(str(exc), lineno) from None
                if not isinstance(raw, dict):
                    raise ParseError("expected a JSON object", lineno)
                records.append((lineno, _parse_record(raw, lineno)))
    else:
        raise ParseError(f"unsupported trace format {fmt!r}")
    return _build(records, str(path))


def write_csv(trace: Trace, path) -> None:
    rows = []
    for name in sorted(trace.streams):
        s = trace.streams[name]
        kind = trace.elements[name].kind.value
        for i in range(len(s)):
            rows.append((s.t[i], name, kind, *s.pos[i], *s.quat[i]))
    rows.sort(key=lambda r: (r[0], r[1]))
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIELDS)
        for r in rows:
            w.writerow([repr(float(r[0])), r[1], r[2], *(repr(float(v)) for v in r[3:])])


def _resample(stream: Stream, grid: np.ndarray) -> Stream:
    t = stream.t
    idx = np.clip(np.searchsorted(t, grid, side="right") - 1, 0, len(t) - 2)
    t0, t1 = t[idx], t[idx + 1]
    alpha = (grid - t0) / (t1 - t0)
    exact = grid == t0
    alpha[exact] = 0.0
    pos = stream.pos[idx] + alpha[:, None] * (stream.pos[idx + 1] - stream.pos[idx])
    pos[exact] = stream.pos[idx[exact]]
    # grid points coinciding with the last sample
    last = grid == t[-1]
    pos[last] = stream.pos[-1]
    quat = np.empty((len(grid), 4))
    for k, (i, a) in enumerate(zip(idx, alpha)):
        if last[k]:
            quat[k] = stream.quat[-1]
        else:
            quat[k] = slerp(stream.quat[i], stream.quat[i + 1], float(a))
    return Stream(t=grid.copy(), pos=pos, quat=quat)


def make_grid(start: float, end: float, rate_hz: float) -> np.ndarray:
    n = int(math.floor((end - start) * rate_hz + 1e-9)) + 1
    return start + np.arange(n) / rate_hz


def normalize(trace: Trace, rate_hz: float = 30.0, max_gap_s: float = 0.5) -> Trace:
    """Resample every stream onto one uniform grid over the common time span."""
    if rate_hz <= 0:
        raise ValueError("rate_hz must be positive")
    if not trace.streams:
        raise EmptyOverlap("trace has no streams")
    for name, s in trace.streams.items():
        if len(s) < 2:
            raise EmptyOverlap(f"stream {name!r} has fewer than 2 samples")
        gaps = np.diff(s.t)
        if gaps.size and gaps.max() > max_gap_s + 1e-12:
            i = int(np.argmax(gaps))
            raise GapTooLong(f"stream {name!r} has a {gaps[i]:.3f} s gap at t={s.t[i]:.3f}")
    start = max(float(s.t[0]) for s in trace.streams.values())
    end = min(float(s.t[-1]) for s in trace.streams.values())
    if end <= start:
        raise EmptyOverlap(f"streams share no time interval ({start:.3f} >= {end:.3f})")
    grid = make_grid(start, end, rate_hz)
    streams = {name: _resample(s, grid) for name, s in trace.streams.items()}
    return Trace(trace.elements, streams, rate_hz=float(rate_hz), source=trace.source, meta=dict(trace.meta))


def relative_pose(a: PoseSample, b: PoseSample) -> RigidTransform:
    """``T^a_b``: the pose of ``a`` in the frame of ``b`` (``pose_a = pose_b ∘ T``)."""
    return relative_transform(a.as_transform(), b.as_transform())
