"""Event stream containers, text/binary parsers, and packetization.

Canonical internal timestamp unit is seconds stored as float64, regardless of
the source column unit. Streams are columnar numpy arrays and are treated as
immutable once built.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from typing import BinaryIO, Iterator, Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import ConfigurationError, OrderingError, ParseError
from .geometry import Trajectory

# Packed binary record layout, little-endian: t in integer microseconds,
# pixel coordinates, signed polarity.
BINARY_EVENT_DTYPE = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "<i1")])


@dataclass(frozen=True)
class Event:
    """Single brightness-change event: pixel, time in seconds, polarity of the change."""

    x: int
    y: int
    t: float
    polarity: int

    def __post_init__(self):
        if self.polarity not in (-1, 1):
            raise ValueError(f"polarity must be +1 or -1, got {self.polarity}")


@dataclass
class EventStream:
    """Time-sorted columnar event container for one camera.

    Attributes:
        t: float64 timestamps in seconds, non-decreasing.
        x, y: integer pixel coordinates within the sensor.
        polarity: int8 values in {-1, +1}.
        sensor_width, sensor_height: sensor size in pixels.
        camera_id: opaque identifier, used for bookkeeping only.
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    polarity: np.ndarray
    sensor_width: int
    sensor_height: int
    camera_id: str = "cam0"

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        self.x = np.asarray(self.x, dtype=np.int32)
        self.y = np.asarray(self.y, dtype=np.int32)
        self.polarity = np.asarray(self.polarity, dtype=np.int8)
        n = len(self.t)
        if not (len(self.x) == len(self.y) == len(self.polarity) == n):
            raise ValueError("column lengths differ")

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i: int) -> Event:
        return Event(int(self.x[i]), int(self.y[i]), float(self.t[i]), int(self.polarity[i]))

    def __iter__(self) -> Iterator[Event]:
        for i in range(len(self)):
            yield self[i]

    def slice(self, start: int, stop: int) -> "EventStream":
        """View of events[start:stop] sharing the underlying arrays."""
        return EventStream(
            self.t[start:stop], self.x[start:stop], self.y[start:stop],
            self.polarity[start:stop], self.sensor_width, self.sensor_height,
            self.camera_id,
        )

    def select(self, mask_or_index: np.ndarray) -> "EventStream":
        return EventStream(
            self.t[mask_or_index], self.x[mask_or_index], self.y[mask_or_index],
            self.polarity[mask_or_index], self.sensor_width, self.sensor_height,
            self.camera_id,
        )

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0]) if len(self) else 0.0


@dataclass
class Packet:
    """Contiguous slice of a stream covering [t_start, t_end]."""

    camera_id: str
    t_start: float
    t_end: float
    events: EventStream

    def __len__(self) -> int:
        return len(self.events)

    @property
    def t_mid(self) -> float:
        return 0.5 * (self.t_start + self.t_end)


def _finalize_columns(t, x, y, p, width, height, camera_id, regression_tolerance):
    t = np.asarray(t, dtype=np.float64)
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    p = np.asarray(p, dtype=np.int64)

    if len(t):
        bad = np.flatnonzero((x < 0) | (x >= width) | (y < 0) | (y >= height))
        if bad.size:
            i = int(bad[0])
            raise ParseError(
                f"pixel ({x[i]}, {y[i]}) out of bounds for {width}x{height} sensor",
                line_number=i + 1,
            )
        badp = np.flatnonzero(~np.isin(p, (-1, 1)))
        if badp.size:
            i = int(badp[0])
            raise ParseError(f"polarity {p[i]} not in {{0, 1, -1, +1}}", line_number=i + 1)
        dt = np.diff(t)
        if len(dt) and dt.min() < -regression_tolerance:
            i = int(np.argmin(dt))
            raise OrderingError(
                f"timestamp regresses by {-dt.min():.9f}s at record {i + 2} "
                f"(tolerance {regression_tolerance:.9f}s)"
            )
        if len(dt) and dt.min() < 0:
            # Jitter within tolerance: restore order, keeping file order for ties.
            order = np.argsort(t, kind="stable")
            t, x, y, p = t[order], x[order], y[order], p[order]
    return EventStream(t, x, y, p, width, height, camera_id)


def parse_event_text(
    reader: BinaryIO | str,
    width: int,
    height: int,
    camera_id: str = "cam0",
    timestamps_in_us: bool = False,
    regression_tolerance: float = 0.0,
) -> EventStream:
    """Parse "t x y p" text into a time-sorted stream.

    Polarity columns may use {0, 1} or {-1, +1}; 0 maps to -1. Blank lines and
    lines starting with "#" are skipped. Timestamps must be non-decreasing up
    to `regression_tolerance` (strict by default); jitter within the tolerance
    is stable-sorted away.

    Args:
        reader: binary stream, or a string of the file contents.
        width, height: sensor size; out-of-bounds pixels are rejected.
        timestamps_in_us: set when the first column is integer microseconds.
        regression_tolerance: largest allowed backward time step, in seconds.
    """
    if isinstance(reader, str):
        reader = io.BytesIO(reader.encode())
    ts, xs, ys, ps = [], [], [], []
    for line_number, raw in enumerate(reader, start=1):
        line = raw.decode() if isinstance(raw, bytes) else raw
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        if len(parts) != 4:
            raise ParseError(f"expected 4 columns 't x y p', got {len(parts)}", line_number)
        try:
            t = float(parts[0])
            x = int(parts[1])
            y = int(parts[2])
            p = int(parts[3])
        except ValueError as exc:
            raise ParseError(f"cannot parse event fields: {exc}", line_number) from None
        if t < 0:
            raise ParseError(f"negative timestamp {t}", line_number)
        if not (0 <= x < width and 0 <= y < height):
            raise ParseError(f"pixel ({x}, {y}) out of bounds for {width}x{height} sensor", line_number)
        if p == 0:
            p = -1
        if p not in (-1, 1):
            raise ParseError(f"polarity {p} not in {{0, 1, -1, +1}}", line_number)
        ts.append(t)
        xs.append(x)
        ys.append(y)
        ps.append(p)
    t = np.asarray(ts, dtype=np.float64)
    if timestamps_in_us:
        t = t * 1e-6
    stream = EventStream(t, np.asarray(xs), np.asarray(ys), np.asarray(ps), width, height, camera_id)
    dt = np.diff(stream.t)
    if len(dt) and dt.min() < -regression_tolerance:
        i = int(np.argmin(dt))
        raise OrderingError(
            f"timestamp regresses by {-dt.min():.9f}s at record {i + 2} "
            f"(tolerance {regression_tolerance:.9f}s)"
        )
    if len(dt) and dt.min() < 0:
        order = np.argsort(stream.t, kind="stable")
        stream = stream.select(order)
    return stream


def serialize_event_text(stream: EventStream) -> str:
    """Canonical text form, one "t x y p" line per event.

    Timestamps use the shortest round-trip float representation, so
    parse(serialize(s)) reproduces s bit-exactly.
    """
    lines = [
        f"{t!r} {x} {y} {p}"
        for t, x, y, p in zip(stream.t.tolist(), stream.x.tolist(), stream.y.tolist(), stream.polarity.tolist())
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def write_event_text(path, stream: EventStream) -> None:
    with open(path, "w") as f:
        f.write(serialize_event_text(stream))


def read_event_binary(reader: BinaryIO | bytes, width: int, height: int, camera_id: str = "cam0") -> EventStream:
    """Read the packed little-endian binary event format (u64 us, u16 x, u16 y, i8 p)."""
    data = reader if isinstance(reader, bytes) else reader.read()
    if len(data) % BINARY_EVENT_DTYPE.itemsize:
        raise ParseError(
            f"binary payload of {len(data)} bytes is not a multiple of "
            f"{BINARY_EVENT_DTYPE.itemsize}-byte records"
        )
    rec = np.frombuffer(data, dtype=BINARY_EVENT_DTYPE)
    return _finalize_columns(
        rec["t"].astype(np.float64) * 1e-6, rec["x"], rec["y"], rec["p"],
        width, height, camera_id, regression_tolerance=0.0,
    )


def write_event_binary(writer: BinaryIO, stream: EventStream) -> None:
    """Write the packed binary format; timestamps are rounded to microseconds."""
    rec = np.empty(len(stream), dtype=BINARY_EVENT_DTYPE)
    rec["t"] = np.round(stream.t * 1e6).astype(np.uint64)
    rec["x"] = stream.x.astype(np.uint16)
    rec["y"] = stream.y.astype(np.uint16)
    rec["p"] = stream.polarity
    writer.write(rec.tobytes())


def packetize_by_count(stream: EventStream, n: int) -> list[Packet]:
    """Split into packets of exactly n events; the last may be short."""
    if n <= 0:
        raise ConfigurationError(f"packet size must be positive, got {n}")
    packets = []
    for start in range(0, len(stream), n):
        ev = stream.slice(start, min(start + n, len(stream)))
        packets.append(Packet(stream.camera_id, float(ev.t[0]), float(ev.t[-1]), ev))
    return packets


def packetize_by_duration(stream: EventStream, dt: float) -> list[Packet]:
    """Split into fixed windows of dt seconds anchored at the first event.

    Windows are half-open [t0 + k dt, t0 + (k+1) dt); empty windows produce no
    packet.
    """
    if dt <= 0:
        raise ConfigurationError(f"packet duration must be positive, got {dt}")
    if len(stream) == 0:
        return []
    t0 = float(stream.t[0])
    bins = np.floor((stream.t - t0) / dt).astype(np.int64)
    # Events exactly at the final boundary belong to the last window.
    packets = []
    boundaries = np.flatnonzero(np.diff(bins)) + 1
    starts = np.concatenate(([0], boundaries))
    stops = np.concatenate((boundaries, [len(stream)]))
    for a, b in zip(starts, stops):
        k = int(bins[a])
        ev = stream.slice(int(a), int(b))
        packets.append(Packet(stream.camera_id, t0 + k * dt, t0 + (k + 1) * dt, ev))
    return packets


def packetize(stream: EventStream, mode: str, value: float) -> list[Packet]:
    """Dispatch on mode: "by_count" with an event count, "by_duration" with seconds."""
    if mode == "by_count":
        return packetize_by_count(stream, int(value))
    if mode == "by_duration":
        return packetize_by_duration(stream, float(value))
    raise ConfigurationError(f"unknown packet mode {mode!r}")


def parse_trajectory_text(reader: BinaryIO | str) -> Trajectory:
    """Parse "t tx ty tz qx qy qz qw" lines into a Trajectory.

    Quaternions must be within 1e-3 of unit norm and are renormalized.
    Timestamps must be strictly increasing.
    """
    if isinstance(reader, str):
        reader = io.BytesIO(reader.encode())
    times, trans, quats = [], [], []
    for line_number, raw in enumerate(reader, start=1):
        line = raw.decode() if isinstance(raw, bytes) else raw
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        if len(parts) != 8:
            raise ParseError(f"expected 8 columns 't tx ty tz qx qy qz qw', got {len(parts)}", line_number)
        try:
            vals = [float(v) for v in parts]
        except ValueError as exc:
            raise ParseError(f"cannot parse pose fields: {exc}", line_number) from None
        q = np.array(vals[4:8])
        norm = float(np.linalg.norm(q))
        if norm < 1e-6:
            raise ParseError("near-zero quaternion", line_number)
        if abs(norm - 1.0) > 1e-3:
            raise ParseError(f"quaternion norm {norm:.6f} deviates from 1 by more than 1e-3", line_number)
        times.append(vals[0])
        trans.append(vals[1:4])
        quats.append(q / norm)
    if not times:
        raise ParseError("trajectory file contains no poses")
    t = np.asarray(times)
    if len(t) > 1 and np.any(np.diff(t) <= 0):
        i = int(np.flatnonzero(np.diff(t) <= 0)[0])
        raise OrderingError(f"trajectory timestamps not strictly increasing at record {i + 2}")
    return Trajectory(t, Rotation.from_quat(np.asarray(quats)), np.asarray(trans))


def serialize_trajectory_text(traj: Trajectory) -> str:
    """Canonical "t tx ty tz qx qy qz qw" text, shortest round-trip floats."""
    lines = []
    quats = traj.rotations.as_quat()
    for t, tr, q in zip(traj.times.tolist(), traj.translations.tolist(), quats.tolist()):
        fields = [t, *tr, *q]
        lines.append(" ".join(repr(v) for v in fields))
    return "\n".join(lines) + "\n"


def write_trajectory_text(path, traj: Trajectory) -> None:
    with open(path, "w") as f:
        f.write(serialize_trajectory_text(traj))


def crop_time(stream: EventStream, t0: float, t1: float, include_end: bool = False) -> EventStream:
    """Events with t in [t0, t1), or [t0, t1] when include_end is set."""
    lo = int(np.searchsorted(stream.t, t0, side="left"))
    hi = int(np.searchsorted(stream.t, t1, side="right" if include_end else "left"))
    return stream.slice(lo, hi)


def concatenate(streams: Sequence[EventStream]) -> EventStream:
    """Merge time-sorted streams from the same sensor into one sorted stream."""
    streams = [s for s in streams if len(s)]
    if not streams:
        raise ValueError("nothing to concatenate")
    w, h = streams[0].sensor_width, streams[0].sensor_height
    t = np.concatenate([s.t for s in streams])
    x = np.concatenate([s.x for s in streams])
    y = np.concatenate([s.y for s in streams])
    p = np.concatenate([s.polarity for s in streams])
    order = np.argsort(t, kind="stable")
    return EventStream(t[order], x[order], y[order], p[order], w, h, streams[0].camera_id)
