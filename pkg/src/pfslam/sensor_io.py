"""Sensor log parsing, writing, and time alignment.

Three CSV streams feed the pipeline: wheel encoder counts, fiber optic
gyro increments, and lidar range scans. Timestamps are integer
microseconds; dt is computed downstream in double-precision seconds.
File schemas:

    encoder.csv  timestamp_us,left_ticks,right_ticks
    fog.csv      timestamp_us,delta_roll,delta_pitch,delta_yaw   (radians)
    lidar.csv    timestamp_us,r0,...,r285   (meters; empty field = invalid)
    calib.cfg    key=value lines (see CalibrationConfig)

Tick counts are real-valued cumulative revolutions*resolution so that a
noise-free simulation round-trips exactly; integer counts from real
hardware parse fine. Invalid lidar returns are stored as NaN and skipped
by all consumers.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .geometry import Pose2D, RigidTransform2D

LIDAR_BEAM_COUNT = 286
LIDAR_ANGLE_MIN_DEG = -5.0
LIDAR_ANGLE_MAX_DEG = 180.0

__all__ = [
    "LIDAR_BEAM_COUNT",
    "CalibrationConfig",
    "EncoderRecord",
    "FogRecord",
    "LidarScan",
    "LogFormatError",
    "SensorEvent",
    "SensorLogs",
    "VelocitySource",
    "load_calibration",
    "load_encoder_csv",
    "load_fog_csv",
    "load_lidar_csv",
    "load_poses_csv",
    "mask_range_window",
    "merge_streams",
    "scan_angles",
    "write_calibration",
    "write_encoder_csv",
    "write_fog_csv",
    "write_lidar_csv",
    "write_poses_csv",
]


class LogFormatError(Exception):
    """A sensor log failed structural validation."""

    def __init__(self, path, line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


def scan_angles() -> np.ndarray:
    """Beam bearings in the lidar frame: 286 angles from -5 to 180 degrees."""
    return np.deg2rad(np.linspace(LIDAR_ANGLE_MIN_DEG, LIDAR_ANGLE_MAX_DEG, LIDAR_BEAM_COUNT))


@dataclass(frozen=True)
class EncoderRecord:
    timestamp_us: int
    left_ticks: float
    right_ticks: float


@dataclass(frozen=True)
class FogRecord:
    timestamp_us: int
    delta_roll: float
    delta_pitch: float
    delta_yaw: float


@dataclass(frozen=True, eq=False)
class LidarScan:
    timestamp_us: int
    ranges: np.ndarray  # (286,) float64, NaN = invalid return

    def __post_init__(self):
        ranges = np.asarray(self.ranges, dtype=np.float64)
        if ranges.shape != (LIDAR_BEAM_COUNT,):
            raise ValueError(
                f"scan must have exactly {LIDAR_BEAM_COUNT} ranges, got shape {ranges.shape}"
            )
        object.__setattr__(self, "ranges", ranges)

    def __eq__(self, other):
        if not isinstance(other, LidarScan):
            return NotImplemented
        return self.timestamp_us == other.timestamp_us and np.array_equal(
            self.ranges, other.ranges, equal_nan=True
        )

    def valid_mask(self) -> np.ndarray:
        return np.isfinite(self.ranges)


def mask_range_window(scan: LidarScan, range_min: float, range_max: float) -> LidarScan:
    """Copy of the scan with returns outside [range_min, range_max] set invalid."""
    ranges = scan.ranges.copy()
    with np.errstate(invalid="ignore"):
        ranges[(ranges < range_min) | (ranges > range_max)] = np.nan
    return LidarScan(scan.timestamp_us, ranges)


@dataclass(frozen=True)
class CalibrationConfig:
    """Static vehicle constants: encoder scale, wheel sizes, lidar mount, range window."""

    encoder_resolution: float
    wheel_diameter_left: float
    wheel_diameter_right: float
    lidar_extrinsics: RigidTransform2D  # vehicle frame -> lidar mount
    range_min: float
    range_max: float

    def __post_init__(self):
        if self.encoder_resolution <= 0:
            raise ValueError("encoder_resolution must be > 0")
        if self.wheel_diameter_left <= 0 or self.wheel_diameter_right <= 0:
            raise ValueError("wheel diameters must be > 0")
        if not self.range_min < self.range_max:
            raise ValueError("range_min must be < range_max")


_CALIB_KEYS = (
    "encoder_resolution",
    "wheel_diameter_left",
    "wheel_diameter_right",
    "lidar_dx",
    "lidar_dy",
    "lidar_dtheta",
    "range_min",
    "range_max",
)


def load_calibration(path) -> CalibrationConfig:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise LogFormatError(path, lineno, f"expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _CALIB_KEYS:
            raise LogFormatError(path, lineno, f"unknown calibration key {key!r}")
        try:
            values[key] = float(value)
        except ValueError:
            raise LogFormatError(path, lineno, f"bad number for {key}: {value!r}") from None
    missing = [k for k in _CALIB_KEYS if k not in values]
    if missing:
        raise LogFormatError(path, 0, f"missing calibration keys: {', '.join(missing)}")
    return CalibrationConfig(
        encoder_resolution=values["encoder_resolution"],
        wheel_diameter_left=values["wheel_diameter_left"],
        wheel_diameter_right=values["wheel_diameter_right"],
        lidar_extrinsics=RigidTransform2D(
            values["lidar_dtheta"], values["lidar_dx"], values["lidar_dy"]
        ),
        range_min=values["range_min"],
        range_max=values["range_max"],
    )


def write_calibration(calib: CalibrationConfig, path) -> None:
    ext = calib.lidar_extrinsics
    lines = [
        f"encoder_resolution={calib.encoder_resolution!r}",
        f"wheel_diameter_left={calib.wheel_diameter_left!r}",
        f"wheel_diameter_right={calib.wheel_diameter_right!r}",
        f"lidar_dx={ext.tx!r}",
        f"lidar_dy={ext.ty!r}",
        f"lidar_dtheta={ext.rotation!r}",
        f"range_min={calib.range_min!r}",
        f"range_max={calib.range_max!r}",
    ]
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# CSV loaders / writers


def _read_rows(path, expected_header: Sequence[str]):
    """Yield (lineno, row) for data rows after validating the header."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return  # zero-byte file: empty sequence
        if [h.strip() for h in header] != list(expected_header):
            raise LogFormatError(path, 1, f"bad header: expected {','.join(expected_header)}")
        for lineno, row in enumerate(reader, start=2):
            if row:
                yield lineno, row


def _parse_timestamp(path, lineno, field: str) -> int:
    try:
        return int(field)
    except ValueError:
        raise LogFormatError(path, lineno, f"bad timestamp {field!r}") from None


def _parse_float(path, lineno, field: str, what: str) -> float:
    try:
        value = float(field)
    except ValueError:
        raise LogFormatError(path, lineno, f"bad {what}: {field!r}") from None
    if not math.isfinite(value):
        raise LogFormatError(path, lineno, f"{what} must be finite, got {field!r}")
    return value


def _check_monotone(path, lineno, ts: int, prev_ts) -> None:
    if prev_ts is not None and ts <= prev_ts:
        raise LogFormatError(
            path, lineno, f"timestamps must be strictly increasing ({ts} after {prev_ts})"
        )


def load_encoder_csv(path) -> tuple[EncoderRecord, ...]:
    records = []
    prev_ts = None
    for lineno, row in _read_rows(path, ("timestamp_us", "left_ticks", "right_ticks")):
        if len(row) != 3:
            raise LogFormatError(path, lineno, f"expected 3 fields, got {len(row)}")
        ts = _parse_timestamp(path, lineno, row[0])
        _check_monotone(path, lineno, ts, prev_ts)
        prev_ts = ts
        records.append(
            EncoderRecord(
                ts,
                _parse_float(path, lineno, row[1], "tick count"),
                _parse_float(path, lineno, row[2], "tick count"),
            )
        )
    return tuple(records)


def load_fog_csv(path) -> tuple[FogRecord, ...]:
    records = []
    prev_ts = None
    header = ("timestamp_us", "delta_roll", "delta_pitch", "delta_yaw")
    for lineno, row in _read_rows(path, header):
        if len(row) != 4:
            raise LogFormatError(path, lineno, f"expected 4 fields, got {len(row)}")
        ts = _parse_timestamp(path, lineno, row[0])
        _check_monotone(path, lineno, ts, prev_ts)
        prev_ts = ts
        deltas = [_parse_float(path, lineno, f, "angle increment") for f in row[1:]]
        records.append(FogRecord(ts, *deltas))
    return tuple(records)


_LIDAR_HEADER = ("timestamp_us",) + tuple(f"r{i}" for i in range(LIDAR_BEAM_COUNT))


def load_lidar_csv(path) -> tuple[LidarScan, ...]:
    scans = []
    prev_ts = None
    for lineno, row in _read_rows(path, _LIDAR_HEADER):
        if len(row) != 1 + LIDAR_BEAM_COUNT:
            raise LogFormatError(
                path, lineno, f"expected {1 + LIDAR_BEAM_COUNT} fields, got {len(row)}"
            )
        ts = _parse_timestamp(path, lineno, row[0])
        _check_monotone(path, lineno, ts, prev_ts)
        prev_ts = ts
        ranges = np.full(LIDAR_BEAM_COUNT, np.nan)
        for i, field in enumerate(row[1:]):
            if field != "":
                ranges[i] = _parse_float(path, lineno, field, f"range r{i}")
        scans.append(LidarScan(ts, ranges))
    return tuple(scans)


def load_poses_csv(path) -> tuple[tuple[int, Pose2D], ...]:
    """Read a timestamped pose file (used for ground truth and trajectories)."""
    poses = []
    prev_ts = None
    for lineno, row in _read_rows(path, ("timestamp_us", "x", "y", "theta")):
        if len(row) != 4:
            raise LogFormatError(path, lineno, f"expected 4 fields, got {len(row)}")
        ts = _parse_timestamp(path, lineno, row[0])
        _check_monotone(path, lineno, ts, prev_ts)
        prev_ts = ts
        x, y, theta = (_parse_float(path, lineno, f, "pose field") for f in row[1:])
        poses.append((ts, Pose2D(x, y, theta)))
    return tuple(poses)


def _write_csv(path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(value: float) -> str:
    # repr round-trips float64 exactly and is the shortest such form
    return repr(float(value))


def write_encoder_csv(records: Iterable[EncoderRecord], path) -> None:
    _write_csv(
        path,
        ("timestamp_us", "left_ticks", "right_ticks"),
        ((str(r.timestamp_us), _fmt(r.left_ticks), _fmt(r.right_ticks)) for r in records),
    )


def write_fog_csv(records: Iterable[FogRecord], path) -> None:
    _write_csv(
        path,
        ("timestamp_us", "delta_roll", "delta_pitch", "delta_yaw"),
        (
            (str(r.timestamp_us), _fmt(r.delta_roll), _fmt(r.delta_pitch), _fmt(r.delta_yaw))
            for r in records
        ),
    )


def write_lidar_csv(scans: Iterable[LidarScan], path) -> None:
    _write_csv(
        path,
        _LIDAR_HEADER,
        (
            [str(s.timestamp_us)] + ["" if math.isnan(r) else _fmt(r) for r in s.ranges]
            for s in scans
        ),
    )


def write_poses_csv(poses: Iterable[tuple[int, Pose2D]], path) -> None:
    _write_csv(
        path,
        ("timestamp_us", "x", "y", "theta"),
        ((str(ts), _fmt(p.x), _fmt(p.y), _fmt(p.theta)) for ts, p in poses),
    )


# ---------------------------------------------------------------------------
# Stream merging


@dataclass(frozen=True)
class VelocitySource:
    """One encoder step plus the gyro yaw accumulated over its interval."""

    prev: EncoderRecord
    curr: EncoderRecord
    delta_yaw: float


@dataclass(frozen=True)
class SensorEvent:
    timestamp_us: int
    payload: Union[VelocitySource, LidarScan]


@dataclass(frozen=True)
class SensorLogs:
    encoders: tuple[EncoderRecord, ...]
    fogs: tuple[FogRecord, ...]
    scans: tuple[LidarScan, ...]


def _check_sorted(name: str, timestamps: Sequence[int]) -> None:
    for a, b in zip(timestamps, timestamps[1:]):
        if b <= a:
            raise ValueError(f"{name} stream is not strictly increasing ({b} after {a})")


def merge_streams(
    encoders: Sequence[EncoderRecord],
    fogs: Sequence[FogRecord],
    scans: Sequence[LidarScan],
    policy: str = "accumulate",
) -> tuple[SensorEvent, ...]:
    """Merge the three streams into one globally sorted event sequence.

    One velocity event is emitted per consecutive encoder pair, carrying
    the sum of all gyro yaw increments with timestamps in the half-open
    interval (prev, curr]. Gyro records outside any encoder interval are
    dropped. Ties sort velocity events before scans.
    """
    if policy != "accumulate":
        raise ValueError(f"unknown merge policy {policy!r}")
    _check_sorted("encoder", [r.timestamp_us for r in encoders])
    _check_sorted("fog", [r.timestamp_us for r in fogs])
    _check_sorted("lidar", [s.timestamp_us for s in scans])

    events = []
    fog_idx = 0
    for prev, curr in zip(encoders, encoders[1:]):
        while fog_idx < len(fogs) and fogs[fog_idx].timestamp_us <= prev.timestamp_us:
            fog_idx += 1
        delta_yaw = 0.0
        while fog_idx < len(fogs) and fogs[fog_idx].timestamp_us <= curr.timestamp_us:
            delta_yaw += fogs[fog_idx].delta_yaw
            fog_idx += 1
        events.append(SensorEvent(curr.timestamp_us, VelocitySource(prev, curr, delta_yaw)))
    for scan in scans:
        events.append(SensorEvent(scan.timestamp_us, scan))

    # stable sort preserves the velocity-before-scan order at equal timestamps
    events.sort(key=lambda e: (e.timestamp_us, isinstance(e.payload, LidarScan)))
    return tuple(events)
