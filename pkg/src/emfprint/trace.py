"""Spectral trace data model, text format, boot-onset alignment and windowing.

A trace is a stream of ``(timestamp_ms, frequency_hz, power_dbm)`` tuples as
delivered by a swept or FFT-based receiver. The on-disk format is a
three-column CSV with optional ``# key=value`` header lines.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field, replace
from typing import Iterable, NamedTuple, TextIO

import numpy as np

from .errors import (
    EmptyTrace,
    EmptyWindow,
    MalformedRecord,
    OutOfBandFrequency,
    TraceTooShort,
)

DEFAULT_BASELINE_MS = 200.0
DEFAULT_K_SIGMA = 5.0


class SpectralSample(NamedTuple):
    timestamp: float
    frequency: float
    power: float


@dataclass(frozen=True)
class InstrumentFormat:
    name: str
    start_frequency: float
    stop_frequency: float
    resolution_bandwidth: float
    sweep_points: int | None = None
    sweep_time: float | None = None

    def __post_init__(self):
        if not self.start_frequency < self.stop_frequency:
            raise ValueError("start_frequency must be below stop_frequency")
        if not self.resolution_bandwidth > 0:
            raise ValueError("resolution_bandwidth must be positive")
        if self.sweep_points is not None and self.sweep_points < 1:
            raise ValueError("sweep_points must be >= 1")
        if self.sweep_time is not None and not self.sweep_time > 0:
            raise ValueError("sweep_time must be positive")

    @property
    def band(self) -> tuple[float, float]:
        return (self.start_frequency, self.stop_frequency)

    def contains(self, frequency) -> np.ndarray:
        return (frequency >= self.start_frequency) & (frequency <= self.stop_frequency)


# SDR receiver: 10 MHz span, 8192-point FFT.
HACKRF_ONE = InstrumentFormat("hackrf_one", 0.0, 10e6, 976.6)
# Swept analyzer: 200 MHz span, 4001 points per 4.01 ms sweep.
FSW8 = InstrumentFormat("fsw8", 0.0, 200e6, 3e6, sweep_points=4001, sweep_time=4.01)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class SpectralTrace:
    """Time-ordered samples, held as three parallel float64 arrays.

    Samples are sorted by timestamp, then frequency. Arrays are read-only.
    """

    timestamps: np.ndarray
    frequencies: np.ndarray
    powers: np.ndarray
    format: InstrumentFormat
    label: str | None = None
    source_id: str = ""
    normalized: bool = field(default=False)

    def __post_init__(self):
        t, f, p = (_frozen(a) for a in (self.timestamps, self.frequencies, self.powers))
        if not (t.ndim == f.ndim == p.ndim == 1 and len(t) == len(f) == len(p)):
            raise ValueError("timestamps, frequencies and powers must be equal-length vectors")
        if len(t) == 0:
            raise EmptyTrace("trace has no samples")
        order = np.lexsort((f, t))
        if np.any(order != np.arange(len(t))):
            t, f, p = (_frozen(a[order]) for a in (t, f, p))
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "powers", p)

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def samples(self) -> list[SpectralSample]:
        return [SpectralSample(*row) for row in zip(self.timestamps.tolist(),
                                                    self.frequencies.tolist(),
                                                    self.powers.tolist())]

    @property
    def duration(self) -> float:
        """Span between the first and last timestamp, in ms."""
        return float(self.timestamps[-1] - self.timestamps[0])

    def with_powers(self, powers, **changes) -> "SpectralTrace":
        return replace(self, powers=powers, **changes)

    def identical(self, other: "SpectralTrace") -> bool:
        """Exact field equality, including every sample value."""
        return (
            self.format == other.format
            and self.label == other.label
            and self.source_id == other.source_id
            and self.normalized == other.normalized
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.frequencies, other.frequencies)
            and np.array_equal(self.powers, other.powers)
        )


_FORMAT_KEYS = {
    "instrument": "name",
    "start_hz": "start_frequency",
    "stop_hz": "stop_frequency",
    "rbw_hz": "resolution_bandwidth",
    "sweep_points": "sweep_points",
    "sweep_time_ms": "sweep_time",
}


def _format_from_meta(meta: dict[str, str]) -> InstrumentFormat:
    missing = [k for k in ("start_hz", "stop_hz", "rbw_hz") if k not in meta]
    if missing:
        raise MalformedRecord(0, f"no instrument format given and header lacks {', '.join(missing)}")
    kwargs = {"name": meta.get("instrument", "unknown")}
    for key, attr in _FORMAT_KEYS.items():
        if key == "instrument" or key not in meta:
            continue
        kwargs[attr] = int(meta[key]) if key == "sweep_points" else float(meta[key])
    return InstrumentFormat(**kwargs)


def parse_trace(stream: TextIO | str | Iterable[str],
                format: InstrumentFormat | None = None,
                label: str | None = None,
                source_id: str | None = None) -> SpectralTrace:
    """Parse the CSV trace format.

    ``stream`` may be an open text file, a string holding the whole document,
    or any iterable of lines. When ``format`` is omitted the instrument band
    is taken from the ``# start_hz=... stop_hz=... rbw_hz=...`` header.
    Frequencies outside the band raise :class:`OutOfBandFrequency`.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    meta: dict[str, str] = {}
    rows: list[tuple[float, float, float]] = []
    line_numbers: list[int] = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                meta[key.strip()] = value.strip()
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise MalformedRecord(lineno, f"expected 3 fields, got {len(parts)}")
        try:
            t, f, p = (float(x) for x in parts)
        except ValueError:
            raise MalformedRecord(lineno, f"non-numeric field in {line!r}") from None
        if not (math.isfinite(t) and math.isfinite(f) and math.isfinite(p)):
            raise MalformedRecord(lineno, "non-finite value")
        if t < 0:
            raise MalformedRecord(lineno, "negative timestamp")
        rows.append((t, f, p))
        line_numbers.append(lineno)

    fmt = format if format is not None else _format_from_meta(meta)
    if not rows:
        raise EmptyTrace("trace has no records")
    data = np.array(rows, dtype=np.float64)
    outside = ~fmt.contains(data[:, 1])
    if outside.any():
        i = int(np.argmax(outside))
        raise OutOfBandFrequency(line_numbers[i], rows[i][1], fmt.band)
    if label is None:
        label = meta.get("label") or None
    if source_id is None:
        source_id = meta.get("source_id", "")
    return SpectralTrace(data[:, 0], data[:, 1], data[:, 2], fmt, label=label,
                         source_id=source_id, normalized=meta.get("normalized") == "1")


def serialize_trace(trace: SpectralTrace, stream: TextIO) -> None:
    fmt = trace.format
    header = {
        "instrument": fmt.name,
        "start_hz": repr(fmt.start_frequency),
        "stop_hz": repr(fmt.stop_frequency),
        "rbw_hz": repr(fmt.resolution_bandwidth),
    }
    if fmt.sweep_points is not None:
        header["sweep_points"] = str(fmt.sweep_points)
    if fmt.sweep_time is not None:
        header["sweep_time_ms"] = repr(fmt.sweep_time)
    if trace.label is not None:
        header["label"] = trace.label
    if trace.source_id:
        header["source_id"] = trace.source_id
    if trace.normalized:
        header["normalized"] = "1"
    for key, value in header.items():
        stream.write(f"# {key}={value}\n")
    # repr() gives the shortest string that round-trips a float64 exactly.
    stream.writelines(
        f"{t!r},{f!r},{p!r}\n"
        for t, f, p in zip(trace.timestamps.tolist(), trace.frequencies.tolist(),
                           trace.powers.tolist())
    )


def read_trace(path, format: InstrumentFormat | None = None, label: str | None = None) -> SpectralTrace:
    """Parse a trace file; ``source_id`` defaults to the file name."""
    with open(path, "r", encoding="utf-8", newline="\n") as fh:
        trace = parse_trace(fh, format, label=label)
    if not trace.source_id:
        trace = replace(trace, source_id=os.path.basename(str(path)))
    return trace


def write_trace(path, trace: SpectralTrace) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        serialize_trace(trace, fh)
    os.replace(tmp, path)


def timeslot_power(trace: SpectralTrace) -> tuple[np.ndarray, np.ndarray]:
    """Distinct timestamps and the summed power of each sweep."""
    slots, inverse = np.unique(trace.timestamps, return_inverse=True)
    totals = np.bincount(inverse, weights=trace.powers, minlength=len(slots))
    return slots, totals


def detect_boot_onset(trace: SpectralTrace,
                      baseline_duration: float = DEFAULT_BASELINE_MS,
                      k_sigma: float = DEFAULT_K_SIGMA) -> float:
    """Timestamp of the first sweep whose total power leaves the baseline.

    The baseline is every sweep within ``baseline_duration`` ms of the first
    timestamp. A sweep is an excursion when its total power exceeds
    ``mean + k_sigma * std`` of the baseline totals. With a flat baseline
    (std == 0) any deviation from the mean counts. Returns 0 when no sweep
    qualifies or the first excursion lies inside the baseline.
    """
    if not k_sigma > 0:
        raise ValueError("k_sigma must be positive")
    if not trace.duration > baseline_duration:
        raise TraceTooShort(
            f"trace spans {trace.duration} ms, baseline needs more than {baseline_duration} ms"
        )
    slots, totals = timeslot_power(trace)
    in_baseline = slots < slots[0] + baseline_duration
    base = totals[in_baseline]
    mean = base.mean()
    std = base.std()
    if std == 0:
        hits = np.flatnonzero(totals != mean)
    else:
        hits = np.flatnonzero(totals > mean + k_sigma * std)
    if len(hits) == 0 or in_baseline[hits[0]]:
        return 0.0
    return float(slots[hits[0]])


def window_trace(trace: SpectralTrace, start: float, duration: float) -> SpectralTrace:
    """Samples with ``start <= t < start + duration``, re-based to t = 0."""
    if not duration > 0:
        raise ValueError("duration must be positive")
    t = trace.timestamps
    keep = (t >= start) & (t < start + duration)
    if not keep.any():
        raise EmptyWindow(f"no samples in [{start}, {start + duration}) ms")
    return replace(
        trace,
        timestamps=t[keep] - start,
        frequencies=trace.frequencies[keep],
        powers=trace.powers[keep],
    )
