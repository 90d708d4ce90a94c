"""Normalization, time/frequency regions and per-region statistics.

The default layout takes the whole observation window, splits it into four
time regions, and splits each time region into fifteen frequency cells. Five
statistics per region give ``5 * (1 + 4 + 4 * 15) = 325`` features.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence, TextIO

import numpy as np

from .errors import LayoutBandMismatch
from .trace import (
    DEFAULT_BASELINE_MS,
    DEFAULT_K_SIGMA,
    SpectralTrace,
    detect_boot_onset,
    window_trace,
)

STAT_NAMES = ("mean", "std", "variance", "skewness", "kurtosis")
N_STATS = len(STAT_NAMES)
COLOR_BAND_EDGES = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class RegionLayout:
    window_duration: float
    band: tuple[float, float]
    time_splits: int = 4
    frequency_splits: int = 15

    def __post_init__(self):
        object.__setattr__(self, "band", (float(self.band[0]), float(self.band[1])))
        if self.time_splits < 1 or self.frequency_splits < 1:
            raise ValueError("time_splits and frequency_splits must be >= 1")
        if not self.window_duration > 0:
            raise ValueError("window_duration must be positive")
        if not self.band[0] < self.band[1]:
            raise ValueError("band start must be below band stop")

    @property
    def region_count(self) -> int:
        return 1 + self.time_splits + self.time_splits * self.frequency_splits

    @property
    def feature_count(self) -> int:
        return N_STATS * self.region_count


def default_layout(band=(0.0, 10e6), window_duration: float = 1080.0) -> RegionLayout:
    return RegionLayout(window_duration, band, 4, 15)


class Region(NamedTuple):
    level: str  # "window", "time" or "cell"
    time_index: int | None
    frequency_index: int | None
    t_start: float
    t_end: float
    f_start: float
    f_end: float

    @property
    def name(self) -> str:
        if self.level == "window":
            return "window"
        if self.level == "time":
            return f"t{self.time_index}"
        return f"t{self.time_index}f{self.frequency_index}"


@dataclass(frozen=True)
class RegionGrid:
    layout: RegionLayout
    time_edges: np.ndarray
    frequency_edges: np.ndarray
    regions: tuple[Region, ...]

    def time_index(self, timestamps) -> np.ndarray:
        """Time region of each timestamp; -1 outside ``[0, window)``."""
        idx = np.searchsorted(self.time_edges, timestamps, side="right") - 1
        T = self.layout.time_splits
        return np.where((idx >= 0) & (idx < T), idx, -1)

    def frequency_index(self, frequencies) -> np.ndarray:
        """Frequency cell of each frequency; the top cell includes the band stop."""
        F = self.layout.frequency_splits
        idx = np.searchsorted(self.frequency_edges, frequencies, side="right") - 1
        idx = np.where(frequencies == self.frequency_edges[-1], F - 1, idx)
        return np.where((idx >= 0) & (idx < F), idx, -1)


def build_region_grid(layout: RegionLayout) -> RegionGrid:
    T, F = layout.time_splits, layout.frequency_splits
    f0, f1 = layout.band
    W = layout.window_duration
    time_edges = np.array([W * i / T for i in range(T + 1)])
    freq_edges = np.array([f0 + (f1 - f0) * j / F for j in range(F + 1)])
    time_edges[-1] = W
    freq_edges[-1] = f1
    regions = [Region("window", None, None, 0.0, W, f0, f1)]
    regions += [Region("time", r, None, time_edges[r], time_edges[r + 1], f0, f1) for r in range(T)]
    regions += [
        Region("cell", r, c, time_edges[r], time_edges[r + 1], freq_edges[c], freq_edges[c + 1])
        for r in range(T)
        for c in range(F)
    ]
    for a in (time_edges, freq_edges):
        a.flags.writeable = False
    return RegionGrid(layout, time_edges, freq_edges, tuple(regions))


def feature_names(layout: RegionLayout) -> list[str]:
    grid = build_region_grid(layout)
    return [f"{region.name}.{stat}" for region in grid.regions for stat in STAT_NAMES]


class FiveStats(NamedTuple):
    mean: float
    std: float
    variance: float
    skewness: float
    kurtosis: float


def _grouped_stats(x: np.ndarray, groups: np.ndarray, n_groups: int) -> tuple[np.ndarray, np.ndarray]:
    """Five statistics per group, shape ``(n_groups, 5)``, plus group counts.

    Central moments are accumulated in a second pass around each group mean.
    Groups whose values are all equal get zero variance, skewness and kurtosis.
    Empty groups get all-zero rows.
    """
    count = np.bincount(groups, minlength=n_groups).astype(np.float64)
    total = np.bincount(groups, weights=x, minlength=n_groups)
    nonempty = count > 0
    mean = np.zeros(n_groups)
    mean[nonempty] = total[nonempty] / count[nonempty]

    lo = np.full(n_groups, np.inf)
    hi = np.full(n_groups, -np.inf)
    np.minimum.at(lo, groups, x)
    np.maximum.at(hi, groups, x)
    flat = nonempty & (lo == hi)

    d = x - mean[groups]
    d2 = d * d
    m2 = np.bincount(groups, weights=d2, minlength=n_groups)
    m3 = np.bincount(groups, weights=d2 * d, minlength=n_groups)
    m4 = np.bincount(groups, weights=d2 * d2, minlength=n_groups)
    m2[flat] = 0.0

    out = np.zeros((n_groups, N_STATS))
    out[:, 0] = mean
    multi = count >= 2
    var = np.zeros(n_groups)
    var[multi] = m2[multi] / (count[multi] - 1.0)
    out[:, 1] = np.sqrt(var)
    out[:, 2] = var
    dispersed = m2 > 0
    n = count[dispersed]
    s2 = m2[dispersed]
    # skewness: (1/N) sum d^3 over [(1/(N-1)) sum d^2]^(3/2)
    out[dispersed, 3] = (m3[dispersed] / n) / (s2 / (n - 1.0)) ** 1.5
    # kurtosis: sum d^4 over (1/N) (sum d^2)^2
    out[dispersed, 4] = m4[dispersed] / (s2 * s2 / n)
    return out, count


def compute_statistics(samples) -> FiveStats:
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("need at least one sample")
    stats, _ = _grouped_stats(x, np.zeros(x.size, dtype=np.intp), 1)
    return FiveStats(*(float(v) for v in stats[0]))


def normalize(trace: SpectralTrace) -> SpectralTrace:
    """Min-max scale powers to [0, 1] using the trace's own extrema.

    A constant trace maps to all zeros.
    """
    p = trace.powers
    lo, hi = p.min(), p.max()
    if hi == lo:
        scaled = np.zeros_like(p)
    else:
        scaled = (p - lo) / (hi - lo)
    return trace.with_powers(scaled, normalized=True)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    layout: RegionLayout
    trace_source: str = ""
    label: str | None = None
    empty_regions: tuple[int, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.values)


def extract_features(trace: SpectralTrace, layout: RegionLayout) -> FeatureVector:
    """Statistics of every region in grid order, concatenated.

    ``trace`` must already be windowed to ``layout.window_duration`` (times
    re-based to 0) and recorded over ``layout.band``.
    """
    if tuple(trace.format.band) != tuple(layout.band):
        raise LayoutBandMismatch(
            f"trace band {trace.format.band} does not match layout band {layout.band}"
        )
    grid = build_region_grid(layout)
    r = grid.time_index(trace.timestamps)
    c = grid.frequency_index(trace.frequencies)
    if (r < 0).any():
        raise ValueError(
            f"trace has samples outside the {layout.window_duration} ms window; window it first"
        )
    if (c < 0).any():
        raise LayoutBandMismatch("trace has samples outside the layout band")
    T, F = layout.time_splits, layout.frequency_splits
    x = trace.powers
    whole, _ = _grouped_stats(x, np.zeros(len(x), dtype=np.intp), 1)
    per_time, n_time = _grouped_stats(x, r, T)
    per_cell, n_cell = _grouped_stats(x, r * F + c, T * F)
    values = np.concatenate([whole.ravel(), per_time.ravel(), per_cell.ravel()])
    counts = np.concatenate([[len(x)], n_time, n_cell])
    values.flags.writeable = False
    return FeatureVector(
        values,
        layout,
        trace_source=trace.source_id,
        label=trace.label,
        empty_regions=tuple(int(i) for i in np.flatnonzero(counts == 0)),
    )


def features_from_trace(trace: SpectralTrace, layout: RegionLayout, *, align: bool = True,
                        baseline_duration: float = DEFAULT_BASELINE_MS,
                        k_sigma: float = DEFAULT_K_SIGMA) -> FeatureVector:
    """Align, window, normalize and extract in one call.

    With ``align`` the window starts at the detected boot onset; otherwise at
    the first timestamp.
    """
    start = float(trace.timestamps[0])
    if align:
        onset = detect_boot_onset(trace, baseline_duration, k_sigma)
        start = max(start, onset)
    windowed = window_trace(trace, start, layout.window_duration)
    return extract_features(normalize(windowed), layout)


def write_feature_table(stream: TextIO, vectors: Iterable[FeatureVector]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    header_written = False
    for fv in vectors:
        if not header_written:
            writer.writerow(["source_id", "label"] + [f"f{i}" for i in range(len(fv))])
            header_written = True
        writer.writerow([fv.trace_source, fv.label or ""] + [repr(v) for v in fv.values.tolist()])


def read_feature_table(stream: TextIO) -> tuple[list[str], list[str], np.ndarray]:
    """Inverse of :func:`write_feature_table`: ids, labels and the value matrix."""
    reader = csv.reader(stream)
    header = next(reader)
    if header[:2] != ["source_id", "label"]:
        raise ValueError("feature table must start with source_id,label columns")
    ids, labels, rows = [], [], []
    for row in reader:
        if not row:
            continue
        ids.append(row[0])
        labels.append(row[1])
        rows.append([float(v) for v in row[2:]])
    return ids, labels, np.array(rows, dtype=np.float64).reshape(len(rows), len(header) - 2)


def color_bands(normalized_powers) -> np.ndarray:
    """Index of the quarter-width color band: [0,.25) [.25,.5) [.5,.75) [.75,1]."""
    x = np.asarray(normalized_powers, dtype=np.float64)
    return np.minimum(np.floor(x * 4.0), 3).astype(np.int64)


def heatmap_grid(trace: SpectralTrace) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pivot a normalized trace into a (time x frequency) grid of color bands.

    Returns ``(timestamps, frequencies, bands)`` where cells with no sample
    hold -1.
    """
    if not trace.normalized:
        trace = normalize(trace)
    times, ti = np.unique(trace.timestamps, return_inverse=True)
    freqs, fi = np.unique(trace.frequencies, return_inverse=True)
    grid = np.full((len(times), len(freqs)), -1, dtype=np.int64)
    grid[ti, fi] = color_bands(trace.powers)
    return times, freqs, grid


def write_heatmap(stream: TextIO, trace: SpectralTrace) -> None:
    times, freqs, grid = heatmap_grid(trace)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["timestamp_ms"] + [repr(f) for f in freqs.tolist()])
    for t, row in zip(times.tolist(), grid):
        writer.writerow([repr(t)] + ["" if b < 0 else str(b) for b in row.tolist()])


def feature_matrix(vectors: Sequence[FeatureVector]) -> np.ndarray:
    return np.vstack([fv.values for fv in vectors])
