"""Synthetic labelled trace corpora.

A device archetype is a boot sequence of segments, each with a per-band
mean and standard deviation in dBm, followed by an idle floor. A trace
renders the archetype on an instrument's sweep grid after a random
connection delay (jitter). Level changes are short linear ramps. On top of
the per-sample segment spread and instrument noise, a recording may carry
boot-to-boot level shifts (``run_std``) and an ambient emission floor
(``ambient_db``).

All randomness comes from :class:`~emfprint.rng.SplitMix64`. A trace with
seed ``s`` draws its jitter from ``SplitMix64(s).spawn(0)``, per-sample
spread then noise from ``SplitMix64(s)``, ambient levels from ``spawn(1)`` and
level shifts from ``spawn(3)``, so corpora are reproducible from their seed
alone.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DurationTooShort
from .features import RegionLayout
from .rng import SplitMix64
from .trace import InstrumentFormat, SpectralTrace, read_trace, write_trace

MEAN_RANGE_DBM = (-80.0, -30.0)
STD_RANGE_DBM = (0.5, 3.0)
IDLE_RANGE_DBM = (-95.0, -88.0)
SEGMENT_MS = (60.0, 160.0)
RAMP_MS = 25.0
AMBIENT_STD_DB = 2.0

# Receiver grids used for synthesis. Sweep counts and point counts are reduced
# relative to the real instruments so corpora stay desk-sized.
SDR_SYNTH = InstrumentFormat("hackrf_one", 0.0, 10e6, 976.6, sweep_points=150, sweep_time=8.192)
ANALYZER_SYNTH = InstrumentFormat("fsw8", 0.0, 200e6, 3e6, sweep_points=201, sweep_time=4.01)


@dataclass(frozen=True)
class Segment:
    duration: float
    means: tuple[float, ...]
    stds: tuple[float, ...]


@dataclass(frozen=True)
class DeviceArchetype:
    id: str
    boot_segments: tuple[Segment, ...]
    idle_floor: float
    band: tuple[float, float]
    band_count: int
    seed: int = 0

    def __post_init__(self):
        if self.band_count < 1:
            raise ValueError("band_count must be >= 1")
        for seg in self.boot_segments:
            if not seg.duration > 0:
                raise ValueError("segment durations must be positive")
            if len(seg.means) != self.band_count or len(seg.stds) != self.band_count:
                raise ValueError("segment vectors must have band_count entries")
            if min(seg.stds) < 0:
                raise ValueError("segment stds must be non-negative")

    @property
    def boot_duration(self) -> float:
        return float(sum(s.duration for s in self.boot_segments))


def make_archetype(seed: int, band=(0.0, 10e6), band_count: int = 15, segment_count: int = 6,
                   *, active_bands: int | None = None, id: str | None = None) -> DeviceArchetype:
    """Draw a random archetype: segment means in [-80, -30] dBm, stds in [0.5, 3] dBm.

    With ``active_bands`` the device emits only in that many randomly chosen
    bands; the remaining bands stay at the idle floor with zero spread.
    """
    if segment_count < 1:
        raise ValueError("segment_count must be >= 1")
    rng = SplitMix64(seed)
    durations = np.round(rng.uniform(*SEGMENT_MS, segment_count), 3)
    means = rng.uniform(*MEAN_RANGE_DBM, segment_count * band_count).reshape(segment_count, band_count)
    stds = rng.uniform(*STD_RANGE_DBM, segment_count * band_count).reshape(segment_count, band_count)
    idle = float(rng.uniform(*IDLE_RANGE_DBM, 1)[0])
    if active_bands is not None:
        if not 1 <= active_bands <= band_count:
            raise ValueError("active_bands must lie in [1, band_count]")
        quiet = rng.spawn(1).permutation(band_count)[active_bands:]
        means[:, quiet] = idle
        stds[:, quiet] = 0.0
    segments = tuple(
        Segment(float(durations[s]), tuple(means[s].tolist()), tuple(stds[s].tolist()))
        for s in range(segment_count)
    )
    return DeviceArchetype(id or f"A{seed}", segments, idle, (float(band[0]), float(band[1])),
                           band_count, seed)


def perturb_archetype(base: DeviceArchetype, seed: int, mean_scale: float = 1.0,
                      duration_scale: float = 0.05, *, keep_first: bool = False,
                      id: str | None = None) -> DeviceArchetype:
    """Copy of ``base`` with Gaussian jitter on segment means (dB, absolute) and
    durations (relative). With ``keep_first`` the power-up segment is untouched."""
    rng = SplitMix64(seed)
    segments = []
    for s, seg in enumerate(base.boot_segments):
        dm = rng.normal(base.band_count) * mean_scale
        dd = rng.normal(1)[0] * duration_scale
        if keep_first and s == 0:
            segments.append(seg)
            continue
        means = np.clip(np.asarray(seg.means) + dm, *MEAN_RANGE_DBM)
        duration = round(max(seg.duration * (1.0 + dd), 1.0), 3)
        segments.append(Segment(duration, tuple(means.tolist()), seg.stds))
    return replace(base, id=id or f"{base.id}~{seed}", boot_segments=tuple(segments), seed=seed)


def mean_profile(archetype: DeviceArchetype, length_ms: float | None = None,
                 step_ms: float = 1.0) -> np.ndarray:
    """Noise-free mean power on a regular time grid, shape ``(steps, band_count)``."""
    length = archetype.boot_duration if length_ms is None else length_ms
    t = np.arange(0.0, length, step_ms)
    bounds = np.cumsum([s.duration for s in archetype.boot_segments])
    seg = np.searchsorted(bounds, t, side="right")
    table = np.vstack([np.array(s.means) for s in archetype.boot_segments]
                      + [np.full(archetype.band_count, archetype.idle_floor)])
    return table[np.minimum(seg, len(archetype.boot_segments))]


def archetype_distance(a: DeviceArchetype, b: DeviceArchetype, step_ms: float = 1.0) -> float:
    """L2 distance between mean profiles over the longer boot."""
    length = max(a.boot_duration, b.boot_duration)
    return float(np.linalg.norm(mean_profile(a, length, step_ms) - mean_profile(b, length, step_ms)))


def synthesize_trace(archetype: DeviceArchetype, instrument: InstrumentFormat, duration: float,
                     jitter_ms: float, noise_std: float, seed: int, *, label: str | None = None,
                     source_id: str | None = None, ramp_ms: float = RAMP_MS,
                     ambient_db: float = 0.0, ambient_std: float = AMBIENT_STD_DB,
                     run_std: float = 0.0) -> SpectralTrace:
    """Render one recording.

    Sweeps start at ``k * sweep_time`` for the ``floor(duration / sweep_time)``
    sweeps that fit. The boot begins ``jitter_ms`` after the first sweep; the
    idle floor fills the time before and after it. Each level change (idle to
    first segment, segment to segment, last segment to idle) is a linear
    crossfade over the first ``ramp_ms`` of the new level.

    With ``ambient_db > 0`` every band also carries an ambient emission whose
    level is drawn per recording in ``idle_floor + [0, ambient_db]`` dBm and
    fluctuates by ``ambient_std`` dB per sample; it is power-summed with the
    device emission, so it dominates quiet bands and barely moves strong ones.

    ``run_std`` shifts every emitting (segment, band) level by an independent
    Gaussian offset per recording, modelling boot-to-boot variation.
    """
    if instrument.sweep_points is None or instrument.sweep_time is None:
        raise ValueError("instrument needs sweep_points and sweep_time for synthesis")
    if duration < archetype.boot_duration:
        raise DurationTooShort(
            f"duration {duration} ms shorter than boot sequence {archetype.boot_duration} ms"
        )
    if tuple(archetype.band) != instrument.band:
        raise ValueError(f"archetype band {archetype.band} differs from instrument band {instrument.band}")
    rng = SplitMix64(seed)
    if run_std > 0:
        archetype = _shift_levels(archetype, rng.spawn(3), run_std)
    n_sweeps = math.floor(duration / instrument.sweep_time)
    P = instrument.sweep_points
    times = np.arange(n_sweeps) * instrument.sweep_time
    freqs = np.linspace(instrument.start_frequency, instrument.stop_frequency, P)
    span = instrument.stop_frequency - instrument.start_frequency
    band_idx = np.minimum(((freqs - instrument.start_frequency) / span * archetype.band_count)
                          .astype(np.int64), archetype.band_count - 1)

    means, stds, weight = _levels(archetype, times - jitter_ms, ramp_ms)
    mean_rows = means[0] + weight[:, None] * (means[1] - means[0])
    std_rows = stds[0] + weight[:, None] * (stds[1] - stds[0])

    variability = rng.normal(n_sweeps * P).reshape(n_sweeps, P)
    noise = rng.normal(n_sweeps * P).reshape(n_sweeps, P)
    power = mean_rows[:, band_idx] + std_rows[:, band_idx] * variability
    if ambient_db > 0:
        amb = rng.spawn(1)
        level = archetype.idle_floor + amb.uniform(0.0, ambient_db, archetype.band_count)
        ambient = level[band_idx] + ambient_std * amb.normal(n_sweeps * P).reshape(n_sweeps, P)
        power = 10.0 * np.log10(10.0 ** (power / 10.0) + 10.0 ** (ambient / 10.0))
    power = power + noise_std * noise
    t = np.repeat(times, P)
    f = np.tile(freqs, n_sweeps)
    return SpectralTrace(t, f, power.ravel(), instrument, label=label,
                         source_id=source_id if source_id is not None else f"{archetype.id}:{seed}")


def _shift_levels(archetype: DeviceArchetype, rng: SplitMix64, run_std: float) -> DeviceArchetype:
    segments = []
    for seg in archetype.boot_segments:
        stds = np.asarray(seg.stds)
        shift = np.where(stds > 0, run_std * rng.normal(archetype.band_count), 0.0)
        segments.append(Segment(seg.duration, tuple((np.asarray(seg.means) + shift).tolist()), seg.stds))
    return replace(archetype, boot_segments=tuple(segments))


def _levels(archetype: DeviceArchetype, tau: np.ndarray, ramp_ms: float):
    """Start/end level tables and crossfade weight for boot-relative times ``tau``.

    Returns ``(means, stds, weight)`` where ``means[0]``/``means[1]`` hold the
    previous and current level of every time step.
    """
    S = len(archetype.boot_segments)
    idle_mean = np.full(archetype.band_count, archetype.idle_floor)
    mean_tab = np.vstack([np.array(s.means) for s in archetype.boot_segments] + [idle_mean])
    std_tab = np.vstack([np.array(s.stds) for s in archetype.boot_segments]
                        + [np.zeros(archetype.band_count)])
    starts = np.concatenate([[0.0], np.cumsum([s.duration for s in archetype.boot_segments])])
    cur = np.searchsorted(starts[1:], tau, side="right")  # S means after the boot
    prev = np.where(cur == 0, S, cur - 1)
    before = tau < 0
    cur = np.where(before, S, cur)
    prev = np.where(before, S, prev)
    elapsed = tau - starts[np.minimum(cur, S)]
    if ramp_ms > 0:
        weight = np.clip(elapsed / ramp_ms, 0.0, 1.0)
    else:
        weight = np.ones(len(tau))
    weight = np.where(before, 1.0, weight)
    return (mean_tab[prev], mean_tab[cur]), (std_tab[prev], std_tab[cur]), weight


@dataclass(frozen=True)
class CorpusSpec:
    archetypes: tuple[DeviceArchetype, ...]
    traces_per_class: int
    jitter_ms: tuple[float, float]
    noise_std: float
    seed: int
    instrument: InstrumentFormat
    duration: float
    ambient_db: float = 0.0
    run_std: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "archetypes", tuple(self.archetypes))
        if self.traces_per_class < 1:
            raise ValueError("traces_per_class must be >= 1")
        lo, hi = self.jitter_ms
        if lo < 0 or hi < lo:
            raise ValueError("jitter range must satisfy 0 <= low <= high")


@dataclass(frozen=True)
class CorpusEntry:
    trace: SpectralTrace
    label: str
    seed: int
    archetype_seed: int
    jitter_ms: float


def trace_seed(corpus_seed: int, archetype_index: int, trace_index: int) -> int:
    return SplitMix64(corpus_seed).spawn(archetype_index, trace_index).seed


def generate_corpus(spec: CorpusSpec) -> list[CorpusEntry]:
    """``traces_per_class`` recordings per archetype, ordered by (archetype, trace)."""
    out = []
    for a, arch in enumerate(spec.archetypes):
        for i in range(spec.traces_per_class):
            seed = trace_seed(spec.seed, a, i)
            jitter = float(SplitMix64(seed).spawn(0).uniform(*spec.jitter_ms, 1)[0])
            trace = synthesize_trace(arch, spec.instrument, spec.duration, jitter, spec.noise_std,
                                     seed, label=arch.id, source_id=f"{arch.id}/{i:03d}",
                                     ambient_db=spec.ambient_db, run_std=spec.run_std)
            out.append(CorpusEntry(trace, arch.id, seed, arch.seed, jitter))
    return out


def scenario1_spec(seed: int = 1, classes: int = 17, traces_per_class: int = 10,
                   noise_std: float = 1.0, active_bands: int | None = 5,
                   ambient_db: float = 10.0, run_std: float = 6.0) -> CorpusSpec:
    """Distinct devices on the 10 MHz SDR grid."""
    archetypes = [make_archetype(seed * 1000 + c, SDR_SYNTH.band, active_bands=active_bands,
                                 id=f"U{c + 1}")
                  for c in range(classes)]
    return CorpusSpec(tuple(archetypes), traces_per_class, (250.0, 450.0), noise_std, seed,
                      SDR_SYNTH, 1600.0, ambient_db, run_std)


def scenario2_spec(seed: int = 2, classes: int = 15, traces_per_class: int = 10,
                   mean_scale: float = 2.0, noise_std: float = 1.0,
                   run_std: float = 3.0) -> CorpusSpec:
    """Same-family units: small perturbations of one base on the analyzer grid."""
    base = make_archetype(seed * 1000, ANALYZER_SYNTH.band, segment_count=8, id="base")
    base = _stretch(base, 3000.0)
    archetypes = [perturb_archetype(base, seed * 1000 + c + 1, mean_scale, 0.02, id=f"D{c + 1}")
                  for c in range(classes)]
    return CorpusSpec(tuple(archetypes), traces_per_class, (250.0, 450.0), noise_std, seed,
                      ANALYZER_SYNTH, 3900.0, run_std=run_std)


def firmware_spec(seed: int = 3, variants: int = 7, traces_per_class: int = 10,
                  mean_scale: float = 3.0, noise_std: float = 1.0,
                  run_std: float = 3.0) -> CorpusSpec:
    """One device with modified boot payloads; F1 is the unmodified base."""
    base = make_archetype(seed * 1000, SDR_SYNTH.band, id="F1")
    archetypes = [base] + [
        perturb_archetype(base, seed * 1000 + v, mean_scale, 0.1, keep_first=True, id=f"F{v}")
        for v in range(2, variants + 1)
    ]
    return CorpusSpec(tuple(archetypes), traces_per_class, (250.0, 450.0), noise_std, seed,
                      SDR_SYNTH, 1600.0, run_std=run_std)


def _stretch(arch: DeviceArchetype, total_ms: float) -> DeviceArchetype:
    scale = total_ms / arch.boot_duration
    segs = tuple(replace(s, duration=round(s.duration * scale, 3)) for s in arch.boot_segments)
    return replace(arch, boot_segments=segs)


def scenario_layout(spec: CorpusSpec, window_duration: float | None = None) -> RegionLayout:
    if window_duration is None:
        window_duration = 3350.0 if spec.instrument.name == ANALYZER_SYNTH.name else 1080.0
    return RegionLayout(window_duration, spec.instrument.band, 4, 15)


def write_corpus(directory, entries: Sequence[CorpusEntry]) -> Path:
    """One sub-directory per class plus ``manifest.csv`` (file,label,seed,archetype_seed)."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    counters: dict[str, int] = {}
    rows = []
    for e in entries:
        n = counters.get(e.label, 0)
        counters[e.label] = n + 1
        rel = Path(e.label) / f"trace_{n:03d}.csv"
        (root / e.label).mkdir(exist_ok=True)
        write_trace(root / rel, e.trace)
        rows.append((rel.as_posix(), e.label, e.seed, e.archetype_seed))
    with open(root / "manifest.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["file", "label", "seed", "archetype_seed"])
        writer.writerows(rows)
    return root / "manifest.csv"


def read_corpus(directory) -> list[SpectralTrace]:
    root = Path(directory)
    with open(root / "manifest.csv", "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [read_trace(root / row["file"], label=row["label"]) for row in rows]
