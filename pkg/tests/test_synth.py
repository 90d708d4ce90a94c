import math

import numpy as np
import pytest

from emfprint import synth
from emfprint.errors import DurationTooShort
from emfprint.evaluation import best_common_threshold, cross_validate
from emfprint.features import features_from_trace
from emfprint.trace import detect_boot_onset


def test_archetype_determinism():
    assert synth.make_archetype(5) == synth.make_archetype(5)
    a, b = synth.make_archetype(1), synth.make_archetype(2)
    assert not np.array_equal(synth.mean_profile(a, 600.0), synth.mean_profile(b, 600.0))


def test_archetype_ranges():
    arch = synth.make_archetype(7, segment_count=4)
    means = np.array([s.means for s in arch.boot_segments])
    stds = np.array([s.stds for s in arch.boot_segments])
    assert means.min() >= -80.0 and means.max() <= -30.0
    assert stds.min() >= 0.5 and stds.max() <= 3.0
    assert len(arch.boot_segments) == 4 and means.shape[1] == 15


def test_active_bands_silence_the_rest():
    arch = synth.make_archetype(7, active_bands=5)
    stds = np.array([s.stds for s in arch.boot_segments])
    assert ((stds > 0).sum(axis=1) == 5).all()
    quiet = np.array([s.means for s in arch.boot_segments])[:, stds[0] == 0]
    assert (quiet == arch.idle_floor).all()


def test_archetype_validation():
    with pytest.raises(ValueError):
        synth.make_archetype(1, segment_count=0)
    seg = synth.Segment(-1.0, (0.0,), (1.0,))
    with pytest.raises(ValueError):
        synth.DeviceArchetype("x", (seg,), -90.0, (0.0, 1.0), 1)
    seg = synth.Segment(1.0, (0.0,), (-1.0,))
    with pytest.raises(ValueError):
        synth.DeviceArchetype("x", (seg,), -90.0, (0.0, 1.0), 1)


def test_seventeen_archetypes_pairwise_distinct():
    spec = synth.scenario1_spec()
    archs = spec.archetypes
    dists = [synth.archetype_distance(a, b) for i, a in enumerate(archs) for b in archs[i + 1:]]
    assert len(archs) == 17 and len(dists) == 136
    assert min(dists) > 0


def test_noise_free_rendering():
    arch = synth.make_archetype(3)
    a = synth.synthesize_trace(arch, synth.SDR_SYNTH, 1600.0, 0.0, 0.0, seed=9)
    b = synth.synthesize_trace(arch, synth.SDR_SYNTH, 1600.0, 0.0, 0.0, seed=9)
    c = synth.synthesize_trace(arch, synth.SDR_SYNTH, 1600.0, 0.0, 0.0, seed=10)
    assert a.identical(b)
    assert np.array_equal(a.timestamps, c.timestamps) and np.array_equal(a.frequencies, c.frequencies)
    assert not np.array_equal(a.powers, c.powers)
    # with zero segment spread nothing random remains
    flat = synth.DeviceArchetype("flat", tuple(synth.Segment(s.duration, s.means, (0.0,) * 15)
                                               for s in arch.boot_segments),
                                 arch.idle_floor, arch.band, 15)
    d = synth.synthesize_trace(flat, synth.SDR_SYNTH, 1600.0, 0.0, 0.0, seed=9)
    e = synth.synthesize_trace(flat, synth.SDR_SYNTH, 1600.0, 0.0, 0.0, seed=10)
    assert np.array_equal(d.powers, e.powers)


def test_steady_segment_level():
    arch = synth.make_archetype(4)
    seg = arch.boot_segments[1]
    trace = synth.synthesize_trace(arch, synth.SDR_SYNTH, 1600.0, 0.0, 0.0, seed=1, ramp_ms=0.0)
    start = arch.boot_segments[0].duration
    t = trace.timestamps
    mask = (t >= start) & (t < start + seg.duration) & (trace.frequencies < 10e6 / 15)
    assert trace.powers[mask].mean() == pytest.approx(seg.means[0], abs=4 * seg.stds[0])


@pytest.mark.parametrize("seed", range(5))
def test_onset_recovered_within_one_sweep(seed):
    arch = synth.make_archetype(20 + seed)
    trace = synth.synthesize_trace(arch, synth.SDR_SYNTH, 1600.0, 300.0, 1.0, seed=seed)
    onset = detect_boot_onset(trace)
    assert abs(onset - 300.0) <= synth.SDR_SYNTH.sweep_time


def test_analyzer_sweep_count():
    arch = synth._stretch(synth.make_archetype(1, synth.ANALYZER_SYNTH.band), 3000.0)
    trace = synth.synthesize_trace(arch, synth.ANALYZER_SYNTH, 3350.0, 0.0, 1.0, seed=1)
    sweeps = np.unique(trace.timestamps)
    assert sweeps.size == math.floor(3350 / 4.01) == 835
    assert np.allclose(np.diff(sweeps), 4.01)
    assert len(trace) == 835 * synth.ANALYZER_SYNTH.sweep_points


def test_duration_too_short():
    arch = synth.make_archetype(1)
    with pytest.raises(DurationTooShort):
        synth.synthesize_trace(arch, synth.SDR_SYNTH, arch.boot_duration - 1.0, 0.0, 1.0, seed=1)


def test_band_mismatch():
    with pytest.raises(ValueError):
        synth.synthesize_trace(synth.make_archetype(1), synth.ANALYZER_SYNTH, 4000.0, 0.0, 1.0, seed=1)


def test_corpus_spec_validation():
    arch = synth.make_archetype(1)
    with pytest.raises(ValueError):
        synth.CorpusSpec((arch,), 0, (0.0, 1.0), 1.0, 1, synth.SDR_SYNTH, 1600.0)
    with pytest.raises(ValueError):
        synth.CorpusSpec((arch,), 1, (-1.0, 1.0), 1.0, 1, synth.SDR_SYNTH, 1600.0)


def test_scenario_sizes():
    s1, s2, fw = synth.scenario1_spec(), synth.scenario2_spec(), synth.firmware_spec()
    assert len(s1.archetypes) * s1.traces_per_class == 170
    assert len(s2.archetypes) * s2.traces_per_class == 150
    assert len(fw.archetypes) == 7
    assert s2.instrument.name == "fsw8" and s2.duration >= 3350.0


def test_firmware_variants_share_power_up():
    fw = synth.firmware_spec()
    first = {a.boot_segments[0] for a in fw.archetypes}
    assert len(first) == 1
    later = {a.boot_segments[1] for a in fw.archetypes}
    assert len(later) == 7


def test_corpus_order_labels_and_determinism():
    spec = synth.scenario1_spec(seed=5, classes=3, traces_per_class=2)
    a, b = synth.generate_corpus(spec), synth.generate_corpus(spec)
    assert [e.label for e in a] == ["U1", "U1", "U2", "U2", "U3", "U3"]
    assert all(x.trace.identical(y.trace) and x.seed == y.seed for x, y in zip(a, b))
    assert len({e.seed for e in a}) == 6
    assert all(250.0 <= e.jitter_ms <= 450.0 for e in a)


def test_corpus_files_round_trip(tmp_path):
    spec = synth.scenario1_spec(seed=5, classes=2, traces_per_class=2)
    entries = synth.generate_corpus(spec)
    manifest = synth.write_corpus(tmp_path, entries)
    lines = manifest.read_text().splitlines()
    assert lines[0] == "file,label,seed,archetype_seed"
    assert lines[1].startswith("U1/trace_000.csv,U1,")
    back = synth.read_corpus(tmp_path)
    assert [t.label for t in back] == [e.label for e in entries]
    assert all(t.identical(e.trace) for t, e in zip(back, entries))


def family_tpr(seed, scale):
    base = synth.make_archetype(seed * 1000, synth.SDR_SYNTH.band)
    archs = [synth.perturb_archetype(base, seed * 1000 + c + 1, scale, 0.05, id=f"C{c}")
             for c in range(4)]
    spec = synth.CorpusSpec(tuple(archs), 8, (250.0, 450.0), 1.0, seed, synth.SDR_SYNTH, 1600.0,
                            run_std=2.0)
    entries = synth.generate_corpus(spec)
    layout = synth.scenario_layout(spec)
    X = np.vstack([features_from_trace(e.trace, layout).values for e in entries])
    matrix = cross_validate(X, [e.label for e in entries], 4, seed=0)
    spread = np.mean([synth.archetype_distance(a, b) for i, a in enumerate(archs) for b in archs[i + 1:]])
    return best_common_threshold(matrix, 0.05)[1].tpr, spread


@pytest.mark.slow
def test_separability_dial():
    rows = []
    for scale in (0.5, 2.0, 8.0):
        runs = [family_tpr(seed, scale) for seed in range(1, 7)]
        rows.append((np.mean([r[1] for r in runs]), np.mean([r[0] for r in runs])))
    spreads, tprs = zip(*rows)
    assert list(spreads) == sorted(spreads)
    assert list(tprs) == sorted(tprs)
