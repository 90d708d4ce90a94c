"""On-disk store of trained device profiles, one JSON document per class.

Floats are written as ``repr`` decimal strings so that a store/load cycle
reproduces every model parameter bit for bit.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import CorruptProfile, DuplicateLabel, IoFailure, UnsupportedFormatVersion
from .features import RegionLayout
from .ocsvm import OneClassModel, Standardizer
from .trace import InstrumentFormat

FORMAT_VERSION = 1
_SAFE = re.compile(r"[^A-Za-z0-9._-]")


@dataclass(frozen=True, eq=False)
class DeviceProfile:
    class_label: str
    model: OneClassModel
    layout: RegionLayout
    instrument: InstrumentFormat
    created_at: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))
    training_trace_ids: tuple[str, ...] = ()
    threshold: float | None = None
    format_version: int = FORMAT_VERSION


def _num(x: float) -> str:
    return repr(float(x))


def _vec(a) -> list[str]:
    return [repr(v) for v in np.asarray(a, dtype=np.float64).ravel().tolist()]


def profile_to_document(profile: DeviceProfile) -> dict:
    m = profile.model
    lay = profile.layout
    ins = profile.instrument
    return {
        "format_version": profile.format_version,
        "class_label": profile.class_label,
        "created_at": profile.created_at,
        "layout": {
            "window_duration_ms": _num(lay.window_duration),
            "band_hz": [_num(lay.band[0]), _num(lay.band[1])],
            "time_splits": lay.time_splits,
            "frequency_splits": lay.frequency_splits,
        },
        "instrument": {
            "name": ins.name,
            "start_hz": _num(ins.start_frequency),
            "stop_hz": _num(ins.stop_frequency),
            "rbw_hz": _num(ins.resolution_bandwidth),
            "sweep_points": ins.sweep_points,
            "sweep_time_ms": None if ins.sweep_time is None else _num(ins.sweep_time),
        },
        "standardizer": {"mean": _vec(m.standardizer.mean), "std": _vec(m.standardizer.std)},
        "svm": {
            "gamma": _num(m.gamma),
            "nu": _num(m.nu),
            "rho": _num(m.rho),
            "alphas": _vec(m.alphas),
            "support_vectors": [_vec(row) for row in m.support_vectors],
        },
        "threshold": None if profile.threshold is None else _num(profile.threshold),
        "training_trace_ids": list(profile.training_trace_ids),
    }


def _arr(values) -> np.ndarray:
    return np.array([float(v) for v in values], dtype=np.float64)


def profile_from_document(doc: dict) -> DeviceProfile:
    lay = doc["layout"]
    ins = doc["instrument"]
    svm = doc["svm"]
    std = doc["standardizer"]
    sv = np.array([[float(v) for v in row] for row in svm["support_vectors"]], dtype=np.float64)
    alphas = _arr(svm["alphas"])
    if sv.ndim != 2 or sv.shape[0] != alphas.shape[0]:
        raise ValueError("support_vectors and alphas disagree in length")
    standardizer = Standardizer(_arr(std["mean"]), _arr(std["std"]))
    if standardizer.mean.shape != (sv.shape[1],) or standardizer.std.shape != (sv.shape[1],):
        raise ValueError("standardizer length does not match support vector dimension")
    model = OneClassModel(
        support_vectors=sv,
        alphas=alphas,
        rho=float(svm["rho"]),
        gamma=float(svm["gamma"]),
        nu=float(svm["nu"]),
        standardizer=standardizer,
        class_label=doc["class_label"],
    )
    layout = RegionLayout(
        float(lay["window_duration_ms"]),
        (float(lay["band_hz"][0]), float(lay["band_hz"][1])),
        int(lay["time_splits"]),
        int(lay["frequency_splits"]),
    )
    instrument = InstrumentFormat(
        ins["name"],
        float(ins["start_hz"]),
        float(ins["stop_hz"]),
        float(ins["rbw_hz"]),
        ins.get("sweep_points"),
        None if ins.get("sweep_time_ms") is None else float(ins["sweep_time_ms"]),
    )
    threshold = doc.get("threshold")
    return DeviceProfile(
        class_label=doc["class_label"],
        model=model,
        layout=layout,
        instrument=instrument,
        created_at=doc["created_at"],
        training_trace_ids=tuple(doc.get("training_trace_ids", ())),
        threshold=None if threshold is None else float(threshold),
        format_version=int(doc["format_version"]),
    )


def profile_path(registry_path, class_label: str) -> Path:
    stem = _SAFE.sub("_", class_label)
    return Path(registry_path) / f"{stem}.json"


def store_profile(registry_path, profile: DeviceProfile, replace: bool = False) -> str:
    """Write ``profile`` and return its file name within the registry."""
    root = Path(registry_path)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create registry {root}: {exc}") from exc
    path = profile_path(root, profile.class_label)
    if path.exists() and not replace:
        raise DuplicateLabel(f"profile {profile.class_label!r} already stored at {path}")
    tmp = path.with_suffix(".json.tmp")
    try:
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(profile_to_document(profile), fh, indent=1)
            fh.write("\n")
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path.name


def load_profile(path) -> DeviceProfile:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CorruptProfile(path, f"invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise CorruptProfile(path, "top level is not an object")
    version = doc.get("format_version")
    if not isinstance(version, int):
        raise CorruptProfile(path, "missing integer format_version")
    if version > FORMAT_VERSION:
        raise UnsupportedFormatVersion(path, version, FORMAT_VERSION)
    try:
        return profile_from_document(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptProfile(path, f"bad field: {exc!r}") from exc


def load_all(registry_path) -> list[DeviceProfile]:
    root = Path(registry_path)
    if not root.is_dir():
        raise IoFailure(f"registry {root} does not exist")
    profiles = [load_profile(p) for p in sorted(root.glob("*.json"))]
    return sorted(profiles, key=lambda p: p.class_label)


def list_profiles(registry_path) -> list[str]:
    return [p.class_label for p in load_all(registry_path)]
