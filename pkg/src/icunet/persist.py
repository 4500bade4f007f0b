"""On-disk formats: datasets, decompositions, checkpoints and CSV exports.

All binary payloads are little-endian float32, row-major.

Dataset directory
    ``manifest.json`` plus ``data.bin`` laid out ``[count][channels][window]``;
    pair datasets interleave ``noisy, clean`` per sample.
Decomposition directory
    ``decomp.json`` plus ``S.bin`` (c x t), ``A.bin`` (c x c), ``probs.bin`` (c x 7).
Checkpoint directory
    ``arch.json`` plus ``params.bin``: every tensor in canonical order, each
    preceded by four little-endian uint32 ``[ndim, d0, d1, d2]`` (unused dims 0).
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from .errors import HeterogeneousShapes, IoFailure, LoadError
from .mixture import Decomposition, ICClass
from .network import UNetConfig, param_shapes
from .signalgen import PairedDataset, SignalSet
from .training import HISTORY_FIELDS

DATASET_VERSION = 1
DECOMP_VERSION = 1
CHECKPOINT_VERSION = 1
F32 = np.dtype("<f4")
U32 = np.dtype("<u4")
MAX_DIM = 1 << 30


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _read_json(path: Path) -> dict:
    try:
        obj = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise LoadError(f"missing {path}") from exc
    except json.JSONDecodeError as exc:
        raise LoadError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise LoadError(f"{path} must hold a JSON object")
    return obj


def _count(value, name) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value < MAX_DIM:
        raise LoadError(f"{name} must be a non-negative integer below 2**30, got {value!r}")
    return value


# -- datasets ----------------------------------------------------------------------

def save_dataset(data, path, role: str | None = None) -> dict:
    """Write a :class:`SignalSet`, :class:`PairedDataset` or list of segments."""
    path = Path(path)
    if isinstance(data, (list, tuple)):
        data = _from_segments(data)
    if isinstance(data, PairedDataset):
        role = "pairs"
        payload = np.stack([data.noisy, data.clean], axis=1)
        n, c, t = data.noisy.shape
    elif isinstance(data, SignalSet):
        role = role or "clean"
        if role not in ("clean", "noisy"):
            raise ValueError(f"role must be 'clean' or 'noisy' for a SignalSet, got {role!r}")
        payload = data.data
        n, c, t = data.data.shape
    else:
        raise TypeError(f"cannot save {type(data).__name__} as a dataset")
    manifest = {
        "version": DATASET_VERSION,
        "fs_hz": float(data.fs),
        "channels": int(c),
        "window": int(t),
        "dtype": "f32le",
        "count": int(n),
        "role": role,
    }
    if role == "pairs":
        manifest["pair_layout"] = "interleaved"
        manifest["categories"] = list(data.categories)
    try:
        path.mkdir(parents=True, exist_ok=True)
        (path / "data.bin").write_bytes(np.ascontiguousarray(payload, dtype=F32).tobytes())
        _write_json(path / "manifest.json", manifest)
    except OSError as exc:
        raise IoFailure(f"cannot write dataset to {path}: {exc}") from exc
    return manifest


def _from_segments(segments) -> SignalSet:
    if not segments:
        raise HeterogeneousShapes("cannot save an empty segment list without a SignalSet")
    if len({s.data.shape for s in segments}) != 1:
        raise HeterogeneousShapes("segments must share one shape")
    return SignalSet.from_segments(segments)


def load_dataset(path):
    """Inverse of :func:`save_dataset`; validates the manifest against the file size."""
    path = Path(path)
    m = _read_json(path / "manifest.json")
    if m.get("version") != DATASET_VERSION:
        raise LoadError(f"unsupported dataset version {m.get('version')!r}")
    if m.get("dtype") != "f32le":
        raise LoadError(f"unsupported dtype {m.get('dtype')!r}")
    role = m.get("role")
    if role not in ("clean", "noisy", "pairs"):
        raise LoadError(f"unknown role {role!r}")
    n = _count(m.get("count"), "count")
    c = _count(m.get("channels"), "channels")
    t = _count(m.get("window"), "window")
    fs = m.get("fs_hz")
    if not isinstance(fs, (int, float)) or not fs > 0:
        raise LoadError(f"fs_hz must be positive, got {fs!r}")
    per = 2 if role == "pairs" else 1
    if role == "pairs" and m.get("pair_layout") != "interleaved":
        raise LoadError(f"unsupported pair layout {m.get('pair_layout')!r}")
    expected = n * per * c * t * F32.itemsize
    data_path = path / "data.bin"
    try:
        size = data_path.stat().st_size
    except FileNotFoundError as exc:
        raise LoadError(f"missing {data_path}") from exc
    if size != expected:
        raise LoadError(f"data.bin holds {size} bytes, manifest implies {expected}")
    raw = np.fromfile(data_path, dtype=F32).astype(np.float32)
    if role == "pairs":
        arr = raw.reshape(n, 2, c, t)
        cats = m.get("categories") or ()
        if cats and len(cats) != n:
            raise LoadError("categories length differs from count")
        return PairedDataset(arr[:, 0], arr[:, 1], float(fs), tuple(cats))
    return SignalSet(raw.reshape(n, c, t), float(fs))


def load_pairs(path) -> PairedDataset:
    """Load a dataset as pairs; clean-only datasets become self-reconstruction pairs."""
    data = load_dataset(path)
    if isinstance(data, PairedDataset):
        return data
    return PairedDataset.self_pairs(data)


# -- decompositions ---------------------------------------------------------------

CLASS_NAMES = [c.name for c in ICClass]


def save_decomposition(d: Decomposition, path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    _write_json(path / "decomp.json", {
        "version": DECOMP_VERSION,
        "fs_hz": float(d.fs),
        "channels": d.c,
        "length": d.t,
        "class_names": CLASS_NAMES,
    })
    for name, arr in (("S", d.S), ("A", d.A), ("probs", d.class_probs)):
        (path / f"{name}.bin").write_bytes(np.ascontiguousarray(arr, dtype=F32).tobytes())


def _read_matrix(path: Path, shape) -> np.ndarray:
    expected = int(np.prod(shape)) * F32.itemsize
    try:
        size = path.stat().st_size
    except FileNotFoundError as exc:
        raise LoadError(f"missing {path}") from exc
    if size != expected:
        raise LoadError(f"{path.name} holds {size} bytes, expected {expected}")
    return np.fromfile(path, dtype=F32).reshape(shape)


def load_decomposition(path) -> Decomposition:
    path = Path(path)
    m = _read_json(path / "decomp.json")
    if m.get("version") != DECOMP_VERSION:
        raise LoadError(f"unsupported decomposition version {m.get('version')!r}")
    if m.get("class_names") != CLASS_NAMES:
        raise LoadError(f"class_names must be {CLASS_NAMES}")
    c = _count(m.get("channels"), "channels")
    t = _count(m.get("length"), "length")
    fs = m.get("fs_hz")
    if not isinstance(fs, (int, float)) or not fs > 0:
        raise LoadError(f"fs_hz must be positive, got {fs!r}")
    S = _read_matrix(path / "S.bin", (c, t))
    A = _read_matrix(path / "A.bin", (c, c))
    probs = _read_matrix(path / "probs.bin", (c, len(CLASS_NAMES)))
    try:
        return Decomposition(S, A, probs, float(fs))
    except ValueError as exc:
        raise LoadError(f"invalid decomposition in {path}: {exc}") from exc


# -- checkpoints -------------------------------------------------------------------

def save_checkpoint(params: dict, config: UNetConfig, path) -> None:
    path = Path(path)
    shapes = param_shapes(config)
    if list(params) != list(shapes):
        raise ValueError("parameters do not follow the canonical order for this config")
    chunks = []
    for name, shape in shapes.items():
        arr = np.asarray(params[name])
        if arr.shape != shape:
            raise ValueError(f"{name}: shape {arr.shape} differs from config {shape}")
        header = np.zeros(4, dtype=U32)
        header[0] = arr.ndim
        header[1:1 + arr.ndim] = arr.shape
        chunks.append(header.tobytes())
        chunks.append(np.ascontiguousarray(arr, dtype=F32).tobytes())
    try:
        path.mkdir(parents=True, exist_ok=True)
        _write_json(path / "arch.json", {"format_version": CHECKPOINT_VERSION, **asdict(config)})
        (path / "params.bin").write_bytes(b"".join(chunks))
    except OSError as exc:
        raise IoFailure(f"cannot write checkpoint to {path}: {exc}") from exc


def load_checkpoint(path, expected: UNetConfig | None = None) -> tuple[dict, UNetConfig]:
    path = Path(path)
    arch = _read_json(path / "arch.json")
    if arch.pop("format_version", None) != CHECKPOINT_VERSION:
        raise LoadError("unsupported checkpoint format version")
    names = {f.name for f in fields(UNetConfig)}
    if set(arch) != names:
        raise LoadError(f"arch.json fields {sorted(arch)} differ from {sorted(names)}")
    try:
        config = UNetConfig(**arch)
    except (TypeError, ValueError) as exc:
        raise LoadError(f"invalid arch.json: {exc}") from exc
    if expected is not None and config != expected:
        raise LoadError(f"checkpoint architecture {config} differs from expected {expected}")
    try:
        blob = (path / "params.bin").read_bytes()
    except FileNotFoundError as exc:
        raise LoadError(f"missing {path / 'params.bin'}") from exc
    params = {}
    offset = 0
    for name, shape in param_shapes(config).items():
        if offset + 16 > len(blob):
            raise LoadError(f"params.bin truncated before {name}")
        header = np.frombuffer(blob, dtype=U32, count=4, offset=offset)
        offset += 16
        ndim = int(header[0])
        stored = tuple(int(v) for v in header[1:1 + ndim]) if ndim <= 3 else None
        if stored != shape or any(header[1 + ndim:]):
            raise LoadError(f"{name}: header {header.tolist()} does not match shape {shape}")
        count = int(np.prod(shape))
        if offset + 4 * count > len(blob):
            raise LoadError(f"params.bin truncated inside {name}")
        params[name] = np.frombuffer(blob, dtype=F32, count=count, offset=offset) \
            .astype(np.float32).reshape(shape)
        offset += 4 * count
    if offset != len(blob):
        raise LoadError(f"params.bin has {len(blob) - offset} trailing bytes")
    return params, config


# -- CSV exports -------------------------------------------------------------------

def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_history(path, report) -> None:
    write_csv(path, HISTORY_FIELDS, (r.row() for r in report.history))


def write_bins(path, freqs, errors) -> None:
    write_csv(path, ("freq_hz", "mean_abs_error"), zip(freqs, errors))

