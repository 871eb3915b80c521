"""File formats: snapshot binaries, parameter CSVs, checkpoints and plot data.

All writers go through a temporary file in the destination directory followed
by ``os.replace``, so readers never observe partially written files.
"""

from __future__ import annotations

import csv
import io
import json
import os
import struct
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from ..nn.tape import DimensionError
from ..pod import PODBasis, ScalingRecord, SnapshotMatrix

SNAPSHOT_MAGIC = b"ROMSNAP1"
CHECKPOINT_VERSION = 1


class FormatError(ValueError):
    pass


class VersionError(FormatError):
    pass


@contextmanager
def atomic_path(path: str | os.PathLike, mode: str = "wb") -> Iterator[io.IOBase]:
    """Open a temporary sibling of ``path`` and move it into place on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        kwargs = {} if "b" in mode else {"encoding": "utf-8", "newline": ""}
        with os.fdopen(fd, mode, **kwargs) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --------------------------------------------------------------- snapshots


def write_snapshots(path, S: SnapshotMatrix) -> None:
    header = SNAPSHOT_MAGIC + struct.pack("<4I", S.n_dofs, S.n_channels, S.n_instances, S.n_timesteps)
    with atomic_path(path) as fh:
        fh.write(header)
        fh.write(np.asfortranarray(S.data).astype("<f8").tobytes(order="F"))


def read_snapshots(path) -> SnapshotMatrix:
    raw = Path(path).read_bytes()
    if raw[:8] != SNAPSHOT_MAGIC:
        raise FormatError(f"{path}: missing ROMSNAP1 magic")
    if len(raw) < 24:
        raise FormatError(f"{path}: truncated header")
    n_h, n_ch, n_inst, n_t = struct.unpack("<4I", raw[8:24])
    rows, cols = n_h * n_ch, n_inst * n_t
    body = raw[24:]
    if len(body) != 8 * rows * cols:
        raise FormatError(f"{path}: expected {8 * rows * cols} data bytes, found {len(body)}")
    data = np.frombuffer(body, dtype="<f8").reshape((rows, cols), order="F").astype(np.float64)
    return SnapshotMatrix(data, n_h, n_ch, n_inst, n_t)


def write_params(path, M: np.ndarray) -> None:
    M = np.asarray(M, dtype=np.float64)
    header = ["t"] + [f"mu{j}" for j in range(1, M.shape[0])]
    with atomic_path(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for col in M.T:
            w.writerow([repr(float(v)) for v in col])


def read_params(path) -> np.ndarray:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty parameter file")
    header = rows[0]
    expected = ["t"] + [f"mu{j}" for j in range(1, len(header))]
    if header != expected:
        raise FormatError(f"{path}: header {header} is not {expected}")
    body = [[float(v) for v in r] for r in rows[1:] if r]
    if any(len(r) != len(header) for r in body):
        raise FormatError(f"{path}: ragged rows")
    return np.array(body, dtype=np.float64).reshape(-1, len(header)).T.copy()


# -------------------------------------------------------------- checkpoints


def _pack_record(name: str, arr: np.ndarray) -> bytes:
    arr = np.asarray(arr, dtype=np.float64)
    enc = name.encode("utf-8")
    parts = [struct.pack("<I", len(enc)), enc, struct.pack("<I", arr.ndim)]
    parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
    parts.append(np.ascontiguousarray(arr).astype("<f8").tobytes())
    return b"".join(parts)


def write_weights(path, arrays: Mapping[str, np.ndarray]) -> None:
    with atomic_path(path) as fh:
        for name, arr in arrays.items():
            fh.write(_pack_record(name, arr))


def read_weights(path) -> dict[str, np.ndarray]:
    raw = Path(path).read_bytes()
    out: dict[str, np.ndarray] = {}
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(raw):
            raise FormatError(f"{path}: truncated record at byte {pos}")
        chunk = raw[pos : pos + n]
        pos += n
        return chunk

    while pos < len(raw):
        (nlen,) = struct.unpack("<I", take(4))
        name = take(nlen).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        dims = struct.unpack(f"<{rank}I", take(4 * rank)) if rank else ()
        count = int(np.prod(dims)) if rank else 1
        data = np.frombuffer(take(8 * count), dtype="<f8").astype(np.float64)
        if name in out:
            raise FormatError(f"{path}: duplicate record {name}")
        out[name] = data.reshape(dims)
    return out


@dataclass
class Checkpoint:
    kind: str
    dims: dict
    hyperparameters: dict
    seeds: dict
    history: dict
    weights: dict[str, np.ndarray]
    basis: PODBasis
    scaling: ScalingRecord
    extras: dict[str, np.ndarray] = field(default_factory=dict)


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    arrays = {f"model/{k}": v for k, v in ckpt.weights.items()}
    arrays["basis/V"] = ckpt.basis.V
    arrays["basis/singular_values"] = ckpt.basis.singular_values
    arrays["scaling/minimum"] = ckpt.scaling.minimum
    arrays["scaling/maximum"] = ckpt.scaling.maximum
    for k, v in ckpt.extras.items():
        arrays[f"extra/{k}"] = v
    manifest = {
        "format_version": CHECKPOINT_VERSION,
        "kind": ckpt.kind,
        "dims": ckpt.dims,
        "hyperparameters": ckpt.hyperparameters,
        "seeds": ckpt.seeds,
        "history": ckpt.history,
        "basis": {"n_modes": ckpt.basis.n_modes, "n_channels": ckpt.basis.n_channels},
        "scaling": {"enabled": ckpt.scaling.enabled},
    }
    write_weights(path / "weights.bin", arrays)
    with atomic_path(path / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    try:
        manifest = json.loads((path / "manifest.json").read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise FormatError(f"{path}: no manifest.json") from exc
    version = manifest.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise VersionError(f"{path}: checkpoint format {version!r}, this build reads {CHECKPOINT_VERSION}")
    arrays = read_weights(path / "weights.bin")
    weights = {k[len("model/"):]: v for k, v in arrays.items() if k.startswith("model/")}
    extras = {k[len("extra/"):]: v for k, v in arrays.items() if k.startswith("extra/")}
    b = manifest["basis"]
    basis = PODBasis(arrays["basis/V"], arrays["basis/singular_values"], b["n_modes"], b["n_channels"])
    scaling = ScalingRecord(arrays["scaling/minimum"], arrays["scaling/maximum"], manifest["scaling"]["enabled"])
    return Checkpoint(manifest.get("kind", ""), manifest["dims"], manifest["hyperparameters"], manifest["seeds"],
                      manifest["history"], weights, basis, scaling, extras)


# ---------------------------------------------------------------- plot data


def write_series_csv(path, t: np.ndarray, series: Mapping[str, np.ndarray]) -> None:
    """CSV with a ``t`` column followed by one column per named series."""
    t = np.asarray(t, dtype=np.float64)
    cols = {k: np.asarray(v, dtype=np.float64) for k, v in series.items()}
    for k, v in cols.items():
        if v.shape != t.shape:
            raise DimensionError(f"series {k!r} has length {v.shape}, time axis {t.shape}")
    with atomic_path(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *cols])
        for j in range(t.size):
            w.writerow([repr(float(t[j]))] + [repr(float(v[j])) for v in cols.values()])


def read_series_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=np.float64)
    return header, data.reshape(-1, len(header))


def write_json(path, obj) -> None:
    with atomic_path(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_json_default)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


__all__ = [
    "Checkpoint",
    "FormatError",
    "VersionError",
    "atomic_path",
    "load_checkpoint",
    "read_params",
    "read_series_csv",
    "read_snapshots",
    "read_weights",
    "save_checkpoint",
    "write_json",
    "write_params",
    "write_series_csv",
    "write_snapshots",
    "write_weights",
]
