"""Versioned binary tensor container backing prototype and model files.

Layout (all little-endian): magic "FOCS", u32 version (= 1), u32 entry
count, then per entry: u32 name length + UTF-8 name, u8 dtype code
(0 = float64, 1 = float32, 2 = int64), u32 rank, rank u64 dims, and the
row-major payload. Names are unique, payload sizes must match the dims,
and a file must be consumed exactly. Scalars travel as rank-0 entries.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .clustering import FitMeta, PrototypeSet
from .errors import ContainerError
from .model import HyperParams, ModelParams, _param_shapes, params_from_arrays

MAGIC = b"FOCS"
VERSION = 1

_CODE_TO_DTYPE = {0: np.dtype("<f8"), 1: np.dtype("<f4"), 2: np.dtype("<i8")}
_KIND_TO_CODE = {("f", 8): 0, ("f", 4): 1, ("i", 8): 2}


def _dtype_code(arr: np.ndarray, name: str) -> int:
    code = _KIND_TO_CODE.get((arr.dtype.kind, arr.dtype.itemsize))
    if code is None:
        raise ContainerError(
            f"tensor '{name}' has unsupported dtype {arr.dtype}; "
            "only float64, float32, and int64 are storable"
        )
    return code


def write_container(path: str | Path, tensors: dict[str, np.ndarray]) -> None:
    """Write tensors (sorted by name, so output bytes are deterministic)."""
    parts = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(tensors))]
    for name in sorted(tensors):
        # ascontiguousarray would promote rank-0 entries to rank 1
        arr = np.asarray(tensors[name])
        if not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr)
        code = _dtype_code(arr, name)
        raw = name.encode("utf-8")
        if not raw:
            raise ContainerError("tensor names must be non-empty")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<BI", code, arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.astype(_CODE_TO_DTYPE[code], copy=False).tobytes())
    Path(path).write_bytes(b"".join(parts))


class _Reader:
    def __init__(self, buf: bytes, path):
        self.buf = buf
        self.off = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.buf):
            raise ContainerError(f"{self.path}: truncated container")
        out = self.buf[self.off : self.off + n]
        self.off += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def read_container(path: str | Path) -> dict[str, np.ndarray]:
    """Read a container back into a name-to-array dict, bit-exactly."""
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as e:
        raise ContainerError(f"cannot read {path}: {e}") from e
    r = _Reader(buf, path)
    if r.take(4) != MAGIC:
        raise ContainerError(f"{path}: bad magic, not a container file")
    version = r.u32()
    if version != VERSION:
        raise ContainerError(f"{path}: unsupported container version {version}")
    count = r.u32()
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        name = r.take(r.u32()).decode("utf-8")
        if name in tensors:
            raise ContainerError(f"{path}: duplicate tensor name '{name}'")
        code = r.take(1)[0]
        if code not in _CODE_TO_DTYPE:
            raise ContainerError(f"{path}: unknown dtype code {code} for '{name}'")
        rank = r.u32()
        dims = struct.unpack(f"<{rank}Q", r.take(8 * rank))
        dtype = _CODE_TO_DTYPE[code]
        n_bytes = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize if rank else dtype.itemsize
        arr = np.frombuffer(r.take(n_bytes), dtype=dtype).reshape(dims).copy()
        tensors[name] = arr
    if r.off != len(buf):
        raise ContainerError(f"{path}: {len(buf) - r.off} trailing bytes")
    return tensors


def _scalar(value, dtype) -> np.ndarray:
    return np.asarray(value, dtype=dtype)


def _require(tensors: dict[str, np.ndarray], name: str, path) -> np.ndarray:
    if name not in tensors:
        raise ContainerError(f"{path}: missing tensor '{name}'")
    return tensors[name]


def _scalar_item(tensors: dict[str, np.ndarray], name: str, path):
    arr = _require(tensors, name, path)
    if arr.size != 1:
        raise ContainerError(f"{path}: '{name}' must be a scalar, got shape {arr.shape}")
    return arr.item()


def prototype_entries(protos: PrototypeSet, prefix: str = "") -> dict[str, np.ndarray]:
    seed = protos.fit_meta.seed if protos.fit_meta is not None else 0
    return {
        f"{prefix}prototypes": protos.prototypes,
        f"{prefix}alpha": _scalar(protos.alpha, np.float64),
        f"{prefix}p": _scalar(protos.p, np.int64),
        f"{prefix}k": _scalar(protos.k, np.int64),
        f"{prefix}seed": _scalar(seed, np.int64),
    }


def _protos_from_entries(tensors, path, prefix: str = "") -> PrototypeSet:
    rows = np.asarray(_require(tensors, f"{prefix}prototypes", path), dtype=np.float64)
    alpha = float(_scalar_item(tensors, f"{prefix}alpha", path))
    k = int(_scalar_item(tensors, f"{prefix}k", path))
    p = int(_scalar_item(tensors, f"{prefix}p", path))
    seed = int(_scalar_item(tensors, f"{prefix}seed", path))
    if rows.shape != (k, p):
        raise ContainerError(
            f"{path}: prototypes shaped {rows.shape}, but scalars say ({k}, {p})"
        )
    # iterations/loss are not stored; only the seed survives a reload
    return PrototypeSet(rows, alpha, FitMeta(0, float("nan"), seed))


def save_prototypes(path: str | Path, protos: PrototypeSet) -> None:
    write_container(path, prototype_entries(protos))


def load_prototypes(path: str | Path) -> PrototypeSet:
    return _protos_from_entries(read_container(path), path)


HYPER_FIELDS = ("p", "d", "m", "k", "lookback", "horizon", "n_entities")


def save_model(
    path: str | Path,
    params: ModelParams,
    norm_stats: tuple[np.ndarray, np.ndarray] | None = None,
    ratio: tuple[float, float, float] | None = None,
) -> None:
    """Write parameters, hyper scalars, and the embedded prototype set.

    Normalization stats and the split ratio ride along when given, so
    evaluation and forecasting can reproduce the training-time pipeline
    from the model file alone.
    """
    tensors = dict(params.arrays())
    for name in HYPER_FIELDS:
        tensors[f"hyper/{name}"] = _scalar(getattr(params.hyper, name), np.int64)
    tensors.update(prototype_entries(params.protos, prefix="protos/"))
    if norm_stats is not None:
        tensors["norm/mean"] = np.asarray(norm_stats[0], dtype=np.float64)
        tensors["norm/std"] = np.asarray(norm_stats[1], dtype=np.float64)
    if ratio is not None:
        tensors["norm/ratio"] = np.asarray(ratio, dtype=np.float64)
    write_container(path, tensors)


def load_model(path: str | Path):
    """Read a model file back.

    Returns (params, norm_stats, ratio); the last two are None when the
    file was saved without them.
    """
    tensors = read_container(path)
    hyper = HyperParams(
        **{name: int(_scalar_item(tensors, f"hyper/{name}", path)) for name in HYPER_FIELDS}
    )
    protos = _protos_from_entries(tensors, path, prefix="protos/")
    arrays = {}
    for name, _shape, _kind in _param_shapes(hyper):
        arrays[name] = np.asarray(_require(tensors, name, path), dtype=np.float64)
    try:
        params = params_from_arrays(hyper, protos, arrays)
    except Exception as e:
        raise ContainerError(f"{path}: {e}") from e
    norm_stats = None
    if "norm/mean" in tensors and "norm/std" in tensors:
        norm_stats = (tensors["norm/mean"], tensors["norm/std"])
    ratio = None
    if "norm/ratio" in tensors:
        r = tensors["norm/ratio"]
        if r.shape != (3,):
            raise ContainerError(f"{path}: norm/ratio must have 3 entries, got {r.shape}")
        ratio = (float(r[0]), float(r[1]), float(r[2]))
    return params, norm_stats, ratio
