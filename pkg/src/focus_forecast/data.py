"""Dataset loading, normalization, windowing, and segmentation.

Values live in a T x N matrix (time steps x entities). Normalization uses
statistics from the training split only; windows never cross a split
boundary.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, ParseError
from .util import seed_stream

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class TimeSeriesDataset:
    """Immutable multivariate series with optional split/normalization state.

    split is (train_end, val_end): train rows are [0, train_end), validation
    rows [train_end, val_end), test rows [val_end, T). norm_stats holds the
    per-entity (mean, std) of the raw train split, with std floored at
    STD_FLOOR (degenerate entities normalize to zeros).
    """

    values: np.ndarray
    entity_names: list[str]
    frequency: str = "unknown"
    split: tuple[int, int] | None = None
    norm_stats: tuple[np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        self.values.flags.writeable = False

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def n_entities(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class WindowedInstance:
    """One (lookback, target) pair; origin is the first lookback row."""

    lookback: np.ndarray
    target: np.ndarray
    origin: int


@dataclass(frozen=True)
class SegmentMatrix:
    """n segments of length p, each a contiguous slice of the source series.

    provenance maps each row to its (entity index, window index).
    """

    segments: np.ndarray
    provenance: np.ndarray  # (n, 2) int array of (entity, window)

    @property
    def n(self) -> int:
        return self.segments.shape[0]

    @property
    def p(self) -> int:
        return self.segments.shape[1]


def load_csv(path: str) -> TimeSeriesDataset:
    """Parse a UTF-8 CSV with a header row of entity names.

    Every data cell must parse as a finite real; ragged or malformed rows
    raise ParseError naming the offending row (1-based file line) or cell.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file, expected a header row") from None
        names = [h.strip() for h in header]
        if not names or any(n == "" for n in names):
            raise ParseError(f"{path}: header row has empty entity names", row=1)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(names):
                raise ParseError(
                    f"{path}: row {lineno} has {len(row)} cells, expected {len(names)}",
                    row=lineno,
                )
            parsed = []
            for j, cell in enumerate(row):
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}: row {lineno}, column '{names[j]}': "
                        f"cannot parse {cell!r} as a real number",
                        row=lineno,
                        column=names[j],
                    ) from None
                if not math.isfinite(v):
                    raise ParseError(
                        f"{path}: row {lineno}, column '{names[j]}': non-finite value {cell!r}",
                        row=lineno,
                        column=names[j],
                    )
                parsed.append(v)
            rows.append(parsed)
    values = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(names))
    return TimeSeriesDataset(values=values, entity_names=names)


def _split_indices(t: int, ratio: tuple[float, float, float]) -> tuple[int, int]:
    r_train, r_val, r_test = ratio
    if min(r_train, r_val, r_test) <= 0:
        raise ConfigError(f"split fractions must be positive, got {ratio}")
    if abs(r_train + r_val + r_test - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must sum to 1, got {ratio}")
    train_end = int(math.floor(r_train * t))
    val_end = int(math.floor((r_train + r_val) * t))
    if not (0 < train_end < val_end < t):
        raise ConfigError(f"T={t} too small for nonempty partitions with ratio {ratio}")
    return train_end, val_end


def split_and_normalize(
    ds: TimeSeriesDataset, ratio: tuple[float, float, float]
) -> TimeSeriesDataset:
    """Set split boundaries by floor(ratio * T) and z-score with train stats."""
    train_end, val_end = _split_indices(ds.n_steps, ratio)
    train = ds.values[:train_end]
    mean = train.mean(axis=0)
    std = train.std(axis=0)
    std = np.where(std < STD_FLOOR, 1.0, std)
    normalized = (ds.values - mean) / std
    return replace(
        ds, values=normalized, split=(train_end, val_end), norm_stats=(mean, std)
    )


def normalize_with(
    ds: TimeSeriesDataset,
    mean: np.ndarray,
    std: np.ndarray,
    ratio: tuple[float, float, float],
) -> TimeSeriesDataset:
    """Normalize with externally supplied stats (e.g. from a model file).

    Used at evaluation time so data passes through exactly the transform
    the model was trained with, rather than freshly computed statistics.
    """
    mean = np.asarray(mean, dtype=np.float64)
    std = np.asarray(std, dtype=np.float64)
    if mean.shape != (ds.n_entities,) or std.shape != (ds.n_entities,):
        raise ConfigError(
            f"normalization stats must have shape ({ds.n_entities},), got "
            f"{mean.shape} and {std.shape}"
        )
    if np.any(std <= 0):
        raise ConfigError("normalization std entries must be positive")
    split = _split_indices(ds.n_steps, ratio)
    normalized = (ds.values - mean) / std
    return replace(ds, values=normalized, split=split, norm_stats=(mean, std))


def save_csv(path: str, ds: TimeSeriesDataset) -> None:
    """Write the dataset in the same CSV dialect load_csv reads.

    Cells are printed with 17 significant digits so a round trip is
    value-exact for float64.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ds.entity_names)
        for row in ds.values:
            writer.writerow([f"{v:.17g}" for v in row])


def denormalize(ds: TimeSeriesDataset, values: np.ndarray) -> np.ndarray:
    """Map normalized values back to the raw scale using train-split stats."""
    if ds.norm_stats is None:
        raise ConfigError("dataset has no normalization stats; call split_and_normalize")
    mean, std = ds.norm_stats
    return values * std + mean


def segment(x: np.ndarray, p: int, axis: str = "temporal") -> SegmentMatrix:
    """Slice an L x N window into length-p segments.

    temporal: non-overlapping windows per entity, oldest steps truncated so
    p divides the remaining length; rows are ordered entity-major. entity:
    x must be a single p-step window, yielding one segment per entity.
    """
    if p < 2:
        raise ConfigError(f"segment length must be >= 2, got {p}")
    length, n_entities = x.shape
    if axis == "temporal":
        if p > length:
            raise ConfigError(f"segment length {p} exceeds window length {length}")
        l = length // p
        off = length - l * p  # drop the oldest remainder
        trimmed = x[off:]
        segs = trimmed.reshape(l, p, n_entities).transpose(2, 0, 1).reshape(-1, p)
        prov = np.stack(
            [np.repeat(np.arange(n_entities), l), np.tile(np.arange(l), n_entities)],
            axis=1,
        )
        return SegmentMatrix(segments=np.ascontiguousarray(segs), provenance=prov)
    if axis == "entity":
        if length != p:
            raise ConfigError(
                f"entity-axis segmentation needs a single p-step window, got L={length}, p={p}"
            )
        prov = np.stack(
            [np.arange(n_entities), np.zeros(n_entities, dtype=np.int64)], axis=1
        )
        return SegmentMatrix(segments=np.ascontiguousarray(x.T), provenance=prov)
    raise ConfigError(f"unknown segmentation axis {axis!r}")


def make_windows(
    ds: TimeSeriesDataset, lookback: int, horizon: int, partition: str, stride: int = 1
) -> list[WindowedInstance]:
    """Enumerate strided (lookback, target) instances inside one partition.

    No instance crosses a split boundary: both the lookback and target lie
    entirely in the requested partition.
    """
    if ds.split is None:
        raise ConfigError("dataset has no split; call split_and_normalize first")
    train_end, val_end = ds.split
    bounds = {
        "train": (0, train_end),
        "val": (train_end, val_end),
        "test": (val_end, ds.n_steps),
    }
    if partition not in bounds:
        raise ConfigError(f"unknown partition {partition!r}")
    start, end = bounds[partition]
    span = lookback + horizon
    out = []
    for origin in range(start, end - span + 1, stride):
        out.append(
            WindowedInstance(
                lookback=ds.values[origin : origin + lookback],
                target=ds.values[origin + lookback : origin + span],
                origin=origin,
            )
        )
    return out


def smooth_templates(k: int, p: int) -> np.ndarray:
    """Fixed bank of k well-separated smooth length-p shapes."""
    t = np.arange(p, dtype=np.float64) / p
    out = np.empty((k, p))
    for i in range(k):
        freq = 1.0 + (i % 3)
        phase = 2.0 * np.pi * i / max(k, 1)
        trend = (-1.0) ** i * (0.5 + i / max(k, 1))
        out[i] = np.sin(2.0 * np.pi * freq * t + phase) + trend * (t - 0.5)
    return out


def mean_matched_templates(k: int, p: int, amplitude: float = 0.3) -> np.ndarray:
    """Zero-mean bank of +/- shape pairs: close in L2 yet anti-correlated.

    Built so distance-only clustering struggles to tell members of a pair
    apart while a correlation term separates them cleanly.
    """
    t = np.arange(p, dtype=np.float64) / p
    # consecutive pairs draw mutually near-orthogonal bases
    shapes = [
        np.sin(2.0 * np.pi * t),
        np.cos(2.0 * np.pi * 2.0 * t),
        np.sin(2.0 * np.pi * 3.0 * t),
        np.cos(2.0 * np.pi * 4.0 * t),
    ]
    out = np.empty((k, p))
    for i in range(k):
        base = shapes[(i // 2) % len(shapes)]
        base = base - base.mean()
        base = base / np.linalg.norm(base)
        out[i] = (-1.0) ** i * amplitude * (1.0 + 0.15 * (i // 2)) * base
    return out


@dataclass(frozen=True)
class SyntheticResult:
    """Planted dataset plus the ground-truth templates behind it."""

    dataset: TimeSeriesDataset
    templates: np.ndarray  # (k_true, p)
    template_ids: np.ndarray  # (n_entities, n_windows)
    p: int


def generate_synthetic(
    n_entities: int,
    n_steps: int,
    k_true: int,
    noise_sigma: float,
    seed: int,
    p: int = 16,
    bank: str = "smooth",
) -> SyntheticResult:
    """Build a planted dataset by concatenating seeded template draws.

    Each entity's series is a run of length-p templates chosen uniformly
    from a fixed bank of k_true smooth shapes, plus i.i.d. Gaussian noise.
    The templates are returned for oracle comparison.
    """
    if k_true < 1:
        raise ConfigError(f"k_true must be >= 1, got {k_true}")
    if noise_sigma < 0:
        raise ConfigError(f"noise_sigma must be >= 0, got {noise_sigma}")
    if n_entities < 1 or n_steps < p:
        raise ConfigError(f"need n_entities >= 1 and n_steps >= p, got {n_entities}, {n_steps}")
    if bank == "smooth":
        templates = smooth_templates(k_true, p)
    elif bank == "mean_matched":
        templates = mean_matched_templates(k_true, p)
    else:
        raise ConfigError(f"unknown template bank {bank!r}")
    rng = seed_stream(seed, "synth")
    n_windows = -(-n_steps // p)
    ids = rng.integers(0, k_true, size=(n_entities, n_windows))
    clean = templates[ids].reshape(n_entities, n_windows * p)[:, :n_steps]
    noise = rng.normal(0.0, noise_sigma, size=(n_entities, n_steps)) if noise_sigma > 0 else 0.0
    values = np.ascontiguousarray((clean + noise).T)
    ds = TimeSeriesDataset(
        values=values,
        entity_names=[f"e{i}" for i in range(n_entities)],
        frequency="synthetic",
    )
    return SyntheticResult(dataset=ds, templates=templates, template_ids=ids, p=p)
