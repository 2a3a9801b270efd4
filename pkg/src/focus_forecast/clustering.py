"""Offline prototype discovery over time series segments.

Alternates hard bucket assignment under a composite metric (squared
Euclidean distance plus a weighted Pearson-correlation penalty) with AdamW
refinement of the prototypes against a reconstruction + correlation loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SegmentMatrix
from .errors import ConfigError, NumericalError
from .optim import AdamW, OptimizerConfig
from .util import seed_stream

CORR_NORM_FLOOR = 1e-12

# engineering defaults; weight decay stays 0 so prototypes are not pulled
# toward zero against the reconstruction term
CLUSTER_OPT_DEFAULTS = OptimizerConfig(lr=1e-2, weight_decay=0.0)
DEFAULT_MAX_ITERS = 500
DEFAULT_TOL = 1e-5
_TOL_WINDOW = 10


@dataclass(frozen=True)
class FitMeta:
    iterations: int
    final_loss: float
    seed: int


@dataclass(frozen=True)
class PrototypeSet:
    """k learned length-p prototypes plus their clustering hyperparameters."""

    prototypes: np.ndarray  # (k, p)
    alpha: float
    fit_meta: FitMeta | None = None

    def __post_init__(self):
        if self.prototypes.ndim != 2:
            raise ConfigError("prototypes must be a k x p matrix")
        if self.k < 1 or self.p < 2:
            raise ConfigError(f"need k >= 1 and p >= 2, got k={self.k}, p={self.p}")
        if self.alpha < 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if not np.all(np.isfinite(self.prototypes)):
            raise NumericalError("non-finite value in tensor 'prototypes'")
        self.prototypes.flags.writeable = False

    @property
    def k(self) -> int:
        return self.prototypes.shape[0]

    @property
    def p(self) -> int:
        return self.prototypes.shape[1]


@dataclass(frozen=True)
class BucketState:
    """Per-segment prototype index plus per-bucket member counts."""

    assignment: np.ndarray  # (n,) int64
    bucket_sizes: np.ndarray  # (k,) int64


def _center_unit(x: np.ndarray) -> np.ndarray:
    """Center rows and scale to unit norm; degenerate rows become zeros."""
    centered = x - x.mean(axis=-1, keepdims=True)
    norm = np.linalg.norm(centered, axis=-1, keepdims=True)
    safe = np.where(norm < CORR_NORM_FLOOR, 1.0, norm)
    out = centered / safe
    return np.where(norm < CORR_NORM_FLOOR, 0.0, out)


def pearson_corr(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson correlation, with the constant-vector convention corr = 0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ac = a - a.mean()
    bc = b - b.mean()
    na = np.linalg.norm(ac)
    nb = np.linalg.norm(bc)
    if na < CORR_NORM_FLOOR or nb < CORR_NORM_FLOOR:
        return 0.0
    return float(np.dot(ac, bc) / (na * nb))


def distance(seg: np.ndarray, proto: np.ndarray, alpha: float) -> float:
    """Composite metric: squared L2 plus alpha * (1 - Pearson correlation)."""
    diff = np.asarray(seg, dtype=np.float64) - np.asarray(proto, dtype=np.float64)
    return float(np.dot(diff, diff) + alpha * (1.0 - pearson_corr(seg, proto)))


def distance_matrix(segments: np.ndarray, protos: np.ndarray, alpha: float) -> np.ndarray:
    """Pairwise composite distances, (n, k)."""
    sq = (
        (segments * segments).sum(axis=1)[:, None]
        - 2.0 * segments @ protos.T
        + (protos * protos).sum(axis=1)[None, :]
    )
    np.maximum(sq, 0.0, out=sq)
    corr = _center_unit(segments) @ _center_unit(protos).T
    return sq + alpha * (1.0 - corr)


def _assign_arr(segments: np.ndarray, protos: np.ndarray, alpha: float) -> BucketState:
    d = distance_matrix(segments, protos, alpha)
    idx = np.argmin(d, axis=1)  # argmin takes the lowest index on ties
    sizes = np.bincount(idx, minlength=protos.shape[0]).astype(np.int64)
    return BucketState(assignment=idx.astype(np.int64), bucket_sizes=sizes)


def assign(segments: SegmentMatrix, protos: PrototypeSet) -> BucketState:
    """Map every segment to its nearest prototype under the composite metric."""
    if segments.p != protos.p:
        raise ConfigError(f"segment length {segments.p} != prototype length {protos.p}")
    return _assign_arr(segments.segments, protos.prototypes, protos.alpha)


def _bucket_stats(segments: np.ndarray, idx: np.ndarray, k: int):
    """Per-bucket counts, segment sums, and sums of centered-unit rows."""
    counts = np.bincount(idx, minlength=k).astype(np.float64)
    sums = np.zeros((k, segments.shape[1]))
    np.add.at(sums, idx, segments)
    unit = _center_unit(segments)
    unit_sums = np.zeros_like(sums)
    np.add.at(unit_sums, idx, unit)
    return counts, sums, unit, unit_sums


def _loss_arr(segments: np.ndarray, protos: np.ndarray, alpha: float, idx: np.ndarray):
    k = protos.shape[0]
    counts, sums, unit, unit_sums = _bucket_stats(segments, idx, k)
    nonempty = counts > 0
    means = np.where(nonempty[:, None], sums / np.maximum(counts, 1.0)[:, None], protos)
    diff = protos - means
    rec = float((diff[nonempty] ** 2).sum())
    proto_unit = _center_unit(protos)
    # sum of corr(seg, c_j) over members of bucket j, then average per bucket
    corr_sums = (unit_sums * proto_unit).sum(axis=1)
    corr = -float((corr_sums[nonempty] / counts[nonempty]).sum())
    return rec + alpha * corr, rec, corr


def clustering_loss(
    segments: SegmentMatrix, protos: PrototypeSet, buckets: BucketState
) -> tuple[float, float, float]:
    """(total, reconstruction, correlation) loss at fixed assignments.

    reconstruction sums each prototype's squared distance to its bucket
    mean; correlation is the negated per-bucket mean Pearson correlation.
    Empty buckets contribute zero to both terms.
    """
    return _loss_arr(
        segments.segments, protos.prototypes, protos.alpha, buckets.assignment
    )


def _loss_grad_arr(
    segments: np.ndarray, protos: np.ndarray, alpha: float, idx: np.ndarray
) -> np.ndarray:
    k, p = protos.shape
    counts, sums, unit, unit_sums = _bucket_stats(segments, idx, k)
    nonempty = counts > 0
    means = np.where(nonempty[:, None], sums / np.maximum(counts, 1.0)[:, None], protos)
    grad = 2.0 * (protos - means)
    grad[~nonempty] = 0.0

    centered = protos - protos.mean(axis=1, keepdims=True)
    cnorm = np.linalg.norm(centered, axis=1)
    proto_unit = _center_unit(protos)
    f_sums = (unit_sums * proto_unit).sum(axis=1)  # sum of corr over members
    ok = nonempty & (cnorm >= CORR_NORM_FLOOR)
    # d corr(s, c)/dc = (u_s - corr * v_c) / ||c - mean(c)||, already centered
    corr_grad = np.zeros_like(protos)
    corr_grad[ok] = (
        -(alpha / counts[ok, None])
        * (unit_sums[ok] - f_sums[ok, None] * proto_unit[ok])
        / cnorm[ok, None]
    )
    return grad + corr_grad


def clustering_loss_grad(
    segments: SegmentMatrix, protos: PrototypeSet, buckets: BucketState
) -> np.ndarray:
    """Analytic gradient of the total loss w.r.t. each prototype row."""
    return _loss_grad_arr(
        segments.segments, protos.prototypes, protos.alpha, buckets.assignment
    )


def _init_prototypes(
    segments: np.ndarray, k: int, alpha: float, rng: np.random.Generator
) -> np.ndarray:
    """Greedy farthest-point seeding under the composite metric.

    After a seeded first pick, each round takes the segment farthest from
    every prototype chosen so far (lowest index on ties), so well-separated
    clusters each receive a starting prototype.
    """
    n = segments.shape[0]
    chosen = [int(rng.integers(n))]
    d = distance_matrix(segments, segments[chosen], alpha)[:, 0]
    d[chosen[0]] = -np.inf
    for _ in range(1, k):
        nxt = int(np.argmax(d))
        chosen.append(nxt)
        d = np.minimum(d, distance_matrix(segments, segments[[nxt]], alpha)[:, 0])
        d[nxt] = -np.inf
    return segments[np.asarray(chosen)].astype(np.float64).copy()


def _repair_empty(
    segments: np.ndarray, protos: np.ndarray, alpha: float, state: BucketState
) -> tuple[np.ndarray, BucketState]:
    """Re-seed empty buckets to the segments farthest from their prototype."""
    empties = np.flatnonzero(state.bucket_sizes == 0)
    if empties.size == 0:
        return protos, state
    d = distance_matrix(segments, protos, alpha)
    own = d[np.arange(d.shape[0]), state.assignment]
    order = np.argsort(-own, kind="stable")
    protos = protos.copy()
    for j, seg_i in zip(empties, order):
        protos[j] = segments[seg_i]
    return protos, _assign_arr(segments, protos, alpha)


def fit(
    segments: SegmentMatrix,
    k: int,
    alpha: float,
    opt: OptimizerConfig | None = None,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
) -> PrototypeSet:
    """Learn k prototypes from segments by alternating assign/refine steps.

    Each outer iteration refreshes assignments (repairing empty buckets),
    then takes one AdamW step on the prototypes against the analytic loss
    gradient. Stops when the relative loss improvement over a 10-iteration
    window falls below tol, or at max_iters. Returns the best state seen,
    so the final loss never exceeds the initial one; deterministic given
    identical inputs and seed.
    """
    segs = np.asarray(segments.segments, dtype=np.float64)
    n, p = segs.shape
    if k < 1 or k > n:
        raise ConfigError(f"k must be in [1, {n}], got {k}")
    if alpha < 0:
        raise ConfigError(f"alpha must be >= 0, got {alpha}")
    opt = opt if opt is not None else CLUSTER_OPT_DEFAULTS
    rng = seed_stream(seed, "init")
    protos = _init_prototypes(segs, k, alpha, rng)

    if max_iters == 0:
        state = _assign_arr(segs, protos, alpha)
        total, _, _ = _loss_arr(segs, protos, alpha, state.assignment)
        return PrototypeSet(protos, alpha, FitMeta(0, total, seed))

    adam = AdamW(opt)
    losses: list[float] = []
    best_loss = np.inf
    best = protos.copy()
    iters = 0
    for it in range(max_iters):
        iters = it + 1
        state = _assign_arr(segs, protos, alpha)
        protos, state = _repair_empty(segs, protos, alpha, state)
        total, _, _ = _loss_arr(segs, protos, alpha, state.assignment)
        losses.append(total)
        if total < best_loss:
            best_loss = total
            best = protos.copy()
        if len(losses) > _TOL_WINDOW:
            prev = losses[-1 - _TOL_WINDOW]
            if (prev - total) < tol * max(abs(prev), 1e-12):
                break
        grad = _loss_grad_arr(segs, protos, alpha, state.assignment)
        adam.step({"prototypes": protos}, {"prototypes": grad})

    state = _assign_arr(segs, protos, alpha)
    total, _, _ = _loss_arr(segs, protos, alpha, state.assignment)
    if total < best_loss:
        best_loss = total
        best = protos.copy()
    return PrototypeSet(best, alpha, FitMeta(iters, best_loss, seed))
