"""Prototype-bucketed attention: linear in window length.

Instead of attending from every segment (quadratic), attention scores are
computed once per prototype against the window, and each segment reads
the output row of its assigned prototype. The output projection is
applied to the k bucket rows before the gather — algebraically the same
as projecting after, but cheaper, and it makes rows of segments sharing
a bucket literal memory copies of each other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import PrototypeSet, _assign_arr
from .errors import ConfigError, NumericalError, ShapeError


@dataclass(frozen=True)
class AssignmentMatrix:
    """One-hot segment-to-prototype map, stored as indices."""

    indices: np.ndarray  # (l,) int64
    k: int

    def __post_init__(self):
        if self.indices.ndim != 1:
            raise ShapeError("assignment indices must be 1-D")
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= self.k):
            raise ConfigError(f"assignment indices out of range [0, {self.k})")

    @property
    def l(self) -> int:
        return self.indices.shape[0]

    def one_hot(self) -> np.ndarray:
        a = np.zeros((self.l, self.k))
        a[np.arange(self.l), self.indices] = 1.0
        return a


@dataclass(frozen=True)
class ProtoAttnWeights:
    """Projections: query/key/value map inputs (width p_in) to d; the
    output projection is d to d. The forecaster embeds segments first,
    so there p_in == d."""

    w_e: np.ndarray  # (p_in, d), applied to prototypes
    w_k: np.ndarray  # (p_in, d)
    w_v: np.ndarray  # (p_in, d)
    w_o: np.ndarray  # (d, d)

    def __post_init__(self):
        p_in, d = self.w_e.shape
        if self.w_k.shape != (p_in, d) or self.w_v.shape != (p_in, d):
            raise ShapeError(
                f"w_k/w_v must match w_e shape ({p_in}, {d}), got "
                f"{self.w_k.shape} and {self.w_v.shape}"
            )
        if self.w_o.shape != (d, d):
            raise ShapeError(f"w_o must be ({d}, {d}), got {self.w_o.shape}")
        for name in ("w_e", "w_k", "w_v", "w_o"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise NumericalError(f"non-finite value in tensor '{name}'")

    @property
    def p_in(self) -> int:
        return self.w_e.shape[0]

    @property
    def d(self) -> int:
        return self.w_e.shape[1]

    @property
    def scale(self) -> float:
        return 1.0 / float(np.sqrt(self.d))


def build_assignment(segments: np.ndarray, protos: PrototypeSet) -> AssignmentMatrix:
    """Assign raw length-p segments to prototypes under the composite metric."""
    segments = np.asarray(segments, dtype=np.float64)
    if segments.ndim != 2 or segments.shape[1] != protos.p:
        raise ShapeError(f"segments must be (l, {protos.p}), got {segments.shape}")
    state = _assign_arr(segments, protos.prototypes, protos.alpha)
    return AssignmentMatrix(indices=state.assignment, k=protos.k)


def _softmax_rows(x: np.ndarray) -> np.ndarray:
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _check_inputs(segments, assignment, protos_emb, weights):
    p_in = weights.p_in
    if segments.ndim != 2 or segments.shape[1] != p_in:
        raise ShapeError(f"segments must be (l, {p_in}), got {segments.shape}")
    if protos_emb.shape != (assignment.k, p_in):
        raise ShapeError(
            f"embedded prototypes must be ({assignment.k}, {p_in}), got {protos_emb.shape}"
        )
    if assignment.l != segments.shape[0]:
        raise ShapeError(
            f"assignment covers {assignment.l} segments, input has {segments.shape[0]}"
        )


def proto_attention(
    segments: np.ndarray,
    assignment: AssignmentMatrix,
    protos_emb: np.ndarray,
    weights: ProtoAttnWeights,
) -> np.ndarray:
    """Attend once per prototype over the window, then gather per segment.

    segments and protos_emb are in input space (l, p_in) / (k, p_in).
    Cost is O(l * k * d + (l + k) * d^2); returns (l, d).
    """
    _check_inputs(segments, assignment, protos_emb, weights)
    queries = protos_emb @ weights.w_e
    keys = segments @ weights.w_k
    values = segments @ weights.w_v
    scores = queries @ keys.T * weights.scale
    bucket_out = (_softmax_rows(scores) @ values) @ weights.w_o  # (k, d)
    return bucket_out[assignment.indices]


def full_attention(
    segments: np.ndarray,
    assignment: AssignmentMatrix,
    protos_emb: np.ndarray,
    weights: ProtoAttnWeights,
) -> np.ndarray:
    """Quadratic reference: each segment queries with its prototype's row.

    Mathematically identical output to proto_attention, at O(l^2) cost.
    """
    _check_inputs(segments, assignment, protos_emb, weights)
    queries = (protos_emb @ weights.w_e)[assignment.indices]  # (l, d)
    keys = segments @ weights.w_k
    values = segments @ weights.w_v
    scores = queries @ keys.T * weights.scale
    return (_softmax_rows(scores) @ values) @ weights.w_o


@dataclass(frozen=True)
class FlopCount:
    """Multiply-add counts per pipeline stage; total is affine in l."""

    assignment: int
    projections: int
    attention: int
    scatter: int

    @property
    def total(self) -> int:
        return self.assignment + self.projections + self.attention + self.scatter


def count_flops(l: int, k: int, d: int, p: int) -> FlopCount:
    """Cost model for one prototype-attention pass over l segments.

    assignment: composite distances of l raw segments against k raw
    prototypes. projections: prototype embedding (k*d^2) plus key, value,
    and per-segment output projection (3*l*d^2; the kernel actually
    projects k bucket rows, which is cheaper, so this is an upper bound).
    attention: scores plus value aggregation. scatter: one-hot
    matrix-multiply model of routing bucket rows back to segments.
    """
    if min(l, k, d, p) < 0:
        raise ConfigError("flop counts need non-negative sizes")
    return FlopCount(
        assignment=2 * l * k * p + 2 * l * p,
        projections=(3 * l + k) * d * d,
        attention=2 * k * l * d,
        scatter=l * k * d,
    )


def count_flops_full(l: int, d: int) -> int:
    """Cost model for the quadratic reference: l^2-sized score and
    aggregation stages plus key/value/output projections per segment."""
    if min(l, d) < 0:
        raise ConfigError("flop counts need non-negative sizes")
    return 2 * l * l * d + 3 * l * d * d
