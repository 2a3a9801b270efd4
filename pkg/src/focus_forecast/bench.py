"""Measurement harness for the efficiency and approximation claims.

Covers: analytic FLOP counts and interleaved wall-clock timing of the
linear kernel, the quadratic reference, and the whole model; a rank-r
probe of how well prototype rows reproduce segment-matrix products; and
an ablation of the correlation term in prototype fitting.
"""

from __future__ import annotations

import time
from contextlib import nullcontext
from dataclasses import dataclass

import numpy as np

try:
    from threadpoolctl import threadpool_limits
except ImportError:  # pragma: no cover - dependency is declared, belt and braces
    threadpool_limits = None

from .clustering import PrototypeSet, _assign_arr, fit, pearson_corr
from .data import SegmentMatrix, TimeSeriesDataset, segment
from .errors import ConfigError
from .model import HyperParams, init_params, predict
from .optim import OptimizerConfig
from .protoattn import (
    ProtoAttnWeights,
    build_assignment,
    count_flops,
    count_flops_full,
    full_attention,
    proto_attention,
)
from .training import train
from .util import seed_stream

WARMUP_REPS = 2
TIMED_REPS = 7
SWEEP_MODES = ("protoattn", "full_attn", "end_to_end")


def _single_thread():
    # pin BLAS to one thread so wall-clock scaling reflects arithmetic, not
    # parallel speedup kicking in at larger sizes
    if threadpool_limits is None:
        return nullcontext()
    return threadpool_limits(limits=1)


@dataclass(frozen=True)
class BenchRow:
    experiment: str
    size: int
    median_ns: int
    flops: int
    peak_bytes: int


@dataclass(frozen=True)
class BenchReport:
    """Timing/cost rows plus a log-log slope per experiment.

    Slopes are least-squares fits of log(median time) against log(size)
    over the three largest sizes, with the fit's squared residual.
    """

    rows: tuple[BenchRow, ...]
    slopes: dict[str, tuple[float, float]]

    def to_csv(self) -> str:
        lines = ["experiment,size,median_ns,flops,peak_bytes,slope"]
        by_exp: dict[str, list[BenchRow]] = {}
        for row in self.rows:
            by_exp.setdefault(row.experiment, []).append(row)
        for exp, rows in by_exp.items():
            for i, row in enumerate(rows):
                slope = f"{self.slopes[exp][0]:.6f}" if i == len(rows) - 1 else ""
                lines.append(
                    f"{row.experiment},{row.size},{row.median_ns},{row.flops},"
                    f"{row.peak_bytes},{slope}"
                )
        return "\n".join(lines) + "\n"


def _fit_slope(sizes, seconds) -> tuple[float, float]:
    tail = min(3, len(sizes))
    x = np.log(np.asarray(sizes[-tail:], dtype=np.float64))
    y = np.log(np.asarray(seconds[-tail:], dtype=np.float64))
    coeffs, res, *_ = np.polyfit(x, y, 1, full=True)
    return float(coeffs[0]), float(res[0]) if res.size else 0.0


def estimate_peak_bytes(l: int, k: int, d: int, p: int, mode: str = "proto") -> int:
    """Float64 bytes of the largest simultaneously live arrays.

    Both paths hold the raw segments (l*p), prototypes (k*p), and the
    assignment distance matrix (l*k). The linear path adds embedded
    window/key/value/output rows (4*l*d), score plus softmax rows (2*k*l),
    and prototype-side rows (3*k*d); the quadratic path instead holds
    per-segment queries (5*l*d total) and l-by-l score/softmax matrices
    (2*l*l).
    """
    if mode not in ("proto", "full"):
        raise ConfigError(f"mode must be 'proto' or 'full', got {mode!r}")
    shared = l * p + k * p + l * k
    if mode == "proto":
        return 8 * (shared + 4 * l * d + 2 * k * l + 3 * k * d)
    return 8 * (shared + 5 * l * d + 2 * l * l)


def count_forward_flops(h: HyperParams) -> int:
    """Multiply-add count for one full forecaster forward pass."""
    temporal = h.n_entities * (h.l * h.p * h.d + count_flops(h.l, h.k, h.d, h.p).total)
    entity = h.l * (
        h.n_entities * h.p * h.d + count_flops(h.n_entities, h.k, h.d, h.p).total
    )
    fusion = h.n_entities * (
        4 * h.m * h.l * h.d + h.m * (2 * h.d * h.d + h.d) + 2 * h.m * h.d
    )
    head = h.n_entities * (h.m * h.d * h.horizon + h.horizon)
    return temporal + entity + fusion + head


def estimate_model_peak_bytes(h: HyperParams) -> int:
    """Analytic peak for a batch-1 forward pass: both branch workloads
    plus per-entity fusion intermediates (readout rows and features)."""
    t_branch = h.n_entities * estimate_peak_bytes(h.l, h.k, h.d, h.p, "proto")
    e_branch = h.l * estimate_peak_bytes(h.n_entities, h.k, h.d, h.p, "proto")
    fusion = 8 * h.n_entities * (2 * h.m * h.l + 4 * h.m * h.d)
    return t_branch + e_branch + fusion


def scaling_sweep(
    mode: str,
    sizes: list[int] | tuple[int, ...],
    k: int = 16,
    d: int = 64,
    p: int = 16,
    m: int = 6,
    n_entities: int = 4,
    horizon: int = 16,
    seed: int = 0,
) -> BenchReport:
    """Time one attention path (or the whole model) at several window sizes.

    Sizes are visited round-robin within each repetition so slow drift
    hits all of them equally; per-size times are medians of 7 timed
    repetitions after 2 warmups, single-threaded. For end_to_end, size
    is the segment count l and the lookback is l*p.
    """
    if mode not in SWEEP_MODES:
        raise ConfigError(f"mode must be one of {SWEEP_MODES}, got {mode!r}")
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) < 3:
        raise ConfigError(f"need at least 3 sizes to fit a slope, got {len(sizes)}")
    if min(sizes) < 1 or list(sizes) != sorted(sizes):
        raise ConfigError("sizes must be positive and ascending")

    cases = []
    for l in sizes:
        rng = seed_stream(seed, f"bench-{mode}-l{l}")
        if mode == "end_to_end":
            hyper = HyperParams(
                p=p, d=d, m=m, k=k, lookback=l * p, horizon=horizon, n_entities=n_entities
            )
            protos = PrototypeSet(rng.standard_normal((k, p)), alpha=0.2)
            params = init_params(hyper, protos, seed=seed)
            x = rng.standard_normal((1, l * p, n_entities))
            cases.append((l, lambda params=params, x=x: predict(params, x)))
        else:
            raw = rng.standard_normal((l, p))
            protos = PrototypeSet(rng.standard_normal((k, p)), alpha=0.2)
            assignment = build_assignment(raw, protos)
            seg_emb = rng.standard_normal((l, d))
            protos_emb = rng.standard_normal((k, d))
            weights = ProtoAttnWeights(
                *(rng.standard_normal((d, d)) / np.sqrt(d) for _ in range(4))
            )
            kernel = proto_attention if mode == "protoattn" else full_attention
            cases.append(
                (
                    l,
                    lambda kernel=kernel, seg_emb=seg_emb, assignment=assignment, protos_emb=protos_emb, weights=weights: kernel(
                        seg_emb, assignment, protos_emb, weights
                    ),
                )
            )

    times: dict[int, list[float]] = {l: [] for l in sizes}
    with _single_thread():
        for rep in range(WARMUP_REPS + TIMED_REPS):
            for l, fn in cases:
                t0 = time.perf_counter()
                fn()
                t1 = time.perf_counter()
                if rep >= WARMUP_REPS:
                    times[l].append(t1 - t0)

    rows = []
    medians = []
    for l in sizes:
        med = float(np.median(times[l]))
        medians.append(med)
        if mode == "protoattn":
            flops = count_flops(l, k, d, p).total
            peak = estimate_peak_bytes(l, k, d, p, "proto")
        elif mode == "full_attn":
            flops = count_flops_full(l, d)
            peak = estimate_peak_bytes(l, k, d, p, "full")
        else:
            hyper = HyperParams(
                p=p, d=d, m=m, k=k, lookback=l * p, horizon=horizon, n_entities=n_entities
            )
            flops = count_forward_flops(hyper)
            peak = estimate_model_peak_bytes(hyper)
        rows.append(BenchRow(mode, l, int(med * 1e9), flops, peak))
    return BenchReport(rows=tuple(rows), slopes={mode: _fit_slope(sizes, medians)})


def lowrank_error(segments: np.ndarray, protos: PrototypeSet, w: np.ndarray) -> float:
    """Relative error of prototype rows standing in for the segment matrix.

    Compares A C w to P w, where A maps each of the l segments to its
    assigned prototype row.
    """
    segments = np.asarray(segments, dtype=np.float64)
    idx = _assign_arr(segments, protos.prototypes, protos.alpha).assignment
    approx = protos.prototypes[idx] @ w
    exact = segments @ w
    denom = float(np.linalg.norm(exact))
    err = float(np.linalg.norm(approx - exact))
    if denom < 1e-12:
        return 0.0 if err < 1e-12 else np.inf
    return err / denom


@dataclass(frozen=True)
class LowRankProbe:
    k_values: tuple[int, ...]
    median_errors: tuple[float, ...]
    r: int
    l: int
    p: int
    trials: int
    seed: int


def _segment_matrix(rows: np.ndarray) -> SegmentMatrix:
    n = rows.shape[0]
    prov = np.stack([np.zeros(n, dtype=np.int64), np.arange(n, dtype=np.int64)], axis=1)
    return SegmentMatrix(segments=rows, provenance=prov)


def lowrank_probe(
    k_values: tuple[int, ...] = (4, 8, 16, 32),
    r: int = 8,
    l: int = 512,
    p: int = 32,
    trials: int = 50,
    alpha: float = 0.2,
    seed: int = 0,
    max_iters: int = 150,
) -> LowRankProbe:
    """Median relative error of the prototype stand-in on rank-r segments.

    Each trial draws a random rank-r segment matrix (orthonormal column
    span times a random mixing matrix) and a random probe vector, fits
    prototypes at each k, and measures lowrank_error. Larger prototype
    budgets should not hurt: medians are expected non-increasing in k.
    """
    if r > min(l, p):
        raise ConfigError(f"rank r={r} exceeds min(l, p)={min(l, p)}")
    errors: dict[int, list[float]] = {k: [] for k in k_values}
    for trial in range(trials):
        rng = seed_stream(seed, f"probe-{trial}")
        basis = np.linalg.qr(rng.standard_normal((l, r)))[0]
        rows = basis @ rng.standard_normal((r, p))
        w = rng.standard_normal(p)
        segs = _segment_matrix(rows)
        for k in k_values:
            protos = fit(segs, k, alpha, max_iters=max_iters, seed=trial)
            errors[k].append(lowrank_error(rows, protos, w))
    return LowRankProbe(
        k_values=tuple(k_values),
        median_errors=tuple(float(np.median(errors[k])) for k in k_values),
        r=r,
        l=l,
        p=p,
        trials=trials,
        seed=seed,
    )


def prototype_template_correlation(protos: PrototypeSet, templates: np.ndarray) -> float:
    """Mean over templates of the best Pearson correlation any prototype attains."""
    scores = []
    for t in templates:
        scores.append(max(pearson_corr(c, t) for c in protos.prototypes))
    return float(np.mean(scores))


@dataclass(frozen=True, eq=False)
class AblationRow:
    alpha: float
    protos: PrototypeSet
    template_corr: float | None
    test_mse: float | None
    test_mae: float | None


def offline_ablation(
    dataset: TimeSeriesDataset,
    k: int,
    p: int,
    alphas: tuple[float, ...] = (0.2, 0.0),
    templates: np.ndarray | None = None,
    seed: int = 0,
    max_iters: int = 200,
    train_cfg: tuple[HyperParams, OptimizerConfig] | None = None,
) -> tuple[AblationRow, ...]:
    """Fit prototypes on the train split once per alpha; optionally train
    the forecaster on each prototype set and report its test metrics.

    With templates given (planted data), each row also scores how well
    the learned prototypes recover them. Everything except alpha is held
    identical across rows.
    """
    if dataset.split is None:
        raise ConfigError("dataset must be split before the ablation")
    train_vals = dataset.values[: dataset.split[0]]
    segs = segment(train_vals, p, "temporal")
    rows = []
    for alpha in alphas:
        protos = fit(segs, k, alpha, max_iters=max_iters, seed=seed)
        corr = (
            prototype_template_correlation(protos, templates)
            if templates is not None
            else None
        )
        test_mse = test_mae = None
        if train_cfg is not None:
            hyper, opt = train_cfg
            _, report = train(dataset, protos, hyper, opt)
            test_mse, test_mae = report.test_mse, report.test_mae
        rows.append(AblationRow(alpha, protos, corr, test_mse, test_mae))
    return tuple(rows)


def persistence_baseline(x: np.ndarray, horizon: int) -> np.ndarray:
    """Repeat each window's final value across the horizon, (B, horizon, N)."""
    if x.ndim != 3:
        raise ConfigError(f"expected (batch, lookback, entities), got shape {x.shape}")
    return np.repeat(x[:, -1:, :], horizon, axis=1)
