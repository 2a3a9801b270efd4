"""Small shared helpers: seeded RNG streams and finiteness checks."""

import numpy as np

from .errors import NumericalError


def seed_stream(seed: int, label: str) -> np.random.Generator:
    """Derive an independent generator for one stochastic stage.

    A single run seed is stretched into per-stage streams keyed by a fixed
    label ("init", "shuffle", "synth", ...) so stages stay independent while
    the whole run remains reproducible from one integer.
    """
    entropy = int.from_bytes(label.encode("utf-8"), "little")
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, entropy]))


def require_finite(name: str, arr: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"non-finite value in tensor '{name}'")
    return arr
