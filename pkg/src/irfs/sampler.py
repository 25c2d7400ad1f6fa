"""Per-epoch sample lists with stochastic rounding of fractional factors.

An image with factor ``r`` appears ``floor(r)`` times plus one extra time with
probability ``r - floor(r)``. Every random decision is a pure function of
``(seed, epoch_index, image_id, ...)`` computed with a SplitMix64-style hash,
so output does not depend on iteration order, chunking, or thread count, and
it does not depend on the numpy RNG stream either.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._version import __version__
from .errors import EmptyDataset, ProvenanceMismatch
from .frequency import FrequencyTable
from .repeat_factor import ImageRepeatTable, SamplerConfig

__all__ = [
    "EpochSample",
    "sample_epoch",
    "expected_exposure",
    "counter_uniform",
]

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

# stream tags keep the extra-copy draw and the shuffle keys independent
_STREAM_EXTRA = 1
_STREAM_SHUFFLE = 2


def _mix(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= _M1
    z ^= z >> np.uint64(27)
    z *= _M2
    z ^= z >> np.uint64(31)
    return z


def _key(seed: int, epoch_index: int, stream: int) -> np.uint64:
    h = _mix(np.array([seed & _MASK64], dtype=np.uint64) + _GOLDEN)
    h = _mix((h ^ np.uint64(epoch_index & _MASK64)) + _GOLDEN)
    h = _mix((h ^ np.uint64(stream)) + _GOLDEN)
    return h[0]


def _hash64(key: np.uint64, counters: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return _mix((counters.astype(np.uint64) ^ key) + _GOLDEN)


def counter_uniform(seed: int, epoch_index: int, counters, stream: int = _STREAM_EXTRA) -> np.ndarray:
    """Uniform doubles in [0, 1), one per counter, keyed on (seed, epoch)."""
    bits = _hash64(_key(seed, epoch_index, stream), np.asarray(counters, dtype=np.int64))
    return (bits >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def _check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed <= _MASK64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


@dataclass(frozen=True, eq=False)
class EpochSample:
    epoch_index: int
    seed: int
    image_ids: np.ndarray
    config: SamplerConfig
    source_digest: str

    def __len__(self) -> int:
        return len(self.image_ids)

    def __eq__(self, other):
        if not isinstance(other, EpochSample):
            return NotImplemented
        return (
            self.epoch_index == other.epoch_index
            and self.seed == other.seed
            and self.config == other.config
            and self.source_digest == other.source_digest
            and np.array_equal(self.image_ids, other.image_ids)
        )

    @cached_property
    def per_image_counts(self) -> dict[int, int]:
        ids, counts = np.unique(self.image_ids, return_counts=True)
        return dict(zip(ids.tolist(), counts.tolist()))

    def header(self) -> dict:
        return {
            "tool": "irfs",
            "version": __version__,
            "source_digest": self.source_digest,
            **self.config.to_dict(),
            "seed": self.seed,
            "epoch_index": self.epoch_index,
            "length": len(self),
        }

    def to_text(self) -> str:
        """Newline-delimited image ids."""
        if len(self.image_ids) == 0:
            return ""
        return "\n".join(map(str, self.image_ids.tolist())) + "\n"

    def to_json(self) -> str:
        return json.dumps({**self.header(), "image_ids": self.image_ids.tolist()}) + "\n"


def _copies(factors, image_ids, seed, epoch_index):
    base = np.floor(factors)
    frac = factors - base
    u = counter_uniform(seed, epoch_index, image_ids, _STREAM_EXTRA)
    return base.astype(np.int64) + (u < frac)


def sample_epoch(
    irt: ImageRepeatTable, seed: int, epoch_index: int, n_jobs: int = 1
) -> EpochSample:
    """Materialize one epoch as a shuffled list of image ids with repeats.

    Each image appears ``floor(r_i)`` times, plus once more when its
    counter-based uniform draw falls below ``frac(r_i)``. The list order is a
    permutation obtained by sorting per-copy hash keys.
    """
    seed = _check_seed(seed)
    epoch_index = int(epoch_index)
    if epoch_index < 0:
        raise ValueError(f"epoch_index must be non-negative, got {epoch_index}")
    if len(irt) == 0:
        raise EmptyDataset("no images to sample")
    ids = irt.image_ids
    factors = np.asarray(irt.factors, dtype=np.float64)
    n_jobs = max(1, int(n_jobs))
    if n_jobs == 1:
        counts = _copies(factors, ids, seed, epoch_index)
    else:
        bounds = np.linspace(0, len(ids), n_jobs + 1).astype(np.int64)
        with ThreadPoolExecutor(n_jobs) as pool:
            parts = pool.map(
                lambda b: _copies(factors[b[0]:b[1]], ids[b[0]:b[1]], seed, epoch_index),
                zip(bounds[:-1], bounds[1:]),
            )
            counts = np.concatenate(list(parts))

    repeated = np.repeat(ids, counts)
    # copy index within each image, so every copy gets its own shuffle key
    starts = np.repeat(np.cumsum(counts) - counts, counts)
    copy_idx = np.arange(len(repeated)) - starts
    per_image = _hash64(_key(seed, epoch_index, _STREAM_SHUFFLE), repeated)
    with np.errstate(over="ignore"):
        keys = _mix((per_image ^ copy_idx.astype(np.uint64)) + _GOLDEN)
    order = np.lexsort((repeated, copy_idx, keys))
    out = repeated[order]
    out.flags.writeable = False
    return EpochSample(epoch_index, seed, out, irt.config, irt.source_digest)


def expected_exposure(irt: ImageRepeatTable, ft: FrequencyTable) -> np.ndarray:
    """Expected images seen per epoch for each category (table order).

    For category c this is the sum of ``r_i`` over the images containing c.
    """
    if irt.source_digest != ft.source_digest:
        raise ProvenanceMismatch(ft.source_digest, irt.source_digest)
    img, cat = irt.dataset.incidence
    out = np.bincount(cat, weights=irt.factors[img], minlength=len(ft))
    out.flags.writeable = False
    return out
