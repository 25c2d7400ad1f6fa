"""Category-level and image-level repeat factors.

A category with effective frequency ``f`` under threshold ``t`` is repeated
``max(1, sqrt(t / f))`` times; an image takes the largest factor among the
categories labeled in it. The methods differ only in how ``f`` is formed:

* ``rfs``            fraction of images containing the category
* ``irfs-<mean>``    a two-number mean of the image and instance fractions
* ``instance-only``  fraction of instances belonging to the category
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._version import __version__
from .annotations import Dataset
from .errors import EmptyDataset, ProvenanceMismatch
from .frequency import CategoryFrequency, FrequencyTable, bucket_of

__all__ = [
    "MeanKind",
    "Method",
    "SamplerConfig",
    "RepeatFactorTable",
    "ImageRepeatTable",
    "DEFAULT_THRESHOLD",
    "two_mean",
    "effective_frequency",
    "category_repeat_factor",
    "compute_repeat_factors",
    "image_repeat_factors",
]

DEFAULT_THRESHOLD = 1e-3


class MeanKind(str, enum.Enum):
    GEOMETRIC = "geometric"
    HARMONIC = "harmonic"
    ARITHMETIC = "arithmetic"
    QUADRATIC = "quadratic"


def two_mean(kind: MeanKind, x: float, y: float) -> float:
    """Mean of two positive numbers."""
    if kind is MeanKind.GEOMETRIC:
        return math.sqrt(x * y)
    if kind is MeanKind.HARMONIC:
        return 2.0 * x * y / (x + y)
    if kind is MeanKind.ARITHMETIC:
        return (x + y) / 2.0
    if kind is MeanKind.QUADRATIC:
        return math.sqrt((x * x + y * y) / 2.0)
    raise ValueError(f"unknown mean kind {kind!r}")


class Method(str, enum.Enum):
    RFS = "rfs"
    IRFS_GEOMETRIC = "irfs-geometric"
    IRFS_HARMONIC = "irfs-harmonic"
    IRFS_ARITHMETIC = "irfs-arithmetic"
    IRFS_QUADRATIC = "irfs-quadratic"
    INSTANCE_ONLY = "instance-only"

    @property
    def mean(self) -> MeanKind | None:
        if self.value.startswith("irfs-"):
            return MeanKind(self.value[len("irfs-"):])
        return None

    @classmethod
    def irfs(cls, mean: MeanKind | str = MeanKind.GEOMETRIC) -> "Method":
        return cls(f"irfs-{MeanKind(mean).value}")

    @classmethod
    def parse(cls, name: "str | Method") -> "Method":
        if isinstance(name, Method):
            return name
        try:
            return cls(name)
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown method {name!r}; expected one of: {valid}") from None


@dataclass(frozen=True)
class SamplerConfig:
    """Sampling method plus threshold; ``threshold=0`` disables oversampling."""

    method: Method = Method.IRFS_GEOMETRIC
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        object.__setattr__(self, "method", Method.parse(self.method))
        t = float(self.threshold)
        if not math.isfinite(t) or t < 0:
            raise ValueError(f"threshold must be a finite non-negative number, got {self.threshold!r}")
        object.__setattr__(self, "threshold", t)

    def to_dict(self) -> dict:
        return {"method": self.method.value, "threshold": self.threshold}

    def label(self) -> str:
        return f"{self.method.value}@{self.threshold:g}"


def effective_frequency(freq: CategoryFrequency, method: Method) -> float | None:
    """Frequency that drives the repeat factor; None for an unseen category."""
    method = Method.parse(method)
    fi, fb = freq.f_image, freq.f_instance
    if method is Method.RFS:
        return fi if fi > 0 else None
    if method is Method.INSTANCE_ONLY:
        return fb if fb > 0 else None
    if fi <= 0 or fb <= 0:
        return None
    return two_mean(method.mean, fi, fb)


def _factor(f_eff: float | None, t: float) -> float | None:
    if f_eff is None:
        return None
    if t == 0:
        return 1.0
    return max(1.0, math.sqrt(t / f_eff))


def category_repeat_factor(freq: CategoryFrequency, cfg: SamplerConfig) -> float | None:
    """``max(1, sqrt(t / f_eff))``, or None when the category has no data."""
    return _factor(effective_frequency(freq, cfg.method), cfg.threshold)


def _provenance(cfg: SamplerConfig, digest: str) -> dict:
    return {
        "tool": "irfs",
        "version": __version__,
        "source_digest": digest,
        **cfg.to_dict(),
    }


@dataclass(frozen=True, eq=False)
class RepeatFactorTable:
    """Per-category repeat factors (NaN in ``factors`` marks undefined)."""

    config: SamplerConfig
    frequencies: FrequencyTable
    effective: np.ndarray
    factors: np.ndarray

    @property
    def source_digest(self) -> str:
        return self.frequencies.source_digest

    @property
    def category_ids(self) -> np.ndarray:
        return self.frequencies.category_ids

    def __len__(self) -> int:
        return len(self.factors)

    def __getitem__(self, category_id: int) -> float | None:
        pos = self.frequencies._positions[int(category_id)]
        v = self.factors[pos]
        return None if np.isnan(v) else float(v)

    def as_dict(self) -> dict[int, float | None]:
        return {
            int(c): (None if np.isnan(v) else float(v))
            for c, v in zip(self.category_ids, self.factors)
        }

    def defined(self) -> np.ndarray:
        return ~np.isnan(self.factors)

    def rows(self) -> list[dict]:
        out = []
        for row, f_eff, r in zip(self.frequencies, self.effective, self.factors):
            out.append(
                {
                    "category_id": row.category_id,
                    "name": row.name,
                    "bucket": bucket_of(row).value,
                    "image_count": row.image_count,
                    "instance_count": row.instance_count,
                    "f_image": row.f_image,
                    "f_instance": row.f_instance,
                    "effective_frequency": None if np.isnan(f_eff) else float(f_eff),
                    "repeat_factor": None if np.isnan(r) else float(r),
                }
            )
        return out

    def to_json_dict(self) -> dict:
        return {**_provenance(self.config, self.source_digest), "categories": self.rows()}

    def to_csv(self) -> str:
        rows = self.rows()
        buf = io.StringIO()
        fields = list(rows[0]) if rows else ["category_id", "repeat_factor"]
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: ("" if v is None else v) for k, v in r.items()})
        return buf.getvalue()


def compute_repeat_factors(table: FrequencyTable, cfg: SamplerConfig) -> RepeatFactorTable:
    if len(table) == 0 or table.total_images == 0 or table.total_instances == 0:
        raise EmptyDataset("frequency table is empty")
    effective = np.full(len(table), np.nan)
    factors = np.full(len(table), np.nan)
    for pos, row in enumerate(table):
        f_eff = effective_frequency(row, cfg.method)
        if f_eff is not None:
            effective[pos] = f_eff
            factors[pos] = _factor(f_eff, cfg.threshold)
    effective.flags.writeable = False
    factors.flags.writeable = False
    return RepeatFactorTable(cfg, table, effective, factors)


@dataclass(frozen=True, eq=False)
class ImageRepeatTable:
    """Per-image repeat factors aligned with ``dataset.image_ids``."""

    config: SamplerConfig
    dataset: Dataset
    factors: np.ndarray

    @property
    def source_digest(self) -> str:
        return self.dataset.source_digest

    @property
    def image_ids(self) -> np.ndarray:
        return self.dataset.image_ids

    def __len__(self) -> int:
        return len(self.factors)

    def __getitem__(self, image_id: int) -> float:
        return float(self.factors[self.dataset.image_position(image_id)])

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.image_ids.tolist(), self.factors.tolist()))

    def to_json_dict(self) -> dict:
        return {
            **_provenance(self.config, self.source_digest),
            "images": [
                {"image_id": i, "repeat_factor": r}
                for i, r in zip(self.image_ids.tolist(), self.factors.tolist())
            ],
        }

    def to_csv(self) -> str:
        lines = ["image_id,repeat_factor"]
        lines += [f"{i},{r!r}" for i, r in zip(self.image_ids.tolist(), self.factors.tolist())]
        return "\n".join(lines) + "\n"


def _max_over_chunk(n_images, img, cat, rc):
    out = np.ones(n_images)
    np.maximum.at(out, img, rc[cat])
    return out


def image_repeat_factors(ds: Dataset, rft: RepeatFactorTable, n_jobs: int = 1) -> ImageRepeatTable:
    """Largest defined category factor per image; 1.0 for unlabeled images.

    ``n_jobs`` splits the image/category incidence across threads; the result
    does not depend on it.
    """
    if rft.source_digest != ds.source_digest:
        raise ProvenanceMismatch(ds.source_digest, rft.source_digest)
    # Undefined categories have no instances, so they never appear in the
    # incidence; mapping NaN to 1.0 is only a guard.
    rc = np.where(np.isnan(rft.factors), 1.0, rft.factors)
    img, cat = ds.incidence
    n_jobs = max(1, int(n_jobs))
    if n_jobs == 1 or len(img) < 2 * n_jobs:
        factors = _max_over_chunk(ds.image_count, img, cat, rc)
    else:
        bounds = np.linspace(0, len(img), n_jobs + 1).astype(np.int64)
        with ThreadPoolExecutor(n_jobs) as pool:
            parts = list(
                pool.map(
                    lambda b: _max_over_chunk(ds.image_count, img[b[0]:b[1]], cat[b[0]:b[1]], rc),
                    zip(bounds[:-1], bounds[1:]),
                )
            )
        factors = np.maximum.reduce(parts)
    factors.flags.writeable = False
    return ImageRepeatTable(rft.config, ds, factors)
