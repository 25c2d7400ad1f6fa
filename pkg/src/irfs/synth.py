"""Synthetic long-tailed detection datasets.

Image counts per category and instances per (image, category) occurrence are
controlled separately, which makes it easy to build categories that share an
image count but differ wildly in instance count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .annotations import Dataset, to_coco_bytes
from .errors import InfeasibleSpec

__all__ = [
    "Zipf",
    "ExplicitCounts",
    "Constant",
    "Geometric",
    "ExplicitInstances",
    "SynthSpec",
    "generate",
    "write_dataset",
]


@dataclass(frozen=True)
class Zipf:
    """Image counts with a Zipf rank-frequency profile.

    Each category draws ``floor(U ** -exponent)`` images (clipped to the
    number of images), so the sorted counts fall off like ``rank ** -exponent``
    and the smallest categories sit at one or a few images.
    """

    exponent: float


@dataclass(frozen=True)
class ExplicitCounts:
    counts: tuple[int, ...]


@dataclass(frozen=True)
class Constant:
    k: int


@dataclass(frozen=True)
class Geometric:
    """Instances per occurrence ~ Geometric(p) on {1, 2, ...}; mean 1/p."""

    p: float


@dataclass(frozen=True)
class ExplicitInstances:
    per_category: tuple[int, ...]


@dataclass(frozen=True)
class SynthSpec:
    num_categories: int
    num_images: int
    image_count_law: Zipf | ExplicitCounts
    instances_per_occurrence_law: Constant | Geometric | ExplicitInstances = field(
        default_factory=lambda: Constant(1)
    )
    seed: int = 0

    def validate(self) -> None:
        if self.num_categories < 1:
            raise InfeasibleSpec("num_categories must be >= 1")
        if self.num_images < 1:
            raise InfeasibleSpec("num_images must be >= 1")
        law = self.image_count_law
        if isinstance(law, Zipf):
            if not (math.isfinite(law.exponent) and law.exponent > 0):
                raise InfeasibleSpec(f"Zipf exponent must be > 0, got {law.exponent}")
        elif isinstance(law, ExplicitCounts):
            if len(law.counts) != self.num_categories:
                raise InfeasibleSpec(
                    f"{len(law.counts)} explicit image counts for {self.num_categories} categories"
                )
            for c in law.counts:
                if not 0 <= c <= self.num_images:
                    raise InfeasibleSpec(
                        f"explicit image count {c} outside [0, {self.num_images}]"
                    )
        else:
            raise InfeasibleSpec(f"unknown image count law {law!r}")
        inst = self.instances_per_occurrence_law
        if isinstance(inst, Constant):
            if inst.k < 1:
                raise InfeasibleSpec("Constant instances per occurrence must be >= 1")
        elif isinstance(inst, Geometric):
            if not 0 < inst.p <= 1:
                raise InfeasibleSpec(f"Geometric p must be in (0, 1], got {inst.p}")
        elif isinstance(inst, ExplicitInstances):
            if len(inst.per_category) != self.num_categories:
                raise InfeasibleSpec(
                    f"{len(inst.per_category)} explicit instance counts for "
                    f"{self.num_categories} categories"
                )
            if any(k < 1 for k in inst.per_category):
                raise InfeasibleSpec("explicit instances per occurrence must be >= 1")
        else:
            raise InfeasibleSpec(f"unknown instance law {inst!r}")


def _image_counts(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    law = spec.image_count_law
    if isinstance(law, ExplicitCounts):
        return np.asarray(law.counts, dtype=np.int64)
    u = 1.0 - rng.random(spec.num_categories)  # (0, 1]
    with np.errstate(over="ignore"):
        raw = np.floor(u ** -law.exponent)
    return np.clip(raw, 1, spec.num_images).astype(np.int64)


def _instances(spec: SynthSpec, cat: int, n: int, rng: np.random.Generator) -> np.ndarray:
    law = spec.instances_per_occurrence_law
    if isinstance(law, Constant):
        return np.full(n, law.k, dtype=np.int64)
    if isinstance(law, Geometric):
        return rng.geometric(law.p, n).astype(np.int64)
    return np.full(n, law.per_category[cat], dtype=np.int64)


def generate(spec: SynthSpec) -> Dataset:
    """Build a dataset following ``spec``; identical specs give identical data.

    Each category's images are drawn uniformly without replacement and
    independently of other categories, so categories co-occur in images.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    counts = _image_counts(spec, rng)
    img_parts, cat_parts = [], []
    for cat, n in enumerate(counts.tolist()):
        if n == 0:
            continue
        images = rng.choice(spec.num_images, size=n, replace=False)
        per = _instances(spec, cat, n, rng)
        img_parts.append(np.repeat(images, per))
        cat_parts.append(np.full(int(per.sum()), cat, dtype=np.int64))
    if img_parts:
        ann_img = np.concatenate(img_parts)
        ann_cat = np.concatenate(cat_parts)
        order = np.lexsort((ann_cat, ann_img))
        ann_img, ann_cat = ann_img[order], ann_cat[order]
    else:
        ann_img = ann_cat = np.empty(0, dtype=np.int64)
    width = max(4, len(str(spec.num_categories)))
    return Dataset(
        image_ids=np.arange(1, spec.num_images + 1),
        category_ids=np.arange(1, spec.num_categories + 1),
        category_names=[f"category_{c:0{width}d}" for c in range(1, spec.num_categories + 1)],
        instance_ids=np.arange(1, len(ann_img) + 1),
        instance_image_ids=ann_img + 1,
        instance_category_ids=ann_cat + 1,
    )


def write_dataset(ds: Dataset, path) -> Path:
    """Write ``ds`` as COCO-style JSON readable by ``load_dataset``."""
    path = Path(path)
    path.write_bytes(to_coco_bytes(ds))
    return path
