"""Per-category image/instance frequencies and LVIS frequency buckets."""

from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .annotations import Dataset
from .errors import EmptyDataset

__all__ = [
    "CategoryFrequency",
    "FrequencyTable",
    "FrequencyBucket",
    "compute_frequencies",
    "bucket_of",
    "RARE_MAX_IMAGES",
    "COMMON_MAX_IMAGES",
]

# LVIS convention: rare <= 10 < common <= 100 < frequent
RARE_MAX_IMAGES = 10
COMMON_MAX_IMAGES = 100


class FrequencyBucket(str, enum.Enum):
    RARE = "rare"
    COMMON = "common"
    FREQUENT = "frequent"
    EMPTY = "empty"


@dataclass(frozen=True)
class CategoryFrequency:
    """Counts and fractions for one category.

    ``f_image`` is the fraction of all images containing the category and
    ``f_instance`` the fraction of all instances that belong to it.
    """

    category_id: int
    image_count: int
    instance_count: int
    f_image: float
    f_instance: float
    name: str = ""


def bucket_of(freq: CategoryFrequency | int) -> FrequencyBucket:
    """LVIS bucket from a category's image count (an int is accepted too)."""
    n = freq if isinstance(freq, (int, np.integer)) else freq.image_count
    if n <= 0:
        return FrequencyBucket.EMPTY
    if n <= RARE_MAX_IMAGES:
        return FrequencyBucket.RARE
    if n <= COMMON_MAX_IMAGES:
        return FrequencyBucket.COMMON
    return FrequencyBucket.FREQUENT


@dataclass(frozen=True, eq=False)
class FrequencyTable:
    """Frequencies for every registered category, in dataset category order.

    Equality compares counts and totals only; ``source_digest`` is provenance.
    """

    category_ids: np.ndarray
    names: tuple[str, ...]
    image_counts: np.ndarray
    instance_counts: np.ndarray
    total_images: int
    total_instances: int
    source_digest: str = field(default="")

    @property
    def f_image(self) -> np.ndarray:
        return self.image_counts / self.total_images

    @property
    def f_instance(self) -> np.ndarray:
        return self.instance_counts / self.total_instances

    def __len__(self) -> int:
        return len(self.category_ids)

    def __iter__(self):
        for pos in range(len(self)):
            yield self._row(pos)

    def __getitem__(self, category_id: int) -> CategoryFrequency:
        return self._row(self._positions[int(category_id)])

    def __eq__(self, other):
        if not isinstance(other, FrequencyTable):
            return NotImplemented
        return (
            self.total_images == other.total_images
            and self.total_instances == other.total_instances
            and self.as_dict() == other.as_dict()
        )

    @cached_property
    def _positions(self) -> dict[int, int]:
        return {int(c): i for i, c in enumerate(self.category_ids)}

    def _row(self, pos: int) -> CategoryFrequency:
        ni = int(self.image_counts[pos])
        nb = int(self.instance_counts[pos])
        return CategoryFrequency(
            category_id=int(self.category_ids[pos]),
            image_count=ni,
            instance_count=nb,
            f_image=ni / self.total_images,
            f_instance=nb / self.total_instances,
            name=self.names[pos],
        )

    def buckets(self) -> list[FrequencyBucket]:
        return [bucket_of(int(n)) for n in self.image_counts]

    def as_dict(self) -> dict[int, tuple[int, int]]:
        return {
            int(c): (int(a), int(b))
            for c, a, b in zip(self.category_ids, self.image_counts, self.instance_counts)
        }

    # export ---------------------------------------------------------------
    _COLUMNS = ("category_id", "name", "image_count", "instance_count", "f_image", "f_instance", "bucket")

    def rows(self) -> list[dict]:
        return [
            {
                "category_id": r.category_id,
                "name": r.name,
                "image_count": r.image_count,
                "instance_count": r.instance_count,
                "f_image": r.f_image,
                "f_instance": r.f_instance,
                "bucket": bucket_of(r).value,
            }
            for r in self
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=self._COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.rows())
        return buf.getvalue()

    def to_json_dict(self) -> dict:
        return {
            "source_digest": self.source_digest,
            "total_images": self.total_images,
            "total_instances": self.total_instances,
            "categories": self.rows(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2) + "\n"


def compute_frequencies(ds: Dataset) -> FrequencyTable:
    """Count, for every category, the images containing it and its instances.

    Raises EmptyDataset when the dataset has no images or no instances.
    """
    if ds.image_count == 0 or ds.instance_count == 0:
        raise EmptyDataset(
            f"need at least one image and one instance "
            f"(got {ds.image_count} images, {ds.instance_count} instances)"
        )
    k = ds.category_count
    _, pair_cat = ds.incidence
    image_counts = np.bincount(pair_cat, minlength=k)
    instance_counts = np.bincount(ds.instance_category_index, minlength=k)
    for arr in (image_counts, instance_counts):
        arr.flags.writeable = False
    return FrequencyTable(
        category_ids=ds.category_ids,
        names=ds.category_names,
        image_counts=image_counts,
        instance_counts=instance_counts,
        total_images=ds.image_count,
        total_instances=ds.instance_count,
        source_digest=ds.source_digest,
    )
