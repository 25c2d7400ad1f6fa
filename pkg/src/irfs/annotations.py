"""Loading and indexing of COCO/LVIS-style annotation files.

Only the keys needed for counting are read: ``images[].id``,
``annotations[].{id,image_id,category_id}`` and ``categories[].{id,name}``.
Everything else (boxes, masks, licenses, ``neg_category_ids``...) is skipped.

The :class:`Dataset` keeps its records as parallel integer arrays so that an
LVIS-sized file (about a million instances) fits comfortably in memory; the
``images`` / ``instances`` / ``categories`` attributes expose them as read-only
mappings of small record objects.
"""

from __future__ import annotations

import hashlib
import json
import os
from array import array
from collections.abc import Iterator, Mapping
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import (
    DanglingReference,
    DuplicateId,
    MalformedJson,
    SchemaViolation,
)

__all__ = [
    "Category",
    "ImageRecord",
    "InstanceRecord",
    "Dataset",
    "DatasetSummary",
    "load_dataset",
    "dataset_summary",
    "STREAMING_THRESHOLD_BYTES",
]

# Files above this size are parsed incrementally instead of with json.load.
STREAMING_THRESHOLD_BYTES = 128 * 1024 * 1024

_REQUIRED_KEYS = ("images", "annotations", "categories")
_CHUNK = 1 << 20


@dataclass(frozen=True)
class Category:
    id: int
    name: str


@dataclass(frozen=True)
class ImageRecord:
    id: int
    category_ids: frozenset[int]


@dataclass(frozen=True)
class InstanceRecord:
    id: int
    image_id: int
    category_id: int


def _frozen(values, dtype=np.int64) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


def _first_duplicate(ids: np.ndarray):
    if len(ids) < 2:
        return None
    order = np.argsort(ids, kind="stable")
    s = ids[order]
    dup = np.flatnonzero(s[1:] == s[:-1])
    if len(dup) == 0:
        return None
    return int(s[dup[0]])


def _index_of(keys: np.ndarray, values: np.ndarray):
    """Positions of ``values`` inside ``keys`` (-1 where absent)."""
    if len(keys) == 0:
        return np.full(len(values), -1, dtype=np.int64)
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    pos = np.searchsorted(sorted_keys, values)
    pos = np.clip(pos, 0, len(keys) - 1)
    found = sorted_keys[pos] == values
    return np.where(found, order[pos], -1).astype(np.int64)


class Dataset:
    """Immutable, validated view of an annotation file.

    Construction checks id positivity and uniqueness and that every instance
    references an existing image and category. Use :func:`load_dataset` to
    read a file, or :meth:`from_coco` for an in-memory dict.
    """

    def __init__(
        self,
        image_ids,
        category_ids,
        category_names,
        instance_ids,
        instance_image_ids,
        instance_category_ids,
        *,
        source_digest: str | None = None,
        dropped_annotations: int = 0,
    ):
        self.image_ids = _frozen(image_ids)
        self.category_ids = _frozen(category_ids)
        self.category_names = tuple(category_names)
        self.instance_ids = _frozen(instance_ids)
        self.instance_image_ids = _frozen(instance_image_ids)
        self.instance_category_ids = _frozen(instance_category_ids)
        self.dropped_annotations = int(dropped_annotations)

        if len(self.category_names) != len(self.category_ids):
            raise SchemaViolation("category_ids and category_names differ in length")
        if not (
            len(self.instance_ids)
            == len(self.instance_image_ids)
            == len(self.instance_category_ids)
        ):
            raise SchemaViolation("instance arrays differ in length")
        for name in self.category_names:
            if not isinstance(name, str) or not name:
                raise SchemaViolation(f"category name must be a non-empty string, got {name!r}")
        for kind, ids in (
            ("image", self.image_ids),
            ("category", self.category_ids),
            ("annotation", self.instance_ids),
        ):
            if len(ids) and ids.min() <= 0:
                bad = int(ids[np.argmax(ids <= 0)])
                raise SchemaViolation(f"{kind} id must be a positive integer, got {bad}")
            dup = _first_duplicate(ids)
            if dup is not None:
                raise DuplicateId(kind, dup)

        img_idx = _index_of(self.image_ids, self.instance_image_ids)
        cat_idx = _index_of(self.category_ids, self.instance_category_ids)
        for field, idx, targets in (
            ("image_id", img_idx, self.instance_image_ids),
            ("category_id", cat_idx, self.instance_category_ids),
        ):
            missing = np.flatnonzero(idx < 0)
            if len(missing):
                k = missing[0]
                raise DanglingReference(int(self.instance_ids[k]), field, int(targets[k]))
        img_idx.flags.writeable = False
        cat_idx.flags.writeable = False
        self.instance_image_index = img_idx
        self.instance_category_index = cat_idx
        self.source_digest = source_digest or canonical_digest(self)

    @classmethod
    def from_coco(cls, obj: dict, strict: bool = True) -> "Dataset":
        """Build from an already-parsed COCO/LVIS dict."""
        builder = _Builder("<memory>")
        builder.consume_document(obj)
        return builder.build(strict=strict, source_digest=None)

    # sizes -----------------------------------------------------------------
    @property
    def image_count(self) -> int:
        return len(self.image_ids)

    @property
    def instance_count(self) -> int:
        return len(self.instance_ids)

    @property
    def category_count(self) -> int:
        return len(self.category_ids)

    # record views ----------------------------------------------------------
    @cached_property
    def images(self) -> Mapping[int, ImageRecord]:
        return _ImageView(self)

    @cached_property
    def instances(self) -> Mapping[int, InstanceRecord]:
        return _InstanceView(self)

    @cached_property
    def categories(self) -> Mapping[int, Category]:
        return {
            int(cid): Category(int(cid), name)
            for cid, name in zip(self.category_ids, self.category_names)
        }

    # derived indices ---------------------------------------------------------
    @cached_property
    def incidence(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique (image position, category position) pairs.

        One pair per image that holds at least one instance of the category,
        sorted by image position then category position.
        """
        k = max(self.category_count, 1)
        key = self.instance_image_index * k + self.instance_category_index
        key = np.unique(key)
        img, cat = np.divmod(key, k)
        img.flags.writeable = False
        cat.flags.writeable = False
        return img, cat

    @cached_property
    def _image_offsets(self) -> np.ndarray:
        img, _ = self.incidence
        return np.searchsorted(img, np.arange(self.image_count + 1))

    def image_category_ids(self, position: int) -> frozenset[int]:
        """Category ids present in the image at ``position`` (file order)."""
        lo, hi = self._image_offsets[position], self._image_offsets[position + 1]
        _, cat = self.incidence
        return frozenset(int(c) for c in self.category_ids[cat[lo:hi]])

    def image_position(self, image_id: int) -> int:
        pos = _index_of(self.image_ids, np.array([image_id], dtype=np.int64))[0]
        if pos < 0:
            raise KeyError(image_id)
        return int(pos)

    def to_coco(self) -> dict:
        return json.loads(to_coco_bytes(self))

    def __repr__(self) -> str:
        return (
            f"Dataset(images={self.image_count}, instances={self.instance_count}, "
            f"categories={self.category_count}, digest={self.source_digest[:19]}...)"
        )


class _ImageView(Mapping):
    def __init__(self, ds: Dataset):
        self._ds = ds
        self._pos = {int(i): p for p, i in enumerate(ds.image_ids)}

    def __getitem__(self, image_id):
        p = self._pos[image_id]
        return ImageRecord(image_id, self._ds.image_category_ids(p))

    def __iter__(self) -> Iterator[int]:
        return iter(self._pos)

    def __len__(self) -> int:
        return len(self._pos)


class _InstanceView(Mapping):
    def __init__(self, ds: Dataset):
        self._ds = ds
        self._pos = {int(i): p for p, i in enumerate(ds.instance_ids)}

    def __getitem__(self, ann_id):
        p = self._pos[ann_id]
        return InstanceRecord(
            ann_id,
            int(self._ds.instance_image_ids[p]),
            int(self._ds.instance_category_ids[p]),
        )

    def __iter__(self) -> Iterator[int]:
        return iter(self._pos)

    def __len__(self) -> int:
        return len(self._pos)


# serialization -------------------------------------------------------------


def to_coco_bytes(ds: Dataset) -> bytes:
    """Canonical minimal COCO JSON for ``ds`` (one record per line)."""
    parts = ['{"images": [\n']
    parts.append(",\n".join(f'{{"id": {int(i)}}}' for i in ds.image_ids))
    parts.append('\n],\n"annotations": [\n')
    parts.append(
        ",\n".join(
            f'{{"id": {a}, "image_id": {b}, "category_id": {c}}}'
            for a, b, c in zip(
                ds.instance_ids.tolist(),
                ds.instance_image_ids.tolist(),
                ds.instance_category_ids.tolist(),
            )
        )
    )
    parts.append('\n],\n"categories": [\n')
    parts.append(
        ",\n".join(
            f'{{"id": {int(c)}, "name": {json.dumps(n)}}}'
            for c, n in zip(ds.category_ids, ds.category_names)
        )
    )
    parts.append("\n]}\n")
    return "".join(parts).encode("utf-8")


def canonical_digest(ds: Dataset) -> str:
    return "sha256:" + hashlib.sha256(to_coco_bytes(ds)).hexdigest()


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        while chunk := f.read(_CHUNK):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


# parsing -------------------------------------------------------------------


class _Nested:
    """Marker for an object/array where a scalar was expected."""

    def __repr__(self):
        return "<object>"


_NESTED = _Nested()


def _is_int(v) -> bool:
    return type(v) is int


class _Builder:
    def __init__(self, path):
        self.path = path
        self.image_ids = array("q")
        self.ann_ids = array("q")
        self.ann_image_ids = array("q")
        self.ann_category_ids = array("q")
        self.category_ids = array("q")
        self.category_names: list[str] = []

    def _int_field(self, rec, key, kind, index):
        if not isinstance(rec, dict):
            raise SchemaViolation(f"{kind}[{index}] must be an object")
        if key not in rec:
            raise SchemaViolation(f"{kind}[{index}] is missing required key '{key}'")
        v = rec[key]
        if not _is_int(v):
            raise SchemaViolation(
                f"{kind}[{index}].{key} must be an integer, got {type(v).__name__}"
            )
        if v <= 0 or v >= 2**63:
            raise SchemaViolation(f"{kind}[{index}].{key} must be a positive integer, got {v}")
        return v

    def add_image(self, rec, index):
        self.image_ids.append(self._int_field(rec, "id", "images", index))

    def add_annotation(self, rec, index):
        self.ann_ids.append(self._int_field(rec, "id", "annotations", index))
        self.ann_image_ids.append(self._int_field(rec, "image_id", "annotations", index))
        self.ann_category_ids.append(self._int_field(rec, "category_id", "annotations", index))

    def add_category(self, rec, index):
        self.category_ids.append(self._int_field(rec, "id", "categories", index))
        if "name" not in rec:
            raise SchemaViolation(f"categories[{index}] is missing required key 'name'")
        name = rec["name"]
        if not isinstance(name, str) or not name:
            raise SchemaViolation(f"categories[{index}].name must be a non-empty string")
        self.category_names.append(name)

    def consume_document(self, obj):
        if not isinstance(obj, dict):
            raise SchemaViolation("top-level JSON value must be an object")
        for key in _REQUIRED_KEYS:
            if key not in obj:
                raise SchemaViolation(f"missing required top-level key '{key}'")
            if not isinstance(obj[key], list):
                raise SchemaViolation(f"top-level '{key}' must be an array")
        for i, rec in enumerate(obj["images"]):
            self.add_image(rec, i)
        for i, rec in enumerate(obj["annotations"]):
            self.add_annotation(rec, i)
        for i, rec in enumerate(obj["categories"]):
            self.add_category(rec, i)

    def build(self, strict: bool, source_digest: str | None) -> Dataset:
        ann_ids = np.frombuffer(self.ann_ids, dtype=np.int64)
        ann_img = np.frombuffer(self.ann_image_ids, dtype=np.int64)
        ann_cat = np.frombuffer(self.ann_category_ids, dtype=np.int64)
        image_ids = np.frombuffer(self.image_ids, dtype=np.int64)
        category_ids = np.frombuffer(self.category_ids, dtype=np.int64)
        dropped = 0
        # Duplicate ids are fatal in both modes, so check them before filtering.
        for kind, ids in (
            ("image", image_ids),
            ("category", category_ids),
            ("annotation", ann_ids),
        ):
            dup = _first_duplicate(ids)
            if dup is not None:
                raise DuplicateId(kind, dup)
        if not strict:
            ok = (_index_of(image_ids, ann_img) >= 0) & (
                _index_of(category_ids, ann_cat) >= 0
            )
            dropped = int(len(ok) - ok.sum())
            if dropped:
                ann_ids, ann_img, ann_cat = ann_ids[ok], ann_img[ok], ann_cat[ok]
        return Dataset(
            image_ids,
            category_ids,
            self.category_names,
            ann_ids,
            ann_img,
            ann_cat,
            source_digest=source_digest,
            dropped_annotations=dropped,
        )


class _CountingReader:
    """Binary file wrapper tracking how many bytes the parser has pulled."""

    def __init__(self, f):
        self._f = f
        self.consumed = 0

    def read(self, n=-1):
        data = self._f.read(n)
        self.consumed += len(data)
        return data


def _stream_into(builder: _Builder, path) -> None:
    import ijson

    field_keys = {
        "images": ("id",),
        "annotations": ("id", "image_id", "category_id"),
        "categories": ("id", "name"),
    }
    adders = {
        "images": builder.add_image,
        "annotations": builder.add_annotation,
        "categories": builder.add_category,
    }
    # prefix -> (section, field) for the scalar fields we keep
    fields = {
        f"{sec}.item.{k}": (sec, k) for sec, keys in field_keys.items() for k in keys
    }
    items = {f"{sec}.item": sec for sec in field_keys}
    counters = dict.fromkeys(field_keys, 0)
    seen: set[str] = set()
    scalar_events = {"number", "string", "boolean", "null"}
    cur: dict | None = None

    with open(path, "rb") as raw:
        reader = _CountingReader(raw)
        try:
            events = ijson.parse(reader, use_float=True)
            first = True
            for prefix, event, value in events:
                if first:
                    if event != "start_map":
                        raise SchemaViolation("top-level JSON value must be an object")
                    first = False
                    continue
                if prefix in fields:
                    if cur is None:
                        continue
                    sec, key = fields[prefix]
                    if event in scalar_events:
                        cur[key] = value
                    elif event in ("start_map", "start_array"):
                        cur[key] = _NESTED
                    continue
                sec = items.get(prefix)
                if sec is not None:
                    if event == "start_map":
                        cur = {}
                    elif event == "end_map":
                        adders[sec](cur, counters[sec])
                        counters[sec] += 1
                        cur = None
                    elif event != "map_key":
                        raise SchemaViolation(f"{sec}[{counters[sec]}] must be an object")
                    continue
                if prefix in field_keys:
                    if event == "start_array":
                        seen.add(prefix)
                    elif event != "end_array":
                        raise SchemaViolation(f"top-level '{prefix}' must be an array")
        except ijson.JSONError as exc:
            raise MalformedJson(path, str(exc).splitlines()[0], offset=reader.consumed) from None
        except UnicodeDecodeError as exc:
            raise MalformedJson(path, str(exc), offset=reader.consumed) from None
        if first:
            raise MalformedJson(path, "empty document", offset=0)
    for key in _REQUIRED_KEYS:
        if key not in seen:
            raise SchemaViolation(f"missing required top-level key '{key}'")


def load_dataset(path, strict: bool = True, streaming: bool | None = None) -> Dataset:
    """Parse and validate a COCO/LVIS annotation file.

    Args:
        path: JSON file with top-level ``images``, ``annotations`` and
            ``categories`` arrays.
        strict: if False, annotations whose ``image_id`` or ``category_id``
            does not resolve are dropped (and counted in
            ``Dataset.dropped_annotations``) instead of raising
            :class:`DanglingReference`.
        streaming: parse incrementally with ijson so memory tracks the number
            of records rather than the file size. ``None`` picks streaming for
            files larger than ``STREAMING_THRESHOLD_BYTES``.

    Raises:
        FileNotFoundError, MalformedJson, SchemaViolation, DanglingReference,
        DuplicateId.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"annotation file not found: {path}")
    if streaming is None:
        streaming = os.path.getsize(path) > STREAMING_THRESHOLD_BYTES
    builder = _Builder(path)
    if streaming:
        _stream_into(builder, path)
    else:
        try:
            with open(path, "rb") as f:
                obj = json.loads(f.read().decode("utf-8"))
        except json.JSONDecodeError as exc:
            raise MalformedJson(path, exc.msg, exc.lineno, exc.colno, exc.pos) from None
        except UnicodeDecodeError as exc:
            raise MalformedJson(path, str(exc), offset=exc.start) from None
        builder.consume_document(obj)
        del obj
    return builder.build(strict=strict, source_digest=file_digest(path))


@dataclass(frozen=True)
class DatasetSummary:
    image_count: int
    instance_count: int
    category_count: int
    instances_per_image: dict[int, int]
    dropped_annotations: int = 0

    def to_dict(self) -> dict:
        return {
            "image_count": self.image_count,
            "instance_count": self.instance_count,
            "category_count": self.category_count,
            "instances_per_image": {str(k): v for k, v in self.instances_per_image.items()},
            "dropped_annotations": self.dropped_annotations,
        }


def dataset_summary(ds: Dataset) -> DatasetSummary:
    """Sizes plus a histogram {instances in image: number of images}."""
    per_image = np.bincount(ds.instance_image_index, minlength=ds.image_count)
    values, counts = np.unique(per_image, return_counts=True)
    return DatasetSummary(
        image_count=ds.image_count,
        instance_count=ds.instance_count,
        category_count=ds.category_count,
        instances_per_image={int(v): int(c) for v, c in zip(values, counts)},
        dropped_annotations=ds.dropped_annotations,
    )
