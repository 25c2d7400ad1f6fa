"""Balance reports comparing sampling configurations on one dataset.

The report only arranges numbers produced by the frequency, repeat-factor and
sampler modules; it does no math of its own beyond sums and means.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from ._version import __version__
from .annotations import Dataset, dataset_summary
from .errors import EmptyDataset
from .frequency import FrequencyBucket, compute_frequencies
from .repeat_factor import SamplerConfig, compute_repeat_factors, image_repeat_factors
from .sampler import expected_exposure

__all__ = [
    "SCHEMA_VERSION",
    "BucketStats",
    "ConfigBlock",
    "BalanceReport",
    "DeltaTable",
    "build_report",
    "diff_methods",
    "format_report",
]

SCHEMA_VERSION = 1
_BUCKET_ORDER = (
    FrequencyBucket.RARE,
    FrequencyBucket.COMMON,
    FrequencyBucket.FREQUENT,
    FrequencyBucket.EMPTY,
)


def _num(x) -> float | None:
    x = float(x)
    return None if np.isnan(x) else x


@dataclass(frozen=True)
class BucketStats:
    bucket: FrequencyBucket
    category_count: int
    image_count: int
    instance_count: int
    mean_repeat_factor: float | None
    max_repeat_factor: float | None
    mean_exposure_before: float | None
    mean_exposure_after: float | None

    def to_dict(self) -> dict:
        return {
            "bucket": self.bucket.value,
            "category_count": self.category_count,
            "image_count": self.image_count,
            "instance_count": self.instance_count,
            "mean_repeat_factor": self.mean_repeat_factor,
            "max_repeat_factor": self.max_repeat_factor,
            "mean_exposure_before": self.mean_exposure_before,
            "mean_exposure_after": self.mean_exposure_after,
        }


@dataclass(frozen=True, eq=False)
class ConfigBlock:
    config: SamplerConfig
    repeat_factors: np.ndarray  # per category, NaN = undefined
    exposure: np.ndarray  # per category, expected images per epoch
    buckets: tuple[BucketStats, ...]
    expected_epoch_length: float

    def bucket(self, b: FrequencyBucket | str) -> BucketStats:
        b = FrequencyBucket(b)
        return next(s for s in self.buckets if s.bucket is b)


@dataclass(frozen=True, eq=False)
class BalanceReport:
    source_digest: str
    summary: dict
    category_ids: np.ndarray
    names: tuple[str, ...]
    category_buckets: tuple[FrequencyBucket, ...]
    image_counts: np.ndarray
    instance_counts: np.ndarray
    blocks: tuple[ConfigBlock, ...]

    @property
    def configs(self) -> list[SamplerConfig]:
        return [b.config for b in self.blocks]

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "tool": "irfs",
            "version": __version__,
            "source_digest": self.source_digest,
            "dataset": self.summary,
            "configs": [
                {
                    **blk.config.to_dict(),
                    "expected_epoch_length": blk.expected_epoch_length,
                    "buckets": [s.to_dict() for s in blk.buckets],
                }
                for blk in self.blocks
            ],
            "categories": [
                {
                    "category_id": int(cid),
                    "name": name,
                    "bucket": bucket.value,
                    "image_count": int(ni),
                    "instance_count": int(nb),
                    "repeat_factor": [_num(blk.repeat_factors[i]) for blk in self.blocks],
                    "exposure_after": [float(blk.exposure[i]) for blk in self.blocks],
                }
                for i, (cid, name, bucket, ni, nb) in enumerate(
                    zip(
                        self.category_ids,
                        self.names,
                        self.category_buckets,
                        self.image_counts,
                        self.instance_counts,
                    )
                )
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        """Long-format rows, one per (config, category); ready for plotting."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(
            [
                "config",
                "method",
                "threshold",
                "category_id",
                "name",
                "bucket",
                "image_count",
                "instance_count",
                "repeat_factor",
                "exposure_before",
                "exposure_after",
            ]
        )
        for blk in self.blocks:
            for i, cid in enumerate(self.category_ids.tolist()):
                r = _num(blk.repeat_factors[i])
                w.writerow(
                    [
                        blk.config.label(),
                        blk.config.method.value,
                        repr(blk.config.threshold),
                        cid,
                        self.names[i],
                        self.category_buckets[i].value,
                        int(self.image_counts[i]),
                        int(self.instance_counts[i]),
                        "" if r is None else repr(r),
                        int(self.image_counts[i]),
                        repr(float(blk.exposure[i])),
                    ]
                )
        return buf.getvalue()


def _bucket_stats(bucket, mask, image_counts, instance_counts, factors, exposure) -> BucketStats:
    n = int(mask.sum())
    defined = mask & ~np.isnan(factors)
    return BucketStats(
        bucket=bucket,
        category_count=n,
        image_count=int(image_counts[mask].sum()),
        instance_count=int(instance_counts[mask].sum()),
        mean_repeat_factor=float(factors[defined].mean()) if defined.any() else None,
        max_repeat_factor=float(factors[defined].max()) if defined.any() else None,
        mean_exposure_before=float(image_counts[mask].mean()) if n else None,
        mean_exposure_after=float(exposure[mask].mean()) if n else None,
    )


def build_report(ds: Dataset, configs) -> BalanceReport:
    configs = [c if isinstance(c, SamplerConfig) else SamplerConfig(*c) for c in configs]
    if not configs:
        raise ValueError("at least one sampler config is required")
    if ds.image_count == 0 or ds.instance_count == 0:
        raise EmptyDataset("cannot report on an empty dataset")
    ft = compute_frequencies(ds)
    buckets = tuple(ft.buckets())
    bucket_arr = np.array([b.value for b in buckets])
    blocks = []
    for cfg in configs:
        rft = compute_repeat_factors(ft, cfg)
        irt = image_repeat_factors(ds, rft)
        exposure = expected_exposure(irt, ft)
        stats = tuple(
            _bucket_stats(
                b,
                bucket_arr == b.value,
                ft.image_counts,
                ft.instance_counts,
                rft.factors,
                exposure,
            )
            for b in _BUCKET_ORDER
        )
        blocks.append(
            ConfigBlock(cfg, rft.factors, exposure, stats, float(irt.factors.sum()))
        )
    return BalanceReport(
        source_digest=ds.source_digest,
        summary=dataset_summary(ds).to_dict(),
        category_ids=ft.category_ids,
        names=ft.names,
        category_buckets=buckets,
        image_counts=ft.image_counts,
        instance_counts=ft.instance_counts,
        blocks=tuple(blocks),
    )


@dataclass(frozen=True, eq=False)
class DeltaTable:
    """Per-category differences ``a - b`` between two report configs."""

    a: SamplerConfig
    b: SamplerConfig
    category_ids: np.ndarray
    repeat_factor: np.ndarray  # NaN where either side is undefined
    exposure: np.ndarray

    def rows(self) -> list[dict]:
        return [
            {"category_id": int(c), "delta_repeat_factor": _num(r), "delta_exposure": float(e)}
            for c, r, e in zip(self.category_ids, self.repeat_factor, self.exposure)
        ]


def diff_methods(report: BalanceReport, a: int, b: int) -> DeltaTable:
    n = len(report.blocks)
    for idx in (a, b):
        if not 0 <= idx < n:
            raise IndexError(f"config index {idx} out of range for {n} configs")
    ba, bb = report.blocks[a], report.blocks[b]
    return DeltaTable(
        ba.config,
        bb.config,
        report.category_ids,
        ba.repeat_factors - bb.repeat_factors,
        ba.exposure - bb.exposure,
    )


def _fmt(x, spec=".4g") -> str:
    return "-" if x is None else format(x, spec)


def format_report(report: BalanceReport) -> str:
    """Plain-text rendering for terminals."""
    s = report.summary
    lines = [
        f"dataset {report.source_digest}",
        f"  images={s['image_count']} instances={s['instance_count']} "
        f"categories={s['category_count']}",
    ]
    header = (
        f"  {'bucket':<9}{'cats':>6}{'images':>10}{'instances':>11}"
        f"{'mean r_c':>10}{'max r_c':>10}{'exp before':>12}{'exp after':>12}"
    )
    for blk in report.blocks:
        lines.append("")
        lines.append(
            f"{blk.config.label()}  expected epoch length {blk.expected_epoch_length:.1f}"
        )
        lines.append(header)
        for st in blk.buckets:
            lines.append(
                f"  {st.bucket.value:<9}{st.category_count:>6}{st.image_count:>10}"
                f"{st.instance_count:>11}{_fmt(st.mean_repeat_factor):>10}"
                f"{_fmt(st.max_repeat_factor):>10}{_fmt(st.mean_exposure_before, '.2f'):>12}"
                f"{_fmt(st.mean_exposure_after, '.2f'):>12}"
            )
    return "\n".join(lines) + "\n"
