import csv
import io
import json
import math

import numpy as np
import pytest

from irfs import (
    Dataset,
    EmptyDataset,
    FrequencyBucket,
    Method,
    SamplerConfig,
    build_report,
    compute_frequencies,
    compute_repeat_factors,
    diff_methods,
    expected_exposure,
    image_repeat_factors,
)
from irfs.report import format_report
from irfs.synth import ExplicitCounts, ExplicitInstances, Geometric, SynthSpec, Zipf, generate

RFS = SamplerConfig(Method.RFS, 1e-3)
IRFS = SamplerConfig(Method.IRFS_GEOMETRIC, 1e-3)


@pytest.fixture(scope="module")
def zipf_ds():
    return generate(SynthSpec(200, 3000, Zipf(1.1), Geometric(0.6), seed=2))


def test_rare_bucket_irfs_vs_rfs(zipf_ds):
    rep = build_report(zipf_ds, [RFS, IRFS])
    ft = compute_frequencies(zipf_ds)
    rare = np.array([b is FrequencyBucket.RARE for b in ft.buckets()])
    scarce = ft.f_instance <= ft.f_image
    r_rfs, r_irfs = rep.blocks[0].repeat_factors, rep.blocks[1].repeat_factors
    # per-category: IRFS >= RFS wherever instances are no more frequent than images
    assert np.all(r_irfs[rare & scarce] >= r_rfs[rare & scarce])
    if np.all(scarce[rare]):
        assert rep.blocks[1].bucket("rare").mean_repeat_factor >= rep.blocks[0].bucket("rare").mean_repeat_factor


def test_zero_threshold_no_change(zipf_ds):
    rep = build_report(zipf_ds, [SamplerConfig(Method.IRFS_HARMONIC, 0.0)])
    blk = rep.blocks[0]
    defined = ~np.isnan(blk.repeat_factors)
    assert np.all(blk.repeat_factors[defined] == 1.0)
    np.testing.assert_array_equal(blk.exposure, rep.image_counts)
    for st in blk.buckets:
        assert st.mean_exposure_before == st.mean_exposure_after


def test_fig1b_fixture_rows():
    ds = generate(SynthSpec(2, 20, ExplicitCounts((5, 5)), ExplicitInstances((1, 10))))
    rep = build_report(ds, [SamplerConfig(Method.RFS, 0.5), SamplerConfig(Method.IRFS_GEOMETRIC, 0.5)])
    r_rfs, r_irfs = rep.blocks[0].repeat_factors, rep.blocks[1].repeat_factors
    assert r_rfs[0] == r_rfs[1]
    assert r_irfs[0] > r_irfs[1]


def test_aggregates_recompute(zipf_ds):
    rep = build_report(zipf_ds, [RFS, IRFS])
    ft = compute_frequencies(zipf_ds)
    assert sum(s.category_count for s in rep.blocks[0].buckets) == zipf_ds.category_count
    for blk in rep.blocks:
        rft = compute_repeat_factors(ft, blk.config)
        irt = image_repeat_factors(zipf_ds, rft)
        np.testing.assert_array_equal(blk.repeat_factors, rft.factors)
        np.testing.assert_array_equal(blk.exposure, expected_exposure(irt, ft))
        assert blk.expected_epoch_length == float(irt.factors.sum())
        for st in blk.buckets:
            mask = np.array([b is st.bucket for b in ft.buckets()])
            assert st.category_count == mask.sum()
            assert st.image_count == ft.image_counts[mask].sum()
            if mask.any():
                assert st.mean_exposure_before == pytest.approx(ft.image_counts[mask].mean(), rel=1e-12)
                assert st.mean_exposure_after == pytest.approx(blk.exposure[mask].mean(), rel=1e-12)


def test_empty_category_bucket(mini_coco):
    mini_coco["categories"].append({"id": 9, "name": "ghost"})
    rep = build_report(Dataset.from_coco(mini_coco), [RFS])
    st = rep.blocks[0].bucket("empty")
    assert st.category_count == 1
    assert st.mean_repeat_factor is None and st.max_repeat_factor is None


def test_json_schema_and_reproducible(mini_ds):
    a = build_report(mini_ds, [RFS, IRFS]).to_json()
    b = build_report(mini_ds, [RFS, IRFS]).to_json()
    assert a == b
    doc = json.loads(a)
    assert doc["schema_version"] == 1
    assert doc["source_digest"] == mini_ds.source_digest
    assert [c["method"] for c in doc["configs"]] == ["rfs", "irfs-geometric"]
    assert len(doc["categories"][0]["repeat_factor"]) == 2


def test_csv_long_format(mini_ds):
    rep = build_report(mini_ds, [RFS, IRFS])
    rows = list(csv.DictReader(io.StringIO(rep.to_csv())))
    assert len(rows) == 2 * mini_ds.category_count
    assert rows[0]["config"] == "rfs@0.001"


def test_text_table(mini_ds):
    text = format_report(build_report(mini_ds, [RFS]))
    assert "rfs@0.001" in text and "rare" in text


def test_errors(mini_ds):
    with pytest.raises(ValueError):
        build_report(mini_ds, [])
    with pytest.raises(EmptyDataset):
        build_report(Dataset.from_coco({"images": [], "annotations": [], "categories": []}), [RFS])
    rep = build_report(mini_ds, [RFS])
    with pytest.raises(IndexError):
        diff_methods(rep, 0, 1)
    with pytest.raises(IndexError):
        diff_methods(rep, -1, 0)


def test_diff_methods(mini_ds):
    rep = build_report(mini_ds, [SamplerConfig(Method.RFS, 0.5), SamplerConfig(Method.IRFS_GEOMETRIC, 0.5)])
    same = diff_methods(rep, 1, 1)
    assert np.all(same.repeat_factor == 0) and np.all(same.exposure == 0)
    ab, ba = diff_methods(rep, 0, 1), diff_methods(rep, 1, 0)
    np.testing.assert_array_equal(ab.repeat_factor, -ba.repeat_factor)
    np.testing.assert_array_equal(ab.exposure, -ba.exposure)
    assert ab.repeat_factor[1] == pytest.approx(math.sqrt(2) - math.sqrt(3), rel=1e-12)
    assert ab.repeat_factor[1] < 0
    assert ab.rows()[1]["category_id"] == 2
