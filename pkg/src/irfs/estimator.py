"""scikit-learn style wrapper around the repeat factor pipeline."""

from __future__ import annotations

import os

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .annotations import Dataset, load_dataset
from .frequency import compute_frequencies
from .repeat_factor import (
    DEFAULT_THRESHOLD,
    Method,
    SamplerConfig,
    compute_repeat_factors,
    image_repeat_factors,
)
from .sampler import expected_exposure, sample_epoch

__all__ = ["RepeatFactorSampler", "check_dataset"]


def check_dataset(X, strict: bool = True) -> Dataset:
    """Coerce ``X`` into a :class:`Dataset`.

    Accepts a Dataset, a path to an annotation file, or a parsed COCO dict.
    """
    if isinstance(X, Dataset):
        return X
    if isinstance(X, (str, os.PathLike)):
        return load_dataset(X, strict=strict)
    if isinstance(X, dict):
        return Dataset.from_coco(X, strict=strict)
    raise TypeError(
        f"expected a Dataset, an annotation file path or a COCO dict, got {type(X).__name__}"
    )


class RepeatFactorSampler(TransformerMixin, BaseEstimator):
    """Fit repeat factors on a training set and draw epochs from it.

    Parameters
    ----------
    method : str, default="irfs-geometric"
        One of ``rfs``, ``irfs-geometric``, ``irfs-harmonic``,
        ``irfs-arithmetic``, ``irfs-quadratic``, ``instance-only``.
    threshold : float, default=1e-3
        Frequency below which categories are oversampled; 0 disables it.
    seed : int, default=0
        Seed for :meth:`sample`.
    strict : bool, default=True
        Passed to :func:`load_dataset` when ``X`` is a path or dict.
    n_jobs : int, default=1
        Threads used for image factors and epoch draws. Never changes results.

    Attributes
    ----------
    dataset_ : Dataset
    frequencies_ : FrequencyTable
    category_factors_ : RepeatFactorTable
    image_factors_ : ImageRepeatTable
    """

    def __init__(
        self,
        method="irfs-geometric",
        threshold=DEFAULT_THRESHOLD,
        seed=0,
        strict=True,
        n_jobs=1,
    ):
        self.method = method
        self.threshold = threshold
        self.seed = seed
        self.strict = strict
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        ds = check_dataset(X, strict=self.strict)
        self.config_ = SamplerConfig(Method.parse(self.method), self.threshold)
        self.dataset_ = ds
        self.frequencies_ = compute_frequencies(ds)
        self.category_factors_ = compute_repeat_factors(self.frequencies_, self.config_)
        self.image_factors_ = image_repeat_factors(ds, self.category_factors_, n_jobs=self.n_jobs)
        return self

    def transform(self, X):
        """Image repeat factors for ``X`` using the fitted category factors.

        Returns an array aligned with ``X.image_ids``. Categories unknown to
        the fitted table contribute nothing (factor 1).
        """
        check_is_fitted(self, "category_factors_")
        ds = check_dataset(X, strict=self.strict)
        if ds.source_digest == self.dataset_.source_digest:
            return np.array(self.image_factors_.factors)
        fitted = self.category_factors_
        pos = {int(c): i for i, c in enumerate(fitted.category_ids)}
        rc = np.ones(ds.category_count)
        for j, cid in enumerate(ds.category_ids.tolist()):
            i = pos.get(cid)
            if i is not None and not np.isnan(fitted.factors[i]):
                rc[j] = fitted.factors[i]
        img, cat = ds.incidence
        out = np.ones(ds.image_count)
        np.maximum.at(out, img, rc[cat])
        return out

    def sample(self, epoch_index=0):
        check_is_fitted(self, "image_factors_")
        return sample_epoch(self.image_factors_, self.seed, epoch_index, n_jobs=self.n_jobs)

    def iter_epochs(self, n_epochs, start=0):
        for e in range(start, start + n_epochs):
            yield self.sample(e)

    def expected_exposure(self):
        check_is_fitted(self, "image_factors_")
        return expected_exposure(self.image_factors_, self.frequencies_)
