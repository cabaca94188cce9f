"""Shared fixtures.

Trained scorers and the mask ensemble are expensive, so they are built once
per session from deterministic synthetic corpora and reused by module and
acceptance tests alike.
"""

from __future__ import annotations

import numpy as np
import pytest

from vphoto import dramatic, learner, pipeline, scoring, synthetic


class StubScorer:
    """Duck-typed scorer wrapping an arbitrary image -> float function."""

    def __init__(self, fn, aspect=None):
        self._fn = fn
        if aspect is not None:
            self.aspect = aspect

    def score(self, img):
        return float(self._fn(img))


@pytest.fixture
def stub_scorer():
    return StubScorer


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(42)


def random_image(rng, w=8, h=8):
    from vphoto.raster import RasterImage

    return RasterImage(rng.uniform(0.0, 1.0, size=(h, w, 3)))


@pytest.fixture(scope="session")
def pro_corpus():
    """200 colorful synthetic landscapes at the training size."""
    return synthetic.synth_corpus(200, seed=100)


@pytest.fixture(scope="session")
def small_corpus():
    return synthetic.synth_corpus(12, seed=900)


def _train(corpus, aspect, seed=0):
    cfg = learner.TrainConfig(learning_rate=0.1, epochs=200, batch_size=16, seed=0)
    return scoring.train_aspect_scorer(corpus, aspect, cfg, seed=seed)


@pytest.fixture(scope="session")
def saturation_scorer(pro_corpus):
    return _train(pro_corpus, "saturation", seed=1)


@pytest.fixture(scope="session")
def hdr_scorer(pro_corpus):
    return _train(pro_corpus, "hdr", seed=2)


@pytest.fixture(scope="session")
def composition_scorer(pro_corpus):
    return _train(pro_corpus, "composition", seed=3)


@pytest.fixture(scope="session")
def overall_scorer(pro_corpus):
    return _train(pro_corpus, "overall", seed=4)


@pytest.fixture(scope="session")
def mask_ensemble(small_corpus, overall_scorer):
    """Small but non-degenerate ensemble for pipeline-level tests."""
    return dramatic.train_ensemble(
        small_corpus,
        n_models=1,
        steps=60,
        snapshot_interval=20,
        cfg=dramatic.GanConfig(seed=0),
        overall_scorer=overall_scorer,
        keep_top=3,
    )


@pytest.fixture(scope="session")
def model_bundle(composition_scorer, saturation_scorer, hdr_scorer, overall_scorer, mask_ensemble):
    return pipeline.ModelBundle(
        composition=composition_scorer,
        saturation=saturation_scorer,
        hdr=hdr_scorer,
        overall=overall_scorer,
        ensemble=mask_ensemble,
    )


def held_out_landscape(i: int, size: int = 64):
    """Synthetic images from a seed range disjoint from every corpus."""
    return synthetic.synth_landscape(50_000 + i, size)
