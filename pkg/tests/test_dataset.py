"""Corpus handling and perturbation dataset generation."""

import numpy as np
import pytest

from vphoto.dataset import (
    Corpus,
    CorpusEntry,
    PerturbationSpec,
    SamplingBatch,
    TrainingExample,
    build_corpus,
    filter_corpus_by_saturation,
    generate_aspect_dataset,
    generate_crop_dataset,
    hdr_perturbation_spec,
    load_corpus_manifest,
    load_dataset,
    mean_saturation,
    saturation_perturbation_spec,
    save_corpus_manifest,
    save_dataset,
)
from vphoto.filters import FilterId, parse_effect
from vphoto.raster import RasterImage, mean_abs_diff, perturbation_score, save_png
from vphoto.synthetic import synth_corpus, synth_landscape


def _corpus(n=10, seed=70, size=32):
    return synth_corpus(n, seed=seed, size=size)


class TestCorpus:
    def test_entries_must_match_training_size(self):
        entry = CorpusEntry("x", RasterImage.constant(16, 16))
        with pytest.raises(ValueError):
            Corpus((entry,), training_size=32)

    def test_build_resizes(self):
        imgs = [("a", RasterImage.constant(50, 40, (0.2, 0.4, 0.6)))]
        corpus = build_corpus(imgs, training_size=24)
        assert corpus.entries[0].image.size == (24, 24)

    def test_manifest_round_trip(self, tmp_path):
        paths = []
        for i in range(3):
            p = tmp_path / f"img{i}.png"
            save_png(synth_landscape(i, 20), p)
            paths.append(p)
        from vphoto.dataset import ingest_corpus

        corpus = ingest_corpus(paths, manifest_id="demo", training_size=20)
        manifest = tmp_path / "corpus.txt"
        save_corpus_manifest(corpus, manifest)
        back = load_corpus_manifest(manifest)
        assert back.manifest_id == "demo"
        assert back.training_size == 20
        assert len(back) == 3
        assert np.array_equal(back.entries[0].image.pixels, corpus.entries[0].image.pixels)


class TestSaturationGate:
    def test_gray_image_excluded(self):
        gray = CorpusEntry("gray", RasterImage.constant(8, 8, (0.5, 0.5, 0.5)))
        corpus = Corpus((gray,), training_size=8)
        assert len(filter_corpus_by_saturation(corpus, 0.55)) == 0

    def test_pure_red_included(self):
        red = CorpusEntry("red", RasterImage.constant(8, 8, (1.0, 0.0, 0.0)))
        corpus = Corpus((red,), training_size=8)
        assert len(filter_corpus_by_saturation(corpus, 0.55)) == 1

    def test_half_red_half_gray_is_borderline(self):
        # Per-pixel HSV oracle: red rows saturate at 1, gray rows at 0.
        px = np.zeros((8, 8, 3))
        px[:4] = [1.0, 0.0, 0.0]
        px[4:] = [0.5, 0.5, 0.5]
        img = RasterImage(px)
        assert mean_saturation(img) == pytest.approx(0.5, abs=1e-12)
        corpus = Corpus((CorpusEntry("mix", img),), training_size=8)
        assert len(filter_corpus_by_saturation(corpus, 0.55)) == 0
        assert len(filter_corpus_by_saturation(corpus, 0.5)) == 1


class TestPerturbationSpec:
    def test_counts_validated(self):
        with pytest.raises(ValueError):
            SamplingBatch(ranges=((0.0, 0.5),), count=0)

    def test_negated_range_must_fit_domain(self):
        with pytest.raises(ValueError):
            PerturbationSpec(
                FilterId.HDR,
                (SamplingBatch(ranges=((-1.5, -0.5),), count=2, negate=True),),
                diff_cap=0.2,
            )

    def test_positive_range_must_fit_domain(self):
        with pytest.raises(ValueError):
            PerturbationSpec(
                FilterId.SATURATION,
                (SamplingBatch(ranges=((0.0, 1.2),), count=2),),
                diff_cap=0.06,
            )


class TestGenerateAspectDataset:
    def test_saturation_count_on_ten_images(self):
        corpus = _corpus(10)
        data = generate_aspect_dataset(corpus, saturation_perturbation_spec(), seed=1)
        assert len(data) == 70  # (1 original + 6 perturbed) per image

    def test_hdr_count_on_ten_images(self):
        corpus = _corpus(10)
        data = generate_aspect_dataset(corpus, hdr_perturbation_spec(), seed=1)
        assert len(data) == 100  # (1 + 6 + 3) per image

    def test_identity_range_scores_one(self):
        corpus = _corpus(3)
        spec = PerturbationSpec(
            FilterId.SATURATION,
            (SamplingBatch(ranges=((0.5, 0.5),), count=2),),
            diff_cap=0.06,
        )
        data = generate_aspect_dataset(corpus, spec, seed=4)
        assert all(ex.target == 1.0 for ex in data)

    def test_seed_determinism_byte_identical(self):
        corpus = _corpus(4)
        spec = saturation_perturbation_spec()
        a = generate_aspect_dataset(corpus, spec, seed=9)
        b = generate_aspect_dataset(corpus, spec, seed=9)
        assert len(a) == len(b)
        for ea, eb in zip(a, b):
            assert ea.target == eb.target
            assert ea.provenance == eb.provenance
            assert np.array_equal(ea.image.pixels, eb.image.pixels)

    def test_targets_recomputable_from_provenance(self):
        # Every perturbed target must equal the similarity score recomputed
        # independently from the original and the perturbed image.
        corpus = _corpus(4)
        spec = saturation_perturbation_spec()
        data = generate_aspect_dataset(corpus, spec, seed=2)
        by_src = {e.path: e.image for e in corpus.entries}
        for ex in data:
            if ex.provenance.startswith("original"):
                assert ex.target == 1.0
                continue
            src = ex.provenance.split("src=", 1)[1]
            delta = mean_abs_diff(by_src[src], ex.image)
            assert ex.target == pytest.approx(
                perturbation_score(delta, spec.diff_cap), abs=1e-12
            )

    def test_corpus_reordering_keeps_individual_samples(self):
        corpus = _corpus(5)
        reordered = Corpus(tuple(reversed(corpus.entries)), corpus.manifest_id, corpus.training_size)
        spec = saturation_perturbation_spec()
        a = {ex.provenance: ex.target for ex in generate_aspect_dataset(corpus, spec, 3)}
        b = {ex.provenance: ex.target for ex in generate_aspect_dataset(reordered, spec, 3)}
        assert a == b

    def test_originals_carry_exactly_one(self):
        corpus = _corpus(3)
        data = generate_aspect_dataset(corpus, hdr_perturbation_spec(), seed=5)
        originals = [ex for ex in data if ex.provenance.startswith("original")]
        assert len(originals) == 3
        assert all(ex.target == 1.0 for ex in originals)

    def test_empty_corpus_rejected(self):
        empty = Corpus((), training_size=32)
        with pytest.raises(ValueError):
            generate_aspect_dataset(empty, saturation_perturbation_spec(), seed=0)


class TestGenerateCropDataset:
    def test_size_and_full_frame_target(self):
        corpus = _corpus(6, size=64)
        data = generate_crop_dataset(corpus, seed=1)
        assert len(data) == 6 * (1 + 3 + 3)
        originals = [ex for ex in data if ex.provenance.startswith("original")]
        assert all(ex.target == 1.0 for ex in originals)

    def test_targets_match_window_geometry(self):
        corpus = _corpus(5, size=64)
        data = generate_crop_dataset(corpus, seed=2)
        for ex in data:
            if ex.provenance.startswith("original"):
                continue
            fields = dict(
                part.split("=") for part in ex.provenance.split(";") if "=" in part
            )
            area = int(fields["w"]) * int(fields["h"])
            assert ex.target == pytest.approx(area / (64 * 64), abs=1e-12)
            assert ex.image.size == (64, 64)

    def test_tight_batch_targets_bounded_by_sampler_geometry(self):
        # Batch 1 keeps width >= 0.9 with aspect <= 2, so the area ratio is at
        # least 0.9^2 / 2 = 0.405 (up to 1-pixel rounding).
        corpus = _corpus(12, size=64)
        data = generate_crop_dataset(corpus, seed=3, samples_per_batch=4)
        seen = 0
        for ex in data:
            if not ex.provenance.startswith("crop"):
                continue
            fields = dict(part.split("=") for part in ex.provenance.split(";") if "=" in part)
            if int(fields["w"]) >= round(0.9 * 64):
                seen += 1
                assert ex.target >= 0.405 - 0.02
        assert seen > 0

    def test_all_targets_within_sampler_bounds(self):
        # Width in (0.5, 1], aspect in (0.5, 2) with containment gives area
        # ratios in (0.125, 1]; rounding can nudge the edges slightly.
        corpus = _corpus(12, size=64)
        data = generate_crop_dataset(corpus, seed=4, samples_per_batch=5)
        targets = [ex.target for ex in data]
        assert min(targets) > 0.125 - 0.02
        assert max(targets) == 1.0


class TestDatasetPersistence:
    def test_round_trip(self, tmp_path):
        corpus = _corpus(3)
        data = generate_aspect_dataset(corpus, saturation_perturbation_spec(), seed=6)
        index = save_dataset(data, tmp_path / "ds")
        assert index.exists()
        back = load_dataset(tmp_path / "ds")
        assert len(back) == len(data)
        for orig, loaded in zip(data, back):
            # PNG quantizes to 8 bits; targets and provenance are exact.
            assert loaded.target == orig.target
            assert loaded.provenance == orig.provenance
            assert mean_abs_diff(loaded.image, orig.image) < 1.0 / 255.0

    def test_missing_index_rejected(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_dataset(tmp_path)


def test_training_example_target_validated():
    with pytest.raises(ValueError):
        TrainingExample(RasterImage.constant(4, 4), 1.5)


def test_provenance_parseable_as_effect():
    corpus = _corpus(2)
    data = generate_aspect_dataset(corpus, hdr_perturbation_spec(), seed=8)
    negated_seen = False
    for ex in data:
        if ex.provenance.startswith("filter="):
            fid, values, negated = parse_effect(ex.provenance.split(";seed=")[0])
            assert fid is FilterId.HDR
            assert 0.0 <= values[0] <= 1.0
            negated_seen = negated_seen or negated
    assert negated_seen
