"""CLI surface: exit codes, artifact validation and cross-command consistency."""

import csv
import json

import numpy as np
import pytest

from vphoto import dataset as ds
from vphoto import dramatic, scoring
from vphoto.cli import EXIT_CONFIG, EXIT_OK, main
from vphoto.raster import save_png
from vphoto.synthetic import synth_corpus, synth_landscape, write_fixture_tree


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Fixture images, a corpus manifest and a small trained scorer set."""
    root = tmp_path_factory.mktemp("cli")
    write_fixture_tree(root, n_corpus=10, n_panoramas=1, seed=7, size=64, pano_height=96)
    return root


@pytest.fixture(scope="module")
def trained_models(workspace, composition_scorer, saturation_scorer, hdr_scorer, overall_scorer, mask_ensemble):
    models = workspace / "models"
    models.mkdir(exist_ok=True)
    paths = {}
    for name, scorer in (
        ("composition", composition_scorer),
        ("saturation", saturation_scorer),
        ("hdr", hdr_scorer),
        ("overall", overall_scorer),
    ):
        paths[name] = models / f"{name}.crtm"
        scoring.save_scorer(scorer, paths[name])
    paths["ensemble"] = models / "ensemble"
    dramatic.save_ensemble(mask_ensemble, paths["ensemble"])
    return paths


class TestIngest:
    def test_builds_gated_manifest(self, workspace, tmp_path):
        out = tmp_path / "corpus.txt"
        code = main(
            [
                "ingest",
                "--images", str(workspace / "corpus"),
                "--out", str(out),
                "--id", "demo",
                "--size", "64",
                "--min-saturation", "0.55",
            ]
        )
        assert code == EXIT_OK
        corpus = ds.load_corpus_manifest(out)
        assert corpus.manifest_id == "demo"
        assert len(corpus) > 0
        for entry in corpus.entries:
            assert ds.mean_saturation(entry.image) >= 0.55

    def test_missing_source_is_config_error(self, tmp_path, capsys):
        code = main(["ingest", "--images", str(tmp_path / "nope"), "--out", str(tmp_path / "o.txt")])
        assert code == EXIT_CONFIG
        assert "nope" in capsys.readouterr().err


class TestGenData:
    def test_saturation_dataset_has_seventy_examples(self, workspace, tmp_path):
        out = tmp_path / "sat_data"
        code = main(
            [
                "gen-data",
                "--corpus", str(workspace / "corpus.txt"),
                "--aspect", "saturation",
                "--out", str(out),
                "--seed", "1",
            ]
        )
        assert code == EXIT_OK
        with open(out / "index.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 70  # 10 images x (1 original + 6 perturbed)

    def test_missing_corpus_is_config_error(self, tmp_path):
        code = main(
            ["gen-data", "--corpus", str(tmp_path / "missing.txt"), "--aspect", "hdr", "--out", str(tmp_path / "d")]
        )
        assert code == EXIT_CONFIG


@pytest.fixture(scope="module")
def sat_model(workspace, tmp_path_factory):
    data_dir = tmp_path_factory.mktemp("data")
    assert main(
        [
            "gen-data",
            "--corpus", str(workspace / "corpus.txt"),
            "--aspect", "saturation",
            "--out", str(data_dir / "sat"),
        ]
    ) == EXIT_OK
    model_path = data_dir / "sat.crtm"
    code = main(
        [
            "train",
            "--data", str(data_dir / "sat"),
            "--aspect", "saturation",
            "--out", str(model_path),
            "--epochs", "40",
        ]
    )
    assert code == EXIT_OK
    return model_path


class TestTrainAndSingleImageCommands:
    def test_trained_model_loads_with_metadata(self, sat_model):
        scorer = scoring.load_scorer(sat_model)
        assert scorer.aspect == "saturation"
        from vphoto.modelio import load_metadata

        meta = load_metadata(sat_model)
        assert "dataset_hash" in meta

    def test_enhance_reports_grid_member(self, sat_model, tmp_path):
        img_path = tmp_path / "img.png"
        save_png(synth_landscape(123, 64), img_path)
        out_path = tmp_path / "enhanced.png"
        code = main(
            [
                "enhance",
                "--image", str(img_path),
                "--scorer", str(sat_model),
                "--filter", "saturation",
                "--out", str(out_path),
            ]
        )
        assert code == EXIT_OK
        assert out_path.exists()

    def test_sweep_csv_argmax_matches_enhance_choice(self, sat_model, tmp_path, capsys):
        img_path = tmp_path / "img.png"
        save_png(synth_landscape(321, 64), img_path)
        grid = "0.4,0.5,0.6,0.7,0.8,0.9"
        csv_path = tmp_path / "sweep.csv"
        assert main(
            [
                "sweep",
                "--image", str(img_path),
                "--filter", "saturation",
                "--scorers", f"sat={sat_model}",
                "--grid", grid,
                "--out", str(csv_path),
            ]
        ) == EXIT_OK
        capsys.readouterr()
        assert main(
            [
                "enhance",
                "--image", str(img_path),
                "--scorer", str(sat_model),
                "--filter", "saturation",
                "--grid", grid,
            ]
        ) == EXIT_OK
        enhance_out = capsys.readouterr().out
        chosen = float(enhance_out.split("parameter:")[1].split("(")[0])
        with open(csv_path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        best_row = max(rows, key=lambda r: float(r["score_sat"]))
        # Ties break to the lowest parameter in both paths.
        best_score = float(best_row["score_sat"])
        candidates = [float(r["param"]) for r in rows if float(r["score_sat"]) == best_score]
        assert chosen == min(candidates)


class TestCrop:
    def test_crop_lists_windows(self, trained_models, tmp_path, capsys):
        img_path = tmp_path / "img.png"
        save_png(synth_landscape(55, 96), img_path)
        code = main(
            [
                "crop",
                "--image", str(img_path),
                "--composition", str(trained_models["composition"]),
                "--overall", str(trained_models["overall"]),
                "-k", "2",
            ]
        )
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "hybrid=" in out


class TestDramaticCommand:
    def test_writes_output(self, trained_models, tmp_path, capsys):
        img_path = tmp_path / "img.png"
        save_png(synth_landscape(66, 64), img_path)
        out_path = tmp_path / "dramatic.png"
        code = main(
            [
                "dramatic",
                "--image", str(img_path),
                "--ensemble", str(trained_models["ensemble"]),
                "--overall", str(trained_models["overall"]),
                "--out", str(out_path),
            ]
        )
        assert code == EXIT_OK
        assert out_path.exists()
        assert "snapshot" in capsys.readouterr().out


@pytest.fixture(scope="module")
def gallery_run(workspace, trained_models, tmp_path_factory):
    # Model paths travel in the config's models block; no per-model flags.
    base = tmp_path_factory.mktemp("run")
    cfg_path = base / "cfg.json"
    cfg_path.write_text(
        json.dumps(
            {
                "view_size": 96,
                "seed": 5,
                "models": {name: str(path) for name, path in trained_models.items()},
            }
        )
    )
    out_dir = base / "gallery"
    code = main(
        [
            "run",
            "--panoramas", str(workspace / "panoramas.txt"),
            "--out", str(out_dir),
            "--config", str(cfg_path),
        ]
    )
    assert code == EXIT_OK
    return out_dir


class TestRun:
    def test_missing_ensemble_exits_two_naming_artifact(self, workspace, trained_models, tmp_path, capsys):
        code = main(
            [
                "run",
                "--panoramas", str(workspace / "panoramas.txt"),
                "--composition", str(trained_models["composition"]),
                "--saturation", str(trained_models["saturation"]),
                "--hdr", str(trained_models["hdr"]),
                "--overall", str(trained_models["overall"]),
                "--ensemble", str(tmp_path / "missing_ensemble"),
                "--out", str(tmp_path / "gallery"),
            ]
        )
        assert code == EXIT_CONFIG
        err = capsys.readouterr().err
        assert "missing_ensemble" in err

    def test_unconfigured_models_exit_two(self, workspace, tmp_path, capsys):
        code = main(
            [
                "run",
                "--panoramas", str(workspace / "panoramas.txt"),
                "--out", str(tmp_path / "g"),
            ]
        )
        assert code == EXIT_CONFIG
        assert "no path given" in capsys.readouterr().err

    def test_full_run_writes_gallery(self, gallery_run):
        assert (gallery_run / "manifest.jsonl").exists()
        assert (gallery_run / "index.html").exists()

    def test_report_regenerates_from_manifest(self, gallery_run, tmp_path):
        manifest = gallery_run / "manifest.jsonl"
        out = tmp_path / "report"
        assert main(["report", "--manifest", str(manifest), "--out", str(out)]) == EXIT_OK
        assert (out / "index.html").read_bytes() == (gallery_run / "index.html").read_bytes()


class TestRankAndScale:
    def test_rank_orders_by_score(self, trained_models, tmp_path, capsys):
        paths = []
        for i in range(3):
            p = tmp_path / f"r{i}.png"
            save_png(synth_landscape(900 + i, 64), p)
            paths.append(str(p))
        code = main(["rank", "--overall", str(trained_models["overall"])] + paths)
        assert code == EXIT_OK
        lines = [l for l in capsys.readouterr().out.splitlines() if l.strip()]
        scores = [float(l.split("\t")[0]) for l in lines]
        assert scores == sorted(scores, reverse=True)

    def test_fit_scale_outputs_mapping(self, tmp_path, capsys):
        ratings = tmp_path / "ratings.csv"
        ratings.write_text(
            "image_id,rater_id,score\n"
            "a,r1,1.5\na,r2,2.5\nb,r1,3.0\nb,r2,3.0\nc,r1,2.0\nc,r2,2.0\n"
        )
        scores = tmp_path / "scores.csv"
        scores.write_text("a,0.2\nb,0.8\nc,0.5\n")
        out = tmp_path / "scale.json"
        code = main(["fit-scale", "--ratings", str(ratings), "--scores", str(scores), "--out", str(out)])
        assert code == EXIT_OK
        mapping = json.loads(out.read_text())
        # Oracle: least squares on the joined pairs.
        xs = np.array([0.2, 0.8, 0.5])
        ys = np.array([2.0, 3.0, 2.0])
        a = float(np.sum((xs - xs.mean()) * (ys - ys.mean())) / np.sum((xs - xs.mean()) ** 2))
        b = float(ys.mean() - a * xs.mean())
        assert mapping["a"] == pytest.approx(a, abs=1e-9)
        assert mapping["b"] == pytest.approx(b, abs=1e-9)


def test_make_fixtures(tmp_path):
    code = main(["make-fixtures", "--out", str(tmp_path / "fx"), "--corpus", "3", "--panoramas", "1"])
    assert code == EXIT_OK
    assert (tmp_path / "fx" / "corpus.txt").exists()
    assert (tmp_path / "fx" / "panoramas.txt").exists()


def test_unknown_command_exits_two():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
