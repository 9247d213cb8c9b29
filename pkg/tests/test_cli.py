from __future__ import annotations

import json

import numpy as np
import pytest

from mannerist import load_model, parse_feature_csv, read_vector_csv, validate_stream
from mannerist.cli import main
from mannerist.features import FEATURE_ORDER_HASH


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    rc = main([
        "synth", "--out-dir", str(out), "--seed", "42",
        "--duration", "600", "--separation", "3",
    ])
    assert rc == 0
    return out


@pytest.fixture(scope="module")
def vector_dir(synth_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("vectors")
    rc = main([
        "featurize", str(synth_dir / "target.csv"), str(synth_dir / "impostor.csv"),
        "--fps", "30", "--out-dir", str(out),
    ])
    assert rc == 0
    return out


@pytest.fixture(scope="module")
def model_path(vector_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("model") / "model.json"
    rc = main([
        "train",
        "--real", str(vector_dir / "target.vectors.csv"),
        "--decoy", str(vector_dir / "impostor.vectors.csv"),
        "--out", str(out), "--trained-at", "2026-08-10", "--label", "target",
    ])
    assert rc == 0
    return out


class TestSynth:
    def test_outputs_parse_and_validate(self, synth_dir):
        for label in ("target", "impostor"):
            data = (synth_dir / f"{label}.csv").read_bytes()
            stream = parse_feature_csv(data, fps=30.0, source_id=label)
            assert len(stream) == 18000
            assert validate_stream(stream).accepted
            sidecar = json.loads((synth_dir / f"{label}.persona.json").read_text())
            assert sidecar["label"] == label

    def test_deterministic_given_seed(self, synth_dir, tmp_path):
        rc = main([
            "synth", "--out-dir", str(tmp_path), "--seed", "42",
            "--duration", "600", "--separation", "3",
        ])
        assert rc == 0
        assert (tmp_path / "target.csv").read_bytes() == (synth_dir / "target.csv").read_bytes()


class TestFeaturize:
    def test_sixty_second_clip_count(self, synth_dir, tmp_path, capsys):
        rc = main([
            "synth", "--out-dir", str(tmp_path / "s"), "--seed", "7", "--duration", "60",
        ])
        assert rc == 0
        capsys.readouterr()
        rc = main([
            "featurize", str(tmp_path / "s" / "target.csv"),
            "--fps", "30", "--out-dir", str(tmp_path / "v"),
        ])
        assert rc == 0
        assert "11 clips" in capsys.readouterr().out
        vs = read_vector_csv((tmp_path / "v" / "target.vectors.csv").read_bytes())
        assert len(vs) == 11
        assert vs.feature_order_hash == FEATURE_ORDER_HASH

    def test_missing_file_exit_2(self, tmp_path, capsys):
        rc = main(["featurize", str(tmp_path / "nope.csv"), "--fps", "30"])
        assert rc == 2

    def test_partial_outputs_removed_on_failure(self, synth_dir, tmp_path):
        rc = main([
            "featurize", str(synth_dir / "target.csv"), str(tmp_path / "missing.csv"),
            "--fps", "30", "--out-dir", str(tmp_path / "v"),
        ])
        assert rc == 2
        assert not (tmp_path / "v" / "target.vectors.csv").exists()

    def test_motion_everywhere_empty_output(self, synth_dir, tmp_path, capsys):
        # corrupt the margin-difference columns so every frame is flagged
        text = (synth_dir / "target.csv").read_text().splitlines()[:300 + 1]
        rows = [text[0]]
        for i, line in enumerate(text[1:]):
            parts = line.split(",")
            if i > 0:
                parts[-2] = "0.9"
            rows.append(",".join(parts))
        src = tmp_path / "shaky.csv"
        src.write_text("\n".join(rows) + "\n")
        rc = main(["featurize", str(src), "--fps", "30", "--out-dir", str(tmp_path)])
        assert rc == 0
        vs = read_vector_csv((tmp_path / "shaky.vectors.csv").read_bytes())
        assert len(vs) == 0

    def test_requires_fps(self, synth_dir):
        rc = main(["featurize", str(synth_dir / "target.csv")])
        assert rc == 2

    def test_config_file_supplies_fps(self, synth_dir, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("fps = 30\nwindow = 10\n# comment\n")
        rc = main([
            "featurize", str(synth_dir / "target.csv"),
            "--config", str(cfg), "--out-dir", str(tmp_path),
        ])
        assert rc == 0

    def test_flag_overrides_config(self, synth_dir, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("fps = 30\nwindow = 20\n")
        rc = main([
            "featurize", str(synth_dir / "target.csv"), "--config", str(cfg),
            "--window", "10", "--stride", "5", "--out-dir", str(tmp_path),
        ])
        assert rc == 0
        # 600 s at window 10/stride 5 -> 119 clips; window 20 would give 59
        assert "119 clips" in capsys.readouterr().out


class TestTrain:
    def test_model_file_valid(self, model_path):
        model = load_model(model_path.read_bytes())
        assert model.metadata["trained_at"] == "2026-08-10"
        assert model.metadata["label"] == "target"
        assert model.metadata["family"] == "combined"
        assert model.input_dim == 496

    def test_train_report_printed(self, vector_dir, tmp_path, capsys):
        rc = main([
            "train", "--real", str(vector_dir / "target.vectors.csv"),
            "--out", str(tmp_path / "m.json"), "--trained-at", "2026-08-10",
        ])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["training_acceptance"] >= 0.99
        assert payload["n_train"] == 119

    def test_family_facial_dimension(self, vector_dir, tmp_path):
        rc = main([
            "train", "--real", str(vector_dir / "target.vectors.csv"),
            "--family", "facial", "--out", str(tmp_path / "m.json"),
            "--trained-at", "2026-08-10",
        ])
        assert rc == 0
        model = load_model((tmp_path / "m.json").read_bytes())
        assert len(model.dims) == 190
        assert model.support_vectors.shape[1] == 190

    def test_decoys_switch_objective_logged(self, vector_dir, tmp_path, caplog):
        import logging

        with caplog.at_level(logging.INFO, logger="mannerist"):
            rc = main([
                "train", "--real", str(vector_dir / "target.vectors.csv"),
                "--decoy", str(vector_dir / "impostor.vectors.csv"),
                "--out", str(tmp_path / "m.json"), "--trained-at", "2026-08-10",
            ])
        assert rc == 0
        assert any("balanced accuracy" in r.message for r in caplog.records)

    def test_insufficient_clips_exit_3(self, vector_dir, tmp_path):
        src = (vector_dir / "target.vectors.csv").read_text().splitlines()
        small = tmp_path / "small.vectors.csv"
        small.write_text("\n".join(src[:4]) + "\n")
        rc = main(["train", "--real", str(small), "--out", str(tmp_path / "m.json")])
        assert rc == 3

    def test_idempotent_output(self, vector_dir, tmp_path):
        args = [
            "train", "--real", str(vector_dir / "target.vectors.csv"),
            "--trained-at", "2026-08-10",
        ]
        rc = main(args + ["--out", str(tmp_path / "a.json")])
        assert rc == 0
        rc = main(args + ["--out", str(tmp_path / "b.json")])
        assert rc == 0
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


class TestClassify:
    def test_training_footage_accepted(self, model_path, vector_dir, capsys):
        rc = main([
            "classify", "--model", str(model_path), str(vector_dir / "target.vectors.csv"),
        ])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["files"][0]["fraction_target"] >= 0.99

    def test_impostor_rejected(self, model_path, vector_dir, capsys):
        rc = main([
            "classify", "--model", str(model_path), str(vector_dir / "impostor.vectors.csv"),
        ])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["files"][0]["fraction_target"] <= 0.05

    def test_empty_vector_file(self, model_path, tmp_path, capsys):
        empty = tmp_path / "empty.vectors.csv"
        empty.write_text(f"# order={FEATURE_ORDER_HASH}\n")
        rc = main(["classify", "--model", str(model_path), str(empty)])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["files"][0]["n_clips"] == 0

    def test_hash_mismatch_exit_4(self, model_path, vector_dir, tmp_path):
        raw = model_path.read_text().replace(FEATURE_ORDER_HASH, "f" * 16)
        bad = tmp_path / "tampered.json"
        bad.write_text(raw)
        rc = main(["classify", "--model", str(bad), str(vector_dir / "target.vectors.csv")])
        assert rc == 4

    def test_truncated_model_exit_2(self, model_path, vector_dir, tmp_path):
        bad = tmp_path / "trunc.json"
        bad.write_bytes(model_path.read_bytes()[:50])
        rc = main(["classify", "--model", str(bad), str(vector_dir / "target.vectors.csv")])
        assert rc == 2


class TestEvaluate:
    def test_report_written_and_seeded(self, vector_dir, tmp_path):
        out = tmp_path / "report.json"
        rc = main([
            "evaluate", "--real", str(vector_dir / "target.vectors.csv"),
            "--decoy", f"impostor={vector_dir / 'impostor.vectors.csv'}",
            "--repeats", "2", "--seed", "3", "--out", str(out),
        ])
        assert rc == 0
        payload = json.loads(out.read_text())
        assert payload["seed"] == 3
        assert payload["repeats"] == 2
        names = [s["name"] for s in payload["per_set"]]
        assert names == ["real", "impostor"]

    def test_byte_identical_reports(self, vector_dir, tmp_path):
        args = [
            "evaluate", "--real", str(vector_dir / "target.vectors.csv"),
            "--decoy", f"impostor={vector_dir / 'impostor.vectors.csv'}",
            "--repeats", "2", "--seed", "11",
        ]
        rc = main(args + ["--out", str(tmp_path / "a.json")])
        assert rc == 0
        rc = main(args + ["--out", str(tmp_path / "b.json")])
        assert rc == 0
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_seed_emitted_when_omitted(self, vector_dir, tmp_path):
        out = tmp_path / "r.json"
        rc = main([
            "evaluate", "--real", str(vector_dir / "target.vectors.csv"),
            "--repeats", "1", "--out", str(out),
        ])
        assert rc == 0
        assert isinstance(json.loads(out.read_text())["seed"], int)


class TestSweepImportanceCli:
    def test_sweep_json(self, vector_dir, tmp_path):
        out = tmp_path / "sweep.json"
        rc = main([
            "sweep", "--real", str(vector_dir / "target.vectors.csv"),
            "--decoy", f"impostor={vector_dir / 'impostor.vectors.csv'}",
            "--sizes", "10,496", "--samples", "2", "--seed", "1", "--out", str(out),
        ])
        assert rc == 0
        payload = json.loads(out.read_text())
        assert [s["size"] for s in payload["per_size"]] == [10, 496]

    def test_importance_json(self, vector_dir, tmp_path):
        out = tmp_path / "imp.json"
        rc = main([
            "importance", "--real", str(vector_dir / "target.vectors.csv"),
            "--decoy", f"impostor={vector_dir / 'impostor.vectors.csv'}",
            "--classifiers", "5", "--subset-size", "10", "--seed", "1", "--out", str(out),
        ])
        assert rc == 0
        payload = json.loads(out.read_text())
        assert payload["n_classifiers"] == 5
        assert len(payload["entries"]) <= 50
