import json

import numpy as np
import pytest

import inmerge


def test_auroc_examples():
    assert inmerge.auroc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(0.75)
    assert inmerge.auroc([0.1, 0.2], [1, 1]) is None


def test_cosine():
    assert inmerge.cosine_similarity([1, 0], [0, 1]) == 0.0
    assert inmerge.cosine_similarity([1, 2], [2, 4]) == pytest.approx(1.0)
    assert inmerge.cosine_similarity([0, 0], [1, 1]) is None


def test_train_eval_analyze(tmp_path):
    inmerge.synth(tmp_path / "data", classes=2, per_class=40, height=8, width=8, seed=3)
    config = {
        "arch": {"layers": [
            {"kind": "conv2d", "out_channels": 4, "padding": 1},
            {"kind": "relu"},
            {"kind": "maxpool2d"},
            {"kind": "conv2d", "out_channels": 4, "padding": 1},
            {"kind": "relu"},
            {"kind": "flatten"},
            {"kind": "dense", "out_features": 2},
        ]},
        "data": "data",
        "train": {"epochs_pretrain": 1, "epochs_inmerge": 1, "batch_size": 16},
        "merge": {"l_s": 1},
        "output": "run",
    }
    (tmp_path / "run.json").write_text(json.dumps(config))
    log = inmerge.train(tmp_path / "run.json")
    assert "best epoch" in log

    best = tmp_path / "run" / "best.ckpt"
    metrics = inmerge.evaluate(best, tmp_path / "data", "val")
    assert metrics["split"] == "val"
    assert 0.0 <= metrics["accuracy"] <= 1.0

    params = inmerge.load_params(best)
    assert params["conv1.weight"].shape == (4, 4, 3, 3)
    assert params["conv1.weight"].dtype == np.float32

    sims = inmerge.kernel_similarity(best, 1)
    assert len(sims["pairs"]) == 6
    assert sum(sims["histogram"]) == 6


def test_errors_map_to_python(tmp_path):
    with pytest.raises(inmerge.CheckpointError):
        inmerge.load_params(tmp_path / "missing.ckpt")
    (tmp_path / "bad.json").write_text('{"arch": {"preset": "tiny_cnn"}, "data": "d", "x": 1}')
    with pytest.raises(inmerge.ConfigError):
        inmerge.train(tmp_path / "bad.json")
    with pytest.raises(inmerge.InmergeError):
        inmerge.synth(tmp_path / "s", label_noise=2.0)
