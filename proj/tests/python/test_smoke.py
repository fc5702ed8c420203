import json
import math

import numpy as np
import pytest

import cris


def test_iou_and_precision_hand_values():
    pred = np.zeros((4, 4), np.uint8)
    gt = np.zeros((4, 4), np.uint8)
    pred[0, :4] = 1
    gt[0, 2:4] = 1
    gt[1, :2] = 1
    assert cris.iou(pred, gt) == pytest.approx(2 / 6)
    assert cris.iou(np.zeros((2, 2)), np.zeros((2, 2))) == 1.0
    assert cris.precision_at([0.9, 0.6, 0.5], 0.5) == pytest.approx(200 / 3)


def test_summarize_schema():
    report = cris.summarize([(2, 6), (3, 3)])
    assert set(report) == {"mean_iou", "overall_iou", "pr", "count"}
    assert report["count"] == 2
    assert report["overall_iou"] == pytest.approx(5 / 9)
    assert list(report["pr"]) == ["50", "60", "70", "80", "90"]


def test_dataset_round_trip(tmp_path):
    rows = cris.generate_dataset(tmp_path / "d", 6, size=64, seed=3)
    again = cris.generate_dataset(tmp_path / "e", 6, size=64, seed=3)
    assert rows == again
    samples = cris.load_dataset(tmp_path / "d")
    assert [s[0] for s in samples] == [r["id"] for r in rows]
    sid, image, mask, expr = samples[0]
    assert image.shape == (64, 64, 3) and image.dtype == np.uint8
    assert mask.shape == (64, 64) and set(np.unique(mask)) <= {0, 1}
    assert mask.sum() > 0
    assert expr == rows[0]["expr"]


def test_bad_dataset_raises(tmp_path):
    with pytest.raises(cris.DataError):
        cris.load_dataset(tmp_path / "missing")


def test_config_validation():
    cfg = cris.default_config("desk")
    assert cfg["image_size"] == 64 and cfg["decoder"]["n_layers"] == 2
    assert cris.default_config("paper")["image_size"] == 416
    with pytest.raises(cris.ConfigError):
        cris.default_config("huge")


def test_train_predict_evaluate(tmp_path):
    data = tmp_path / "data"
    cris.generate_dataset(data, 12, seed=5)
    cfg = cris.default_config()
    cfg["optimizer"]["epochs"] = 2
    cfg["optimizer"]["batch_size"] = 4
    cfg["val_count"] = 4
    result = cris.train(cfg, data, tmp_path / "m.ckpt")
    assert [e["epoch"] for e in result["log"]] == [1, 2]
    assert result["log"][0]["train_loss"] < math.log(2)

    model = cris.Model.load(tmp_path / "m.ckpt")
    assert model.config == json.loads(json.dumps(model.config))
    assert model.parameter_count > 0
    _, image, _, expr = cris.load_dataset(data)[0]
    mask = model.predict(image, expr)
    assert mask.shape == (64, 64) and mask.dtype == np.uint8
    with pytest.raises(cris.DataError):
        model.predict(image, "purple blob")
    report = model.evaluate(data)
    assert report["count"] == 12 and 0.0 <= report["mean_iou"] <= 1.0


def test_grad_check_passes():
    report = cris.grad_check(7)
    assert report["passed"]
    assert report["worst"] < 1e-6
    assert report["checked"] >= 200
