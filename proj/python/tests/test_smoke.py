import math

import numpy as np
import pytest

import sht


def test_heatmap_round_trip():
    pts = np.array([[10.25, 20.5], [40.0, 12.75], [30.5, 50.0]])
    maps = sht.render_heatmaps(pts, 64, 64, 1.5)
    assert maps.shape == (3, 64, 64)
    assert maps.max() <= 1.0
    decoded = sht.decode_heatmaps(maps)
    assert np.abs(decoded - pts).max() <= 0.5


def test_nme_and_ced():
    gt = np.array([[0.0, 0.0], [50.0, 0.0]])
    pred = gt + np.array([3.0, 4.0])
    assert sht.nme(pred, gt, "io", interocular=(0, 1)) == pytest.approx(0.10)
    assert sht.nme(gt, gt, "box", bbox=(0, 0, 60, 80)) == 0.0
    assert sht.ced_auc([0.02, 0.04, 0.06, 0.08], 0.10) == pytest.approx(0.5)
    assert sht.failure_rate([0.05, 0.15], 0.1) == 0.5


def test_image_metrics():
    rng = np.random.default_rng(0)
    a = rng.random((16, 16, 3)) * 0.5
    assert math.isinf(sht.psnr_y(a, a))
    assert sht.psnr_y(a, a + 16.0 / 219.0) == pytest.approx(10 * math.log10(255.0**2 / 256.0), rel=1e-9)
    b = rng.random((32, 32, 3))
    assert sht.ssim_y(b, b) == pytest.approx(1.0)
    assert sht.gradient_map(np.full((8, 8, 3), 0.3)).max() < 1e-9


def test_toy_faces_are_deterministic():
    a = sht.toy_faces(3, canvas=64, num_landmarks=5, seed=4)
    b = sht.toy_faces(3, canvas=64, num_landmarks=5, seed=4)
    assert len(a) == 3
    img, pts, bbox = a[0]
    assert img.shape == (64, 64, 3)
    assert pts.shape == (5, 2)
    assert len(bbox) == 4
    for (ia, pa, _), (ib, pb, _) in zip(a, b):
        assert np.array_equal(ia, ib)
        assert np.array_equal(pa, pb)


def test_config_text_and_errors():
    text = sht.toy_config_text()
    assert "num_landmarks = 5" in text
    assert sht.normalize_config(text) == text
    with pytest.raises(sht.Error, match="InvalidConfig"):
        sht.normalize_config("sr_output_size = 96\n")
    with pytest.raises(sht.Error):
        sht.Model("/nonexistent/model.ckpt")
