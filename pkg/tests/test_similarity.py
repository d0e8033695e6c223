import numpy as np
import pytest

from osfuse.core.errors import ContractError, InputError
from osfuse.data.similarity import (
    aggregate_pair_metrics,
    feature_space_similarity,
    mutual_information,
    pair_metrics,
    ssim,
)


def entropy_bits(img, bins=64):
    hist, _ = np.histogram(img, bins=bins, range=(0.0, 1.0))
    p = hist[hist > 0] / hist.sum()
    return float(-(p * np.log2(p)).sum())


def test_identical_images(rng):
    img = rng.uniform(size=(32, 32))
    m = pair_metrics(img, img)
    assert m.mse == 0.0
    assert m.ssim == pytest.approx(1.0)
    assert m.mi == pytest.approx(entropy_bits(img), rel=1e-9)


def test_constant_images():
    a, b = np.full((16, 16), 0.5), np.full((16, 16), 0.25)
    m = pair_metrics(a, b)
    assert m.mse == pytest.approx(0.0625)
    expected = (2 * 0.5 * 0.25 + 1e-4) / (0.5 ** 2 + 0.25 ** 2 + 1e-4)
    assert m.ssim == pytest.approx(expected, rel=1e-9)
    assert m.ssim == pytest.approx(0.8, abs=1e-3)
    assert m.mi == 0.0


def test_independent_noise_shares_little_information(rng):
    a, b = rng.uniform(size=(2, 1000, 1000))
    assert mutual_information(a, b) < 0.02


def test_metrics_are_symmetric(rng):
    a, b = rng.uniform(size=(2, 24, 24))
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)
    assert mutual_information(a, b) == pytest.approx(mutual_information(b, a), abs=1e-12)
    assert mutual_information(a, b) >= 0.0


def test_color_input_uses_luma(rng):
    gray = rng.uniform(size=(16, 16))
    color = np.repeat(gray[:, :, None], 3, axis=2)
    assert pair_metrics(color, gray).mse == pytest.approx(0.0, abs=1e-20)


def test_shape_mismatch():
    with pytest.raises(ContractError):
        pair_metrics(np.zeros((4, 4)), np.zeros((4, 5)))


def test_aggregate(rng):
    pairs = [tuple(rng.uniform(size=(2, 16, 16))) for _ in range(3)]
    result = aggregate_pair_metrics(pairs)
    assert result["count"] == 3
    assert result["mse"] == pytest.approx(np.mean([pair_metrics(a, b).mse for a, b in pairs]))
    with pytest.raises(InputError):
        aggregate_pair_metrics([])


def test_feature_space_similarity_keys(rng):
    a, b = rng.uniform(size=(2, 32, 32))
    result = feature_space_similarity(a, b, ["grad", "canny"])
    assert set(result) == {"raw", "grad", "canny"}
    assert all(-1.0 <= v <= 1.0 for v in result.values())
