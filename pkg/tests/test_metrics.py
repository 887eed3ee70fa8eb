import math

import numpy as np
import pytest

from hdrstitch import metrics
from hdrstitch.core import InputError

from oracles import naive_psnr, naive_windowed_ssim


class TestPsnr:
    def test_identical_is_infinite(self, rng):
        img = rng.uniform(0, 255, size=(10, 10, 3))
        assert metrics.psnr(img, img) == math.inf

    def test_unit_offset(self, rng):
        a = rng.uniform(1, 254, size=(20, 20, 3))
        assert metrics.psnr(a, a + 1.0) == pytest.approx(
            20 * math.log10(255), abs=1e-9
        )
        assert metrics.psnr(a, a + 1.0) == pytest.approx(48.1308, abs=1e-4)

    def test_sixteen_offset(self, rng):
        a = rng.uniform(17, 230, size=(20, 20, 3))
        assert metrics.psnr(a, a + 16.0) == pytest.approx(
            20 * math.log10(255.0 / 16.0), abs=1e-9
        )
        assert metrics.psnr(a, a + 16.0) == pytest.approx(24.0484, abs=1e-4)

    def test_matches_oracle(self, rng):
        a = rng.uniform(0, 255, size=(13, 17, 3))
        b = rng.uniform(0, 255, size=(13, 17, 3))
        assert metrics.psnr(a, b) == pytest.approx(naive_psnr(a, b), abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(InputError):
            metrics.psnr(np.zeros((4, 4)), np.zeros((4, 5)))


class TestSsim:
    def test_self_similarity(self, rng):
        img = rng.uniform(0, 255, size=(24, 24, 3))
        assert metrics.ssim(img, img) == pytest.approx(1.0, abs=1e-12)

    def test_inverted_structure(self, rng):
        a = rng.uniform(0, 255, size=(32, 32, 3))
        assert metrics.ssim(a, 255.0 - a) < 0.3

    def test_uniform_offset_degrades_luminance_only(self, rng):
        a = rng.uniform(40, 200, size=(32, 32, 3))
        value = metrics.ssim(a, a + 10.0)
        assert 0.5 < value < 1.0

    def test_matches_windowed_oracle(self, rng):
        a = rng.uniform(0, 255, size=(16, 20, 3))
        b = np.clip(a + rng.normal(scale=20, size=a.shape), 0, 255)
        assert metrics.ssim(a, b) == pytest.approx(
            naive_windowed_ssim(a, b), abs=1e-7
        )

    def test_minimum_size(self):
        small = np.zeros((10, 30, 3))
        with pytest.raises(InputError, match="at least 11x11"):
            metrics.ssim(small, small)


class TestEvaluate:
    def test_report_lines(self, rng):
        a = rng.uniform(0, 255, size=(16, 16, 3))
        report = metrics.evaluate(a, a + 1.0)
        lines = report.lines()
        assert lines[0].startswith("psnr=48.13")
        assert lines[1].startswith("ssim=")

    def test_per_channel(self, rng):
        a = rng.uniform(0, 254, size=(16, 16, 3))
        report = metrics.evaluate(a, a + 1.0, per_channel=True)
        assert len(report.per_channel["psnr"]) == 3
        assert any(line.startswith("psnr_rgb=") for line in report.lines())

    def test_unknown_metric(self, rng):
        a = rng.uniform(0, 255, size=(16, 16, 3))
        with pytest.raises(InputError, match="unknown metric"):
            metrics.evaluate(a, a, metric_names=("psnr", "vmaf"))
