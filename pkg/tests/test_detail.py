import numpy as np
import pytest

from hdrstitch import detail
from hdrstitch.core import InputError
from hdrstitch.pano import PanoImage

from oracles import closed_form_two_pixel, dense_detail_solve


class TestLogDomain:
    def test_anchor_values(self):
        x = np.array([0.0, 127.0, 255.0])
        assert np.array_equal(detail.log_domain(x), [0.0, 7.0, 8.0])

    def test_rejects_negative(self):
        with pytest.raises(InputError):
            detail.log_domain(np.array([-0.5]))


class TestPsiWeight:
    def test_anchor_values(self):
        values = detail.psi_weight(np.array([0.0, 1.0, 16.0]))
        assert values[0] == pytest.approx(np.sqrt(2), abs=1e-12)
        assert values[1] == pytest.approx(np.sqrt(3), abs=1e-12)
        assert values[2] == pytest.approx(np.sqrt(10), abs=1e-12)

    def test_symmetric(self, rng):
        v = rng.normal(size=100)
        assert np.array_equal(detail.psi_weight(v), detail.psi_weight(-v))


class TestSolverConfig:
    def test_defaults(self):
        cfg = detail.SolverConfig()
        assert cfg.lam == 0.125
        assert cfg.alpha == 1.125

    def test_validation(self):
        with pytest.raises(InputError):
            detail.SolverConfig(lam=-0.1)
        with pytest.raises(InputError):
            detail.SolverConfig(nu=1.5)
        with pytest.raises(InputError):
            detail.SolverConfig(cg_max_iters=0)


class TestGuidanceField:
    def ramp_logs(self, layout, slopes):
        shape = (layout.view_height, layout.pano_width, 3)
        xs = np.arange(layout.pano_width, dtype=np.float64)
        return [np.broadcast_to(s * xs[None, :, None], shape).copy()
                for s in slopes]

    def test_native_regions_use_owner_gradients(self, small_layout):
        logs = self.ramp_logs(small_layout, (0.1, 0.3, 0.7))
        field = detail.guidance_field(logs, small_layout)
        bounds = small_layout.region_bounds
        for tag, slope in (("chi1", 0.1), ("chi2", 0.3)):
            start, end = bounds[tag]
            assert np.allclose(field.vx[:, start:end], slope, atol=1e-12)
        # the forward difference has no sample at the very last column
        start, end = bounds["chi3"]
        assert np.allclose(field.vx[:, start : end - 1], 0.7, atol=1e-12)
        assert np.allclose(field.vy, 0.0, atol=1e-12)

    def test_overlap_crossfade(self, small_layout):
        logs = self.ramp_logs(small_layout, (0.1, 0.3, 0.7))
        field = detail.guidance_field(logs, small_layout)
        start, end = small_layout.region_bounds["xi12"]
        width = end - start
        # left edge: full weight on the left level's gradients
        assert np.allclose(field.vx[:, start], 0.1, atol=1e-12)
        # half-way (even width): equal mix of the two levels
        mid = start + width // 2
        weight = (end - mid) / width
        assert weight == 0.5
        assert np.allclose(field.vx[:, mid], 0.5 * 0.1 + 0.5 * 0.3, atol=1e-12)

    def test_constant_scene_zero_guidance(self, small_layout):
        shape = (small_layout.view_height, small_layout.pano_width, 3)
        logs = [np.full(shape, 3.14) for _ in range(3)]
        field = detail.guidance_field(logs, small_layout)
        assert (field.vx == 0).all() and (field.vy == 0).all()

    def test_shape_validation(self, small_layout):
        shape = (small_layout.view_height, small_layout.pano_width + 1, 3)
        with pytest.raises(InputError, match="shape"):
            detail.guidance_field([np.zeros(shape)] * 3, small_layout)


class TestSolver:
    def test_zero_guidance_zero_solution(self, rng):
        shape = (7, 9, 3)
        field = detail.GuidanceField(vx=np.zeros(shape), vy=np.zeros(shape))
        out = detail.solve_detail(field, detail.SolverConfig())
        assert (out == 0).all()

    def test_two_pixel_closed_form(self):
        vx = np.zeros((1, 2, 3))
        vx[0, 0, :] = 1.0
        field = detail.GuidanceField(vx=vx, vy=np.zeros_like(vx))
        out = detail.solve_detail(field, detail.SolverConfig())
        magnitude = closed_form_two_pixel(1.0, lam=0.125, alpha=1.125)
        assert magnitude == pytest.approx(9 / 208, abs=1e-15)
        assert np.abs(out[0, 0] + magnitude).max() <= 1e-9
        assert np.abs(out[0, 1] - magnitude).max() <= 1e-9

    def test_matches_dense_solve_8x8(self, rng):
        cfg = detail.SolverConfig()
        for _ in range(3):
            vx = rng.normal(scale=2.0, size=(8, 8))
            vy = rng.normal(scale=2.0, size=(8, 8))
            z, _, rel = detail._solve_channel(vx, vy, cfg)
            expected = dense_detail_solve(vx, vy, cfg.lam, cfg.alpha)
            assert np.abs(z - expected).max() <= 1e-4
            assert rel <= cfg.cg_tolerance

    def test_matches_dense_solve_rectangular(self, rng):
        cfg = detail.SolverConfig()
        vx = rng.normal(size=(5, 11))
        vy = rng.normal(size=(5, 11))
        z, _, _ = detail._solve_channel(vx, vy, cfg)
        expected = dense_detail_solve(vx, vy, cfg.lam, cfg.alpha)
        assert np.abs(z - expected).max() <= 1e-6

    def test_reports_residual_within_tolerance(self, rng):
        cfg = detail.SolverConfig(cg_tolerance=1e-10)
        vx = rng.normal(size=(16, 16))
        vy = rng.normal(size=(16, 16))
        z, iters, rel = detail._solve_channel(vx, vy, cfg)
        assert rel <= 1e-10
        assert iters >= 1

    def test_raises_when_iteration_budget_exhausted(self, rng):
        cfg = detail.SolverConfig(cg_tolerance=1e-14, cg_max_iters=1)
        vx = rng.normal(size=(12, 12))
        vy = rng.normal(size=(12, 12))
        with pytest.raises(detail.ConvergenceError, match="1 iterations"):
            detail._solve_channel(vx, vy, cfg)

    def test_requires_three_channels(self):
        flat = detail.GuidanceField(vx=np.zeros((4, 4)), vy=np.zeros((4, 4)))
        with pytest.raises(InputError):
            detail.solve_detail(flat, detail.SolverConfig())


class TestRecombine:
    def pano_of(self, value, layout):
        shape = (layout.view_height, layout.pano_width, 3)
        return PanoImage(data=np.full(shape, float(value)), layout=layout)

    def test_zero_detail_identity(self, small_layout):
        fused = self.pano_of(100.0, small_layout)
        out = detail.recombine(fused, np.zeros_like(fused.data),
                               detail.SolverConfig(nu=0.3))
        assert np.array_equal(out.data, fused.data)

    def test_nu_one_returns_fusion(self, small_layout, rng):
        fused = self.pano_of(100.0, small_layout)
        dmap = rng.normal(scale=0.2, size=fused.data.shape)
        out = detail.recombine(fused, dmap, detail.SolverConfig(nu=1.0))
        assert np.array_equal(out.data, fused.data)

    def test_hand_value(self, small_layout):
        fused = self.pano_of(100.0, small_layout)
        dmap = np.full_like(fused.data, 0.1)
        out = detail.recombine(fused, dmap, detail.SolverConfig(nu=0.0))
        assert out.data[0, 0, 0] == pytest.approx(100 * 2 ** 0.1, abs=1e-9)
        assert out.data[0, 0, 0] == pytest.approx(107.177, abs=1e-3)

    def test_affine_in_nu(self, small_layout, rng):
        fused = self.pano_of(200.0, small_layout)
        dmap = rng.normal(scale=0.5, size=fused.data.shape)
        full = detail.recombine(fused, dmap, detail.SolverConfig(nu=0.0))
        mixed = detail.recombine(fused, dmap, detail.SolverConfig(nu=0.25))
        expected = 0.25 * fused.data + 0.75 * full.data
        assert np.abs(mixed.data - expected).max() <= 1e-12

    def test_shape_mismatch(self, small_layout):
        fused = self.pano_of(10.0, small_layout)
        with pytest.raises(InputError, match="shape"):
            detail.recombine(fused, np.zeros((2, 2, 3)), detail.SolverConfig())
