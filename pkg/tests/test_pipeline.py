import numpy as np
import pytest

from hdrstitch import cli, core, mef, pipeline, wha
from hdrstitch.core import InputError, quantize, save_image, to_float
from hdrstitch.detail import SolverConfig
from hdrstitch.pano import RENDITION_PAIRS, PanoImage


class TestEstimateAllImfs:
    def test_six_directions(self, small_scene):
        viewset, _ = small_scene
        imfs = pipeline.estimate_all_imfs(viewset)
        assert sorted(imfs) == sorted(RENDITION_PAIRS)
        for imf in imfs.values():
            assert imf.fully_defined
            assert (np.diff(imf.lam, axis=1) >= -1e-9).all()

    def test_brighter_direction_raises_intensity(self, small_scene):
        viewset, _ = small_scene
        imfs = pipeline.estimate_all_imfs(viewset)
        # Mapping toward a longer exposure never darkens a bin.
        mid = np.arange(30, 120)
        assert (imfs[(1, 2)].lam[:, mid] >= mid - 1.0).all()
        assert (imfs[(1, 3)].lam[:, mid] >= imfs[(1, 2)].lam[:, mid] - 1.0).all()


class TestStitch:
    def test_shapes_and_timings(self, small_scene):
        viewset, _ = small_scene
        result = pipeline.stitch(viewset)
        layout = viewset.layout
        assert result.final.shape == (layout.view_height, layout.pano_width, 3)
        assert result.final.dtype == np.uint8
        assert len(result.panos) == 3
        for stage in ("imf", "rendition", "pano", "fuse", "detail"):
            assert stage in result.timings

    def test_deterministic(self, small_scene):
        viewset, _ = small_scene
        a = pipeline.stitch(viewset)
        b = pipeline.stitch(viewset)
        assert np.array_equal(a.final, b.final)
        assert np.array_equal(a.detail, b.detail)

    def test_lambda_zero_skips_detail(self, small_scene):
        viewset, _ = small_scene
        cfg = pipeline.StitchConfig(solver=SolverConfig(lam=0.0))
        result = pipeline.stitch(viewset, cfg)
        assert (result.detail == 0).all()
        assert np.array_equal(result.final, quantize(result.fused.data))

    def test_nu_one_returns_fusion(self, small_scene):
        viewset, _ = small_scene
        cfg = pipeline.StitchConfig(solver=SolverConfig(nu=1.0))
        result = pipeline.stitch(viewset, cfg)
        assert not (result.detail == 0).all()
        assert np.array_equal(result.final, quantize(result.fused.data))

    def test_emit_contract(self, tmp_path, small_scene):
        viewset, _ = small_scene
        cfg = pipeline.StitchConfig(emit_dir=tmp_path / "dump")
        pipeline.stitch(viewset, cfg)
        names = {p.name for p in (tmp_path / "dump").iterdir()}
        expected = {f"z{i}_to_{j}.png" for i, j in RENDITION_PAIRS}
        expected |= {"pano_1.png", "pano_2.png", "pano_3.png",
                     "fused.png", "detail.png"}
        assert names == expected
        rendition = core.load_image(tmp_path / "dump" / "z1_to_2.png")
        assert rendition.shape == viewset.z1.shape
        pano_img = core.load_image(tmp_path / "dump" / "pano_2.png")
        assert pano_img.shape == (48, viewset.layout.pano_width, 3)

    def test_stage_errors_are_labelled(self, tmp_path, small_scene):
        viewset, _ = small_scene
        save_image(np.zeros((4, 4, 3), dtype=np.uint8), tmp_path / "z1_to_2.png")
        cfg = pipeline.StitchConfig(refined_dir=tmp_path)
        with pytest.raises(InputError, match="stage 'refined'"):
            pipeline.stitch(viewset, cfg)


class TestRefinedRenditions:
    def test_ground_truth_renditions_reproduce_ground_truth(
        self, tmp_path, small_scene
    ):
        # With perfect renditions every level panorama equals its ground
        # truth, so the final image must match a pipeline run directly on
        # the ground-truth panoramas.
        viewset, gt = small_scene
        layout = viewset.layout
        for (i, j), img in core.ground_truth_renditions(gt, layout).items():
            save_image(img, tmp_path / f"z{i}_to_{j}.png")
        result = pipeline.stitch(
            viewset, pipeline.StitchConfig(refined_dir=tmp_path)
        )
        for level in range(3):
            assert np.abs(
                result.panos[level].data - to_float(gt[level])
            ).max() <= 1e-9

        fused_gt = mef.fuse(
            [PanoImage(data=to_float(g), layout=layout) for g in gt]
        )
        diff = np.abs(result.fused.data - fused_gt.data)
        assert diff.mean() <= 2.0

    def test_degenerate_identical_content(self, small_layout):
        # All three views cut from one column-constant image: every
        # overlap band carries the full set of populated bins, so the
        # mappings are identity there, the level panoramas agree, and
        # the pipeline completes.
        h = small_layout.view_height
        column = np.linspace(5.0, 250.0, h)
        shared = np.stack(
            [column, column + 2.0, column + 4.0], axis=-1
        )
        shared = quantize(np.broadcast_to(
            shared[:, None, :], (h, small_layout.pano_width, 3)
        ))
        offsets = small_layout.view_offsets
        views = [
            shared[:, off : off + small_layout.view_width].copy()
            for off in offsets
        ]
        viewset = core.ViewSet(*views, layout=small_layout)
        result = pipeline.stitch(viewset)
        imf12 = result.imfs[(1, 2)]
        band = core.extract_overlap(viewset.z1, 1, "right", small_layout)
        for c in range(3):
            present = np.unique(band[..., c])
            assert np.allclose(
                imf12.lam[c, present], present.astype(np.float64), atol=1e-9
            )
        for level in (1, 2):
            assert np.abs(
                result.panos[level].data - result.panos[0].data
            ).max() <= 1e-9
        assert np.isfinite(result.fused.data).all()


class TestCli:
    def synth_args(self, directory, seed=3):
        return [
            "synth", "--seed", str(seed), "--out", str(directory),
            "--view-width", "64", "--view-height", "48",
            "--overlap12", "20", "--overlap23", "24",
        ]

    def test_synth_and_stitch(self, tmp_path, capsys):
        scene = tmp_path / "scene"
        assert cli.main(self.synth_args(scene)) == 0
        out = tmp_path / "pano.png"
        emit = tmp_path / "emit"
        code = cli.main([
            "stitch", "--input", str(scene), "--output", str(out),
            "--emit-intermediates", str(emit),
            "--dump-detail", str(tmp_path / "detail.png"),
        ])
        assert code == 0
        assert out.exists() and (emit / "fused.png").exists()
        assert (tmp_path / "detail.png").exists()
        pano_img = core.load_image(out)
        assert pano_img.shape == (48, 148, 3)

    def test_stitch_deterministic_output_bytes(self, tmp_path):
        scene = tmp_path / "scene"
        cli.main(self.synth_args(scene))
        out1, out2 = tmp_path / "a.png", tmp_path / "b.png"
        cli.main(["stitch", "--input", str(scene), "--output", str(out1)])
        cli.main(["stitch", "--input", str(scene), "--output", str(out2)])
        assert out1.read_bytes() == out2.read_bytes()

    def test_eval_identity(self, tmp_path, capsys):
        scene = tmp_path / "scene"
        cli.main(self.synth_args(scene))
        code = cli.main([
            "eval", "--pred", str(scene / "z1.png"),
            "--gt", str(scene / "z1.png"),
        ])
        assert code == 0
        captured = capsys.readouterr().out
        assert "psnr=inf" in captured
        assert "ssim=1.000000" in captured

    def test_eval_shape_mismatch_exits_2(self, tmp_path, capsys):
        scene = tmp_path / "scene"
        cli.main(self.synth_args(scene))
        code = cli.main([
            "eval", "--pred", str(scene / "z1.png"),
            "--gt", str(scene / "gt_pano_1.png"),
        ])
        assert code == 2

    def test_missing_scene_exits_2(self, tmp_path, capsys):
        code = cli.main([
            "stitch", "--input", str(tmp_path / "nope"),
            "--output", str(tmp_path / "x.png"),
        ])
        assert code == 2

    def test_fuse_requires_three_images(self, tmp_path, capsys):
        scene = tmp_path / "scene"
        cli.main(self.synth_args(scene))
        code = cli.main([
            "fuse", str(scene / "z1.png"), str(scene / "z2.png"),
            "--out", str(tmp_path / "f.png"),
        ])
        assert code == 2

    def test_fuse_runs(self, tmp_path):
        scene = tmp_path / "scene"
        cli.main(self.synth_args(scene))
        out = tmp_path / "fused.png"
        code = cli.main([
            "fuse", str(scene / "z1.png"), str(scene / "z2.png"),
            str(scene / "z3.png"), "--out", str(out),
        ])
        assert code == 0
        assert core.load_image(out).shape == (48, 64, 3)

    def test_imf_table_roundtrip(self, tmp_path):
        scene = tmp_path / "scene"
        cli.main(self.synth_args(scene))
        table = tmp_path / "mapping.imf"
        code = cli.main([
            "imf", "--ref", str(scene / "z1.png"),
            "--tgt", str(scene / "zT_1_to_2.png"), "--out", str(table),
        ])
        assert code == 0
        imf = wha.load_imf(table)
        assert imf.lam.shape == (3, 256)

    def test_refined_dir_flag(self, tmp_path):
        scene = tmp_path / "scene"
        cli.main(self.synth_args(scene))
        viewset = core.load_viewset(scene)
        refined = tmp_path / "refined"
        targets = core.load_ground_truth_renditions(scene, viewset.layout)
        for (i, j), img in targets.items():
            save_image(img, refined / f"z{i}_to_{j}.png")
        out = tmp_path / "refined_pano.png"
        code = cli.main([
            "stitch", "--input", str(scene), "--output", str(out),
            "--refined-dir", str(refined),
        ])
        assert code == 0 and out.exists()

    def test_console_entry_point_registered(self):
        from importlib.metadata import entry_points

        scripts = entry_points(group="console_scripts")
        assert any(ep.name == "hdrstitch" for ep in scripts)
