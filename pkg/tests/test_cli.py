"""Command-line interface: every stage as a subprocess-level unit, via
click's test runner.  Exit codes: 0 ok, 2 parse, 3 data invariant."""

import numpy as np
import pytest
from click.testing import CliRunner

from textdet import fileio
from textdet.cli import main
from textdet.geometry import Detection


@pytest.fixture
def runner():
    return CliRunner()


GT_SQUARE = "20.000,20.000,60.000,20.000,60.000,60.000,20.000,60.000"


def write_gt(path):
    path.write_text(GT_SQUARE + "\n")


class TestLabelgen:
    def test_writes_tensors(self, runner, tmp_path):
        gt = tmp_path / "gt.txt"
        write_gt(gt)
        out = tmp_path / "labels"
        r = runner.invoke(main, ["labelgen", "--gt", str(gt), "--size", "80x80",
                                 "--out", str(out)])
        assert r.exit_code == 0, r.output
        score = fileio.read_tensor(out / "score.tnsr")
        geometry = fileio.read_tensor(out / "geometry.tnsr")
        mask = fileio.read_tensor(out / "mask.tnsr")
        assert score.shape == (20, 20)
        assert geometry.shape == (5, 20, 20)
        assert np.array_equal(mask > 0, score > 0)

    def test_quad_head_channels(self, runner, tmp_path):
        gt = tmp_path / "gt.txt"
        write_gt(gt)
        out = tmp_path / "labels"
        r = runner.invoke(main, ["labelgen", "--gt", str(gt), "--size", "80x80",
                                 "--head", "quad", "--out", str(out)])
        assert r.exit_code == 0
        assert fileio.read_tensor(out / "geometry.tnsr").shape == (8, 20, 20)

    def test_parse_error_exit_2(self, runner, tmp_path):
        gt = tmp_path / "gt.txt"
        gt.write_text("1,2,3\n")
        r = runner.invoke(main, ["labelgen", "--gt", str(gt), "--size", "80x80",
                                 "--out", str(tmp_path / "x")])
        assert r.exit_code == 2

    def test_data_error_exit_3(self, runner, tmp_path):
        gt = tmp_path / "gt.txt"
        write_gt(gt)  # vertices up to 60 do not fit a 32x32 image
        r = runner.invoke(main, ["labelgen", "--gt", str(gt), "--size", "32x32",
                                 "--out", str(tmp_path / "x")])
        assert r.exit_code == 3


class TestDecodeNms:
    def test_labelgen_decode_nms_pipeline(self, runner, tmp_path):
        gt = tmp_path / "gt.txt"
        write_gt(gt)
        labels = tmp_path / "labels"
        runner.invoke(main, ["labelgen", "--gt", str(gt), "--size", "80x80",
                             "--out", str(labels)])
        cands = tmp_path / "cands.txt"
        r = runner.invoke(main, ["decode", "--score", str(labels / "score.tnsr"),
                                 "--geometry", str(labels / "geometry.tnsr"),
                                 "--threshold", "0.5", "--out", str(cands)])
        assert r.exit_code == 0, r.output
        final = tmp_path / "final.txt"
        r = runner.invoke(main, ["nms", "--in", str(cands), "--out", str(final)])
        assert r.exit_code == 0
        recs = fileio.read_quad_file(final)
        assert len(recs) == 1
        quad, _ = recs[0]
        gt_quad = np.array([float(v) for v in GT_SQUARE.split(",")]).reshape(4, 2)
        from textdet.geometry import quad_iou

        assert quad_iou(quad, gt_quad) > 0.95

    def test_nms_requires_scores(self, runner, tmp_path):
        path = tmp_path / "noscores.txt"
        path.write_text(GT_SQUARE + "\n")
        r = runner.invoke(main, ["nms", "--in", str(path),
                                 "--out", str(tmp_path / "o.txt")])
        assert r.exit_code == 2


class TestSynthEvalRender:
    def test_synth_writes_scene_files(self, runner, tmp_path):
        out = tmp_path / "scenes"
        r = runner.invoke(main, ["synth", "--count", "3", "--seed", "1",
                                 "--out", str(out)])
        assert r.exit_code == 0
        assert sorted(p.name for p in out.glob("*.pgm")) == [
            "scene_0000.pgm", "scene_0001.pgm", "scene_0002.pgm"]
        assert len(list(out.glob("*.txt"))) == 3

    def test_eval_perfect_detections(self, runner, tmp_path):
        gt = tmp_path / "gt.txt"
        write_gt(gt)
        dets = tmp_path / "dets.txt"
        quad = np.array([float(v) for v in GT_SQUARE.split(",")]).reshape(4, 2)
        fileio.write_quad_file(dets, [Detection(quad, 1.0)])
        r = runner.invoke(main, ["eval", "--dets", str(dets), "--gts", str(gt)])
        assert r.exit_code == 0
        assert "F=1.0000" in r.output

    def test_eval_directory_pairing_error(self, runner, tmp_path):
        d = tmp_path / "dets"
        g = tmp_path / "gts"
        d.mkdir()
        g.mkdir()
        (g / "a.txt").write_text(GT_SQUARE + "\n")
        r = runner.invoke(main, ["eval", "--dets", str(d), "--gts", str(g)])
        assert r.exit_code == 2

    def test_render_writes_ppm(self, runner, tmp_path):
        img = tmp_path / "img.pgm"
        fileio.write_pgm(img, np.full((80, 80), 0.5))
        gt = tmp_path / "gt.txt"
        write_gt(gt)
        out = tmp_path / "vis.ppm"
        r = runner.invoke(main, ["render", "--image", str(img), "--quads", str(gt),
                                 "--out", str(out)])
        assert r.exit_code == 0
        assert out.read_bytes().startswith(b"P6")


class TestTrainCli:
    def test_train_writes_checkpoint_and_log(self, runner, tmp_path):
        ckpt = tmp_path / "model.ckpt"
        log = tmp_path / "loss.csv"
        r = runner.invoke(main, ["train", "--steps", "3", "--images", "4",
                                 "--image-size", "64", "--out", str(ckpt),
                                 "--log", str(log)])
        assert r.exit_code == 0, r.output
        from textdet.training import load_checkpoint

        net = load_checkpoint(ckpt)
        assert net.cfg.input_size == 64
        lines = log.read_text().strip().splitlines()
        assert lines[0] == "step,total,score,geometry"
        assert len(lines) == 4


class TestHelp:
    def test_every_command_documents_flags(self, runner):
        commands = ["labelgen", "decode", "nms", "bench-nms", "train", "synth",
                    "eval", "check-grads", "render"]
        for cmd in commands:
            r = runner.invoke(main, [cmd, "--help"])
            assert r.exit_code == 0
            assert "--help" in r.output
