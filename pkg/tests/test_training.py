"""Optimizer behavior, training determinism and checkpoint round-trips."""

import numpy as np
import pytest

from textdet.errors import EmptyDataset, FileFormatError
from textdet.net import NetConfig, TinyTextNet
from textdet.synth import SceneConfig, generate_scene
from textdet.training import (
    AdamState,
    adam_step,
    load_checkpoint,
    save_checkpoint,
    train,
)

MICRO = NetConfig(stem_channels=(2, 2, 2, 2), merge_channels=(2, 2, 2),
                  head="rbox", input_size=32)


def tiny_dataset(n=4, seed=9):
    cfg = SceneConfig(image_size=32, min_boxes=1, max_boxes=1, min_size=12.0,
                      max_size=20.0, min_aspect=1.2, max_aspect=2.0, seed=seed)
    return [generate_scene(cfg, i) for i in range(n)]


class TestAdam:
    def test_quadratic_convergence(self):
        # minimize 0.5*||x||^2; gradient is x
        params = {"x": np.array([5.0, -3.0])}
        state = AdamState(lr=0.1)
        for _ in range(500):
            adam_step(params, {"x": params["x"].copy()}, state)
        assert np.all(np.abs(params["x"]) < 1e-3)

    def test_lr_decays_stepwise(self):
        state = AdamState(lr=1e-3)
        state.t = 999
        assert state.current_lr() == pytest.approx(1e-3)
        state.t = 1000
        assert state.current_lr() == pytest.approx(1e-4)
        state.t = 2000
        assert state.current_lr() == pytest.approx(1e-5)
        state.t = 9000
        assert state.current_lr() == pytest.approx(1e-5)  # floored

    def test_updates_in_place(self):
        params = {"x": np.ones(2, dtype=np.float32)}
        ref = params["x"]
        adam_step(params, {"x": np.ones(2)}, AdamState())
        assert params["x"] is ref


class TestTrain:
    def test_loss_decreases(self):
        net, logs = train(tiny_dataset(), net_cfg=MICRO, steps=60, batch_size=2, seed=0)
        first = np.mean([l.total for l in logs[:10]])
        last = np.mean([l.total for l in logs[-10:]])
        assert last < first

    def test_deterministic(self):
        a, _ = train(tiny_dataset(), net_cfg=MICRO, steps=20, batch_size=2, seed=3)
        b, _ = train(tiny_dataset(), net_cfg=MICRO, steps=20, batch_size=2, seed=3)
        for name in a.params:
            assert np.array_equal(a.params[name], b.params[name])

    def test_empty_dataset_rejected(self):
        with pytest.raises(EmptyDataset):
            train([], net_cfg=MICRO, steps=1)

    def test_quad_head_trains(self):
        cfg = NetConfig(stem_channels=(2, 2, 2, 2), merge_channels=(2, 2, 2),
                        head="quad", input_size=32)
        net, logs = train(tiny_dataset(), net_cfg=cfg, steps=10, batch_size=2, seed=0)
        assert np.isfinite(logs[-1].total)


class TestCheckpoint:
    def test_round_trip_exact(self, tmp_path):
        net = TinyTextNet(MICRO, seed=8)
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, net)
        loaded = load_checkpoint(path)
        assert loaded.cfg == net.cfg
        for name in net.params:
            assert np.array_equal(loaded.params[name], net.params[name])

    def test_forward_identical_after_reload(self, tmp_path, rng):
        net = TinyTextNet(MICRO, seed=8)
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, net)
        loaded = load_checkpoint(path)
        x = rng.random((1, 1, 32, 32)).astype(np.float32)
        s1, g1 = net.forward(x)
        s2, g2 = loaded.forward(x)
        assert np.array_equal(s1, s2) and np.array_equal(g1, g2)

    def test_deterministic_bytes(self, tmp_path):
        net = TinyTextNet(MICRO, seed=8)
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(p1, net)
        save_checkpoint(p2, net)
        assert p1.read_bytes() == p2.read_bytes()

    def test_corrupt_file_rejected(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"garbage data that is not a checkpoint")
        with pytest.raises(FileFormatError):
            load_checkpoint(path)
