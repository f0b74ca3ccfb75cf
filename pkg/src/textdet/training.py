"""ADAM training of the dense detector on labeled scenes, plus model
checkpoint serialization (EASTTNSR container with a named-tensor manifest).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .decode import QUAD, RBOX
from .errors import EmptyDataset, FileFormatError, ShapeMismatch
from .labelgen import (
    LabelConfig,
    QuadTargetMaps,
    RBoxTargetMaps,
    generate_quad_maps,
    generate_rbox_maps,
    generate_score_map,
)
from .losses import (
    LossConfig,
    balanced_xent,
    quad_geometry_loss,
    rbox_geometry_loss,
    total_loss,
)
from .net import NetConfig, TinyTextNet

CHECKPOINT_MAGIC = b"EASTTNSR"
CHECKPOINT_VERSION = 1


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    decay_every: int = 1000
    decay_factor: float = 0.1
    lr_floor: float = 1e-5
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def current_lr(self) -> float:
        lr = self.lr * self.decay_factor ** (self.t // self.decay_every)
        return max(self.lr_floor, lr)


def adam_step(params: dict, grads: dict, state: AdamState) -> None:
    """In-place ADAM update with bias correction and the decay schedule."""
    state.t += 1
    lr = state.current_lr()
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeMismatch(f"gradient shape mismatch for {name}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p, dtype=np.float32)
            state.v[name] = np.zeros_like(p, dtype=np.float32)
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= (lr * (m / c1) / (np.sqrt(v / c2) + state.eps)).astype(np.float32)


@dataclass
class StepLog:
    step: int
    total: float
    score: float
    geometry: float


def _stack_maps(arrays):
    """(B, C, h, w) channel maps -> (C, B*h, w) so the per-map loss code
    can treat the whole batch as one map."""
    a = np.stack(arrays)
    b, c, h, w = a.shape
    return a.transpose(1, 0, 2, 3).reshape(c, b * h, w)


def _unstack_grad(grad, batch, h, w):
    c = grad.shape[0]
    return grad.reshape(c, batch, h, w).transpose(1, 0, 2, 3)


def build_targets(quads, label_cfg: LabelConfig, head: str):
    """Dense training targets for one image."""
    score = generate_score_map(quads, label_cfg)
    if head == RBOX:
        geo = generate_rbox_maps(quads, label_cfg)
    else:
        geo = generate_quad_maps(quads, label_cfg)
    return score, geo


def compute_batch_loss(net: TinyTextNet, score_pred, geo_pred, targets, loss_cfg: LossConfig):
    """Loss and output-map gradients for a batch of (score, geometry)
    targets produced by build_targets."""
    b = score_pred.shape[0]
    h, w = score_pred.shape[2:]
    gt_score = np.stack([t[0] for t in targets])
    xent = balanced_xent(
        np.asarray(score_pred[:, 0], dtype=np.float64), gt_score, loss_cfg.clamp_eps
    )
    dscore = xent.grad[:, None, :, :]

    geo64 = np.asarray(geo_pred, dtype=np.float64)
    if net.cfg.head == RBOX:
        target = RBoxTargetMaps(
            d=_stack_maps([t[1].d for t in targets]),
            theta=_stack_maps([t[1].theta[None] for t in targets])[0],
            valid_mask=_stack_maps([t[1].valid_mask[None] for t in targets])[0] > 0.5,
        )
        pred = RBoxTargetMaps(
            d=_stack_maps(list(geo64[:, :4])),
            theta=_stack_maps([geo64[i, 4][None] for i in range(b)])[0],
            valid_mask=target.valid_mask,
        )
        geom, (gd, gt) = rbox_geometry_loss(pred, target, loss_cfg)
        dgeo = np.concatenate(
            [_unstack_grad(gd, b, h, w), _unstack_grad(gt[None], b, h, w)], axis=1
        )
    else:
        target = QuadTargetMaps(
            offsets=_stack_maps([t[1].offsets for t in targets]),
            shortest_edge=_stack_maps([t[1].shortest_edge[None] for t in targets])[0],
            valid_mask=_stack_maps([t[1].valid_mask[None] for t in targets])[0] > 0.5,
        )
        geom, g = quad_geometry_loss(_stack_maps(list(geo64)), target)
        dgeo = _unstack_grad(g, b, h, w)
    total = total_loss(xent.loss, geom, loss_cfg)
    return total, xent.loss, geom, dscore, loss_cfg.lambda_g * dgeo


def train(
    dataset,
    net_cfg: NetConfig = NetConfig(),
    loss_cfg: LossConfig = LossConfig(),
    adam: AdamState | None = None,
    steps: int = 1000,
    batch_size: int = 8,
    seed: int = 42,
    label_cfg: LabelConfig | None = None,
    log_every: int = 1,
):
    """Train a fresh model on (image, gt quads) pairs.

    Deterministic given the seed: initialization, batch sampling and all
    arithmetic are seeded and single-threaded.  Returns (net, step logs).
    """
    if not dataset:
        raise EmptyDataset("training requires at least one sample")
    if adam is None:
        # by default, schedule the first lr decay at 4/5 of the run rather
        # than a fixed step count, so short and long runs both spend most
        # of their budget at the initial rate; pass an explicit AdamState
        # to override
        adam = AdamState(decay_every=max(1, steps * 4 // 5))
    if label_cfg is None:
        h, w = dataset[0][0].shape[1:]
        label_cfg = LabelConfig(image_height=h, image_width=w)
    net = TinyTextNet(net_cfg, seed=seed)
    targets = [build_targets(quads, label_cfg, net_cfg.head) for _, quads in dataset]
    images = [img for img, _ in dataset]
    rng = np.random.default_rng(seed)
    logs: list[StepLog] = []
    for step in range(1, steps + 1):
        idx = rng.integers(0, len(dataset), size=batch_size)
        x = np.stack([images[i] for i in idx]).astype(np.float32)
        score, geo = net.forward(x)
        total, s_loss, g_loss, dscore, dgeo = compute_batch_loss(
            net, score, geo, [targets[i] for i in idx], loss_cfg
        )
        grads = net.backward(dscore, dgeo)
        adam_step(net.params, grads, adam)
        if step % log_every == 0 or step == steps:
            logs.append(StepLog(step, total, s_loss, g_loss))
    return net, logs


# ------------------------------------------------------------ checkpoints


def save_checkpoint(path, net: TinyTextNet) -> None:
    """Single-file container: magic, version, JSON manifest (config plus
    per-tensor name/shape/offset), then concatenated float32 payload."""
    entries = []
    payload = bytearray()
    for name in sorted(net.params):
        a = np.ascontiguousarray(net.params[name], dtype="<f4")
        entries.append({"name": name, "shape": list(a.shape), "offset": len(payload)})
        payload += a.tobytes()
    manifest = json.dumps(
        {
            "config": {
                "stem_channels": list(net.cfg.stem_channels),
                "merge_channels": list(net.cfg.merge_channels),
                "head": net.cfg.head,
                "d_max": net.cfg.d_max,
                "input_size": net.cfg.input_size,
            },
            "tensors": entries,
        },
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(manifest)))
        fh.write(manifest)
        fh.write(bytes(payload))


def load_checkpoint(path) -> TinyTextNet:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != CHECKPOINT_MAGIC:
        raise FileFormatError("bad checkpoint magic")
    version, mlen = struct.unpack_from("<II", raw, 8)
    if version != CHECKPOINT_VERSION:
        raise FileFormatError(f"unsupported checkpoint version {version}")
    manifest = json.loads(raw[16:16 + mlen].decode("utf-8"))
    payload = raw[16 + mlen:]
    c = manifest["config"]
    cfg = NetConfig(
        stem_channels=tuple(c["stem_channels"]),
        merge_channels=tuple(c["merge_channels"]),
        head=c["head"],
        d_max=c["d_max"],
        input_size=c["input_size"],
    )
    net = TinyTextNet(cfg, seed=0)
    for e in manifest["tensors"]:
        n = int(np.prod(e["shape"])) if e["shape"] else 1
        start = e["offset"]
        if start + 4 * n > len(payload):
            raise FileFormatError("truncated checkpoint payload")
        net.params[e["name"]] = (
            np.frombuffer(payload, dtype="<f4", count=n, offset=start)
            .reshape(e["shape"])
            .copy()
        )
    return net
