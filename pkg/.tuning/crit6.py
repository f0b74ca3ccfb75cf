import sys, time, numpy as np
from textdet.net import NetConfig
from textdet.training import train
from textdet.decode import DecodeConfig, decode
from textdet.nms import MergeConfig, locality_aware_nms
from textdet.metrics import evaluate
from textdet.synth import SceneConfig, generate_scene
from textdet.losses import LossConfig

head = sys.argv[1]
steps_list = [1000, 2000, 3000, 4000, 5000]
cfg = SceneConfig(image_size=128, seed=42)
train_ds = [generate_scene(cfg, i) for i in range(256)]
test_ds = [generate_scene(cfg, 256 + i) for i in range(32)]

def pooled_f(net):
    dc, mc = DecodeConfig(), MergeConfig()
    tp = fp = fn = 0
    for img, gts in test_ds:
        s, g = net.forward(img[None].astype(np.float32))
        dets, _ = locality_aware_nms(decode(net.dense_outputs(s, g), dc), mc)
        r = evaluate(dets, list(gts), 0.5)
        tp += len(r.matches); fp += len(dets) - len(r.matches); fn += len(gts) - len(r.matches)
    p = tp / max(1, tp + fp); r = tp / max(1, tp + fn)
    return 2*p*r/(p+r) if p+r else 0.0, p, r

t0 = time.time()
prev = 0
net = None
for s in steps_list:
    # retrain from scratch each time for true determinism check? too slow; train incrementally is not same as fresh.
    pass
# single fresh run at 5000 with eval checkpoints: train in chunks is NOT identical to one run
# because sampling rng continues — chunked training with the same rng *is* identical to one run
# if we keep net/adam/rng. train() doesn't expose that, so do it manually:
from textdet.training import build_targets, compute_batch_loss, adam_step, AdamState
from textdet.labelgen import LabelConfig
from textdet.net import TinyTextNet
label_cfg = LabelConfig(image_height=128, image_width=128)
net_cfg = NetConfig(head=head, input_size=128)
net = TinyTextNet(net_cfg, seed=42)
targets = [build_targets(q, label_cfg, head) for _, q in train_ds]
images = [img for img, _ in train_ds]
rng = np.random.default_rng(42)
adam = AdamState()
lc = LossConfig()
for step in range(1, 5001):
    idx = rng.integers(0, len(train_ds), size=8)
    x = np.stack([images[i] for i in idx]).astype(np.float32)
    score, geo = net.forward(x)
    total, sl, gl, ds_, dg_ = compute_batch_loss(net, score, geo, [targets[i] for i in idx], lc)
    grads = net.backward(ds_, dg_)
    adam_step(net.params, grads, adam)
    if step % 250 == 0:
        print(f"step {step} loss {total:.4f} s {sl:.4f} g {gl:.4f} t {time.time()-t0:.0f}s", flush=True)
    if step in steps_list:
        f, p, r = pooled_f(net)
        print(f"== step {step}: F={f:.4f} P={p:.4f} R={r:.4f} elapsed {time.time()-t0:.0f}s", flush=True)
