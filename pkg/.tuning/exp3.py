import sys, time, numpy as np
from textdet.net import NetConfig
from textdet.training import train
from textdet.decode import DecodeConfig, decode
from textdet.nms import MergeConfig, locality_aware_nms
from textdet.metrics import evaluate
from textdet.synth import SceneConfig, generate_scene

head = sys.argv[1]
steps = int(sys.argv[2])
cfg = SceneConfig(image_size=128, seed=42)
train_ds = [generate_scene(cfg, i) for i in range(256)]
test_ds = [generate_scene(cfg, 256 + i) for i in range(32)]
t0 = time.time()
net, logs = train(train_ds, net_cfg=NetConfig(head=head, input_size=128),
                  steps=steps, batch_size=8, seed=42, log_every=250)
train_s = time.time() - t0
for l in logs:
    print(f"step {l.step} loss {l.total:.4f} s {l.score:.4f} g {l.geometry:.4f}", flush=True)
dc, mc = DecodeConfig(), MergeConfig()
tp = fp = fn = 0
for img, gts in test_ds:
    s, g = net.forward(img[None].astype(np.float32))
    dets = decode(net.dense_outputs(s, g), dc)
    kept, _ = locality_aware_nms(dets, mc)
    r = evaluate(kept, list(gts), 0.5)
    tp += len(r.matches); fp += len(kept) - len(r.matches); fn += len(gts) - len(r.matches)
p = tp / max(1, tp + fp); rcl = tp / max(1, tp + fn)
f = 2 * p * rcl / (p + rcl) if p + rcl else 0.0
print(f"head={head} steps={steps}: F={f:.4f} P={p:.4f} R={rcl:.4f} train_s={train_s:.0f}")
